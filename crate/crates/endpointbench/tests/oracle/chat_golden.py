#!/usr/bin/env python3
"""Recomputes the chat-preset full-scope ranking of a snapshot from its CSV
tables alone and writes it as the golden file.

Usage: chat_golden.py REGISTRY_DIR SNAPSHOT_DIR OUT_CSV
"""

import csv
import sys

ID = ["provider", "model", "sku", "precision", "decoding", "region"]
SUITES = ["gsm8k", "humaneval-plus", "ifbench", "math-100", "aime-2025"]
CONDITION = ("10000", "1", "us-east")


def rows(path):
    with open(path, newline="") as f:
        return list(csv.DictReader(f))


def key(r):
    return tuple(r[c] for c in ID)


def minmax(values, lower_better):
    lo, hi = min(values), max(values)
    if not hi - lo > 0:
        return [1.0] * len(values)
    out = []
    for v in values:
        x = min(max((v - lo) / (hi - lo), 0.0), 1.0)
        out.append(1.0 - x if lower_better else x)
    return out


def main(registry, snapshot, out):
    preset = next(p for p in rows(f"{registry}/presets.csv") if p["name"] == "chat")
    ri = float(preset["input_ratio"]) / (float(preset["input_ratio"]) + float(preset["output_ratio"]))
    weights = [float(preset[f"w_{f}"]) for f in ("speed", "ttft", "price", "quality", "reliability")]

    summaries = {}
    for s in rows(f"{snapshot}/latency_summaries.csv"):
        if (s["input_length"], s["concurrency"], s["condition_region"]) != CONDITION:
            continue
        k = key(s)
        if k not in summaries or int(s["window_end"]) >= int(summaries[k]["window_end"]):
            summaries[k] = s

    runs = {}
    for r in rows(f"{snapshot}/eval_runs.csv"):
        k = (key(r), r["suite"])
        if k not in runs or int(r["window_end"]) >= int(runs[k]["window_end"]):
            runs[k] = r

    ids, raw = [], []
    for e in rows(f"{registry}/endpoints.csv"):
        k = key(e)
        s = summaries[k]
        p50, p99 = float(s["ttft_p50"]), float(s["ttft_p99"])
        spread = min(max((p99 / p50 - 1.0) / 9.0, 0.0), 1.0)
        quality = 100.0 * sum(0.2 * float(runs[(k, suite)]["accuracy"]) for suite in SUITES)
        price = ri * float(e["price_input"]) + (1.0 - ri) * float(e["price_output"])
        ids.append(k)
        raw.append([
            float(s["output_speed"]),
            p50,
            price,
            quality,
            float(s["completion_rate"]) * (1.0 - spread),
        ])

    lower = [False, True, True, False, False]
    cols = [minmax([r[i] for r in raw], lower[i]) for i in range(5)]
    scores = [sum(weights[i] * cols[i][j] for i in range(5)) for j in range(len(ids))]
    order = sorted(range(len(ids)), key=lambda j: (-scores[j], ids[j]))

    with open(out, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["rank", *ID, "score"])
        for rank, j in enumerate(order, 1):
            w.writerow([rank, *ids[j], repr(scores[j])])


if __name__ == "__main__":
    main(*sys.argv[1:4])
