mod common;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use endpointbench::api::{router, AppState, Loaded};
use endpointbench::canon::CsvFile;
use endpointbench::fixture;
use endpointbench_core::EndpointId;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

fn loaded() -> Loaded {
    Loaded::open(&common::registry_dir(), &common::snapshot_dir()).unwrap()
}

fn app() -> Router {
    router(AppState::new(Some(loaded())))
}

async fn send(app: Router, req: Request<Body>) -> (StatusCode, Value) {
    let res = app.oneshot(req).await.unwrap();
    let status = res.status();
    let bytes = res.into_body().collect().await.unwrap().to_bytes();
    (status, serde_json::from_slice(&bytes).unwrap())
}

async fn get(app: Router, uri: &str) -> (StatusCode, Value) {
    send(app, Request::get(uri).body(Body::empty()).unwrap()).await
}

async fn post(app: Router, uri: &str, body: Value) -> (StatusCode, Value) {
    let req = Request::post(uri)
        .header("content-type", "application/json")
        .body(Body::from(body.to_string()))
        .unwrap();
    send(app, req).await
}

fn ids(rows: &Value) -> Vec<EndpointId> {
    rows.as_array()
        .unwrap()
        .iter()
        .map(|r| serde_json::from_value(r["endpoint"].clone()).unwrap())
        .collect()
}

#[tokio::test]
async fn leaderboard_matches_golden() {
    let (status, body) = get(app(), "/v1/leaderboard").await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["preset"]["name"], "chat");
    assert_eq!(body["version"], fixture::VERSION);

    let golden = CsvFile::read(&fixture::committed().root.join("golden/chat_full.csv")).unwrap();
    let rows = body["rows"].as_array().unwrap();
    assert_eq!(rows.len(), golden.len());
    for (row, g) in rows.iter().zip(golden.rows()) {
        let id: EndpointId = serde_json::from_value(row["endpoint"].clone()).unwrap();
        let gid = [
            g.str("provider").unwrap(),
            g.str("model").unwrap(),
            g.str("sku").unwrap(),
            g.str("precision").unwrap(),
            g.str("decoding").unwrap(),
            g.str("region").unwrap(),
        ]
        .join("/");
        assert_eq!(id.to_string(), gid);
        assert_eq!(row["rank"].as_u64().unwrap(), g.parse::<u64>("rank").unwrap());
        let score = row["score"].as_f64().unwrap();
        assert!((score - g.f64("score").unwrap()).abs() < 1e-9, "{gid}");
    }
}

#[tokio::test]
async fn leaderboard_errors() {
    let (status, body) = get(app(), "/v1/leaderboard?preset=nonsense").await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(body["error"], "not_found");

    let (status, _) = get(app(), "/v1/leaderboard?scope=cohort:nope").await;
    assert_eq!(status, StatusCode::NOT_FOUND);

    let empty = router(AppState::new(None));
    let (status, body) = get(empty.clone(), "/v1/leaderboard").await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_eq!(body["error"], "no_snapshot");
    let (status, body) = get(empty, "/v1/health").await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["endpoints"], 0);
    assert!(body["version"].is_null());

    let (status, _) = get(app(), "/v2/nothing").await;
    assert_eq!(status, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn cohort_scope_ranks_one_model() {
    let (status, body) = get(app(), "/v1/leaderboard?preset=batch&scope=cohort:gpt-oss-120b").await;
    assert_eq!(status, StatusCode::OK);
    let ids = ids(&body["rows"]);
    assert_eq!(ids.len(), fixture::planted::BF16_COUNT + fixture::planted::FP8_COUNT);
    assert!(ids.iter().all(|id| id.model == fixture::HEADLINE_MODEL));
    let scores: Vec<f64> = body["rows"].as_array().unwrap().iter().map(|r| r["score"].as_f64().unwrap()).collect();
    assert!(scores.windows(2).all(|w| w[0] >= w[1]));
}

#[tokio::test]
async fn presets_lists_ten() {
    let (status, body) = get(app(), "/v1/presets").await;
    assert_eq!(status, StatusCode::OK);
    let presets = body.as_array().unwrap();
    assert_eq!(presets.len(), 10);
    for p in presets {
        let w = &p["weights"];
        let sum: f64 = ["speed", "ttft", "price", "quality", "reliability"].iter().map(|k| w[*k].as_f64().unwrap()).sum();
        assert!((sum - 1.0).abs() < 1e-9, "{}", p["name"]);
    }
    let chat = presets.iter().find(|p| p["name"] == "chat").unwrap();
    assert_eq!(chat["weights"], json!({"speed": 0.2, "ttft": 0.3, "price": 0.2, "quality": 0.2, "reliability": 0.1}));
}

#[tokio::test]
async fn custom_chat_equals_builtin() {
    let (_, builtin) = get(app(), "/v1/leaderboard?preset=chat").await;
    let p = &builtin["preset"];
    let (status, custom) = post(
        app(),
        "/v1/score/custom",
        json!({"weights": p["weights"], "input_ratio": p["input_ratio"], "output_ratio": p["output_ratio"]}),
    )
    .await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(custom["preset"]["name"], "custom");
    assert_eq!(custom["rows"], builtin["rows"]);

    let (status, listed) = post(
        app(),
        "/v1/score/custom",
        json!({"weights": [0.2, 0.3, 0.2, 0.2, 0.1], "input_ratio": p["input_ratio"], "output_ratio": p["output_ratio"], "name": "mine"}),
    )
    .await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(listed["preset"]["name"], "mine");
    assert_eq!(listed["rows"], builtin["rows"]);
}

#[tokio::test]
async fn input_heavy_mix_reorders_price_ranking() {
    let w = json!([0.0, 0.0, 1.0, 0.0, 0.0]);
    let (_, output_heavy) = post(app(), "/v1/score/custom", json!({"weights": w, "input_ratio": 1, "output_ratio": 20})).await;
    let (_, input_heavy) = post(app(), "/v1/score/custom", json!({"weights": w, "input_ratio": 20, "output_ratio": 1})).await;
    let a = ids(&output_heavy["rows"]);
    let b = ids(&input_heavy["rows"]);
    assert_ne!(a[..10], b[..10]);
}

#[tokio::test]
async fn custom_rejects_bad_input() {
    let cases = [
        json!({"weights": [0.2, 0.2, 0.2, 0.2, 0.1], "input_ratio": 1, "output_ratio": 1}),
        json!({"weights": [1.2, -0.2, 0.0, 0.0, 0.0], "input_ratio": 1, "output_ratio": 1}),
        json!({"weights": [0.2, 0.3, 0.2, 0.2, 0.1], "input_ratio": 0, "output_ratio": 1}),
        json!({"weights": [0.2, 0.3, 0.2, 0.2], "input_ratio": 1, "output_ratio": 1}),
        json!({"weights": [0.2, 0.3, 0.2, 0.2, 0.1]}),
    ];
    for body in cases {
        let (status, err) = post(app(), "/v1/score/custom", body.clone()).await;
        assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY, "{body}");
        assert!(err["message"].as_str().is_some_and(|m| !m.is_empty()));
    }
}

#[tokio::test]
async fn endpoint_detail_energy_identities() {
    let f = common::shared();
    for e in f.bundle.registry.endpoints().iter().step_by(7) {
        let encoded = e.id.to_string().replace('/', "%2F");
        for uri in [format!("/v1/endpoints/{}", e.id), format!("/v1/endpoints/{encoded}")] {
            let (status, body) = get(app(), &uri).await;
            assert_eq!(status, StatusCode::OK, "{uri}");
            let id: EndpointId = serde_json::from_value(body["endpoint"].clone()).unwrap();
            assert_eq!(id, e.id);

            let energy = &body["energy"];
            let j = energy["j_per_token"].as_f64().unwrap();
            let kwh = energy["kwh_per_mtok"].as_f64().unwrap();
            let grid = energy["grid_intensity"].as_f64().unwrap();
            let co2 = energy["gco2_per_mtok"].as_f64().unwrap();
            assert!((kwh - j / 3.6).abs() <= 1e-8 * kwh);
            assert!((co2 - kwh * grid).abs() <= 1e-8 * co2.max(1e-12));

            let h = &body["headline"];
            let acc = h["accuracy"].as_f64().unwrap();
            let t = h["tokens_to_solution"].as_f64().unwrap();
            if acc > 0.0 {
                let j_ca = h["j_ca"].as_f64().unwrap();
                assert!((j_ca - h["j_per_token"].as_f64().unwrap() * t / acc).abs() <= 1e-6 * j_ca);
            } else {
                assert!(h["j_ca"].is_null());
            }
        }
    }
    let (status, _) = get(app(), "/v1/endpoints/cerebras/gpt-oss-120b").await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    let (status, _) = get(app(), "/v1/endpoints/nobody/gpt-oss-120b/standard/BF16/standard/us-east").await;
    assert_eq!(status, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn within_model_headline() {
    let (status, body) = get(app(), &format!("/v1/models/{}/within-model", fixture::HEADLINE_MODEL)).await;
    assert_eq!(status, StatusCode::OK);
    let rows = body["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 12);
    let speed = rows.iter().find(|r| r["key"] == "speed").unwrap();
    assert_eq!(speed["gap_display"], "12.0×");
    let gap = speed["gap"].as_f64().unwrap();
    assert!((gap / fixture::planted::SPEED_RATIO - 1.0).abs() < 0.01);
    let endpoints = body["endpoints"].as_array().unwrap();
    assert_eq!(endpoints.len(), body["n_endpoints"].as_u64().unwrap() as usize);
    assert!(endpoints.iter().all(|e| e["values"].as_object().unwrap().len() == 12));

    let (status, _) = get(app(), "/v1/models/unknown-model/within-model").await;
    assert_eq!(status, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn fidelity_groups_by_precision() {
    let (status, body) = get(app(), "/v1/fidelity").await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["model"], fixture::HEADLINE_MODEL);
    assert_eq!(body["second_tier"], true);
    let groups = body["groups"].as_array().unwrap();
    let find = |p: &str| groups.iter().find(|g| g["precision"] == p).unwrap();
    let bf16 = find("BF16");
    let fp8 = find("FP8");
    assert_eq!(bf16["n"], fixture::planted::BF16_COUNT);
    assert_eq!(fp8["n"], fixture::planted::FP8_COUNT);
    assert!((bf16["mean_f"].as_f64().unwrap() - fixture::planted::BF16_MEAN_F).abs() < 0.05);
    assert!((fp8["mean_f"].as_f64().unwrap() - fixture::planted::FP8_MEAN_F).abs() < 0.05);
    assert_eq!(bf16["flag"], "faithful");
    assert_eq!(fp8["flag"], "quantized_or_modified");
    assert_eq!(body["results"].as_array().unwrap().len(), 19);

    let (status, _) = get(app(), "/v1/fidelity?model=nope").await;
    assert_eq!(status, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn health_and_snapshot_swap() {
    let state = AppState::new(None);
    let app = router(state.clone());
    let (_, before) = get(app.clone(), "/v1/health").await;
    assert!(before["registry_hash"].is_null());

    state.replace(loaded());
    let (status, after) = get(app.clone(), "/v1/health").await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(after["status"], "ok");
    assert_eq!(after["version"], fixture::VERSION);
    assert_eq!(after["endpoints"], 78);
    assert_eq!(after["registry_hash"].as_str().unwrap(), common::shared().bundle.hash());
    let (status, _) = get(app, "/v1/leaderboard").await;
    assert_eq!(status, StatusCode::OK);
}
