mod common;

use endpointbench_core::registry::{builtin_hardware_table, builtin_presets};
use endpointbench_core::{Decoding, EndpointId, Precision};
use proptest::prelude::*;

#[test]
fn preset_table_exact() {
    let want: [(&str, f64, f64, [f64; 5]); 10] = [
        ("chat", 3.0, 1.0, [0.20, 0.30, 0.20, 0.20, 0.10]),
        ("voice-agent", 5.0, 1.0, [0.10, 0.50, 0.10, 0.15, 0.15]),
        ("coding-agent", 1.0, 3.0, [0.20, 0.10, 0.15, 0.40, 0.15]),
        ("generic-agent", 10.0, 1.0, [0.15, 0.20, 0.20, 0.30, 0.15]),
        ("rag", 20.0, 1.0, [0.10, 0.20, 0.30, 0.25, 0.15]),
        ("reasoning", 1.0, 5.0, [0.20, 0.05, 0.25, 0.45, 0.05]),
        ("batch", 5.0, 1.0, [0.05, 0.00, 0.65, 0.20, 0.10]),
        ("long-context", 50.0, 1.0, [0.05, 0.10, 0.40, 0.30, 0.15]),
        ("multimodal-vision", 5.0, 1.0, [0.15, 0.20, 0.20, 0.30, 0.15]),
        ("multimodal-voice", 1.0, 1.0, [0.10, 0.40, 0.20, 0.20, 0.10]),
    ];
    let got = builtin_presets();
    assert_eq!(got.len(), 10);
    for (p, (name, i, o, w)) in got.iter().zip(want) {
        assert_eq!((p.name.as_str(), p.input_ratio, p.output_ratio, p.weights.0), (name, i, o, w));
        assert!((p.weights.sum() - 1.0).abs() <= 1e-9);
    }
}

#[test]
fn hardware_table_exact() {
    let got: Vec<(String, f64, f64)> =
        builtin_hardware_table().into_iter().map(|h| (h.name, h.tdp_watts, h.default_pue)).collect();
    let want = [
        ("NVIDIA H100 SXM5", 700.0, 1.20),
        ("NVIDIA H200 SXM5", 700.0, 1.20),
        ("NVIDIA B200", 1000.0, 1.15),
        ("NVIDIA H800", 700.0, 1.30),
        ("Google TPU v5e", 230.0, 1.10),
        ("Google TPU v6", 350.0, 1.10),
        ("AWS Trainium2", 300.0, 1.20),
        ("Cerebras WSE-3", 23000.0, 1.20),
        ("Groq LPU", 215.0, 1.20),
        ("SambaNova SN40L", 750.0, 1.20),
    ];
    assert_eq!(got.len(), want.len());
    for ((n, t, p), (wn, wt, wp)) in got.iter().zip(want) {
        assert_eq!((n.as_str(), *t, *p), (wn, wt, wp));
    }
}

fn field() -> impl Strategy<Value = String> {
    "[a-z0-9][a-z0-9.%_-]{0,12}"
}

proptest! {
    #[test]
    fn endpoint_id_path_form_round_trips(p in field(), m in field(), s in field(), r in field(),
                                         prec in 0usize..4, dec in 0usize..2) {
        let precision = [Precision::Bf16, Precision::Fp8, Precision::Int8, Precision::Fp16][prec];
        let decoding = [Decoding::Standard, Decoding::Speculative][dec];
        let id = EndpointId::new(p, m, s, precision, decoding, r);
        let back: EndpointId = id.to_string().parse().unwrap();
        prop_assert_eq!(back, id);
    }

    #[test]
    fn cohorts_partition_the_registry(models in prop::collection::vec(0usize..5, 1..40)) {
        let endpoints = models
            .iter()
            .enumerate()
            .map(|(i, m)| common::endpoint(common::id(&format!("p{i}"), &format!("m{m}"), Precision::Bf16), 0.1, 0.2))
            .collect();
        let reg = common::registry(endpoints);
        let total: usize = reg.models().map(|m| reg.cohort(&m.id).unwrap().len()).sum();
        prop_assert_eq!(total, reg.endpoints().len());
        let again = endpointbench_core::Registry::new(reg.to_parts()).unwrap();
        prop_assert_eq!(again, reg);
    }
}
