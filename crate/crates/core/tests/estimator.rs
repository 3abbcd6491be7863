mod common;

use common::{randn, rng};
use graphmamba::estimate::{activation_elements_per_sample, count_params, estimate_flops, estimate_memory};
use graphmamba::model::{forward, ForwardOptions};
use graphmamba::numerics::flops;
use graphmamba::{ModelConfig, Params32, TrainConfig};
use proptest::prelude::*;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

fn random_config(r: &mut ChaCha8Rng) -> ModelConfig {
    let s = 2 * r.random_range(0..4) + 1;
    let cfg = ModelConfig::new(s, r.random_range(1..12), r.random_range(2..10))
        .with_dims(r.random_range(1..24), r.random_range(1..24));
    let nspc = r.random_range(1..8);
    let total = s * s + nspc;
    cfg.with_tokens(nspc, r.random_range(1..=total))
}

#[test]
fn parameter_count_matches_allocation() {
    let mut r = rng(1);
    for _ in 0..20 {
        let cfg = random_config(&mut r);
        let params = Params32::init(&cfg, 0).unwrap();
        assert_eq!(count_params(&cfg), params.element_count() as u64, "{cfg:?}");
    }
}

#[test]
fn flop_estimate_tracks_instrumented_forward() {
    let mut r = rng(2);
    let tiny = ModelConfig::new(5, 6, 3).with_dims(8, 8).with_tokens(5, 4);
    let configs: Vec<ModelConfig> = std::iter::once(tiny).chain((0..10).map(|_| random_config(&mut r))).collect();
    for cfg in configs {
        let batch = 3;
        let params = Params32::init(&cfg, 1).unwrap();
        let x = randn(&mut r, &[batch, cfg.patch_size, cfg.patch_size, cfg.bands]).cast::<f32>();
        let (_, counted) = flops::count(|| forward(&params, &x, &ForwardOptions::default()).unwrap());
        let estimated = estimate_flops(&cfg, batch).total();
        let rel = (estimated as f64 - counted as f64).abs() / counted as f64;
        assert!(rel < 0.05, "{cfg:?}: estimated {estimated}, counted {counted}");
    }
}

#[test]
fn activation_estimate_equals_trace_size() {
    let mut r = rng(3);
    for _ in 0..20 {
        let cfg = random_config(&mut r);
        let batch = r.random_range(1..4);
        let params = Params32::init(&cfg, 2).unwrap();
        let x = randn(&mut r, &[batch, cfg.patch_size, cfg.patch_size, cfg.bands]).cast::<f32>();
        let (_, trace) = forward(&params, &x, &ForwardOptions::default()).unwrap();
        let by_hand: usize = trace.stages().iter().map(|(_, shape)| shape.iter().product::<usize>()).sum();
        assert_eq!(activation_elements_per_sample(&cfg) * batch as u64, by_hand as u64, "{cfg:?}");
        let report = estimate_memory(&cfg, &TrainConfig { batch_size: batch, ..TrainConfig::default() });
        assert_eq!(report.activation_bytes, 4 * by_hand as u64);
    }
}

#[test]
fn report_text_lists_every_stage() {
    let cfg = ModelConfig::new(5, 6, 3);
    let text = estimate_memory(&cfg, &TrainConfig::default()).to_text();
    for stage in ["tokenization", "graph", "attention", "fusion", "ssm"] {
        assert!(text.contains(&format!("flops.{stage} = ")), "{stage}");
    }
    assert!(text.starts_with("# operations: multiply-add = 2"));
}

fn terms(cfg: &ModelConfig) -> Vec<u64> {
    let t = estimate_flops(cfg, 2);
    vec![
        t.spatial_conv,
        t.spectral_conv,
        t.token_projection,
        t.scoring,
        t.adjacency,
        t.propagation,
        t.graph_projection,
        t.qkv_projection,
        t.attention_weights,
        t.attention_aggregation,
        t.fusion,
        t.gru,
        t.classifier,
        t.sort_comparisons,
    ]
}

proptest! {
    #[test]
    fn flop_terms_are_monotone(
        half_s in 0usize..4, b in 1usize..10, c in 2usize..8, f in 1usize..16, d in 1usize..16,
        nspc in 1usize..6, n_frac in 0.0f64..1.0, which in 0usize..7,
    ) {
        let s = 2 * half_s + 1;
        let n = 1 + ((s * s + nspc - 1) as f64 * n_frac) as usize;
        let base = ModelConfig::new(s, b, c).with_dims(f, d).with_tokens(nspc, n);
        let mut grown = base.clone();
        match which {
            0 => grown.patch_size += 2,
            1 => grown.bands += 1,
            2 => grown.classes += 1,
            3 => grown.features += 1,
            4 => grown.d_model += 1,
            5 => grown.spectral_tokens += 1,
            _ => grown.prioritized = (n + 1).min(s * s + nspc),
        }
        prop_assert!(grown.validate().is_ok());
        for (lo, hi) in terms(&base).into_iter().zip(terms(&grown)) {
            prop_assert!(lo <= hi);
        }
        // Weights never depend on patch size or the prioritized count.
        if which == 0 || which == 6 {
            prop_assert_eq!(count_params(&grown), count_params(&base));
        } else {
            prop_assert!(count_params(&grown) > count_params(&base));
        }
    }
}
