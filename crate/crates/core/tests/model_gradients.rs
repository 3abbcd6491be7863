mod common;

use common::{randn, rng, FD_STEP, REL_FLOOR};
use graphmamba::model::check_model_gradients;
use graphmamba::{ModelConfig, ParamId, Params64};

#[test]
fn every_parameter_of_the_tiny_model_matches_finite_differences() {
    let cfg = ModelConfig::new(5, 6, 3).with_dims(8, 8).with_tokens(5, 4);
    let mut params = Params64::init(&cfg, 42).unwrap();
    let mut r = rng(43);
    for &id in ParamId::ALL.iter().filter(|id| id.is_bias()) {
        let shape = params.get(id).shape().to_vec();
        *params.get_mut(id) = randn(&mut r, &shape).map(|v| 0.1 * v);
    }
    let x = randn(&mut r, &[2, 5, 5, 6]).map(|v| 0.5 + 0.5 * v);
    let reports = check_model_gradients(&params, &x, &[0, 2], 0.01, FD_STEP, REL_FLOOR).unwrap();
    assert_eq!(reports.len(), ParamId::ALL.len());
    for (id, rep) in &reports {
        eprintln!("{:32} {:.3e}", id.name(), rep.max_relative_error);
        assert!(rep.max_relative_error < 1e-3, "{}: {rep:?}", id.name());
    }
}
