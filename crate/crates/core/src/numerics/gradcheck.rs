//! Central finite differences for checking tape gradients. Works on `f64`
//! tensors and a scalar-valued closure, so it never touches the tape.

use crate::numerics::Tensor;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GradCheckReport {
    pub max_relative_error: f64,
    /// `(input, element)` where the worst error occurred.
    pub worst: (usize, usize),
    pub analytic: f64,
    pub numeric: f64,
    pub checked: usize,
}

/// `|a − n| / max(|a|, |n|, floor)`.
pub fn relative_error(analytic: f64, numeric: f64, floor: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(floor)
}

/// Derivative of `f` w.r.t. element `index` of `inputs[which]`.
pub fn central_difference(
    inputs: &[Tensor<f64>],
    which: usize,
    index: usize,
    step: f64,
    f: &dyn Fn(&[Tensor<f64>]) -> f64,
) -> f64 {
    let mut probe = inputs.to_vec();
    let x = probe[which].data()[index];
    probe[which].data_mut()[index] = x + step;
    let plus = f(&probe);
    probe[which].data_mut()[index] = x - step;
    let minus = f(&probe);
    (plus - minus) / (2.0 * step)
}

/// Compares `analytic[k]` with central differences of `f` over every element
/// of every input.
pub fn check_gradients(
    inputs: &[Tensor<f64>],
    analytic: &[Tensor<f64>],
    step: f64,
    floor: f64,
    f: &dyn Fn(&[Tensor<f64>]) -> f64,
) -> GradCheckReport {
    assert_eq!(inputs.len(), analytic.len(), "one analytic gradient per input");
    let mut report = GradCheckReport {
        max_relative_error: 0.0,
        worst: (0, 0),
        analytic: 0.0,
        numeric: 0.0,
        checked: 0,
    };
    for (k, (input, grad)) in inputs.iter().zip(analytic).enumerate() {
        assert_eq!(input.shape(), grad.shape(), "gradient shape for input {k}");
        for i in 0..input.len() {
            let numeric = central_difference(inputs, k, i, step, f);
            let a = grad.data()[i];
            let err = relative_error(a, numeric, floor);
            report.checked += 1;
            if err > report.max_relative_error {
                report.max_relative_error = err;
                report.worst = (k, i);
                report.analytic = a;
                report.numeric = numeric;
            }
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cubic_derivative() {
        let x = vec![Tensor::new(vec![2], vec![1.5, -2.0]).unwrap()];
        let f = |t: &[Tensor<f64>]| t[0].data().iter().map(|v| v * v * v).sum::<f64>();
        let analytic = vec![x[0].map(|v| 3.0 * v * v)];
        let r = check_gradients(&x, &analytic, 1e-5, 1e-8, &f);
        assert!(r.max_relative_error < 1e-9);
        assert_eq!(r.checked, 2);
    }
}
