use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{Tape, Tensor, Var};
use crate::error::Result;

#[derive(Clone, Debug)]
pub struct GradCheckOptions {
    /// Central-difference step.
    pub h: f64,
    /// Maximum accepted relative error.
    pub tolerance: f64,
    /// Coordinates checked per input tensor; smaller tensors are checked in full.
    pub samples_per_tensor: usize,
    /// Denominator floor of the relative error, so coordinates whose true
    /// gradient is ~0 are judged by absolute error.
    pub abs_floor: f64,
    pub seed: u64,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        GradCheckOptions { h: 1e-5, tolerance: 1e-5, samples_per_tensor: 48, abs_floor: 1e-5, seed: 0 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum GradCheckFailure {
    NonFinite { tensor: usize, index: usize, what: &'static str },
    Tolerance { tensor: usize, index: usize, analytic: f64, numeric: f64 },
}

#[derive(Clone, Debug)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub checked: usize,
    pub passed: bool,
    pub worst: Option<GradCheckFailure>,
}

/// Compares reverse-mode gradients of a scalar function against central
/// finite differences at `point`.
pub fn gradient_check<F>(f: F, point: &[Tensor<f64>], opts: &GradCheckOptions) -> Result<GradCheckReport>
where
    F: for<'t> Fn(&'t Tape<f64>, &[Var<'t, f64>]) -> Result<Var<'t, f64>>,
{
    let analytic: Vec<Tensor<f64>> = {
        let tape = Tape::new();
        let vars: Vec<_> = point.iter().map(|p| tape.leaf(p.clone(), true)).collect();
        let out = f(&tape, &vars)?;
        let mut grads = tape.backward(out)?;
        vars.iter()
            .zip(point)
            .map(|(v, p)| grads.take(*v).unwrap_or_else(|| Tensor::zeros(p.shape())))
            .collect()
    };

    let eval = |inputs: &[Tensor<f64>]| -> Result<f64> {
        let tape = Tape::inference();
        let vars: Vec<_> = inputs.iter().map(|p| tape.constant(p.clone())).collect();
        Ok(f(&tape, &vars)?.scalar())
    };

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut report = GradCheckReport { max_rel_error: 0.0, checked: 0, passed: true, worst: None };
    let mut inputs = point.to_vec();
    for (ti, grad) in analytic.iter().enumerate() {
        let n = grad.len();
        let coords: Vec<usize> = if n <= opts.samples_per_tensor {
            (0..n).collect()
        } else {
            let mut c = sample(&mut rng, n, opts.samples_per_tensor).into_vec();
            c.sort_unstable();
            c
        };
        for idx in coords {
            let a = grad.data()[idx];
            if !a.is_finite() {
                return Ok(fail(report, GradCheckFailure::NonFinite { tensor: ti, index: idx, what: "analytic" }));
            }
            let orig = inputs[ti].data()[idx];
            inputs[ti].data_mut()[idx] = orig + opts.h;
            let up = eval(&inputs)?;
            inputs[ti].data_mut()[idx] = orig - opts.h;
            let down = eval(&inputs)?;
            inputs[ti].data_mut()[idx] = orig;
            let numeric = (up - down) / (2.0 * opts.h);
            if !numeric.is_finite() {
                return Ok(fail(report, GradCheckFailure::NonFinite { tensor: ti, index: idx, what: "numeric" }));
            }
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(opts.abs_floor);
            report.checked += 1;
            if rel > report.max_rel_error {
                report.max_rel_error = rel;
                report.worst = Some(GradCheckFailure::Tolerance { tensor: ti, index: idx, analytic: a, numeric });
            }
        }
    }
    report.passed = report.max_rel_error <= opts.tolerance;
    Ok(report)
}

fn fail(mut report: GradCheckReport, failure: GradCheckFailure) -> GradCheckReport {
    report.passed = false;
    report.max_rel_error = f64::INFINITY;
    report.worst = Some(failure);
    report
}
