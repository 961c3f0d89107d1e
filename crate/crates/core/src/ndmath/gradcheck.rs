use crate::error::Result;
use crate::ndmath::{Matrix, Tape, Var};

/// Denominator floor for the relative error. Central differences of an O(1)
/// loss carry round-off near `1e-16 / step`, so entries far below this are
/// compared in absolute terms.
pub const ABS_FLOOR: f64 = 1e-6;

/// Outcome of comparing tape gradients against central differences.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheck {
    pub max_relative_error: f64,
    /// `(parameter, flat index)` of the worst entry.
    pub worst: (usize, usize),
    pub analytic: f64,
    pub numeric: f64,
}

/// Checks the gradient of the scalar built by `f` with respect to every entry
/// of `params`, using central differences with the given `step`.
///
/// `f` receives a fresh tape and one leaf per parameter and must be
/// deterministic (fix any dropout seed inside it). Relative error is
/// `|analytic - numeric| / max(ABS_FLOOR, |analytic|, |numeric|)`.
pub fn finite_diff_check<F>(params: &[Matrix], step: f64, mut f: F) -> Result<GradCheck>
where
    F: FnMut(&mut Tape, &[Var]) -> Result<Var>,
{
    let mut tape = Tape::new();
    let vars: Vec<Var> = params.iter().map(|p| tape.leaf(p.clone(), true)).collect();
    let loss = f(&mut tape, &vars)?;
    tape.backward(loss)?;
    let analytic: Vec<Matrix> = vars
        .iter()
        .zip(params)
        .map(|(&v, p)| tape.grad(v).cloned().unwrap_or_else(|| Matrix::zeros(p.rows(), p.cols())))
        .collect();

    let mut eval = |perturbed: &[Matrix]| -> Result<f64> {
        let mut t = Tape::new();
        let vs: Vec<Var> = perturbed.iter().map(|p| t.leaf(p.clone(), false)).collect();
        let out = f(&mut t, &vs)?;
        Ok(t.value(out)[(0, 0)])
    };

    let mut report = GradCheck { max_relative_error: 0.0, worst: (0, 0), analytic: 0.0, numeric: 0.0 };
    let mut work: Vec<Matrix> = params.to_vec();
    for (pi, p) in params.iter().enumerate() {
        for k in 0..p.as_slice().len() {
            let orig = p.as_slice()[k];
            work[pi].as_mut_slice()[k] = orig + step;
            let up = eval(&work)?;
            work[pi].as_mut_slice()[k] = orig - step;
            let down = eval(&work)?;
            work[pi].as_mut_slice()[k] = orig;

            let numeric = (up - down) / (2.0 * step);
            let a = analytic[pi].as_slice()[k];
            let rel = (a - numeric).abs() / numeric.abs().max(a.abs()).max(ABS_FLOOR);
            if rel > report.max_relative_error {
                report = GradCheck { max_relative_error: rel, worst: (pi, k), analytic: a, numeric };
            }
        }
    }
    Ok(report)
}
