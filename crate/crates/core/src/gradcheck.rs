//! Central finite differences for checking analytic gradients.

use serde::Serialize;

/// Step used by [`central_difference`] unless a caller picks its own.
pub const DEFAULT_STEP: f64 = 1e-5;

/// Relative errors are measured against `max(|a|, |b|, REL_ERR_FLOOR)` so
/// vanishing gradient entries are compared absolutely.
pub const REL_ERR_FLOOR: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GradCheck {
    pub max_rel_error: f64,
    /// Flat index of the worst entry.
    pub worst: usize,
    pub passed: bool,
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_ERR_FLOOR)
}

/// `(f(x + h e_i) − f(x − h e_i)) / 2h` for every coordinate.
pub fn central_difference<F>(mut f: F, x: &[f64], step: f64) -> Vec<f64>
where
    F: FnMut(&[f64]) -> f64,
{
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            probe[i] = x[i] + step;
            let up = f(&probe);
            probe[i] = x[i] - step;
            let down = f(&probe);
            probe[i] = x[i];
            (up - down) / (2.0 * step)
        })
        .collect()
}

pub fn compare(analytic: &[f64], numeric: &[f64], tolerance: f64) -> GradCheck {
    assert_eq!(analytic.len(), numeric.len(), "gradient length mismatch");
    let (worst, max_rel_error) = analytic
        .iter()
        .zip(numeric)
        .map(|(&a, &n)| relative_error(a, n))
        .enumerate()
        .fold((0, 0.0f64), |best, (i, e)| if e > best.1 || e.is_nan() { (i, e) } else { best });
    GradCheck {
        max_rel_error,
        worst,
        passed: max_rel_error <= tolerance,
    }
}

/// Checks `grad` against central differences of `f` at `x`.
pub fn check<F, G>(f: F, grad: G, x: &[f64], step: f64, tolerance: f64) -> GradCheck
where
    F: FnMut(&[f64]) -> f64,
    G: FnOnce(&[f64]) -> Vec<f64>,
{
    let numeric = central_difference(f, x, step);
    compare(&grad(x), &numeric, tolerance)
}
