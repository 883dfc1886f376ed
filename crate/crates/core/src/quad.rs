//! Thin layer over the double-exponential (tanh-sinh) rule of the
//! `quadrature` crate. Panels are split at caller-supplied breakpoints so that
//! every singularity of the integrand sits at a panel endpoint.

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub(crate) struct Integral {
    pub value: f64,
    pub error: f64,
}

/// Integrates `f` over `[breaks[0], breaks[last]]`, one tanh-sinh panel per
/// consecutive pair of breakpoints.
pub(crate) fn integrate_panels<F>(f: F, breaks: &[f64], panel_tol: f64) -> Integral
where
    F: Fn(f64) -> f64,
{
    let mut value = 0.0;
    let mut error = 0.0;
    for w in breaks.windows(2) {
        if w[1] <= w[0] {
            continue;
        }
        let out = quadrature::integrate(&f, w[0], w[1], panel_tol);
        value += out.integral;
        error += out.error_estimate;
    }
    Integral { value, error }
}

/// `n` equal panels between `a` and `b`.
pub(crate) fn uniform_breaks(a: f64, b: f64, panels: usize) -> Vec<f64> {
    let panels = panels.max(1);
    (0..=panels)
        .map(|i| {
            if i == panels {
                b
            } else {
                a + (b - a) * i as f64 / panels as f64
            }
        })
        .collect()
}

pub(crate) fn require_accuracy(result: Integral, bound: f64, what: &str) -> Result<f64> {
    if !result.value.is_finite() {
        return Err(Error::Numeric(format!("{what}: quadrature produced {}", result.value)));
    }
    if result.error > bound {
        return Err(Error::Numeric(format!(
            "{what}: quadrature error estimate {:.3e} exceeds {bound:.1e}",
            result.error
        )));
    }
    Ok(result.value)
}
