//! Near-zeros of the discrete gradient.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::fem::{gradient_field, ScalarField};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CriticalCandidate {
    pub triangle: usize,
    pub grad_norm: f64,
}

/// Triangles with `|grad u| < rel_tol * median |grad u|`, ascending.
pub fn critical_point_candidates(u: &ScalarField, rel_tol: f64) -> Result<Vec<CriticalCandidate>> {
    if !(rel_tol > 0.0 && rel_tol < 1.0) {
        return Err(Error::invalid(format!(
            "rel_tol must lie in (0, 1), got {rel_tol}"
        )));
    }
    let mags = gradient_field(u).magnitudes();
    let mut sorted = mags.clone();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let median = if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    };
    let mut out: Vec<CriticalCandidate> = mags
        .iter()
        .enumerate()
        .filter(|(_, &g)| g < rel_tol * median)
        .map(|(triangle, &grad_norm)| CriticalCandidate {
            triangle,
            grad_norm,
        })
        .collect();
    out.sort_by(|a, b| {
        a.grad_norm
            .total_cmp(&b.grad_norm)
            .then(a.triangle.cmp(&b.triangle))
    });
    Ok(out)
}
