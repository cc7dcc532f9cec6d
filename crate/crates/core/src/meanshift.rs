//! Gaussian mean shift over a point set, and the annealed step that one
//! Euler step of the optimal PF-ODE is equivalent to.
//!
//! The mean vector m(x, h) under a Gaussian kernel with bandwidth h is the
//! same softmax-weighted convex combination as the optimal denoiser at noise
//! level h, so [`mean_vector`] delegates to the denoiser implementation:
//! one source of truth for the shared formula.

use crate::dataset::PointSet;
use crate::denoiser;
use crate::error::{Error, Result};
use crate::math;

/// m(x, h): the kernel-weighted mean of the support around x.
pub fn mean_vector(ps: &PointSet, x: &[f64], h: f64) -> Result<Vec<f64>> {
    if !(h > 0.0) || !h.is_finite() {
        return Err(Error::InvalidParam(format!("bandwidth {h} must be > 0")));
    }
    denoiser::denoise_optimal(ps, x, h)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergeOutcome {
    pub mode: Vec<f64>,
    pub iterations: usize,
    /// False when the iteration budget ran out before the step size
    /// dropped below tolerance.
    pub converged: bool,
}

/// Fixed-point iteration x <- m(x, h) until the step norm falls below `tol`
/// or `max_iter` mean evaluations have been spent. Hitting the budget is
/// reported, not an error.
pub fn mean_shift_converge(
    ps: &PointSet,
    x0: &[f64],
    h: f64,
    tol: f64,
    max_iter: usize,
) -> Result<ConvergeOutcome> {
    if !(tol > 0.0) || !tol.is_finite() {
        return Err(Error::InvalidParam(format!("tolerance {tol} must be > 0")));
    }
    if max_iter == 0 {
        return Err(Error::InvalidParam("max_iter must be >= 1".into()));
    }
    let mut x = x0.to_vec();
    for iter in 1..=max_iter {
        let m = mean_vector(ps, &x, h)?;
        let step = math::dist(&m, &x);
        x = m;
        if step <= tol {
            return Ok(ConvergeOutcome { mode: x, iterations: iter, converged: true });
        }
    }
    Ok(ConvergeOutcome { mode: x, iterations: max_iter, converged: false })
}

/// One annealed mean-shift step with bandwidth s_hi, blended with the current
/// position: (s_lo/s_hi) x + ((s_hi - s_lo)/s_hi) m(x, s_hi).
/// With s_lo = 0 this is a pure mean-shift iteration.
pub fn annealed_step(ps: &PointSet, x: &[f64], s_hi: f64, s_lo: f64) -> Result<Vec<f64>> {
    if !(s_hi > 0.0 && s_lo >= 0.0 && s_lo < s_hi) {
        return Err(Error::InvalidParam(format!(
            "annealed step needs 0 <= s_lo < s_hi, got {s_lo}, {s_hi}"
        )));
    }
    let m = mean_vector(ps, x, s_hi)?;
    let keep = s_lo / s_hi;
    let w = (s_hi - s_lo) / s_hi;
    Ok(x.iter().zip(&m).map(|(xi, mi)| keep * xi + w * mi).collect())
}
