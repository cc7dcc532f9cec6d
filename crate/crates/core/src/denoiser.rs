//! The exact optimal denoiser over a point set, the Gaussian-mixture density
//! and score it induces, and perturbed variants standing in for learned
//! scores.
//!
//! For a support {x_i} and noise level sigma, the least-squares-optimal
//! denoiser is the posterior mean
//!
//! ```text
//! r(x, sigma) = sum_i u_i x_i,   u_i = softmax_i(-|x - x_i|^2 / (2 sigma^2))
//! ```
//!
//! a convex combination of the data. The smoothed density is the mixture
//! (1/n) sum_i N(x; x_i, sigma^2 I) and its score is (r(x, sigma) - x) /
//! sigma^2. All exponent work is done max-subtracted: at small sigma the raw
//! exponents reach -1e6 and beyond, and the weights must still normalize.

use std::sync::Arc;

use crate::dataset::PointSet;
use crate::error::{Error, Result};
use crate::math;
use crate::rng;

/// How a denoiser deviates from the optimum, if at all.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Variant {
    /// The exact posterior mean over the full support.
    Optimal,
    /// Optimal denoiser over a seeded subset of the support rows.
    Subsampled { fraction: f64, seed: u64 },
    /// Softmax weights perturbed by seeded Gaussian noise per
    /// (query, support row) pair, clamped at zero and renormalized.
    WeightNoised { amplitude: f64, seed: u64 },
}

/// An immutable x, sigma -> r(x, sigma) evaluator over a point set.
///
/// Evaluation is pure: the weight-noised variant keys its noise stream on the
/// query's bit pattern, so concurrent or reordered evaluation cannot change
/// any result.
#[derive(Debug, Clone)]
pub struct Denoiser {
    support: Arc<PointSet>,
    variant: Variant,
    /// Row indices the evaluator may use, ascending.
    active: Vec<usize>,
}

impl Denoiser {
    pub fn optimal(support: impl Into<Arc<PointSet>>) -> Self {
        let support = support.into();
        let active = (0..support.n()).collect();
        Self { support, variant: Variant::Optimal, active }
    }

    /// Optimal denoiser over a seeded subset of `fraction * n` rows
    /// (rounded, at least one). `fraction` must lie in (0, 1]; fraction 1
    /// keeps every row and evaluates identically to [`Denoiser::optimal`].
    pub fn subsampled(support: impl Into<Arc<PointSet>>, fraction: f64, seed: u64) -> Result<Self> {
        if !(fraction > 0.0 && fraction <= 1.0) {
            return Err(Error::InvalidParam(format!(
                "subsample fraction {fraction} must be in (0, 1]"
            )));
        }
        let support = support.into();
        let n = support.n();
        let keep = ((fraction * n as f64).round() as usize).clamp(1, n);
        let mut rng = rng::rng_from(rng::stream_seed(seed, 0x5b5a_11ce));
        let mut active = rand::seq::index::sample(&mut rng, n, keep).into_vec();
        active.sort_unstable();
        Ok(Self { support, variant: Variant::Subsampled { fraction, seed }, active })
    }

    /// Optimal weights perturbed by `amplitude`-scaled standard normals, one
    /// per (query, support row) pair, clamped at zero and renormalized.
    /// Amplitude 0 evaluates identically to [`Denoiser::optimal`].
    pub fn weight_noised(
        support: impl Into<Arc<PointSet>>,
        amplitude: f64,
        seed: u64,
    ) -> Result<Self> {
        if !(amplitude >= 0.0 && amplitude.is_finite()) {
            return Err(Error::InvalidParam(format!(
                "noise amplitude {amplitude} must be >= 0"
            )));
        }
        let support = support.into();
        let active = (0..support.n()).collect();
        Ok(Self { support, variant: Variant::WeightNoised { amplitude, seed }, active })
    }

    pub fn support(&self) -> &PointSet {
        &self.support
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    /// Rows the evaluator uses (the seeded subset for the subsampled variant).
    pub fn active_rows(&self) -> &[usize] {
        &self.active
    }

    pub fn dim(&self) -> usize {
        self.support.d()
    }

    /// r(x, sigma). For sigma = 0 this is the nearest active row, ties
    /// broken by lowest row index.
    pub fn evaluate(&self, x_hat: &[f64], sigma: f64) -> Result<Vec<f64>> {
        check_query(&self.support, x_hat, sigma)?;
        match self.variant {
            Variant::Optimal | Variant::Subsampled { .. } => {
                Ok(convex_output(&self.support, &self.active, x_hat, sigma))
            }
            Variant::WeightNoised { amplitude, seed } => {
                if amplitude == 0.0 || sigma == 0.0 {
                    return Ok(convex_output(&self.support, &self.active, x_hat, sigma));
                }
                let mut w = softmax_weights(&self.support, &self.active, x_hat, sigma);
                let mut noise_rng = rng::rng_from(rng::hash_f64s(seed, x_hat));
                let mut noise = vec![0.0; w.len()];
                rng::fill_standard_normal(&mut noise_rng, &mut noise);
                let mut total = 0.0;
                for (wi, zi) in w.iter_mut().zip(&noise) {
                    *wi = (*wi + amplitude * zi).max(0.0);
                    total += *wi;
                }
                if total <= f64::MIN_POSITIVE {
                    // Every weight clamped away; keep the unperturbed ones.
                    w = softmax_weights(&self.support, &self.active, x_hat, sigma);
                    total = 1.0;
                }
                let mut out = vec![0.0; self.support.d()];
                for (&row, wi) in self.active.iter().zip(&w) {
                    let coeff = wi / total;
                    for (o, v) in out.iter_mut().zip(self.support.row(row)) {
                        *o += coeff * v;
                    }
                }
                Ok(out)
            }
        }
    }
}

fn check_query(ps: &PointSet, x_hat: &[f64], sigma: f64) -> Result<()> {
    if x_hat.len() != ps.d() {
        return Err(Error::DimensionMismatch { expected: ps.d(), got: x_hat.len() });
    }
    if !math::all_finite(x_hat) {
        return Err(Error::NonFinite("query point"));
    }
    if !(sigma >= 0.0) || !sigma.is_finite() {
        return Err(Error::InvalidParam(format!("sigma {sigma} must be >= 0 and finite")));
    }
    Ok(())
}

/// Max-subtracted softmax of -|x - x_i|^2 / (2 sigma^2) over `rows`.
/// Weights sum to 1 up to rounding. Requires sigma > 0.
fn softmax_weights(ps: &PointSet, rows: &[usize], x_hat: &[f64], sigma: f64) -> Vec<f64> {
    let inv_two_sq = 1.0 / (2.0 * sigma * sigma);
    let mut logits: Vec<f64> = rows
        .iter()
        .map(|&i| -math::dist_sq(x_hat, ps.row(i)) * inv_two_sq)
        .collect();
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for l in logits.iter_mut() {
        *l = (*l - max).exp();
        total += *l;
    }
    for l in logits.iter_mut() {
        *l /= total;
    }
    logits
}

/// Index (into `rows`) of the nearest support row, lowest row index on ties.
fn nearest_row(ps: &PointSet, rows: &[usize], x_hat: &[f64]) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (k, &i) in rows.iter().enumerate() {
        let d = math::dist_sq(x_hat, ps.row(i));
        if d < best_d {
            best_d = d;
            best = k;
        }
    }
    best
}

fn convex_output(ps: &PointSet, rows: &[usize], x_hat: &[f64], sigma: f64) -> Vec<f64> {
    if sigma == 0.0 {
        return ps.row(rows[nearest_row(ps, rows, x_hat)]).to_vec();
    }
    let w = softmax_weights(ps, rows, x_hat, sigma);
    let mut out = vec![0.0; ps.d()];
    for (&row, wi) in rows.iter().zip(&w) {
        for (o, v) in out.iter_mut().zip(ps.row(row)) {
            *o += wi * v;
        }
    }
    out
}

/// The optimal denoising output over the full point set.
pub fn denoise_optimal(ps: &PointSet, x_hat: &[f64], sigma: f64) -> Result<Vec<f64>> {
    check_query(ps, x_hat, sigma)?;
    let rows: Vec<usize> = (0..ps.n()).collect();
    Ok(convex_output(ps, &rows, x_hat, sigma))
}

/// log of the Gaussian mixture density (1/n) sum_i N(x_hat; x_i, sigma^2 I),
/// normalization constant included. Finite for any finite query; requires
/// sigma > 0.
pub fn mixture_log_density(ps: &PointSet, x_hat: &[f64], sigma: f64) -> Result<f64> {
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(Error::InvalidParam(format!("sigma {sigma} must be > 0")));
    }
    check_query(ps, x_hat, sigma)?;
    let inv_two_sq = 1.0 / (2.0 * sigma * sigma);
    let mut max = f64::NEG_INFINITY;
    let logits: Vec<f64> = ps
        .rows()
        .map(|row| {
            let l = -math::dist_sq(x_hat, row) * inv_two_sq;
            max = max.max(l);
            l
        })
        .collect();
    let sum_exp: f64 = logits.iter().map(|l| (l - max).exp()).sum();
    let d = ps.d() as f64;
    Ok(max + sum_exp.ln() - (ps.n() as f64).ln()
        - 0.5 * d * (2.0 * std::f64::consts::PI * sigma * sigma).ln())
}

/// Score of the mixture density: grad log p_sigma(x_hat), computed in closed
/// form as (r(x_hat, sigma) - x_hat) / sigma^2. Requires sigma > 0.
pub fn mixture_score(ps: &PointSet, x_hat: &[f64], sigma: f64) -> Result<Vec<f64>> {
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(Error::InvalidParam(format!("sigma {sigma} must be > 0")));
    }
    let r = denoise_optimal(ps, x_hat, sigma)?;
    let inv_sq = 1.0 / (sigma * sigma);
    Ok(r.iter().zip(x_hat).map(|(ri, xi)| (ri - xi) * inv_sq).collect())
}
