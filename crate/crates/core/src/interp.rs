//! Latent interpolation strategies and their variance behavior.
//!
//! Interpolating two independent N(0, T^2 I) encodings with weights (w1, w2)
//! yields variance (w1^2 + w2^2) T^2 I. Linear interpolation shrinks that
//! variance (down to T^2/2 at the midpoint); spherical linear interpolation
//! restores it asymptotically as the two encodings become orthogonal in high
//! dimension; the normalized-linear and in-distribution strategies make
//! w1^2 + w2^2 = 1 by construction and preserve it exactly.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::math;
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    /// (1-a) x1 + a x2
    Linear,
    /// sin((1-a) psi)/sin(psi) x1 + sin(a psi)/sin(psi) x2
    Slerp,
    /// ((1-a) x1 + a x2) / sqrt((1-a)^2 + a^2)
    NLinear,
    /// sqrt(1 - l^2) x1 + l x2
    InDist,
}

impl std::str::FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear" => Ok(Strategy::Linear),
            "slerp" => Ok(Strategy::Slerp),
            "nlinear" => Ok(Strategy::NLinear),
            "indist" => Ok(Strategy::InDist),
            other => Err(Error::InvalidParam(format!("unknown strategy {other:?}"))),
        }
    }
}

impl std::fmt::Display for Strategy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Strategy::Linear => "linear",
            Strategy::Slerp => "slerp",
            Strategy::NLinear => "nlinear",
            Strategy::InDist => "indist",
        })
    }
}

/// Strategy plus coefficient. `alpha` is the interpolation coefficient for
/// linear/slerp/nlinear and the lambda weight for indist; always in [0, 1].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InterpSpec {
    pub strategy: Strategy,
    pub alpha: f64,
}

impl InterpSpec {
    pub fn new(strategy: Strategy, alpha: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&alpha) {
            return Err(Error::InvalidParam(format!("alpha {alpha} outside [0, 1]")));
        }
        Ok(Self { strategy, alpha })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Interpolated {
    pub point: Vec<f64>,
    /// True when slerp hit a numerically parallel pair and fell back to the
    /// normalized-linear formula.
    pub degenerate_fallback: bool,
}

fn combine(a: &[f64], b: &[f64], wa: f64, wb: f64) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| wa * x + wb * y).collect()
}

/// Interpolate between `a` and `b`. Slerp requires both inputs to have
/// positive norm and falls back to nlinear when sin(psi) < 1e-8.
pub fn interpolate(a: &[f64], b: &[f64], spec: &InterpSpec) -> Result<Interpolated> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch { expected: a.len(), got: b.len() });
    }
    if !math::all_finite(a) || !math::all_finite(b) {
        return Err(Error::NonFinite("interpolation input"));
    }
    let al = spec.alpha;
    let (point, fallback) = match spec.strategy {
        Strategy::Linear => (combine(a, b, 1.0 - al, al), false),
        Strategy::NLinear => (nlinear(a, b, al), false),
        Strategy::InDist => {
            let lambda = al;
            (combine(a, b, (1.0 - lambda * lambda).sqrt(), lambda), false)
        }
        Strategy::Slerp => {
            let na = math::norm(a);
            let nb = math::norm(b);
            if na == 0.0 || nb == 0.0 {
                return Err(Error::InvalidParam(
                    "slerp needs inputs with positive norm".into(),
                ));
            }
            let psi = (math::dot(a, b) / (na * nb)).clamp(-1.0, 1.0).acos();
            let sin_psi = psi.sin();
            if sin_psi < 1e-8 {
                (nlinear(a, b, al), true)
            } else {
                (
                    combine(a, b, ((1.0 - al) * psi).sin() / sin_psi, (al * psi).sin() / sin_psi),
                    false,
                )
            }
        }
    };
    Ok(Interpolated { point, degenerate_fallback: fallback })
}

fn nlinear(a: &[f64], b: &[f64], al: f64) -> Vec<f64> {
    let scale = ((1.0 - al) * (1.0 - al) + al * al).sqrt();
    combine(a, b, (1.0 - al) / scale, al / scale)
}

/// The analytic factor f with Var(output) = f T^2 I for independent
/// N(0, T^2 I) inputs. `psi` is only read by slerp and must lie in (0, pi).
pub fn variance_factor(strategy: Strategy, alpha: f64, psi: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::InvalidParam(format!("alpha {alpha} outside [0, 1]")));
    }
    match strategy {
        Strategy::Linear => Ok((1.0 - alpha) * (1.0 - alpha) + alpha * alpha),
        Strategy::NLinear | Strategy::InDist => Ok(1.0),
        Strategy::Slerp => {
            if !(psi > 0.0 && psi < std::f64::consts::PI) {
                return Err(Error::InvalidParam(format!("psi {psi} outside (0, pi)")));
            }
            let s1 = ((1.0 - alpha) * psi).sin();
            let s2 = (alpha * psi).sin();
            let sp = psi.sin();
            Ok((s1 * s1 + s2 * s2) / (sp * sp))
        }
    }
}

/// One point of a variance sweep: dimension and the measured variance factor.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct SweepPoint {
    pub dim: usize,
    pub empirical_f: f64,
}

/// Estimate the variance factor empirically: draw `n_samples` independent
/// N(0, T^2 I_d) pairs per dimension, interpolate, average the per-coordinate
/// sample variance, divide by T^2.
pub fn variance_sweep(
    strategy: Strategy,
    alpha: f64,
    dims: &[usize],
    n_samples: usize,
    t_scale: f64,
    seed: u64,
) -> Result<Vec<SweepPoint>> {
    if n_samples < 100 {
        return Err(Error::InvalidParam("variance sweep needs >= 100 samples".into()));
    }
    if !(t_scale > 0.0) {
        return Err(Error::InvalidParam(format!("scale {t_scale} must be > 0")));
    }
    let spec = InterpSpec::new(strategy, alpha)?;
    use rayon::prelude::*;
    dims.par_iter()
        .enumerate()
        .map(|(di, &d)| {
            if d == 0 {
                return Err(Error::InvalidParam("dimension must be >= 1".into()));
            }
            let dim_seed = rng::stream_seed(seed, di as u64);
            let mut sum = vec![0.0; d];
            let mut sum_sq = vec![0.0; d];
            let mut a = vec![0.0; d];
            let mut b = vec![0.0; d];
            for k in 0..n_samples {
                let mut rng = rng::rng_from(rng::stream_seed(dim_seed, k as u64));
                rng::fill_standard_normal(&mut rng, &mut a);
                rng::fill_standard_normal(&mut rng, &mut b);
                for v in a.iter_mut().chain(b.iter_mut()) {
                    *v *= t_scale;
                }
                let y = interpolate(&a, &b, &spec)?.point;
                for ((s, sq), yi) in sum.iter_mut().zip(sum_sq.iter_mut()).zip(&y) {
                    *s += yi;
                    *sq += yi * yi;
                }
            }
            let n = n_samples as f64;
            let bessel = n / (n - 1.0);
            let mean_var = sum
                .iter()
                .zip(&sum_sq)
                .map(|(s, sq)| (sq / n - (s / n) * (s / n)).max(0.0) * bessel)
                .sum::<f64>()
                / d as f64;
            Ok(SweepPoint { dim: d, empirical_f: mean_var / (t_scale * t_scale) })
        })
        .collect()
}
