//! Trajectory-geometry metrics and high-dimensional concentration
//! experiments.
//!
//! The deviation of a trajectory point is its distance to the infinite line
//! through the trajectory's endpoints; the curvature ratio is the maximum
//! deviation over the endpoint distance. The thin-shell experiments measure
//! how tightly the norm of an isotropic Gaussian concentrates around
//! sigma * sqrt(d).

use serde::Serialize;

use crate::denoiser::Denoiser;
use crate::error::{Error, Result};
use crate::math;
use crate::rng;
use crate::sampler::Trajectory;

/// Guard below which two chord endpoints count as coincident.
const CHORD_GUARD: f64 = 1e-30;

/// Distance from `p` to the infinite line through `a` and `b`.
pub fn chord_deviation(p: &[f64], a: &[f64], b: &[f64]) -> Result<f64> {
    if p.len() != a.len() || a.len() != b.len() {
        return Err(Error::DimensionMismatch { expected: a.len(), got: p.len() });
    }
    let chord: Vec<f64> = b.iter().zip(a).map(|(bi, ai)| bi - ai).collect();
    let len = math::norm(&chord);
    if len <= CHORD_GUARD {
        return Err(Error::DegenerateChord);
    }
    let w: Vec<f64> = p.iter().zip(a).map(|(pi, ai)| pi - ai).collect();
    let along = math::dot(&w, &chord) / len;
    Ok((math::norm_sq(&w) - along * along).max(0.0).sqrt())
}

/// Cosine between the backward ODE direction -dx/dt at (x, s) and the
/// direction from x to the trajectory's final point.
pub fn angle_cosine(den: &Denoiser, x: &[f64], s: f64, x_final: &[f64]) -> Result<f64> {
    let r = den.evaluate(x, s)?;
    cosine_to_final(x, &r, s, x_final).ok_or(Error::DegenerateDirection)
}

fn cosine_to_final(x: &[f64], r: &[f64], s: f64, x_final: &[f64]) -> Option<f64> {
    if s <= 0.0 {
        return None;
    }
    // -rhs = (r - x) / s
    let back: Vec<f64> = r.iter().zip(x).map(|(ri, xi)| (ri - xi) / s).collect();
    let to_final: Vec<f64> = x_final.iter().zip(x).map(|(fi, xi)| fi - xi).collect();
    let nb = math::norm(&back);
    let nf = math::norm(&to_final);
    if nb == 0.0 || nf == 0.0 {
        return None;
    }
    Some((math::dot(&back, &to_final) / (nb * nf)).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum TrajectoryKind {
    Sampling,
    Denoising,
}

impl std::str::FromStr for TrajectoryKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sampling" => Ok(TrajectoryKind::Sampling),
            "denoising" => Ok(TrajectoryKind::Denoising),
            other => Err(Error::InvalidParam(format!("unknown trajectory kind {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct StepMetrics {
    pub s: f64,
    pub chord_dev: f64,
    /// Absent at s_0 and for denoising trajectories.
    pub angle_cos: Option<f64>,
    pub magnitude: f64,
    pub dist_to_final: f64,
}

#[derive(Debug, Clone, Copy, Default, Serialize)]
pub struct MonotoneViolations {
    pub dist_to_final: usize,
    pub magnitude: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct GeometryReport {
    pub per_step: Vec<StepMetrics>,
    pub endpoint_distance: f64,
    /// max chord deviation / endpoint distance; 0 when the chord degenerates.
    pub curvature_ratio: f64,
    pub monotone_violations: MonotoneViolations,
}

pub enum Direction {
    NonIncreasing,
    NonDecreasing,
}

/// Count consecutive pairs that break the expected direction by more than
/// `rel_slack` relative to the earlier value.
pub fn count_monotone_violations(seq: &[f64], direction: Direction, rel_slack: f64) -> usize {
    seq.windows(2)
        .filter(|w| {
            let slack = rel_slack * w[0].abs();
            match direction {
                Direction::NonIncreasing => w[1] > w[0] + slack,
                Direction::NonDecreasing => w[1] < w[0] - slack,
            }
        })
        .count()
}

/// Default relative slack for monotonicity checks; the observations hold in
/// expectation, finite batches wobble.
pub const MONOTONE_SLACK: f64 = 1e-3;

/// Per-step geometry of one trajectory, for either the sampling sequence
/// (the states) or the denoising sequence (the denoiser outputs).
pub fn trajectory_report(traj: &Trajectory, kind: TrajectoryKind) -> Result<GeometryReport> {
    trajectory_report_with_slack(traj, kind, MONOTONE_SLACK)
}

pub fn trajectory_report_with_slack(
    traj: &Trajectory,
    kind: TrajectoryKind,
    rel_slack: f64,
) -> Result<GeometryReport> {
    let seq: &[(f64, Vec<f64>)] = match kind {
        TrajectoryKind::Sampling => &traj.states,
        TrajectoryKind::Denoising => &traj.denoised,
    };
    if seq.len() < 3 {
        return Err(Error::InvalidParam(format!(
            "trajectory needs at least 3 points, has {}",
            seq.len()
        )));
    }
    let first = &seq[0].1;
    let last = &seq[seq.len() - 1].1;
    let endpoint_distance = math::dist(first, last);
    let degenerate = endpoint_distance <= CHORD_GUARD;

    let mut per_step = Vec::with_capacity(seq.len());
    let mut max_dev = 0.0f64;
    for (k, (s, y)) in seq.iter().enumerate() {
        let chord_dev = if degenerate {
            math::dist(y, first)
        } else {
            chord_deviation(y, first, last)?
        };
        max_dev = max_dev.max(chord_dev);
        let angle_cos = match kind {
            TrajectoryKind::Sampling if k < traj.denoised.len() => {
                cosine_to_final(y, &traj.denoised[k].1, *s, last)
            }
            _ => None,
        };
        per_step.push(StepMetrics {
            s: *s,
            chord_dev,
            angle_cos,
            magnitude: math::norm(y),
            dist_to_final: math::dist(y, last),
        });
    }
    let curvature_ratio = if degenerate { 0.0 } else { max_dev / endpoint_distance };

    let dists: Vec<f64> = per_step.iter().map(|m| m.dist_to_final).collect();
    let mags: Vec<f64> = per_step.iter().map(|m| m.magnitude).collect();
    let monotone_violations = MonotoneViolations {
        dist_to_final: count_monotone_violations(&dists, Direction::NonIncreasing, rel_slack),
        magnitude: match kind {
            TrajectoryKind::Sampling => {
                count_monotone_violations(&mags, Direction::NonIncreasing, rel_slack)
            }
            TrajectoryKind::Denoising => {
                count_monotone_violations(&mags, Direction::NonDecreasing, rel_slack)
            }
        },
    };

    Ok(GeometryReport { per_step, endpoint_distance, curvature_ratio, monotone_violations })
}

/// Monte-Carlo norm statistics of z ~ N(0, sigma^2 I_d).
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ShellStats {
    pub mean_norm: f64,
    pub std_norm: f64,
    pub mean_sq_norm: f64,
    pub var_sq_norm: f64,
}

const CHUNK: usize = 4096;

fn chunked_stats<T: Send>(
    n_samples: usize,
    seed: u64,
    per_chunk: impl Fn(u64, usize) -> T + Sync,
) -> Vec<T> {
    use rayon::prelude::*;
    let chunks: Vec<(u64, usize)> = (0..n_samples.div_ceil(CHUNK))
        .map(|c| (c as u64, CHUNK.min(n_samples - c * CHUNK)))
        .collect();
    // Chunk boundaries and reduction order are fixed, so results do not
    // depend on the thread count.
    chunks
        .par_iter()
        .map(|&(c, len)| per_chunk(rng::stream_seed(seed, c), len))
        .collect()
}

/// Estimate E|z|, std|z|, E|z|^2, Var|z|^2 from `n_samples` seeded draws.
pub fn thin_shell_experiment(d: usize, sigma: f64, n_samples: usize, seed: u64) -> Result<ShellStats> {
    if d == 0 {
        return Err(Error::InvalidParam("dimension must be >= 1".into()));
    }
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(Error::InvalidParam(format!("sigma {sigma} must be > 0")));
    }
    if n_samples < 2 {
        return Err(Error::InvalidParam("need at least 2 samples".into()));
    }
    let partials = chunked_stats(n_samples, seed, |chunk_seed, len| {
        let mut rng = rng::rng_from(chunk_seed);
        let mut z = vec![0.0; d];
        let (mut s1, mut s2, mut s4) = (0.0, 0.0, 0.0);
        for _ in 0..len {
            rng::fill_standard_normal(&mut rng, &mut z);
            let sq = math::norm_sq(&z) * sigma * sigma;
            s1 += sq.sqrt();
            s2 += sq;
            s4 += sq * sq;
        }
        (s1, s2, s4)
    });
    let (mut s1, mut s2, mut s4) = (0.0, 0.0, 0.0);
    for (a, b, c) in partials {
        s1 += a;
        s2 += b;
        s4 += c;
    }
    let n = n_samples as f64;
    let mean_norm = s1 / n;
    let mean_sq_norm = s2 / n;
    let bessel = n / (n - 1.0);
    let var_norm = (mean_sq_norm - mean_norm * mean_norm).max(0.0) * bessel;
    let var_sq_norm = (s4 / n - mean_sq_norm * mean_sq_norm).max(0.0) * bessel;
    Ok(ShellStats {
        mean_norm,
        std_norm: var_norm.sqrt(),
        mean_sq_norm,
        var_sq_norm,
    })
}

/// Monte-Carlo estimate of P(|x + z| > |x|) for z ~ N(0, sigma^2 I).
pub fn expansion_probability(x: &[f64], sigma: f64, n_samples: usize, seed: u64) -> Result<f64> {
    if x.is_empty() {
        return Err(Error::InvalidParam("x must have at least one coordinate".into()));
    }
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(Error::InvalidParam(format!("sigma {sigma} must be > 0")));
    }
    if n_samples == 0 {
        return Err(Error::InvalidParam("need at least 1 sample".into()));
    }
    let base = math::norm_sq(x);
    let counts = chunked_stats(n_samples, seed, |chunk_seed, len| {
        let mut rng = rng::rng_from(chunk_seed);
        let mut z = vec![0.0; x.len()];
        let mut hits = 0usize;
        for _ in 0..len {
            rng::fill_standard_normal(&mut rng, &mut z);
            let mut sq = 0.0;
            for (xi, zi) in x.iter().zip(&z) {
                let v = xi + sigma * zi;
                sq += v * v;
            }
            if sq > base {
                hits += 1;
            }
        }
        hits
    });
    Ok(counts.into_iter().sum::<usize>() as f64 / n_samples as f64)
}
