//! Discrete time grids and their per-step convex-combination weights.
//!
//! A grid is the increasing sequence s_0 = 0 < s_1 = sigma_min < ... <
//! s_N = sigma_max at which the backward ODE is evaluated. Values are computed
//! in closed form per index, never cumulatively, and the two endpoints are
//! assigned exactly so no power round-trip error reaches them.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GridKind {
    /// s_n = (s_1^(1/rho) + (n-1)/(N-1) * (s_N^(1/rho) - s_1^(1/rho)))^rho
    Polynomial,
    /// s_n = sigma_min + (n-1)/(N-1) * (sigma_max - sigma_min)
    Linear,
    /// s_n = sigma_min + ((n-1)/(N-1))^2 * (sigma_max - sigma_min)
    Quadratic,
}

impl std::str::FromStr for GridKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "polynomial" => Ok(GridKind::Polynomial),
            "linear" => Ok(GridKind::Linear),
            "quadratic" => Ok(GridKind::Quadratic),
            other => Err(Error::InvalidParam(format!("unknown grid kind {other:?}"))),
        }
    }
}

impl std::fmt::Display for GridKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            GridKind::Polynomial => "polynomial",
            GridKind::Linear => "linear",
            GridKind::Quadratic => "quadratic",
        };
        f.write_str(s)
    }
}

/// The discrete schedule s_0 = 0 < s_1 < ... < s_N with its generating
/// parameters. `values()[n]` is s_n; length is N+1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub kind: GridKind,
    pub sigma_min: f64,
    pub sigma_max: f64,
    /// Curvature exponent; only the polynomial kind reads it.
    pub rho: f64,
    /// N, the number of backward steps. values has N+1 entries.
    pub steps: usize,
    values: Vec<f64>,
}

impl TimeGrid {
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// N
    pub fn n_steps(&self) -> usize {
        self.steps
    }

    /// s_N
    pub fn sigma_max(&self) -> f64 {
        self.sigma_max
    }
}

/// Build a time grid. Requires 0 < sigma_min < sigma_max and N >= 2;
/// the polynomial kind additionally requires rho > 0.
pub fn build_grid(
    kind: GridKind,
    sigma_min: f64,
    sigma_max: f64,
    rho: f64,
    n: usize,
) -> Result<TimeGrid> {
    if !(sigma_min > 0.0 && sigma_min.is_finite()) {
        return Err(Error::InvalidParam(format!("sigma_min {sigma_min} must be > 0")));
    }
    if !(sigma_max > sigma_min && sigma_max.is_finite()) {
        return Err(Error::InvalidParam(format!(
            "sigma_max {sigma_max} must exceed sigma_min {sigma_min}"
        )));
    }
    if n < 2 {
        return Err(Error::InvalidParam(format!("step count {n} must be >= 2")));
    }
    if kind == GridKind::Polynomial && !(rho > 0.0 && rho.is_finite()) {
        return Err(Error::InvalidParam(format!("rho {rho} must be > 0")));
    }

    let mut values = Vec::with_capacity(n + 1);
    values.push(0.0);
    let inv_rho = 1.0 / rho;
    let lo_pow = sigma_min.powf(inv_rho);
    let hi_pow = sigma_max.powf(inv_rho);
    for i in 1..=n {
        let u = (i - 1) as f64 / (n - 1) as f64;
        let s = if i == 1 {
            sigma_min
        } else if i == n {
            sigma_max
        } else {
            match kind {
                GridKind::Polynomial => (lo_pow + u * (hi_pow - lo_pow)).powf(rho),
                GridKind::Linear => sigma_min + u * (sigma_max - sigma_min),
                GridKind::Quadratic => sigma_min + u * u * (sigma_max - sigma_min),
            }
        };
        values.push(s);
    }
    for w in values.windows(2) {
        if !(w[1] > w[0]) {
            return Err(Error::InvalidParam(format!(
                "grid not strictly increasing: {} then {}",
                w[0], w[1]
            )));
        }
    }
    Ok(TimeGrid { kind, sigma_min, sigma_max, rho, steps: n, values })
}

/// Per-step weights w(n) = (s_{n+1} - s_n) / s_{n+1} for n = 1..N-1.
/// This is the convex-combination factor a single Euler step puts on the
/// mean-shift (denoising) output when moving from s_{n+1} to s_n.
pub fn weight_sequence(grid: &TimeGrid) -> Vec<f64> {
    let v = grid.values();
    (1..grid.n_steps())
        .map(|n| (v[n + 1] - v[n]) / v[n + 1])
        .collect()
}
