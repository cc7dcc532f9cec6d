//! Score-deviation curves between two denoisers, and nearest-neighbor lookup
//! of generated samples in the dataset.
//!
//! Two backward trajectories are simulated per seed: one stepping with the
//! first denoiser (the "learned" stand-in), one with the second (the
//! optimum). Along each trajectory's states the pointwise deviation
//! |den_a(x) - den_b(x)| is averaged over the batch, giving one curve per
//! denoised sequence. The deviation is symmetric in the two denoisers, so the
//! two curves sharing a state sequence carry equal values; all four are named
//! so downstream consumers can pick sequences explicitly.

use rayon::prelude::*;

use crate::dataset::PointSet;
use crate::denoiser::Denoiser;
use crate::error::{Error, Result};
use crate::math;
use crate::rng;
use crate::sampler::{self, Solver};
use crate::schedule::TimeGrid;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CurveFamily {
    /// den_a evaluated along the den_b-stepped (optimal) trajectory.
    ROnOptTraj,
    /// den_b evaluated along the den_a-stepped trajectory.
    ROptOnTraj,
    /// den_a evaluated along its own trajectory.
    ROnTraj,
    /// den_b evaluated along its own trajectory.
    ROptOnOptTraj,
}

impl CurveFamily {
    pub fn as_str(&self) -> &'static str {
        match self {
            CurveFamily::ROnOptTraj => "r_on_opt_traj",
            CurveFamily::ROptOnTraj => "ropt_on_traj",
            CurveFamily::ROnTraj => "r_on_traj",
            CurveFamily::ROptOnOptTraj => "ropt_on_opt_traj",
        }
    }
}

/// Mean deviation per grid time, aligned from s_N down to s_1.
#[derive(Debug, Clone)]
pub struct DeviationCurve {
    pub family: CurveFamily,
    pub points: Vec<(f64, f64)>,
}

/// Simulate `n_traj` seeded trajectory pairs and measure the mean pointwise
/// denoiser deviation along both state sequences.
pub fn deviation_curves(
    den_a: &Denoiser,
    den_b: &Denoiser,
    grid: &TimeGrid,
    n_traj: usize,
    solver: Solver,
    seed: u64,
) -> Result<Vec<DeviationCurve>> {
    if den_a.dim() != den_b.dim() {
        return Err(Error::DimensionMismatch { expected: den_a.dim(), got: den_b.dim() });
    }
    if n_traj == 0 {
        return Err(Error::InvalidParam("need at least one trajectory".into()));
    }
    let n_steps = grid.n_steps();
    let per_traj: Vec<(Vec<f64>, Vec<f64>)> = (0..n_traj)
        .into_par_iter()
        .map(|i| -> Result<(Vec<f64>, Vec<f64>)> {
            let traj_seed = rng::stream_seed(seed, i as u64);
            let x_init = sampler::draw_initial(den_a.dim(), grid, traj_seed);
            let traj_a = sampler::solve(den_a, grid, &x_init, solver, traj_seed)?;
            let traj_b = sampler::solve(den_b, grid, &x_init, solver, traj_seed)?;
            let mut dev_a = Vec::with_capacity(n_steps);
            let mut dev_b = Vec::with_capacity(n_steps);
            for k in 0..n_steps {
                // States at s > 0; the denoised record holds the stepping
                // denoiser's output at the same state.
                let (s, xa) = &traj_a.states[k];
                dev_a.push(math::dist(&traj_a.denoised[k].1, &den_b.evaluate(xa, *s)?));
                let (s, xb) = &traj_b.states[k];
                dev_b.push(math::dist(&den_a.evaluate(xb, *s)?, &traj_b.denoised[k].1));
            }
            Ok((dev_a, dev_b))
        })
        .collect::<Result<_>>()?;

    let mut on_traj = vec![0.0; n_steps];
    let mut on_opt = vec![0.0; n_steps];
    for (dev_a, dev_b) in &per_traj {
        for k in 0..n_steps {
            on_traj[k] += dev_a[k];
            on_opt[k] += dev_b[k];
        }
    }
    let scale = 1.0 / n_traj as f64;
    let times: Vec<f64> = grid.values()[1..=n_steps].iter().rev().copied().collect();
    let attach = |devs: &[f64]| -> Vec<(f64, f64)> {
        times.iter().zip(devs).map(|(s, d)| (*s, d * scale)).collect()
    };
    Ok(vec![
        DeviationCurve { family: CurveFamily::ROnOptTraj, points: attach(&on_opt) },
        DeviationCurve { family: CurveFamily::ROptOnTraj, points: attach(&on_traj) },
        DeviationCurve { family: CurveFamily::ROnTraj, points: attach(&on_traj) },
        DeviationCurve { family: CurveFamily::ROptOnOptTraj, points: attach(&on_opt) },
    ])
}

/// The k nearest support rows to `query` by Euclidean distance, distances
/// ascending, ties broken by lowest row index.
pub fn knn(ps: &PointSet, query: &[f64], k: usize) -> Result<Vec<(usize, f64)>> {
    if query.len() != ps.d() {
        return Err(Error::DimensionMismatch { expected: ps.d(), got: query.len() });
    }
    if k == 0 || k > ps.n() {
        return Err(Error::InvalidParam(format!(
            "k = {k} outside [1, {}]",
            ps.n()
        )));
    }
    let mut scored: Vec<(f64, usize)> = ps
        .rows()
        .enumerate()
        .map(|(i, row)| (math::dist_sq(query, row), i))
        .collect();
    scored.sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    Ok(scored[..k].iter().map(|&(d, i)| (i, d.sqrt())).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset;
    use crate::schedule::{build_grid, GridKind};

    fn grid() -> TimeGrid {
        build_grid(GridKind::Polynomial, 0.002, 80.0, 7.0, 12).unwrap()
    }

    #[test]
    fn identical_denoisers_give_zero_curves() {
        let ps = dataset::gen_gmm(&[vec![0.0, 0.0], vec![3.0, 3.0]], 0.2, 10, 5).unwrap();
        let a = Denoiser::optimal(ps.clone());
        let b = Denoiser::optimal(ps);
        let curves = deviation_curves(&a, &b, &grid(), 4, Solver::Euler, 1).unwrap();
        assert_eq!(curves.len(), 4);
        for c in &curves {
            assert_eq!(c.points.len(), 12);
            for (_, d) in &c.points {
                assert!(*d <= 1e-12);
            }
        }
    }

    #[test]
    fn subsampled_deviation_at_top_is_the_mean_gap() {
        // At sigma = s_N both denoisers output roughly their support means.
        let ps = dataset::gen_gmm(&[vec![1.0, -1.0]], 0.5, 64, 8).unwrap();
        let sub = Denoiser::subsampled(ps.clone(), 0.5, 3).unwrap();
        let full_mean = dataset::dataset_mean(&ps);
        let sub_rows: Vec<Vec<f64>> =
            sub.active_rows().iter().map(|&i| ps.row(i).to_vec()).collect();
        let sub_ps = crate::PointSet::new(sub_rows).unwrap();
        let sub_mean = dataset::dataset_mean(&sub_ps);
        let expected = math::dist(&sub_mean, &full_mean);

        let opt = Denoiser::optimal(ps);
        let curves = deviation_curves(&sub, &opt, &grid(), 8, Solver::Euler, 2).unwrap();
        let at_top = curves[2].points[0];
        assert_eq!(at_top.0, 80.0);
        assert!(
            (at_top.1 - expected).abs() <= 0.05 * expected.max(1e-3) + 1e-4,
            "deviation {} vs mean gap {expected}",
            at_top.1
        );
    }

    #[test]
    fn deviation_grows_with_noise_amplitude() {
        let ps = dataset::gen_gmm(&[vec![0.0, 0.0], vec![4.0, 0.0]], 0.3, 12, 7).unwrap();
        let opt = Denoiser::optimal(ps.clone());
        let g = grid();
        let mut means = Vec::new();
        for amplitude in [0.0, 0.1, 1.0] {
            let noised = Denoiser::weight_noised(ps.clone(), amplitude, 55).unwrap();
            let curves = deviation_curves(&noised, &opt, &g, 8, Solver::Euler, 3).unwrap();
            let mean: f64 = curves[2].points.iter().map(|(_, d)| d).sum::<f64>() / 12.0;
            means.push(mean);
        }
        assert!(means[0] <= 1e-12);
        assert!(means[0] < means[1] && means[1] < means[2], "{means:?}");
    }

    #[test]
    fn swapping_denoisers_relabels_the_curves() {
        let ps = dataset::gen_gmm(&[vec![0.0], vec![2.0]], 0.2, 8, 13).unwrap();
        let noised = Denoiser::weight_noised(ps.clone(), 0.2, 5).unwrap();
        let opt = Denoiser::optimal(ps);
        let g = grid();
        let ab = deviation_curves(&noised, &opt, &g, 6, Solver::Euler, 9).unwrap();
        let ba = deviation_curves(&opt, &noised, &g, 6, Solver::Euler, 9).unwrap();
        // a's own trajectory in ab is b's "optimal" trajectory in ba.
        for (x, y) in ab[2].points.iter().zip(&ba[0].points) {
            assert_eq!(x, y);
        }
        for (x, y) in ab[0].points.iter().zip(&ba[2].points) {
            assert_eq!(x, y);
        }
    }

    #[test]
    fn final_sample_attraction() {
        // The optimal flow lands on a data row; the weight-noised one lands
        // near a mode without reaching it.
        let ps = dataset::gen_gmm(&[vec![-3.0, 0.0], vec![3.0, 0.0]], 0.05, 20, 40).unwrap();
        let g = build_grid(GridKind::Polynomial, 0.002, 80.0, 7.0, 18).unwrap();
        let opt = Denoiser::optimal(ps.clone());
        let noised = Denoiser::weight_noised(ps.clone(), 0.5, 77).unwrap();
        for i in 0..4u64 {
            let seed = rng::stream_seed(500, i);
            let x_init = sampler::draw_initial(2, &g, seed);
            let opt_final = sampler::solve(&opt, &g, &x_init, Solver::Euler, seed).unwrap();
            let nn = knn(&ps, opt_final.final_state(), 1).unwrap();
            assert!(nn[0].1 <= 1e-6, "optimal final sample {} from data", nn[0].1);
            let noised_final =
                sampler::solve(&noised, &g, &x_init, Solver::Euler, seed).unwrap();
            let nn = knn(&ps, noised_final.final_state(), 1).unwrap();
            assert!(nn[0].1 > 0.0, "noised final sample fell exactly on data");
        }
    }

    #[test]
    fn knn_examples() {
        let ps = crate::PointSet::new(vec![vec![-1.0], vec![1.0]]).unwrap();
        let exact = knn(&ps, &[1.0], 1).unwrap();
        assert_eq!(exact, vec![(1, 0.0)]);
        let both = knn(&ps, &[0.2], 2).unwrap();
        assert_eq!(both[0].0, 1);
        assert!((both[0].1 - 0.8).abs() <= 1e-15);
        assert_eq!(both[1].0, 0);
        assert!((both[1].1 - 1.2).abs() <= 1e-15);
        assert!(knn(&ps, &[0.0], 0).is_err());
        assert!(knn(&ps, &[0.0], 3).is_err());
    }

    #[test]
    fn knn_distances_ascend_and_ties_prefer_low_index() {
        let ps = crate::PointSet::new(vec![
            vec![0.0, 1.0],
            vec![1.0, 0.0],
            vec![0.0, -1.0],
            vec![2.0, 2.0],
        ])
        .unwrap();
        let all = knn(&ps, &[0.0, 0.0], 4).unwrap();
        for w in all.windows(2) {
            assert!(w[0].1 <= w[1].1);
        }
        // Rows 0, 1, 2 are all at distance 1; index order breaks the tie.
        assert_eq!(all[0].0, 0);
        assert_eq!(all[1].0, 1);
        assert_eq!(all[2].0, 2);
    }
}
