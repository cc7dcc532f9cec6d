//! A numerical laboratory for the geometry of variance-exploding diffusion
//! sampling with exact, dataset-derived scores.
//!
//! Over a finite point set the Gaussian-smoothed density, its score, and the
//! Bayes-optimal denoiser all have closed forms: the denoiser output is a
//! softmax-weighted convex combination of the data points. That makes the
//! empirical probability-flow ODE
//!
//! ```text
//! dx/dt = -(r(x; t) - x) / t
//! ```
//!
//! exactly simulable, so the geometric structure of its sampling and
//! denoising trajectories (quasi-linearity, monotone convergence, magnitude
//! shrinkage/expansion, the mean-shift equivalence of one Euler step, ODE-Jump
//! sampling, thin-shell concentration, interpolation variance) can be measured
//! rather than approximated with a trained network.
//!
//! Modules map to the moving parts:
//!
//! - [`dataset`]: point sets, CSV I/O, seeded synthetic mixtures
//! - [`schedule`]: discrete time grids and their per-step weights
//! - [`denoiser`]: the optimal denoiser, mixture density/score, perturbed variants
//! - [`sampler`]: Euler/Heun PF-ODE solves, forward perturbation, ODE-Jump
//! - [`meanshift`]: Gaussian mean shift and the annealed step
//! - [`geometry`]: trajectory deviation metrics and concentration experiments
//! - [`interp`]: latent interpolation strategies and variance factors
//! - [`diagnose`]: score-deviation curves between two denoisers, kNN lookup
//! - [`cli`]: the `diffgeo` command-line surface

pub mod cli;
pub mod dataset;
pub mod denoiser;
pub mod diagnose;
pub mod error;
pub mod geometry;
pub mod interp;
pub mod meanshift;
pub mod reference;
pub mod rng;
pub mod sampler;
pub mod schedule;

mod math;

pub use dataset::PointSet;
pub use denoiser::Denoiser;
pub use error::{Error, Result};
pub use sampler::{Solver, Trajectory};
pub use schedule::{GridKind, TimeGrid};
