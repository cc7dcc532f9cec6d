//! The `diffgeo` command-line surface.
//!
//! Every subcommand writes its outputs plus a `manifest.json` (tool version,
//! argv, config, dataset hash, output list) under `--out`. Manifests contain
//! no timestamps or machine state: re-running the recorded argv reproduces
//! every output byte for byte. `DIFFGEO_THREADS` caps internal parallelism
//! (0 or unset picks the default).

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::dataset::{self, PointSet};
use crate::denoiser::Denoiser;
use crate::diagnose;
use crate::error::{Error, Result};
use crate::geometry::{self, TrajectoryKind};
use crate::interp::{self, Strategy};
use crate::meanshift;
use crate::rng;
use crate::sampler::{self, Solver, Trajectory};
use crate::schedule::{self, GridKind, TimeGrid};

#[derive(Parser)]
#[command(name = "diffgeo", version, about = "Exact-score diffusion sampling laboratory")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Solve backward PF-ODE trajectories over a dataset, write JSON lines
    Sample(SampleArgs),
    /// ODE-Jump: stop the backward solve at an index, return the denoised output
    Jump(JumpArgs),
    /// Geometry report (deviation, angles, magnitudes) for a stored trajectory
    Stats(StatsArgs),
    /// Print a time grid and its step weights as CSV
    Schedule(ScheduleArgs),
    /// Run mean-shift iterations to convergence from query points
    Meanshift(MeanshiftArgs),
    /// Interpolation variance sweep across dimensions
    Interp(InterpArgs),
    /// Score-deviation curves between a perturbed and the optimal denoiser
    Diagnose(DiagnoseArgs),
    /// Thin-shell statistics of an isotropic Gaussian
    Shell(ShellArgs),
}

#[derive(Args, Serialize, Clone)]
struct GridOpts {
    /// Grid kind: polynomial, linear, or quadratic
    #[arg(long, default_value = "polynomial")]
    kind: GridKind,
    #[arg(long, default_value_t = 0.002)]
    sigma_min: f64,
    #[arg(long, default_value_t = 80.0)]
    sigma_max: f64,
    /// Polynomial curvature exponent
    #[arg(long, default_value_t = 7.0)]
    rho: f64,
    /// Number of backward steps N
    #[arg(long, default_value_t = 18)]
    steps: usize,
}

impl GridOpts {
    fn build(&self) -> Result<TimeGrid> {
        schedule::build_grid(self.kind, self.sigma_min, self.sigma_max, self.rho, self.steps)
    }
}

#[derive(Args, Serialize)]
struct SampleArgs {
    /// Dataset spec: csv:<path>, point:<v1,..,vd>, pair:<v>, or
    /// "gmm:means=x,y;x,y std=s n=count seed=s"
    #[arg(long)]
    dataset: String,
    #[arg(long, default_value = "heun")]
    solver: Solver,
    #[command(flatten)]
    grid: GridOpts,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Number of trajectories
    #[arg(long, default_value_t = 1)]
    count: usize,
    /// Encode this comma-separated point through the forward perturbation
    /// instead of drawing the initial sample from pure noise
    #[arg(long)]
    encode: Option<String>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Args, Serialize)]
struct JumpArgs {
    #[arg(long)]
    dataset: String,
    #[arg(long, default_value = "heun")]
    solver: Solver,
    #[command(flatten)]
    grid: GridOpts,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 1)]
    count: usize,
    /// Grid index in [1, N] at which to jump to the denoising trajectory
    #[arg(long)]
    jump_index: usize,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Args, Serialize)]
struct StatsArgs {
    /// Trajectory JSON-lines file written by `sample`
    #[arg(long)]
    input: PathBuf,
    /// Which sequence to analyze: sampling or denoising
    #[arg(long, default_value = "sampling")]
    which: TrajectoryKind,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Args, Serialize)]
struct ScheduleArgs {
    #[command(flatten)]
    grid: GridOpts,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Args, Serialize)]
struct MeanshiftArgs {
    #[arg(long)]
    dataset: String,
    /// CSV of query points, one per row
    #[arg(long)]
    queries: PathBuf,
    #[arg(long)]
    bandwidth: f64,
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
    #[arg(long, default_value_t = 500)]
    max_iter: usize,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Args, Serialize)]
struct InterpArgs {
    #[arg(long)]
    strategy: Strategy,
    /// Comma-separated interpolation coefficients in [0, 1]
    #[arg(long, default_value = "0.1,0.3,0.5,0.7,0.9")]
    alpha_grid: String,
    /// Comma-separated dimensions to sweep
    #[arg(long, default_value = "2,64,1000")]
    dims: String,
    #[arg(long, default_value_t = 2000)]
    samples: usize,
    /// Latent scale T of the N(0, T^2 I) pairs
    #[arg(long, default_value_t = 1.0)]
    scale: f64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Args, Serialize)]
struct DiagnoseArgs {
    #[arg(long)]
    dataset: String,
    /// Perturbed denoiser standing in for a learned score:
    /// subsampled:<fraction> or noise:<amplitude>
    #[arg(long)]
    perturb: String,
    #[arg(long, default_value_t = 32)]
    trajectories: usize,
    #[arg(long, default_value = "heun")]
    solver: Solver,
    #[command(flatten)]
    grid: GridOpts,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Neighbors to report for each final sample
    #[arg(long, default_value_t = 5)]
    k: usize,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Args, Serialize)]
struct ShellArgs {
    #[arg(long)]
    dim: usize,
    #[arg(long, default_value_t = 80.0)]
    sigma: f64,
    #[arg(long, default_value_t = 100_000)]
    samples: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Also estimate P(|x + z| > |x|) for x of this norm
    #[arg(long)]
    expansion: Option<f64>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

/// Entry point behind the binary: parse, dispatch, map errors to exit codes.
/// Argument errors exit 2 with usage; runtime errors exit 1 with a one-line
/// diagnostic.
pub fn run<I: IntoIterator<Item = String>>(argv: I) -> i32 {
    configure_threads();
    let args: Vec<String> = argv.into_iter().collect();
    let cli = match Cli::try_parse_from(&args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 2,
            };
            let _ = e.print();
            return code;
        }
    };
    let tail: Vec<String> = args.into_iter().skip(1).collect();
    match dispatch(cli.cmd, &tail) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

fn configure_threads() {
    if let Ok(v) = std::env::var("DIFFGEO_THREADS") {
        if let Ok(n) = v.parse::<usize>() {
            if n > 0 {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
        }
    }
}

fn dispatch(cmd: Cmd, argv: &[String]) -> Result<()> {
    match cmd {
        Cmd::Sample(a) => cmd_sample(a, argv),
        Cmd::Jump(a) => cmd_jump(a, argv),
        Cmd::Stats(a) => cmd_stats(a, argv),
        Cmd::Schedule(a) => cmd_schedule(a, argv),
        Cmd::Meanshift(a) => cmd_meanshift(a, argv),
        Cmd::Interp(a) => cmd_interp(a, argv),
        Cmd::Diagnose(a) => cmd_diagnose(a, argv),
        Cmd::Shell(a) => cmd_shell(a, argv),
    }
}

/// Parse a dataset spec. Forms:
/// - `csv:<path>` — the first line is treated as a header iff it does not
///   parse as numbers
/// - `point:<v1,...,vd>` — a single point
/// - `pair:<v>` — the 1-D pair {-v, +v}
/// - `gmm:means=x,y;x,y std=<s> n=<per mode> seed=<s>` — synthetic mixture
pub fn parse_dataset_spec(spec: &str) -> Result<PointSet> {
    let (kind, rest) = spec
        .split_once(':')
        .ok_or_else(|| Error::SpecParse(format!("{spec:?} has no `kind:` prefix")))?;
    match kind {
        "csv" => {
            let first = fs::read_to_string(rest)
                .map_err(|source| Error::Io { path: PathBuf::from(rest), source })?
                .lines()
                .next()
                .map(String::from)
                .unwrap_or_default();
            let has_header = !first
                .split(',')
                .all(|cell| cell.trim().parse::<f64>().is_ok());
            dataset::load_csv(rest, has_header)
        }
        "point" => PointSet::new(vec![parse_floats(rest)?]),
        "pair" => {
            let v: f64 = rest
                .trim()
                .parse()
                .map_err(|_| Error::SpecParse(format!("pair value {rest:?}")))?;
            PointSet::new(vec![vec![-v], vec![v]])
        }
        "gmm" => parse_gmm_spec(rest),
        other => Err(Error::SpecParse(format!("unknown dataset kind {other:?}"))),
    }
}

fn parse_floats(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|tok| {
            tok.trim()
                .parse::<f64>()
                .map_err(|_| Error::SpecParse(format!("bad number {tok:?}")))
        })
        .collect()
}

fn parse_gmm_spec(rest: &str) -> Result<PointSet> {
    let mut means: Option<Vec<Vec<f64>>> = None;
    let mut std: Option<f64> = None;
    let mut n: Option<usize> = None;
    let mut seed: u64 = 0;
    for tok in rest.split_whitespace() {
        let (key, val) = tok
            .split_once('=')
            .ok_or_else(|| Error::SpecParse(format!("expected key=value, got {tok:?}")))?;
        match key {
            "means" => {
                means = Some(
                    val.split(';')
                        .map(parse_floats)
                        .collect::<Result<Vec<_>>>()?,
                );
            }
            "std" => {
                std = Some(val.parse().map_err(|_| {
                    Error::SpecParse(format!("bad std {val:?}"))
                })?);
            }
            "n" => {
                n = Some(val.parse().map_err(|_| {
                    Error::SpecParse(format!("bad n {val:?}"))
                })?);
            }
            "seed" => {
                seed = val.parse().map_err(|_| {
                    Error::SpecParse(format!("bad seed {val:?}"))
                })?;
            }
            other => return Err(Error::SpecParse(format!("unknown gmm key {other:?}"))),
        }
    }
    let means = means.ok_or_else(|| Error::SpecParse("gmm needs means=".into()))?;
    let std = std.ok_or_else(|| Error::SpecParse("gmm needs std=".into()))?;
    let n = n.ok_or_else(|| Error::SpecParse("gmm needs n=".into()))?;
    dataset::gen_gmm(&means, std, n, seed)
}

#[derive(Serialize)]
struct Manifest<'a, C: Serialize> {
    tool: &'static str,
    version: &'static str,
    command: &'static str,
    argv: &'a [String],
    #[serde(skip_serializing_if = "Option::is_none")]
    dataset_hash: Option<String>,
    outputs: Vec<String>,
    config: &'a C,
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|source| Error::Io { path: path.to_path_buf(), source })
}

fn prepare_out(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|source| Error::Io { path: dir.to_path_buf(), source })
}

fn write_manifest<C: Serialize>(
    out: &Path,
    command: &'static str,
    argv: &[String],
    dataset_hash: Option<u64>,
    outputs: Vec<String>,
    config: &C,
) -> Result<()> {
    let manifest = Manifest {
        tool: "diffgeo",
        version: env!("CARGO_PKG_VERSION"),
        command,
        argv,
        dataset_hash: dataset_hash.map(|h| format!("{h:016x}")),
        outputs,
        config,
    };
    let mut text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    text.push('\n');
    write_text(&out.join("manifest.json"), &text)
}

fn fmt_row(values: &[f64]) -> String {
    values.iter().map(|v| format!("{v}")).collect::<Vec<_>>().join(",")
}

fn solve_batch(
    ps: &PointSet,
    grid: &TimeGrid,
    solver: Solver,
    seed: u64,
    count: usize,
    encode: Option<&[f64]>,
) -> Result<Vec<Trajectory>> {
    let den = Denoiser::optimal(ps.clone());
    (0..count)
        .map(|i| {
            let traj_seed = rng::stream_seed(seed, i as u64);
            let x_init = match encode {
                Some(x) => sampler::perturb_forward(x, grid.sigma_max(), traj_seed),
                None => sampler::draw_initial(ps.d(), grid, traj_seed),
            };
            sampler::solve(&den, grid, &x_init, solver, traj_seed)
        })
        .collect()
}

fn cmd_sample(a: SampleArgs, argv: &[String]) -> Result<()> {
    let ps = parse_dataset_spec(&a.dataset)?;
    let grid = a.grid.build()?;
    let encode = a.encode.as_deref().map(parse_floats).transpose()?;
    prepare_out(&a.out)?;
    let trajectories =
        solve_batch(&ps, &grid, a.solver, a.seed, a.count, encode.as_deref())?;
    let hash = ps.content_hash();
    let mut outputs = Vec::new();
    for (i, traj) in trajectories.iter().enumerate() {
        let name = format!("trajectory_{i:03}.jsonl");
        write_text(&a.out.join(&name), &traj.to_jsonl(hash))?;
        outputs.push(name);
    }
    write_manifest(&a.out, "sample", argv, Some(hash), outputs, &a)?;
    println!(
        "wrote {} trajectories (nfe {}) to {}; trajectory 0 final state: {}",
        trajectories.len(),
        trajectories[0].nfe,
        a.out.display(),
        fmt_row(trajectories[0].final_state()),
    );
    Ok(())
}

fn cmd_jump(a: JumpArgs, argv: &[String]) -> Result<()> {
    let ps = parse_dataset_spec(&a.dataset)?;
    let grid = a.grid.build()?;
    prepare_out(&a.out)?;
    let den = Denoiser::optimal(ps.clone());
    let mut rows = Vec::with_capacity(a.count);
    for i in 0..a.count {
        let traj_seed = rng::stream_seed(a.seed, i as u64);
        let x_init = sampler::draw_initial(ps.d(), &grid, traj_seed);
        rows.push(sampler::ode_jump(&den, &grid, &x_init, a.solver, a.jump_index)?);
    }
    let mut csv = String::new();
    for row in &rows {
        csv.push_str(&fmt_row(row));
        csv.push('\n');
    }
    write_text(&a.out.join("jump_samples.csv"), &csv)?;
    write_manifest(
        &a.out,
        "jump",
        argv,
        Some(ps.content_hash()),
        vec!["jump_samples.csv".into()],
        &a,
    )?;
    println!(
        "wrote {} jump samples (index {}) to {}; first: {}",
        rows.len(),
        a.jump_index,
        a.out.display(),
        fmt_row(&rows[0]),
    );
    Ok(())
}

fn cmd_stats(a: StatsArgs, argv: &[String]) -> Result<()> {
    let text = fs::read_to_string(&a.input)
        .map_err(|source| Error::Io { path: a.input.clone(), source })?;
    let (traj, hash) = Trajectory::from_jsonl(&text)?;
    let report = geometry::trajectory_report(&traj, a.which)?;
    prepare_out(&a.out)?;
    let mut csv = String::from("s,chord_dev,angle_cos,magnitude,dist_to_final\n");
    for m in &report.per_step {
        let angle = m.angle_cos.map(|c| format!("{c}")).unwrap_or_default();
        csv.push_str(&format!(
            "{},{},{},{},{}\n",
            m.s, m.chord_dev, angle, m.magnitude, m.dist_to_final
        ));
    }
    write_text(&a.out.join("report.csv"), &csv)?;
    let summary = serde_json::json!({
        "endpoint_distance": report.endpoint_distance,
        "curvature_ratio": report.curvature_ratio,
        "monotone_violations": report.monotone_violations,
    });
    write_text(&a.out.join("summary.json"), &format!("{summary:#}\n"))?;
    write_manifest(
        &a.out,
        "stats",
        argv,
        Some(hash),
        vec!["report.csv".into(), "summary.json".into()],
        &a,
    )?;
    println!(
        "curvature_ratio={} endpoint_distance={} violations(dist={},mag={})",
        report.curvature_ratio,
        report.endpoint_distance,
        report.monotone_violations.dist_to_final,
        report.monotone_violations.magnitude,
    );
    Ok(())
}

fn schedule_csv(grid: &TimeGrid) -> String {
    let weights = schedule::weight_sequence(grid);
    let mut csv = String::from("n,s_n,w_n\n");
    for (n, s) in grid.values().iter().enumerate() {
        let w = if n >= 1 && n < grid.n_steps() {
            format!("{}", weights[n - 1])
        } else {
            String::new()
        };
        csv.push_str(&format!("{n},{s},{w}\n"));
    }
    csv
}

fn cmd_schedule(a: ScheduleArgs, argv: &[String]) -> Result<()> {
    let grid = a.grid.build()?;
    let csv = schedule_csv(&grid);
    print!("{csv}");
    prepare_out(&a.out)?;
    write_text(&a.out.join("schedule.csv"), &csv)?;
    write_manifest(&a.out, "schedule", argv, None, vec!["schedule.csv".into()], &a)
}

fn cmd_meanshift(a: MeanshiftArgs, argv: &[String]) -> Result<()> {
    let ps = parse_dataset_spec(&a.dataset)?;
    let queries = dataset::load_csv(&a.queries, false)?;
    if queries.d() != ps.d() {
        return Err(Error::DimensionMismatch { expected: ps.d(), got: queries.d() });
    }
    prepare_out(&a.out)?;
    let mut csv = String::new();
    let header: Vec<String> = (0..ps.d()).map(|c| format!("m{c}")).collect();
    csv.push_str(&header.join(","));
    csv.push_str(",iterations,converged\n");
    let mut converged = 0usize;
    for q in queries.rows() {
        let out = meanshift::mean_shift_converge(&ps, q, a.bandwidth, a.tol, a.max_iter)?;
        converged += out.converged as usize;
        csv.push_str(&format!(
            "{},{},{}\n",
            fmt_row(&out.mode),
            out.iterations,
            out.converged as u8
        ));
    }
    write_text(&a.out.join("modes.csv"), &csv)?;
    write_manifest(
        &a.out,
        "meanshift",
        argv,
        Some(ps.content_hash()),
        vec!["modes.csv".into()],
        &a,
    )?;
    println!("converged {converged}/{} queries to {}", queries.n(), a.out.display());
    Ok(())
}

fn cmd_interp(a: InterpArgs, argv: &[String]) -> Result<()> {
    let alphas = parse_floats(&a.alpha_grid)?;
    let dims: Vec<usize> = a
        .dims
        .split(',')
        .map(|tok| {
            tok.trim()
                .parse::<usize>()
                .map_err(|_| Error::SpecParse(format!("bad dimension {tok:?}")))
        })
        .collect::<Result<_>>()?;
    prepare_out(&a.out)?;
    let mut csv = String::from("strategy,alpha,d,empirical_f,analytic_f\n");
    for (ai, &alpha) in alphas.iter().enumerate() {
        let sweep = interp::variance_sweep(
            a.strategy,
            alpha,
            &dims,
            a.samples,
            a.scale,
            rng::stream_seed(a.seed, ai as u64),
        )?;
        // Analytic slerp factor quoted at the high-dimensional angle pi/2.
        let analytic =
            interp::variance_factor(a.strategy, alpha, std::f64::consts::FRAC_PI_2)?;
        for point in sweep {
            csv.push_str(&format!(
                "{},{},{},{},{}\n",
                a.strategy, alpha, point.dim, point.empirical_f, analytic
            ));
        }
    }
    write_text(&a.out.join("interp.csv"), &csv)?;
    write_manifest(&a.out, "interp", argv, None, vec!["interp.csv".into()], &a)?;
    println!("wrote interpolation sweep ({} alphas x {} dims) to {}", alphas.len(), dims.len(), a.out.display());
    Ok(())
}

fn parse_perturb(spec: &str, ps: &PointSet, seed: u64) -> Result<Denoiser> {
    let (kind, val) = spec
        .split_once(':')
        .ok_or_else(|| Error::SpecParse(format!("perturb spec {spec:?} needs kind:value")))?;
    let v: f64 = val
        .parse()
        .map_err(|_| Error::SpecParse(format!("bad perturb value {val:?}")))?;
    match kind {
        "subsampled" => Denoiser::subsampled(ps.clone(), v, seed),
        "noise" => Denoiser::weight_noised(ps.clone(), v, seed),
        other => Err(Error::SpecParse(format!("unknown perturb kind {other:?}"))),
    }
}

fn cmd_diagnose(a: DiagnoseArgs, argv: &[String]) -> Result<()> {
    let ps = parse_dataset_spec(&a.dataset)?;
    let grid = a.grid.build()?;
    let perturbed = parse_perturb(&a.perturb, &ps, rng::stream_seed(a.seed, 0x9e1))?;
    let optimal = Denoiser::optimal(ps.clone());
    prepare_out(&a.out)?;
    let curves =
        diagnose::deviation_curves(&perturbed, &optimal, &grid, a.trajectories, a.solver, a.seed)?;
    let mut outputs = Vec::new();
    for curve in &curves {
        let name = format!("deviation_{}.csv", curve.family.as_str());
        let mut csv = String::from("s,mean_deviation\n");
        for (s, d) in &curve.points {
            csv.push_str(&format!("{s},{d}\n"));
        }
        write_text(&a.out.join(&name), &csv)?;
        outputs.push(name);
    }
    // Nearest neighbors of each perturbed-trajectory final sample.
    let mut knn_csv = String::from("trajectory,rank,row,distance\n");
    for i in 0..a.trajectories {
        let traj_seed = rng::stream_seed(a.seed, i as u64);
        let x_init = sampler::draw_initial(ps.d(), &grid, traj_seed);
        let traj = sampler::solve(&perturbed, &grid, &x_init, a.solver, traj_seed)?;
        for (rank, (row, dist)) in diagnose::knn(&ps, traj.final_state(), a.k)?.iter().enumerate()
        {
            knn_csv.push_str(&format!("{i},{rank},{row},{dist}\n"));
        }
    }
    write_text(&a.out.join("knn.csv"), &knn_csv)?;
    outputs.push("knn.csv".into());
    write_manifest(&a.out, "diagnose", argv, Some(ps.content_hash()), outputs, &a)?;
    println!(
        "wrote 4 deviation curves and knn report ({} trajectories) to {}",
        a.trajectories,
        a.out.display()
    );
    Ok(())
}

fn cmd_shell(a: ShellArgs, argv: &[String]) -> Result<()> {
    let stats = geometry::thin_shell_experiment(a.dim, a.sigma, a.samples, a.seed)?;
    let expansion = a
        .expansion
        .map(|norm| {
            let mut x = vec![0.0; a.dim];
            x[0] = norm;
            geometry::expansion_probability(&x, a.sigma, a.samples, rng::stream_seed(a.seed, 1))
        })
        .transpose()?;
    prepare_out(&a.out)?;
    let mut doc = serde_json::json!({
        "dim": a.dim,
        "sigma": a.sigma,
        "samples": a.samples,
        "mean_norm": stats.mean_norm,
        "std_norm": stats.std_norm,
        "mean_sq_norm": stats.mean_sq_norm,
        "var_sq_norm": stats.var_sq_norm,
    });
    if let Some(p) = expansion {
        doc["expansion_probability"] = serde_json::json!(p);
    }
    write_text(&a.out.join("shell.json"), &format!("{doc:#}\n"))?;
    write_manifest(&a.out, "shell", argv, None, vec!["shell.json".into()], &a)?;
    let mut line = format!(
        "mean_norm={} std_norm={} mean_sq_norm={} var_sq_norm={}",
        stats.mean_norm, stats.std_norm, stats.mean_sq_norm, stats.var_sq_norm
    );
    if let Some(p) = expansion {
        line.push_str(&format!(" expansion_probability={p}"));
    }
    println!("{line}");
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dataset_spec_point_and_pair() {
        let p = parse_dataset_spec("point:1,2").unwrap();
        assert_eq!((p.n(), p.d()), (1, 2));
        assert_eq!(p.row(0), &[1.0, 2.0]);
        let pair = parse_dataset_spec("pair:1").unwrap();
        assert_eq!(pair.row(0), &[-1.0]);
        assert_eq!(pair.row(1), &[1.0]);
    }

    #[test]
    fn dataset_spec_gmm() {
        let ps = parse_dataset_spec("gmm:means=0,0;5,5 std=0.1 n=100 seed=7").unwrap();
        assert_eq!((ps.n(), ps.d()), (200, 2));
    }

    #[test]
    fn dataset_spec_errors_name_the_token() {
        match parse_dataset_spec("gmm:means=0,0 std=zzz n=10") {
            Err(Error::SpecParse(msg)) => assert!(msg.contains("zzz"), "{msg}"),
            other => panic!("expected spec error, got {other:?}"),
        }
        assert!(parse_dataset_spec("nope").is_err());
        assert!(parse_dataset_spec("orbit:1,2").is_err());
    }

    #[test]
    fn csv_spec_sniffs_headers() {
        let dir = tempfile::tempdir().unwrap();
        let plain = dir.path().join("plain.csv");
        fs::write(&plain, "1,2\n3,4\n").unwrap();
        let with_header = dir.path().join("hdr.csv");
        fs::write(&with_header, "x,y\n1,2\n3,4\n").unwrap();
        let a = parse_dataset_spec(&format!("csv:{}", plain.display())).unwrap();
        let b = parse_dataset_spec(&format!("csv:{}", with_header.display())).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn schedule_csv_layout() {
        let grid = schedule::build_grid(GridKind::Linear, 1.0, 3.0, 1.0, 3).unwrap();
        let csv = schedule_csv(&grid);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "n,s_n,w_n");
        assert_eq!(lines[1], "0,0,");
        assert_eq!(lines[2], "1,1,0.5");
        assert_eq!(lines[4], "3,3,");
        assert_eq!(lines.len(), 6);
    }
}
