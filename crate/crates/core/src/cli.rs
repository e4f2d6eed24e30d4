//! `stabilize` command-line interface.
//!
//! Exit codes: 0 success, 1 configuration or usage error, 2 runtime error.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use crate::control::{gain_from_solution, riccati_operator, solve_care, DEFAULT_CARE_MAX_ITER, DEFAULT_CARE_TOL};
use crate::error::Error;
use crate::experiments::{
    default_truth, fig_spec, render_plot, run_sweep, write_csv, Metric, RunFile, SweepFile, SweepResult, SweepSpec,
};
use crate::linalg::{operator_norm, spectral_abscissa, to_rows, Matrix};
use crate::rng::{substream, RoleStreams};
use crate::stabilizer::{explore, run_algorithm1_with_posterior, StabilizationConfig};

pub const OUT_DIR_ENV: &str = "STABILIZE_OUT_DIR";

#[derive(Debug, Parser)]
#[command(name = "stabilize", version, about = "Learn a stabilizing feedback for an unknown stochastic linear system")]
struct Cli {
    /// Base random seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Replicates per sweep grid point.
    #[arg(long, global = true)]
    replicates: Option<usize>,
    /// Simulation time step.
    #[arg(long, global = true)]
    dt: Option<f64>,
    /// Output directory for sweep and simulation files.
    #[arg(long, global = true, env = OUT_DIR_ENV)]
    out_dir: Option<PathBuf>,
    /// Worker threads for sweeps (defaults to all cores).
    #[arg(long, global = true)]
    parallelism: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// One stabilization run; prints the outcome as JSON.
    RunOne(RunOneArgs),
    /// Monte Carlo sweep; writes CSV and SVG files.
    Sweep(SweepArgs),
    /// Simulates the exploration phase and writes the trajectory as CSV.
    Simulate(SimulateArgs),
    /// Solves the Riccati equation and reports the residual.
    CareCheck(CareArgs),
}

#[derive(Debug, Args)]
struct RunArgs {
    /// TOML file with run parameters; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long = "sigma-l")]
    sigma_l: Option<f64>,
    #[arg(long = "sigma-eta")]
    sigma_eta: Option<f64>,
    /// Number of feedback periods.
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    epsilon: Option<f64>,
    /// `R = r·I`.
    #[arg(long)]
    r: Option<f64>,
}

#[derive(Debug, Args)]
struct RunOneArgs {
    #[command(flatten)]
    run: RunArgs,
    /// Include the posterior mean and precision in the output.
    #[arg(long)]
    posterior: bool,
}

#[derive(Debug, Args)]
#[group(required = true, multiple = false)]
struct SweepSource {
    /// Canned figure sweep (1-4).
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=4))]
    fig: Option<u8>,
    /// TOML sweep description.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SweepArgs {
    #[command(flatten)]
    source: SweepSource,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[command(flatten)]
    run: RunArgs,
    /// Output file; `-` writes to stdout. Defaults to `<out-dir>/trajectory.csv`.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct CareArgs {
    /// Rows separated by `;`, entries by `,`. Defaults to the test system.
    #[arg(long)]
    a: Option<String>,
    #[arg(long)]
    b: Option<String>,
    /// Defaults to the identity.
    #[arg(long)]
    q: Option<String>,
    /// Defaults to the identity.
    #[arg(long)]
    r: Option<String>,
    #[arg(long, default_value_t = DEFAULT_CARE_TOL)]
    tol: f64,
}

enum Failure {
    Config(String),
    Runtime(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(_) | Error::InvalidInput(_) | Error::Dimension(_) => Failure::Config(e.to_string()),
            _ => Failure::Runtime(e.to_string()),
        }
    }
}

/// Parses `argv` (including the program name) and runs the command.
pub fn cli_main<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let mut stdout = std::io::stdout().lock();
    match dispatch(&cli, &mut stdout) {
        Ok(()) => 0,
        Err(Failure::Config(msg)) => {
            eprintln!("error: {msg}");
            1
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            2
        }
    }
}

fn dispatch(cli: &Cli, out: &mut dyn Write) -> Result<(), Failure> {
    match &cli.command {
        Command::RunOne(args) => run_one(cli, &args.run, args.posterior, out),
        Command::Sweep(args) => sweep(cli, args, out),
        Command::Simulate(args) => simulate_cmd(cli, args, out),
        Command::CareCheck(args) => care_check(args, out),
    }
}

fn build_config(cli: &Cli, args: &RunArgs) -> Result<StabilizationConfig, Failure> {
    let truth = default_truth();
    let mut cfg = StabilizationConfig::new(truth.p(), truth.q());
    if let Some(path) = &args.config {
        cfg = RunFile::load(path)?.apply(cfg)?;
    }
    let flags = RunFile {
        tau: args.tau,
        n_periods: args.n,
        sigma_l: args.sigma_l,
        sigma_eta: args.sigma_eta,
        epsilon: args.epsilon,
        dt: cli.dt,
        r: args.r,
        seed: cli.seed,
        ..RunFile::default()
    };
    let cfg = flags.apply(cfg)?;
    cfg.validate(truth.p(), truth.q())?;
    Ok(cfg)
}

fn write_out(out: &mut dyn Write, text: &str) -> Result<(), Failure> {
    out.write_all(text.as_bytes())
        .map_err(|e| Failure::Runtime(format!("cannot write output: {e}")))
}

fn run_one(cli: &Cli, args: &RunArgs, with_posterior: bool, out: &mut dyn Write) -> Result<(), Failure> {
    let cfg = build_config(cli, args)?;
    let truth = default_truth();
    let mut rng = substream(cfg.seed, 0, 0);
    let (outcome, posterior) = run_algorithm1_with_posterior(&truth, &cfg, &mut rng)?;
    let mut value = serde_json::to_value(&outcome).map_err(|e| Failure::Runtime(e.to_string()))?;
    if with_posterior {
        value["posterior"] = posterior.map_or(serde_json::Value::Null, |p| p.to_json());
    }
    value["config"] = serde_json::to_value(&cfg).map_err(|e| Failure::Runtime(e.to_string()))?;
    let text = serde_json::to_string_pretty(&value).map_err(|e| Failure::Runtime(e.to_string()))?;
    write_out(out, &format!("{text}\n"))
}

fn out_dir(cli: &Cli) -> Result<PathBuf, Failure> {
    let dir = cli.out_dir.clone().unwrap_or_else(|| PathBuf::from("results"));
    std::fs::create_dir_all(&dir)
        .map_err(|e| Failure::Config(format!("cannot create output directory {}: {e}", dir.display())))?;
    Ok(dir)
}

fn parallelism(cli: &Cli) -> usize {
    cli.parallelism
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
        .max(1)
}

fn metrics_for(spec: &SweepSpec) -> Vec<Metric> {
    match spec.name.as_str() {
        "fig1" => vec![Metric::ErrorMedian],
        "fig2" | "fig3" => vec![Metric::SuccessRate],
        "fig4" => vec![Metric::SuccessRate, Metric::SampledAbscissaMedian],
        _ => vec![Metric::SuccessRate, Metric::ErrorMedian],
    }
}

fn sweep(cli: &Cli, args: &SweepArgs, out: &mut dyn Write) -> Result<(), Failure> {
    let mut spec = match (&args.source.fig, &args.source.config) {
        (Some(fig), _) => fig_spec(*fig)?,
        (None, Some(path)) => SweepFile::load(path)?.to_spec()?,
        (None, None) => return Err(Failure::Config("either --fig or --config is required".into())),
    };
    if let Some(r) = cli.replicates {
        spec = spec.with_replicates(r);
    }
    if let Some(seed) = cli.seed {
        spec = spec.with_seed(seed);
    }
    if let Some(dt) = cli.dt {
        spec = spec.with_dt(dt);
    }
    let dir = out_dir(cli)?;
    let results = run_sweep(&spec, parallelism(cli))?;

    let csv_path = dir.join(format!("{}.csv", spec.name));
    write_csv(&results, &csv_path)?;
    let mut written = vec![csv_path];
    for metric in metrics_for(&spec) {
        for (suffix, panel) in panels(&spec, &results) {
            let path = dir.join(format!("{}_{}{suffix}.svg", spec.name, metric.slug()));
            render_plot(&panel, metric, &path)?;
            written.push(path);
        }
    }
    for r in &results {
        write_out(
            out,
            &format!(
                "{} tau={} sigma_L={} sigma_eta={} n={} r={}: success {:.2} ({} care failures, {} overflows, {} unstable), median error {:.4}\n",
                r.sweep_id, r.point.tau, r.point.sigma_l, r.point.sigma_eta, r.point.n, r.point.r,
                r.success_rate, r.n_care_failed, r.n_overflow, r.n_unstable, r.error.median
            ),
        )?;
    }
    for path in written {
        write_out(out, &format!("wrote {}\n", path.display()))?;
    }
    Ok(())
}

fn panels(spec: &SweepSpec, results: &[SweepResult]) -> Vec<(String, Vec<SweepResult>)> {
    let Some(panel) = spec.panel else {
        return vec![(String::new(), results.to_vec())];
    };
    let mut groups: BTreeMap<u64, Vec<SweepResult>> = BTreeMap::new();
    for r in results {
        groups.entry(panel.value(&r.point).to_bits()).or_default().push(r.clone());
    }
    let mut out: Vec<(f64, String, Vec<SweepResult>)> = groups
        .into_iter()
        .map(|(bits, rs)| {
            let v = f64::from_bits(bits);
            (v, format!("_{}={v}", panel.label()), rs)
        })
        .collect();
    out.sort_by(|a, b| a.0.total_cmp(&b.0));
    out.into_iter().map(|(_, s, rs)| (s, rs)).collect()
}

fn simulate_cmd(cli: &Cli, args: &SimulateArgs, out: &mut dyn Write) -> Result<(), Failure> {
    let cfg = build_config(cli, &args.run)?;
    let truth = default_truth();
    let mut rng = substream(cfg.seed, 0, 0);
    let mut streams = RoleStreams::split(&mut rng);
    let exploration = explore(&truth, &cfg, &mut streams)?;
    let traj = exploration.trajectory;
    match &args.output {
        Some(p) if p == Path::new("-") => {
            let mut buf = Vec::new();
            traj.write_csv(&mut buf)?;
            out.write_all(&buf)
                .map_err(|e| Failure::Runtime(format!("cannot write output: {e}")))?;
        }
        other => {
            let path = match other {
                Some(p) => p.clone(),
                None => out_dir(cli)?.join("trajectory.csv"),
            };
            let file = std::fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
            traj.write_csv(std::io::BufWriter::new(file))?;
            write_out(
                out,
                &format!(
                    "wrote {} ({} steps{})\n",
                    path.display(),
                    traj.steps(),
                    if traj.overflowed { ", overflowed" } else { "" }
                ),
            )?;
        }
    }
    Ok(())
}

/// Parses `"a,b;c,d"` into a row-major matrix.
pub fn parse_matrix(text: &str) -> crate::Result<Matrix> {
    let rows: Vec<Vec<f64>> = text
        .split(';')
        .map(|row| {
            row.split(',')
                .map(|v| {
                    v.trim()
                        .parse::<f64>()
                        .map_err(|_| Error::Config(format!("bad matrix entry {v:?}")))
                })
                .collect()
        })
        .collect::<crate::Result<_>>()?;
    crate::linalg::try_from_rows(&rows)
}

fn care_check(args: &CareArgs, out: &mut dyn Write) -> Result<(), Failure> {
    let truth = default_truth();
    let a = args.a.as_deref().map(parse_matrix).transpose()?.unwrap_or(truth.a);
    let b = args.b.as_deref().map(parse_matrix).transpose()?.unwrap_or(truth.b);
    let (p, q) = (a.nrows(), b.ncols());
    let qw = args.q.as_deref().map(parse_matrix).transpose()?.unwrap_or_else(|| Matrix::identity(p, p));
    let rw = args.r.as_deref().map(parse_matrix).transpose()?.unwrap_or_else(|| Matrix::identity(q, q));
    let sol = solve_care(&a, &b, &qw, &rw, args.tol, DEFAULT_CARE_MAX_ITER)?;
    let gain = gain_from_solution(&b, &rw, &sol.p)?;
    let residual = operator_norm(&riccati_operator(&a, &b, &qw, &rw, &sol.p)?)?;
    let abscissa = spectral_abscissa(&(&a + &b * &gain))?;
    let report = json!({
        "residual_norm": residual,
        "iterations": sol.iterations,
        "closed_loop_abscissa": abscissa,
        "hurwitz": abscissa < 0.0,
        "p": to_rows(&sol.p),
        "gain": to_rows(&gain),
    });
    let text = serde_json::to_string_pretty(&report).map_err(|e| Failure::Runtime(e.to_string()))?;
    write_out(out, &format!("{text}\n"))
}
