//! Monte Carlo sweeps over the algorithm parameters.
//!
//! A sweep is a list of grid points, each run for a fixed number of
//! replicates. Replicate `r` of grid point `g` draws all of its randomness from
//! [`substream`]`(base_seed, g, r)`, so the aggregated statistics do not depend
//! on how many worker threads execute the sweep.

mod config;
mod plot;
mod report;

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{from_rows, Matrix};
use crate::rng::substream;
use crate::sde::{DynamicsModel, DEFAULT_DT, DEFAULT_OVERFLOW_BOUND};
use crate::stabilizer::{run_algorithm1, FailureReason, StabilizationConfig, StabilizationOutcome};

pub use config::{RunFile, SweepFile};
pub use plot::{render_plot, render_svg, Metric};
pub use report::{read_csv, write_csv, write_csv_to, CsvRow, CSV_HEADER};

/// Piece length of the dither used throughout the experiments.
pub const DEFAULT_EPSILON: f64 = 0.2;
pub const DEFAULT_REPLICATES: usize = 100;

/// The explosive three-state, two-input test system with `C = I₃`.
pub fn default_truth() -> DynamicsModel {
    let a = from_rows(&[
        &[-0.46, 0.06, 0.11],
        &[-0.45, 0.27, 0.27],
        &[0.20, 0.18, 0.19],
    ]);
    let b = from_rows(&[&[-0.40, 0.44], &[0.08, -0.48], &[-0.43, -0.49]]);
    DynamicsModel::new(a, b, Matrix::identity(3, 3)).expect("static dimensions are consistent")
}

/// A parameter that a sweep can vary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Param {
    Tau,
    SigmaL,
    SigmaEta,
    N,
    R,
}

impl Param {
    pub fn label(self) -> &'static str {
        match self {
            Param::Tau => "tau",
            Param::SigmaL => "sigma_L",
            Param::SigmaEta => "sigma_eta",
            Param::N => "n",
            Param::R => "r",
        }
    }

    pub fn value(self, point: &GridPoint) -> f64 {
        match self {
            Param::Tau => point.tau,
            Param::SigmaL => point.sigma_l,
            Param::SigmaEta => point.sigma_eta,
            Param::N => point.n as f64,
            Param::R => point.r,
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "tau" => Some(Param::Tau),
            "sigma_l" | "sigma_L" => Some(Param::SigmaL),
            "sigma_eta" => Some(Param::SigmaEta),
            "n" => Some(Param::N),
            "r" => Some(Param::R),
            _ => None,
        }
    }
}

/// Scalar parameters of one grid point. `Q = I` and `R = r·I`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub tau: f64,
    pub sigma_l: f64,
    pub sigma_eta: f64,
    pub n: usize,
    pub r: f64,
    pub epsilon: f64,
    pub dt: f64,
}

impl GridPoint {
    pub fn new(tau: f64, sigma_l: f64, sigma_eta: f64, n: usize, r: f64) -> Self {
        GridPoint {
            tau,
            sigma_l,
            sigma_eta,
            n,
            r,
            epsilon: DEFAULT_EPSILON,
            dt: DEFAULT_DT,
        }
    }

    pub fn config(&self, p: usize, q: usize, seed: u64) -> StabilizationConfig {
        StabilizationConfig {
            tau: self.tau,
            n_periods: self.n,
            sigma_l: self.sigma_l,
            sigma_eta: self.sigma_eta,
            epsilon: self.epsilon,
            dt: self.dt,
            q_weight: Matrix::identity(p, p),
            r_weight: Matrix::identity(q, q) * self.r,
            seed,
            overflow_bound: DEFAULT_OVERFLOW_BOUND,
            x0: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SweepSpec {
    pub name: String,
    /// Abscissa of the plots.
    pub swept: Param,
    /// Parameter that separates plot panels, if any.
    pub panel: Option<Param>,
    pub points: Vec<GridPoint>,
    pub replicates: usize,
    pub base_seed: u64,
    pub truth: DynamicsModel,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if self.points.is_empty() {
            return Err(Error::Config("sweep grid is empty".into()));
        }
        if self.replicates == 0 {
            return Err(Error::Config("replicates must be at least 1".into()));
        }
        if self.points.len() > u32::MAX as usize || self.replicates > u32::MAX as usize {
            return Err(Error::Config("sweep is too large".into()));
        }
        let (p, q) = (self.truth.p(), self.truth.q());
        for pt in &self.points {
            if !(pt.r > 0.0) {
                return Err(Error::Config(format!("r must be positive, got {}", pt.r)));
            }
            pt.config(p, q, self.base_seed).validate(p, q)?;
        }
        Ok(())
    }

    pub fn with_replicates(mut self, replicates: usize) -> Self {
        self.replicates = replicates;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.base_seed = seed;
        self
    }

    pub fn with_dt(mut self, dt: f64) -> Self {
        for pt in &mut self.points {
            pt.dt = dt;
        }
        self
    }
}

fn product(name: &str, swept: Param, panel: Option<Param>, points: Vec<GridPoint>) -> SweepSpec {
    SweepSpec {
        name: name.into(),
        swept,
        panel,
        points,
        replicates: DEFAULT_REPLICATES,
        base_seed: 0,
        truth: default_truth(),
    }
}

const TAU_GRID: [f64; 9] = [2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0, 10.0];
const SIGMA_L_GRID: [f64; 4] = [0.5, 0.75, 1.0, 1.25];
const SIGMA_ETA_GRID: [f64; 8] = [0.25, 0.5, 0.75, 1.0, 1.25, 1.5, 1.75, 2.0];
const FIG3_TAUS: [f64; 4] = [4.0, 6.0, 8.0, 10.0];
const PERIODS: [usize; 4] = [1, 2, 3, 4];

fn tau_by_sigma_l(name: &str) -> SweepSpec {
    let mut points = Vec::new();
    for &sigma_l in &SIGMA_L_GRID {
        for &n in &PERIODS {
            for &tau in &TAU_GRID {
                points.push(GridPoint::new(tau, sigma_l, 1.0, n, 1.0));
            }
        }
    }
    product(name, Param::Tau, Some(Param::SigmaL), points)
}

/// Estimation error versus `τ`, one panel per `σ_L`, `σ_η = 1`.
pub fn fig1_spec() -> SweepSpec {
    tau_by_sigma_l("fig1")
}

/// Success rate versus `τ`, one panel per `σ_L`, `σ_η = 1`.
pub fn fig2_spec() -> SweepSpec {
    tau_by_sigma_l("fig2")
}

/// Success rate versus `σ_η`, one panel per `τ`, `σ_L = 1`.
pub fn fig3_spec() -> SweepSpec {
    let mut points = Vec::new();
    for &tau in &FIG3_TAUS {
        for &n in &PERIODS {
            for &sigma_eta in &SIGMA_ETA_GRID {
                points.push(GridPoint::new(tau, 1.0, sigma_eta, n, 1.0));
            }
        }
    }
    product("fig3", Param::SigmaEta, Some(Param::Tau), points)
}

/// Success rate and sampled closed-loop abscissa versus `r` (`R = r·I`),
/// log-spaced over `[0.1, 10]`, with `σ_L = σ_η = 1` and `τ = 10`.
pub fn fig4_spec() -> SweepSpec {
    let mut points = Vec::new();
    for &n in &PERIODS {
        for k in 0..9 {
            let r = 10f64.powf(-1.0 + k as f64 / 4.0);
            points.push(GridPoint::new(10.0, 1.0, 1.0, n, r));
        }
    }
    product("fig4", Param::R, None, points)
}

pub fn fig_spec(fig: u8) -> Result<SweepSpec> {
    match fig {
        1 => Ok(fig1_spec()),
        2 => Ok(fig2_spec()),
        3 => Ok(fig3_spec()),
        4 => Ok(fig4_spec()),
        _ => Err(Error::Config(format!("unknown figure {fig}, expected 1-4"))),
    }
}

/// Quartile summary; `NaN` entries when there is no data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Summary {
    pub count: usize,
    pub mean: f64,
    pub q25: f64,
    pub median: f64,
    pub q75: f64,
}

impl Summary {
    pub fn of(values: &[f64]) -> Self {
        let mut v: Vec<f64> = values.iter().copied().filter(|x| x.is_finite()).collect();
        v.sort_by(f64::total_cmp);
        let mean = if v.is_empty() {
            f64::NAN
        } else {
            v.iter().sum::<f64>() / v.len() as f64
        };
        Summary {
            count: v.len(),
            mean,
            q25: quantile(&v, 0.25),
            median: quantile(&v, 0.5),
            q75: quantile(&v, 0.75),
        }
    }
}

/// Linear-interpolation quantile of sorted data.
pub fn quantile(sorted: &[f64], prob: f64) -> f64 {
    match sorted.len() {
        0 => f64::NAN,
        1 => sorted[0],
        len => {
            let pos = prob * (len - 1) as f64;
            let lo = pos.floor() as usize;
            let hi = pos.ceil() as usize;
            sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
        }
    }
}

/// Aggregated statistics of one grid point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepResult {
    pub sweep_id: String,
    pub swept: Param,
    pub panel: Option<Param>,
    pub point: GridPoint,
    pub replicates: usize,
    pub n_success: usize,
    pub success_rate: f64,
    pub n_care_failed: usize,
    pub n_overflow: usize,
    pub n_unstable: usize,
    /// Estimation error over replicates that produced a posterior sample.
    pub error: Summary,
    /// Spectral abscissa of the true closed loop among successes.
    pub abscissa: Summary,
    /// Spectral abscissa of the sampled closed loop `Â + B̂K̂`.
    pub sampled_abscissa: Summary,
    pub seed: u64,
    pub wall_time: f64,
}

impl SweepResult {
    pub fn aggregate(spec: &SweepSpec, point: &GridPoint, outcomes: &[StabilizationOutcome], wall_time: f64) -> Self {
        let count = |reason| outcomes.iter().filter(|o| o.failure_reason == reason).count();
        let n_success = outcomes.iter().filter(|o| o.success).count();
        let errors: Vec<f64> = outcomes.iter().filter_map(|o| o.estimation_error).collect();
        let abscissas: Vec<f64> = outcomes
            .iter()
            .filter(|o| o.success)
            .filter_map(|o| o.closed_loop_abscissa)
            .collect();
        let sampled: Vec<f64> = outcomes.iter().filter_map(|o| o.sampled_closed_loop_abscissa).collect();
        SweepResult {
            sweep_id: spec.name.clone(),
            swept: spec.swept,
            panel: spec.panel,
            point: *point,
            replicates: outcomes.len(),
            n_success,
            success_rate: n_success as f64 / outcomes.len() as f64,
            n_care_failed: count(FailureReason::CareFailed),
            n_overflow: count(FailureReason::Overflow),
            n_unstable: count(FailureReason::UnstableClosedLoop),
            error: Summary::of(&errors),
            abscissa: Summary::of(&abscissas),
            sampled_abscissa: Summary::of(&sampled),
            seed: spec.base_seed,
            wall_time,
        }
    }

    pub fn x(&self) -> f64 {
        self.swept.value(&self.point)
    }
}

fn run_point(spec: &SweepSpec, grid: usize, replicate: usize) -> Result<StabilizationOutcome> {
    let point = &spec.points[grid];
    let cfg = point.config(spec.truth.p(), spec.truth.q(), spec.base_seed);
    let mut rng = substream(spec.base_seed, grid as u32, replicate as u32);
    run_algorithm1(&spec.truth, &cfg, &mut rng)
}

/// Runs every replicate of every grid point on `parallelism` worker threads.
///
/// Statistics are reduced in `(grid, replicate)` order, so the output is the
/// same for every degree of parallelism.
pub fn run_sweep(spec: &SweepSpec, parallelism: usize) -> Result<Vec<SweepResult>> {
    spec.validate()?;
    let mut results = Vec::with_capacity(spec.points.len());
    for (grid, point) in spec.points.iter().enumerate() {
        let start = Instant::now();
        let outcomes = run_replicates(spec, grid, parallelism)?;
        results.push(SweepResult::aggregate(
            spec,
            point,
            &outcomes,
            start.elapsed().as_secs_f64(),
        ));
    }
    Ok(results)
}

#[cfg(feature = "parallel")]
fn run_replicates(spec: &SweepSpec, grid: usize, parallelism: usize) -> Result<Vec<StabilizationOutcome>> {
    use rayon::prelude::*;
    if parallelism <= 1 {
        return (0..spec.replicates).map(|r| run_point(spec, grid, r)).collect();
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(parallelism)
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    pool.install(|| {
        (0..spec.replicates)
            .into_par_iter()
            .map(|r| run_point(spec, grid, r))
            .collect()
    })
}

#[cfg(not(feature = "parallel"))]
fn run_replicates(spec: &SweepSpec, grid: usize, _parallelism: usize) -> Result<Vec<StabilizationOutcome>> {
    (0..spec.replicates).map(|r| run_point(spec, grid, r)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{eigenvalues, spectral_abscissa};

    #[test]
    fn truth_is_explosive_with_two_unstable_modes() {
        let truth = default_truth();
        assert_eq!((truth.p(), truth.q(), truth.d()), (3, 2, 3));
        assert!(spectral_abscissa(&truth.a).unwrap() > 0.0);
        let unstable = eigenvalues(&truth.a).unwrap().iter().filter(|z| z.re > 0.0).count();
        assert_eq!(unstable, 2);
    }

    #[test]
    fn canned_specs_fix_the_documented_parameters() {
        for spec in [fig1_spec(), fig2_spec()] {
            assert!(spec.points.iter().all(|p| p.sigma_eta == 1.0 && p.r == 1.0));
            assert_eq!(spec.points.len(), 9 * 4 * 4);
            spec.validate().unwrap();
        }
        let f3 = fig3_spec();
        assert!(f3.points.iter().all(|p| p.sigma_l == 1.0));
        assert!(f3.points.iter().all(|p| (0.25..=2.0).contains(&p.sigma_eta)));
        f3.validate().unwrap();
        let f4 = fig4_spec();
        assert!(f4
            .points
            .iter()
            .all(|p| p.sigma_l == 1.0 && p.sigma_eta == 1.0 && p.tau == 10.0));
        let rs: Vec<f64> = f4.points.iter().take(9).map(|p| p.r).collect();
        assert!((rs[0] - 0.1).abs() < 1e-12 && (rs[8] - 10.0).abs() < 1e-12);
        assert!((rs[4] - 1.0).abs() < 1e-12);
        f4.validate().unwrap();
        assert!(fig_spec(5).is_err());
    }

    #[test]
    fn quantiles_interpolate() {
        let s = Summary::of(&[4.0, 1.0, 3.0, 2.0]);
        assert_eq!(s.median, 2.5);
        assert_eq!(s.q25, 1.75);
        assert_eq!(s.q75, 3.25);
        assert_eq!(s.mean, 2.5);
        let e = Summary::of(&[]);
        assert!(e.median.is_nan() && e.count == 0);
    }

    #[test]
    fn single_replicate_rate_is_binary_and_breakdown_sums() {
        let mut spec = fig2_spec().with_replicates(1);
        spec.points.truncate(3);
        for r in run_sweep(&spec, 1).unwrap() {
            assert!(r.success_rate == 0.0 || r.success_rate == 1.0);
            assert_eq!(r.n_success + r.n_care_failed + r.n_overflow + r.n_unstable, r.replicates);
        }
    }

    #[test]
    fn empty_grid_is_rejected() {
        let mut spec = fig4_spec();
        spec.points.clear();
        assert!(matches!(run_sweep(&spec, 1), Err(Error::Config(_))));
        assert!(run_sweep(&fig4_spec().with_replicates(0), 1).is_err());
    }
}
