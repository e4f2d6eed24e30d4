//! The stabilization procedure end to end: randomized exploration, posterior
//! learning, one posterior draw, Riccati gain synthesis, and the check of
//! that gain against the true system.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Serialize, Serializer};

use crate::bayes::{build_posterior, estimation_error, sample_parameters, ParameterSample, Posterior};
use crate::control::{gain_from_solution, lqr_gain, serialize_rows, solve_care, DEFAULT_CARE_MAX_ITER, DEFAULT_CARE_TOL};
use crate::error::{Error, Result};
use crate::linalg::{ensure_finite, ensure_shape, operator_norm, spectral_abscissa, to_rows, Matrix};
use crate::rng::RoleStreams;
use crate::sde::{grid_steps, make_dither, norm, simulate, DynamicsModel, PolicySchedule, Trajectory, DEFAULT_DT, DEFAULT_OVERFLOW_BOUND};

/// Inputs of one stabilization run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StabilizationConfig {
    pub tau: f64,
    pub n_periods: usize,
    /// Standard deviation of the random feedback entries.
    pub sigma_l: f64,
    /// Scale applied to the dither signal.
    pub sigma_eta: f64,
    pub epsilon: f64,
    pub dt: f64,
    #[serde(serialize_with = "serialize_rows")]
    pub q_weight: Matrix,
    #[serde(serialize_with = "serialize_rows")]
    pub r_weight: Matrix,
    pub seed: u64,
    pub overflow_bound: f64,
    /// Initial state; `None` starts at rest.
    pub x0: Option<Vec<f64>>,
}

impl StabilizationConfig {
    /// Defaults for a system with `p` states and `q` inputs: `τ = 8`, `n = 4`,
    /// `σ_L = σ_η = 1`, `ε = 0.2`, `dt = 10⁻³`, `Q = I`, `R = I`.
    pub fn new(p: usize, q: usize) -> Self {
        StabilizationConfig {
            tau: 8.0,
            n_periods: 4,
            sigma_l: 1.0,
            sigma_eta: 1.0,
            epsilon: 0.2,
            dt: DEFAULT_DT,
            q_weight: Matrix::identity(p, p),
            r_weight: Matrix::identity(q, q),
            seed: 0,
            overflow_bound: DEFAULT_OVERFLOW_BOUND,
            x0: None,
        }
    }

    pub fn validate(&self, p: usize, q: usize) -> Result<()> {
        let cfg = |msg: String| Err(Error::Config(msg));
        if self.n_periods == 0 {
            return cfg("n_periods must be at least 1".into());
        }
        if !(self.sigma_l >= 0.0 && self.sigma_l.is_finite()) {
            return cfg(format!("sigma_L must be finite and non-negative, got {}", self.sigma_l));
        }
        if !(self.sigma_eta >= 0.0 && self.sigma_eta.is_finite()) {
            return cfg(format!("sigma_eta must be finite and non-negative, got {}", self.sigma_eta));
        }
        if !(self.epsilon > 0.0) {
            return cfg(format!("epsilon must be positive, got {}", self.epsilon));
        }
        if !(self.overflow_bound > 0.0) {
            return cfg("overflow_bound must be positive".into());
        }
        grid_steps(self.tau, self.dt, "tau")?;
        grid_steps(self.epsilon, self.dt, "epsilon")?;
        if self.tau > 0.0 {
            let limit = self.tau / (q as f64 * self.n_periods as f64);
            if self.epsilon >= limit {
                return cfg(format!(
                    "epsilon = {} must be below tau/(q n) = {limit}",
                    self.epsilon
                ));
            }
        }
        ensure_shape(&self.q_weight, p, p, "Q")?;
        ensure_shape(&self.r_weight, q, q, "R")?;
        ensure_finite(&self.q_weight, "Q")?;
        ensure_finite(&self.r_weight, "R")?;
        for (m, name) in [(&self.q_weight, "Q"), (&self.r_weight, "R")] {
            if nalgebra::linalg::Cholesky::new(crate::linalg::symmetrize(m)).is_none() {
                return cfg(format!("{name} must be symmetric positive definite"));
            }
        }
        if let Some(x0) = &self.x0 {
            if x0.len() != p || !x0.iter().all(|v| v.is_finite()) {
                return cfg(format!("x0 must hold {p} finite values"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureReason {
    None,
    CareFailed,
    Overflow,
    UnstableClosedLoop,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrajectorySummary {
    pub max_state_norm: f64,
    pub final_state_norm: f64,
    pub steps: usize,
    pub overflowed: bool,
}

impl TrajectorySummary {
    pub fn of(traj: &Trajectory) -> Self {
        TrajectorySummary {
            max_state_norm: traj.max_state_norm(),
            final_state_norm: norm(traj.final_state()),
            steps: traj.steps(),
            overflowed: traj.overflowed,
        }
    }
}

/// Result of one run. `success` holds exactly when a gain was synthesized and
/// the true closed loop `A★ + B★K̂` is Hurwitz.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StabilizationOutcome {
    /// Absent when the exploration overflowed before any learning.
    pub sample: Option<ParameterSample>,
    #[serde(serialize_with = "serialize_opt_rows")]
    pub gain: Option<Matrix>,
    pub success: bool,
    pub failure_reason: FailureReason,
    pub estimation_error: Option<f64>,
    /// Spectral abscissa of `A★ + B★K̂`.
    pub closed_loop_abscissa: Option<f64>,
    /// Spectral abscissa of `Â + B̂K̂`.
    pub sampled_closed_loop_abscissa: Option<f64>,
    pub trajectory_summary: TrajectorySummary,
    /// Solver message when the Riccati step failed.
    pub care_error: Option<String>,
}

fn serialize_opt_rows<S: Serializer>(m: &Option<Matrix>, s: S) -> std::result::Result<S::Ok, S::Error> {
    m.as_ref().map(to_rows).serialize(s)
}

/// `q × p` matrix of i.i.d. `N(0, σ_L²)` entries.
pub fn sample_feedback<R: Rng + ?Sized>(sigma_l: f64, p: usize, q: usize, rng: &mut R) -> Matrix {
    Matrix::from_fn(q, p, |_, _| sigma_l * rng.sample::<f64, _>(StandardNormal))
}

/// `(A★ + B★K Hurwitz, spectral abscissa of A★ + B★K)`.
pub fn is_stabilizing(truth: &DynamicsModel, gain: &Matrix) -> Result<(bool, f64)> {
    ensure_shape(gain, truth.q(), truth.p(), "gain")?;
    let abscissa = spectral_abscissa(&(&truth.a + &truth.b * gain))?;
    Ok((abscissa < 0.0, abscissa))
}

/// Data collected while exploring with random feedbacks.
#[derive(Debug, Clone)]
pub struct Exploration {
    pub feedbacks: Vec<Matrix>,
    pub schedule: PolicySchedule,
    pub trajectory: Trajectory,
}

/// Draws the period gains and dither and simulates the system over `[0, τ]`.
pub fn explore(truth: &DynamicsModel, cfg: &StabilizationConfig, streams: &mut RoleStreams) -> Result<Exploration> {
    let (p, q) = (truth.p(), truth.q());
    cfg.validate(p, q)?;
    let feedbacks: Vec<Matrix> = (0..cfg.n_periods)
        .map(|_| sample_feedback(cfg.sigma_l, p, q, &mut streams.feedback))
        .collect();
    let dither = make_dither(cfg.epsilon, cfg.tau, q, &mut streams.dither)?;
    let schedule = PolicySchedule {
        feedbacks: feedbacks.clone(),
        dither_scale: cfg.sigma_eta,
        dither,
    };
    let x0 = cfg.x0.clone().unwrap_or_else(|| vec![0.0; p]);
    let trajectory = simulate(truth, &schedule, cfg.dt, cfg.tau, &x0, &mut streams.noise, cfg.overflow_bound)?;
    Ok(Exploration {
        feedbacks,
        schedule,
        trajectory,
    })
}

/// Runs the full procedure. Riccati failures and overflow are reported in the
/// outcome; only configuration errors are returned as `Err`.
pub fn run_algorithm1<R: rand::RngCore>(
    truth: &DynamicsModel,
    cfg: &StabilizationConfig,
    rng: &mut R,
) -> Result<StabilizationOutcome> {
    run_algorithm1_with_posterior(truth, cfg, rng).map(|(outcome, _)| outcome)
}

/// [`run_algorithm1`], also returning the posterior the sample was drawn from.
pub fn run_algorithm1_with_posterior<R: rand::RngCore>(
    truth: &DynamicsModel,
    cfg: &StabilizationConfig,
    rng: &mut R,
) -> Result<(StabilizationOutcome, Option<Posterior>)> {
    let mut streams = RoleStreams::split(rng);
    let exploration = explore(truth, cfg, &mut streams)?;
    let summary = TrajectorySummary::of(&exploration.trajectory);
    if exploration.trajectory.overflowed {
        let outcome = StabilizationOutcome {
            sample: None,
            gain: None,
            success: false,
            failure_reason: FailureReason::Overflow,
            estimation_error: None,
            closed_loop_abscissa: None,
            sampled_closed_loop_abscissa: None,
            trajectory_summary: summary,
            care_error: None,
        };
        return Ok((outcome, None));
    }
    let posterior = build_posterior(&exploration.trajectory)?;
    let sample = sample_parameters(&posterior, &mut streams.posterior);
    let outcome = evaluate_sample(truth, sample, &cfg.q_weight, &cfg.r_weight, summary)?;
    Ok((outcome, Some(posterior)))
}

/// Synthesizes the LQR gain of `sample` and judges it on the true system.
pub fn evaluate_sample(
    truth: &DynamicsModel,
    sample: ParameterSample,
    q_weight: &Matrix,
    r_weight: &Matrix,
    summary: TrajectorySummary,
) -> Result<StabilizationOutcome> {
    let err = estimation_error(&sample, truth)?;
    let care = solve_care(
        &sample.a_hat,
        &sample.b_hat,
        q_weight,
        r_weight,
        DEFAULT_CARE_TOL,
        DEFAULT_CARE_MAX_ITER,
    );
    let sol = match care {
        Ok(sol) => sol,
        Err(e @ (Error::Dimension(_) | Error::Config(_))) => return Err(e),
        Err(e) => {
            return Ok(StabilizationOutcome {
                sample: Some(sample),
                gain: None,
                success: false,
                failure_reason: FailureReason::CareFailed,
                estimation_error: Some(err),
                closed_loop_abscissa: None,
                sampled_closed_loop_abscissa: None,
                trajectory_summary: summary,
                care_error: Some(e.to_string()),
            })
        }
    };
    let gain = gain_from_solution(&sample.b_hat, r_weight, &sol.p)?;
    let sampled = spectral_abscissa(&(&sample.a_hat + &sample.b_hat * &gain))?;
    let (stable, abscissa) = is_stabilizing(truth, &gain)?;
    Ok(StabilizationOutcome {
        sample: Some(sample),
        gain: Some(gain),
        success: stable,
        failure_reason: if stable {
            FailureReason::None
        } else {
            FailureReason::UnstableClosedLoop
        },
        estimation_error: Some(err),
        closed_loop_abscissa: Some(abscissa),
        sampled_closed_loop_abscissa: Some(sampled),
        trajectory_summary: summary,
        care_error: None,
    })
}

/// Margins of the sufficient accuracy conditions for stabilization.
///
/// With `D★ = A★ + B★K(A★, B★)` and `μ` its spectral abscissa, the sample is
/// accurate enough when `‖Â − A★‖₂ ≤ −cμ/√p` and
/// `‖B̂ − B★‖₂ ≤ −cμ/(√p ‖K(A★, B★)‖₂)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Theorem2Report {
    pub c: f64,
    /// Spectral abscissa of the optimal true closed loop.
    pub mu: f64,
    /// Whether `μ ≤ −1`, the stability-margin hypothesis.
    pub margin_hypothesis: bool,
    pub a_error: f64,
    pub a_bound: f64,
    pub a_condition: bool,
    pub b_error: f64,
    pub b_bound: f64,
    pub b_condition: bool,
    pub optimal_gain_norm: f64,
}

pub fn theorem2_check(
    truth: &DynamicsModel,
    sample: &ParameterSample,
    c: f64,
    q_weight: &Matrix,
    r_weight: &Matrix,
) -> Result<Theorem2Report> {
    if !(c > 0.0 && c.is_finite()) {
        return Err(Error::InvalidInput(format!("c must be positive, got {c}")));
    }
    ensure_shape(&sample.a_hat, truth.p(), truth.p(), "sampled A")?;
    ensure_shape(&sample.b_hat, truth.p(), truth.q(), "sampled B")?;
    let gain = lqr_gain(&truth.a, &truth.b, q_weight, r_weight)?;
    let mu = spectral_abscissa(&(&truth.a + &truth.b * &gain))?;
    let gain_norm = operator_norm(&gain)?;
    let root_p = (truth.p() as f64).sqrt();
    let a_bound = -c * mu / root_p;
    let b_bound = a_bound / gain_norm;
    let a_error = operator_norm(&(&sample.a_hat - &truth.a))?;
    let b_error = operator_norm(&(&sample.b_hat - &truth.b))?;
    Ok(Theorem2Report {
        c,
        mu,
        margin_hypothesis: mu <= -1.0,
        a_error,
        a_bound,
        a_condition: a_error <= a_bound,
        b_error,
        b_bound,
        b_condition: b_error <= b_bound,
        optimal_gain_norm: gain_norm,
    })
}
