//! Dither generation and Euler–Maruyama simulation of the controlled SDE
//! `dx = (A x + B u) dt + C dW`.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::control::serialize_rows;
use crate::error::{Error, Result};
use crate::linalg::{ensure_finite, ensure_shape, ensure_square, Matrix};

pub const DEFAULT_DT: f64 = 1e-3;
pub const DEFAULT_OVERFLOW_BOUND: f64 = 1e8;

/// Relative tolerance for "is an integer multiple of dt".
const GRID_TOL: f64 = 1e-9;

/// True or estimated linear dynamics `(A, B, C)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DynamicsModel {
    #[serde(serialize_with = "serialize_rows")]
    pub a: Matrix,
    #[serde(serialize_with = "serialize_rows")]
    pub b: Matrix,
    #[serde(serialize_with = "serialize_rows")]
    pub c: Matrix,
}

impl DynamicsModel {
    pub fn new(a: Matrix, b: Matrix, c: Matrix) -> Result<Self> {
        ensure_square(&a, "A")?;
        let p = a.nrows();
        if b.nrows() != p || b.ncols() == 0 {
            return Err(Error::Dimension(format!("B must be {p}xq with q >= 1")));
        }
        if c.nrows() != p || c.ncols() == 0 {
            return Err(Error::Dimension(format!("C must be {p}xd with d >= 1")));
        }
        for (m, name) in [(&a, "A"), (&b, "B"), (&c, "C")] {
            ensure_finite(m, name)?;
        }
        Ok(DynamicsModel { a, b, c })
    }

    /// State dimension.
    pub fn p(&self) -> usize {
        self.a.nrows()
    }

    /// Input dimension.
    pub fn q(&self) -> usize {
        self.b.ncols()
    }

    /// Noise dimension.
    pub fn d(&self) -> usize {
        self.c.ncols()
    }
}

/// Piecewise-constant standard Gaussian excitation with pieces of length `epsilon`.
#[derive(Debug, Clone, PartialEq)]
pub struct DitherSignal {
    pub epsilon: f64,
    pub horizon: f64,
    pub values: Vec<Vec<f64>>,
}

impl DitherSignal {
    pub fn pieces(&self) -> usize {
        self.values.len()
    }

    /// Value at time `t`, or `None` past the last piece.
    pub fn value_at(&self, t: f64) -> Option<&[f64]> {
        if t < 0.0 {
            return None;
        }
        self.values
            .get((t / self.epsilon).floor() as usize)
            .map(Vec::as_slice)
    }
}

/// Draws one i.i.d. standard normal `q`-vector per piece of length `epsilon`
/// covering `[0, horizon)`.
pub fn make_dither<R: Rng + ?Sized>(epsilon: f64, horizon: f64, q: usize, rng: &mut R) -> Result<DitherSignal> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::Config(format!("dither piece length must be positive, got {epsilon}")));
    }
    if !(horizon >= 0.0 && horizon.is_finite()) {
        return Err(Error::Config(format!("dither horizon must be non-negative, got {horizon}")));
    }
    let ratio = horizon / epsilon;
    let pieces = if (ratio - ratio.round()).abs() <= GRID_TOL * ratio.max(1.0) {
        ratio.round() as usize
    } else {
        ratio.ceil() as usize
    };
    let values = (0..pieces)
        .map(|_| (0..q).map(|_| rng.sample(StandardNormal)).collect())
        .collect();
    Ok(DitherSignal {
        epsilon,
        horizon,
        values,
    })
}

/// Feedback gains applied over `n` equal periods, plus the scaled dither.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicySchedule {
    pub feedbacks: Vec<Matrix>,
    pub dither_scale: f64,
    pub dither: DitherSignal,
}

impl PolicySchedule {
    pub fn periods(&self) -> usize {
        self.feedbacks.len()
    }
}

/// Simulated run on the grid `0, dt, …, τ`.
///
/// States and inputs are stored flat, row by row. `inputs` has one entry per
/// step (left-point convention), so it is one shorter than `states`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub dt: f64,
    pub p: usize,
    pub q: usize,
    pub times: Vec<f64>,
    pub states: Vec<f64>,
    pub inputs: Vec<f64>,
    pub overflowed: bool,
}

impl Trajectory {
    /// Number of recorded steps (transitions).
    pub fn steps(&self) -> usize {
        self.inputs.len() / self.q
    }

    pub fn state(&self, k: usize) -> &[f64] {
        &self.states[k * self.p..(k + 1) * self.p]
    }

    pub fn input(&self, k: usize) -> &[f64] {
        &self.inputs[k * self.q..(k + 1) * self.q]
    }

    pub fn final_state(&self) -> &[f64] {
        self.state(self.times.len() - 1)
    }

    pub fn max_state_norm(&self) -> f64 {
        self.states
            .chunks(self.p)
            .map(norm)
            .fold(0.0, f64::max)
    }

    /// Writes `t, x1..xp, u1..uq`; the input cells of the last row are empty.
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["t".to_string()];
        header.extend((1..=self.p).map(|i| format!("x{i}")));
        header.extend((1..=self.q).map(|i| format!("u{i}")));
        let csv_err = |e: csv::Error| Error::Io {
            path: "<trajectory csv>".into(),
            message: e.to_string(),
        };
        w.write_record(&header).map_err(csv_err)?;
        for (k, t) in self.times.iter().enumerate() {
            let mut row = vec![t.to_string()];
            row.extend(self.state(k).iter().map(f64::to_string));
            if k < self.steps() {
                row.extend(self.input(k).iter().map(f64::to_string));
            } else {
                row.extend(std::iter::repeat_n(String::new(), self.q));
            }
            w.write_record(&row).map_err(csv_err)?;
        }
        w.flush().map_err(|e| Error::Io {
            path: "<trajectory csv>".into(),
            message: e.to_string(),
        })
    }
}

pub(crate) fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Number of `dt` steps in `length`, which must be an integer multiple of `dt`.
pub fn grid_steps(length: f64, dt: f64, what: &str) -> Result<usize> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::Config(format!("dt must be positive, got {dt}")));
    }
    if !(length >= 0.0 && length.is_finite()) {
        return Err(Error::Config(format!("{what} must be non-negative, got {length}")));
    }
    let ratio = length / dt;
    let k = ratio.round();
    if (ratio - k).abs() > GRID_TOL * ratio.max(1.0) {
        return Err(Error::Config(format!(
            "{what} = {length} is not an integer multiple of dt = {dt}"
        )));
    }
    Ok(k as usize)
}

/// Euler–Maruyama integration of the closed loop
/// `u_k = K_{j(k)} x_k + σ_η η(k·dt)` over `[0, τ]`.
///
/// Grid point `k` belongs to period `j = ⌊k n / N⌋` (zero-based) with `N = τ/dt`,
/// i.e. the half-open interval `[jτ/n, (j+1)τ/n)`. The run stops early and sets
/// `overflowed` once `|x|₂` exceeds `overflow_bound` or becomes non-finite.
pub fn simulate<R: Rng + ?Sized>(
    model: &DynamicsModel,
    schedule: &PolicySchedule,
    dt: f64,
    tau: f64,
    x0: &[f64],
    rng: &mut R,
    overflow_bound: f64,
) -> Result<Trajectory> {
    let (p, q, d) = (model.p(), model.q(), model.d());
    let n = schedule.periods();
    if n == 0 {
        return Err(Error::Config("schedule needs at least one feedback period".into()));
    }
    for k in &schedule.feedbacks {
        ensure_shape(k, q, p, "feedback gain")?;
        ensure_finite(k, "feedback gain")?;
    }
    if x0.len() != p {
        return Err(Error::Dimension(format!("x0 must have length {p}, got {}", x0.len())));
    }
    if !(schedule.dither_scale >= 0.0 && schedule.dither_scale.is_finite()) {
        return Err(Error::Config("dither scale must be finite and non-negative".into()));
    }
    if !(overflow_bound > 0.0) {
        return Err(Error::Config("overflow bound must be positive".into()));
    }
    let steps = grid_steps(tau, dt, "tau")?;
    let piece_steps = grid_steps(schedule.dither.epsilon, dt, "dither piece length")?;
    if piece_steps == 0 {
        return Err(Error::Config("dither piece length must be at least dt".into()));
    }
    if steps > 0 {
        let limit = tau / (q as f64 * n as f64);
        if schedule.dither.epsilon >= limit {
            return Err(Error::Config(format!(
                "dither piece length {} must be below tau/(q n) = {limit}",
                schedule.dither.epsilon
            )));
        }
        let needed = steps.div_ceil(piece_steps);
        if schedule.dither.pieces() < needed {
            return Err(Error::Config(format!(
                "dither has {} pieces, {needed} needed to cover tau",
                schedule.dither.pieces()
            )));
        }
        if schedule.dither.values.iter().any(|v| v.len() != q) {
            return Err(Error::Dimension(format!("dither values must have length {q}")));
        }
    }

    let rows = |m: &Matrix| -> Vec<f64> { m.transpose().as_slice().to_vec() };
    let a = rows(&model.a);
    let b = rows(&model.b);
    let c = rows(&model.c);
    let gains: Vec<Vec<f64>> = schedule.feedbacks.iter().map(rows).collect();
    let sqrt_dt = dt.sqrt();

    let mut times = Vec::with_capacity(steps + 1);
    let mut states = Vec::with_capacity((steps + 1) * p);
    let mut inputs = Vec::with_capacity(steps * q);
    let mut x = x0.to_vec();
    let mut u = vec![0.0; q];
    let mut xi = vec![0.0; d];
    let mut next = vec![0.0; p];
    times.push(0.0);
    states.extend_from_slice(&x);
    let mut overflowed = !(norm(&x) <= overflow_bound);

    if !overflowed {
        for k in 0..steps {
            let gain = &gains[k * n / steps];
            let dither = &schedule.dither.values[k / piece_steps];
            for i in 0..q {
                let kx: f64 = (0..p).map(|j| gain[i * p + j] * x[j]).sum();
                u[i] = kx + schedule.dither_scale * dither[i];
            }
            for v in xi.iter_mut() {
                *v = rng.sample(StandardNormal);
            }
            for i in 0..p {
                let ax: f64 = (0..p).map(|j| a[i * p + j] * x[j]).sum();
                let bu: f64 = (0..q).map(|j| b[i * q + j] * u[j]).sum();
                let cw: f64 = (0..d).map(|j| c[i * d + j] * xi[j]).sum();
                next[i] = x[i] + (ax + bu) * dt + cw * sqrt_dt;
            }
            inputs.extend_from_slice(&u);
            std::mem::swap(&mut x, &mut next);
            times.push((k + 1) as f64 * dt);
            states.extend_from_slice(&x);
            if !(norm(&x) <= overflow_bound) {
                overflowed = true;
                break;
            }
        }
    }

    Ok(Trajectory {
        dt,
        p,
        q,
        times,
        states,
        inputs,
        overflowed,
    })
}
