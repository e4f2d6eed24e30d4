//! Matrix-normal posterior over `[A, B]ᵀ` built from one trajectory.
//!
//! With `z = [xᵀ, uᵀ]ᵀ`, the precision is `V = I + ∫ z zᵀ ds` and the mean is
//! `V⁻¹ ∫ z dxᵀ`. Both integrals use left-point sums on the simulation grid:
//! `Σ z_k z_kᵀ dt` and the Itô sum `Σ z_k (x_{k+1} − x_k)ᵀ`.

use nalgebra::linalg::Cholesky;
use nalgebra::{DVector, Dyn};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::control::serialize_rows;
use crate::error::{Error, Result};
use crate::linalg::{ensure_shape, operator_norm, Matrix};
use crate::sde::{DynamicsModel, Trajectory};

#[derive(Debug, Clone)]
pub struct Posterior {
    /// `(p+q) × p` mean of `[A, B]ᵀ`.
    pub mean: Matrix,
    /// `(p+q) × (p+q)` precision shared by every column.
    pub precision: Matrix,
    /// Lower Cholesky factor of `precision`.
    pub precision_chol: Matrix,
    /// Horizon of the data the posterior was built from.
    pub tau: f64,
}

/// One draw of `(Â, B̂)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParameterSample {
    #[serde(serialize_with = "serialize_rows")]
    pub a_hat: Matrix,
    #[serde(serialize_with = "serialize_rows")]
    pub b_hat: Matrix,
}

impl ParameterSample {
    /// Stacked `[Â, B̂]ᵀ`, shape `(p+q) × p`.
    pub fn stacked_transpose(&self) -> Matrix {
        stacked_transpose(&self.a_hat, &self.b_hat)
    }

    pub fn from_stacked_transpose(theta: &Matrix, p: usize) -> Self {
        let q = theta.nrows() - p;
        ParameterSample {
            a_hat: theta.rows(0, p).transpose(),
            b_hat: theta.rows(p, q).transpose(),
        }
    }
}

fn stacked_transpose(a: &Matrix, b: &Matrix) -> Matrix {
    let p = a.nrows();
    let q = b.ncols();
    let mut theta = Matrix::zeros(p + q, p);
    theta.rows_mut(0, p).copy_from(&a.transpose());
    theta.rows_mut(p, q).copy_from(&b.transpose());
    theta
}

fn observation(traj: &Trajectory, k: usize) -> impl Iterator<Item = f64> + '_ {
    traj.state(k).iter().chain(traj.input(k)).copied()
}

/// `I + Σ_k z_k z_kᵀ dt` over the recorded steps.
pub fn accumulate_precision(traj: &Trajectory) -> Matrix {
    let dim = traj.p + traj.q;
    let mut v = Matrix::identity(dim, dim);
    let mut z = vec![0.0; dim];
    for k in 0..traj.steps() {
        for (slot, val) in z.iter_mut().zip(observation(traj, k)) {
            *slot = val;
        }
        for i in 0..dim {
            let zi = z[i] * traj.dt;
            for j in 0..dim {
                v[(i, j)] += zi * z[j];
            }
        }
    }
    v
}

/// `Σ_k z_k (x_{k+1} − x_k)ᵀ`, the discretized Itô integral `∫ z dxᵀ`.
pub fn accumulate_cross(traj: &Trajectory) -> Matrix {
    let (p, dim) = (traj.p, traj.p + traj.q);
    let mut s = Matrix::zeros(dim, p);
    for k in 0..traj.steps() {
        let (x0, x1) = (traj.state(k), traj.state(k + 1));
        for (i, zi) in observation(traj, k).enumerate() {
            for j in 0..p {
                s[(i, j)] += zi * (x1[j] - x0[j]);
            }
        }
    }
    s
}

/// Posterior mean `V⁻¹ Σ z_k Δx_kᵀ`.
pub fn accumulate_mean(traj: &Trajectory, precision: &Matrix) -> Result<Matrix> {
    let dim = traj.p + traj.q;
    ensure_shape(precision, dim, dim, "precision")?;
    let chol = Cholesky::new(precision.clone())
        .ok_or_else(|| Error::Numerical("precision matrix is not positive definite".into()))?;
    Ok(chol.solve(&accumulate_cross(traj)))
}

pub fn build_posterior(traj: &Trajectory) -> Result<Posterior> {
    if traj.overflowed {
        return Err(Error::InvalidInput(
            "cannot learn from an overflowed trajectory".into(),
        ));
    }
    let precision = accumulate_precision(traj);
    let chol = Cholesky::new(precision.clone())
        .ok_or_else(|| Error::Numerical("precision matrix is not positive definite".into()))?;
    let mean = chol.solve(&accumulate_cross(traj));
    let tau = traj.times.last().copied().unwrap_or(0.0);
    Ok(Posterior {
        mean,
        precision,
        precision_chol: chol.l(),
        tau,
    })
}

impl Posterior {
    pub fn p(&self) -> usize {
        self.mean.ncols()
    }

    pub fn q(&self) -> usize {
        self.mean.nrows() - self.mean.ncols()
    }

    /// Column covariance `V⁻¹`.
    pub fn column_covariance(&self) -> Matrix {
        let chol: Cholesky<f64, Dyn> = Cholesky::new(self.precision.clone())
            .expect("precision is positive definite by construction");
        chol.inverse()
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "p": self.p(),
            "q": self.q(),
            "tau": self.tau,
            "mean": crate::linalg::to_rows(&self.mean),
            "precision": crate::linalg::to_rows(&self.precision),
        })
    }
}

/// Draws `[Â, B̂]ᵀ` column by column as `mean_i + L⁻ᵀ w` with `w ~ N(0, I)`.
pub fn sample_parameters<R: Rng + ?Sized>(post: &Posterior, rng: &mut R) -> ParameterSample {
    let dim = post.mean.nrows();
    let p = post.p();
    let upper = post.precision_chol.transpose();
    let mut theta = post.mean.clone();
    for i in 0..p {
        let w = DVector::from_fn(dim, |_, _| rng.sample::<f64, _>(StandardNormal));
        let offset = upper
            .solve_upper_triangular(&w)
            .expect("Cholesky factor has a positive diagonal");
        let mut col = theta.column_mut(i);
        col += offset;
    }
    ParameterSample::from_stacked_transpose(&theta, p)
}

/// `‖[Â, B̂]ᵀ − [A, B]ᵀ‖₂`.
pub fn estimation_error(sample: &ParameterSample, truth: &DynamicsModel) -> Result<f64> {
    ensure_shape(&sample.a_hat, truth.p(), truth.p(), "sampled A")?;
    ensure_shape(&sample.b_hat, truth.p(), truth.q(), "sampled B")?;
    operator_norm(&(sample.stacked_transpose() - stacked_transpose(&truth.a, &truth.b)))
}
