//! Riccati and Lyapunov solvers and LQR gain synthesis.

use nalgebra::linalg::{Cholesky, LU};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{
    ensure_finite, ensure_shape, ensure_square, min_symmetric_eigenvalue, operator_norm,
    spectral_abscissa, symmetrize, to_rows, Matrix,
};

pub const DEFAULT_CARE_TOL: f64 = 1e-9;
pub const DEFAULT_CARE_MAX_ITER: usize = 100;

/// Relative step size at which the sign iteration is considered converged.
const SIGN_CONVERGENCE: f64 = 1e-12;
/// Newton refinement steps allowed after extraction.
const MAX_NEWTON_STEPS: usize = 4;
/// `P` is rejected as indefinite below `-INDEFINITE_TOL * |P|`.
const INDEFINITE_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CareSolution {
    #[serde(serialize_with = "serialize_rows")]
    pub p: Matrix,
    /// Operator norm of the Riccati residual at `p`.
    pub residual_norm: f64,
    /// Sign-function iterations used.
    pub iterations: usize,
}

pub(crate) fn serialize_rows<S: serde::Serializer>(
    m: &Matrix,
    s: S,
) -> std::result::Result<S::Ok, S::Error> {
    serde::Serialize::serialize(&to_rows(m), s)
}

fn check_weights(a: &Matrix, b: &Matrix, q: &Matrix, r: &Matrix) -> Result<(usize, usize)> {
    ensure_square(a, "A")?;
    let p = a.nrows();
    if b.nrows() != p || b.ncols() == 0 {
        return Err(Error::Dimension(format!(
            "B must have {p} rows and at least one column, got {}x{}",
            b.nrows(),
            b.ncols()
        )));
    }
    let m = b.ncols();
    ensure_shape(q, p, p, "Q")?;
    ensure_shape(r, m, m, "R")?;
    for (mat, name) in [(a, "A"), (b, "B"), (q, "Q"), (r, "R")] {
        ensure_finite(mat, name)?;
    }
    Ok((p, m))
}

/// `G = B R⁻¹ Bᵀ`, rejecting a singular or indefinite `R`.
fn input_weight(b: &Matrix, r: &Matrix) -> Result<Matrix> {
    let chol = Cholesky::new(symmetrize(r))
        .ok_or_else(|| Error::InvalidInput("R must be symmetric positive definite".into()))?;
    Ok(b * chol.solve(&b.transpose()))
}

/// Riccati operator `AᵀM + MA − MBR⁻¹BᵀM + Q`.
pub fn riccati_operator(a: &Matrix, b: &Matrix, q: &Matrix, r: &Matrix, m: &Matrix) -> Result<Matrix> {
    let (p, _) = check_weights(a, b, q, r)?;
    ensure_shape(m, p, p, "M")?;
    let g = input_weight(b, r)?;
    Ok(riccati_residual(a, &g, q, m))
}

fn riccati_residual(a: &Matrix, g: &Matrix, q: &Matrix, m: &Matrix) -> Matrix {
    a.transpose() * m + m * a - m * g * m + q
}

/// Stabilizing solution of the continuous-time algebraic Riccati equation.
///
/// The matrix sign function of the Hamiltonian `[[A, −G], [−Q, −Aᵀ]]` is
/// computed by the determinant-scaled Newton iteration. Its stable invariant
/// subspace `span [I; P]` gives `P` by least squares, which is symmetrized and
/// then polished by Newton (Kleinman) steps, each one a Lyapunov solve.
///
/// Non-convergence, a rank-deficient subspace basis or a non-Hurwitz closed
/// loop all mean the model is numerically not stabilizable and are reported
/// as [`Error::NoSolution`].
pub fn solve_care(
    a: &Matrix,
    b: &Matrix,
    q: &Matrix,
    r: &Matrix,
    tol: f64,
    max_iter: usize,
) -> Result<CareSolution> {
    let (n, _) = check_weights(a, b, q, r)?;
    if Cholesky::new(symmetrize(q)).is_none() {
        return Err(Error::InvalidInput("Q must be symmetric positive definite".into()));
    }
    let g = input_weight(b, r)?;

    let mut h = Matrix::zeros(2 * n, 2 * n);
    h.view_mut((0, 0), (n, n)).copy_from(a);
    h.view_mut((0, n), (n, n)).copy_from(&(-&g));
    h.view_mut((n, 0), (n, n)).copy_from(&(-q));
    h.view_mut((n, n), (n, n)).copy_from(&(-a.transpose()));

    let (sign, iterations) = matrix_sign(h, max_iter)?;

    let w11 = sign.view((0, 0), (n, n));
    let w12 = sign.view((0, n), (n, n));
    let w21 = sign.view((n, 0), (n, n));
    let w22 = sign.view((n, n), (n, n));
    let mut lhs = Matrix::zeros(2 * n, n);
    lhs.view_mut((0, 0), (n, n)).copy_from(&w12);
    lhs.view_mut((n, 0), (n, n)).copy_from(&(w22 + Matrix::identity(n, n)));
    let mut rhs = Matrix::zeros(2 * n, n);
    rhs.view_mut((0, 0), (n, n)).copy_from(&(-(w11 + Matrix::identity(n, n))));
    rhs.view_mut((n, 0), (n, n)).copy_from(&(-w21));

    let svd = lhs.svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if !(smin > 1e-10 * smax) {
        return Err(Error::NoSolution(format!(
            "stable invariant subspace is not a graph (basis conditioning {:e})",
            smin / smax
        )));
    }
    let p0 = svd
        .solve(&rhs, 0.0)
        .map_err(|e| Error::Numerical(format!("least-squares extraction failed: {e}")))?;
    let mut p = symmetrize(&p0);
    let mut residual = operator_norm(&riccati_residual(a, &g, q, &p))?;

    for _ in 0..MAX_NEWTON_STEPS {
        let closed = a - &g * &p;
        if spectral_abscissa(&closed)? >= 0.0 {
            return Err(Error::NoSolution(
                "closed loop of the extracted solution is not Hurwitz".into(),
            ));
        }
        let rhs = q + &p * &g * &p;
        let candidate = solve_lyapunov(&closed, &rhs)?;
        let cand_res = operator_norm(&riccati_residual(a, &g, q, &candidate))?;
        if !(cand_res < residual) {
            break;
        }
        p = candidate;
        residual = cand_res;
        if residual == 0.0 {
            break;
        }
    }

    let pnorm = operator_norm(&p)?;
    let scale = 1.0 + operator_norm(q)? + 2.0 * operator_norm(a)? * pnorm + operator_norm(&g)? * pnorm * pnorm;
    if !(residual <= tol * scale) {
        return Err(Error::Numerical(format!(
            "Riccati residual {residual:e} exceeds tolerance {:e}",
            tol * scale
        )));
    }
    let min_eig = min_symmetric_eigenvalue(&p);
    if min_eig < -INDEFINITE_TOL * pnorm {
        return Err(Error::Indefinite {
            min_eigenvalue: min_eig,
            norm: pnorm,
        });
    }
    if spectral_abscissa(&(a - &g * &p))? >= 0.0 {
        return Err(Error::NoSolution("closed loop is not Hurwitz".into()));
    }
    Ok(CareSolution {
        p,
        residual_norm: residual,
        iterations,
    })
}

/// Determinant-scaled Newton iteration for `sign(Z)`.
fn matrix_sign(mut z: Matrix, max_iter: usize) -> Result<(Matrix, usize)> {
    let dim = z.nrows() as f64;
    for k in 1..=max_iter {
        let lu = LU::new(z.clone());
        let log_det: f64 = lu.u().diagonal().iter().map(|u| u.abs().ln()).sum();
        if !log_det.is_finite() {
            return Err(Error::NoSolution(
                "Hamiltonian iterate is singular (eigenvalue on the imaginary axis)".into(),
            ));
        }
        let inv = lu
            .try_inverse()
            .ok_or_else(|| Error::NoSolution("Hamiltonian iterate is singular".into()))?;
        let c = (log_det / dim).exp();
        let next = (&z / c + inv * c) * 0.5;
        if !next.iter().all(|v| v.is_finite()) {
            return Err(Error::NoSolution("sign iteration diverged".into()));
        }
        let step = (&next - &z).abs().column_sum().max();
        let size = next.abs().column_sum().max();
        z = next;
        if step <= SIGN_CONVERGENCE * size {
            return Ok((z, k));
        }
    }
    Err(Error::NoSolution(format!(
        "sign iteration did not converge in {max_iter} iterations"
    )))
}

/// LQR gain `K = −R⁻¹BᵀP` with `P` the stabilizing Riccati solution.
pub fn lqr_gain(a: &Matrix, b: &Matrix, q: &Matrix, r: &Matrix) -> Result<Matrix> {
    let sol = solve_care(a, b, q, r, DEFAULT_CARE_TOL, DEFAULT_CARE_MAX_ITER)?;
    gain_from_solution(b, r, &sol.p)
}

pub(crate) fn gain_from_solution(b: &Matrix, r: &Matrix, p: &Matrix) -> Result<Matrix> {
    let chol = Cholesky::new(symmetrize(r))
        .ok_or_else(|| Error::InvalidInput("R must be symmetric positive definite".into()))?;
    Ok(-chol.solve(&(b.transpose() * p)))
}

/// Solves `DᵀM + MD + W = 0` for Hurwitz `D`.
///
/// Uses the Kronecker form `(I ⊗ Dᵀ + Dᵀ ⊗ I) vec(M) = −vec(W)`, which is cheap
/// at the dimensions handled here.
pub fn solve_lyapunov(d: &Matrix, w: &Matrix) -> Result<Matrix> {
    ensure_square(d, "D")?;
    let n = d.nrows();
    ensure_shape(w, n, n, "W")?;
    ensure_finite(d, "D")?;
    ensure_finite(w, "W")?;
    let abscissa = spectral_abscissa(d)?;
    if abscissa >= 0.0 {
        return Err(Error::InvalidInput(format!(
            "Lyapunov operator needs a Hurwitz matrix (spectral abscissa {abscissa:e})"
        )));
    }
    let idx = |i: usize, j: usize| i + j * n;
    let mut kron = Matrix::zeros(n * n, n * n);
    for j in 0..n {
        for i in 0..n {
            let row = idx(i, j);
            for k in 0..n {
                kron[(row, idx(k, j))] += d[(k, i)];
                kron[(row, idx(i, k))] += d[(k, j)];
            }
        }
    }
    let rhs = nalgebra::DVector::from_iterator(n * n, w.iter().map(|v| -v));
    let sol = LU::new(kron)
        .solve(&rhs)
        .ok_or_else(|| Error::Numerical("singular Lyapunov operator".into()))?;
    Ok(symmetrize(&Matrix::from_column_slice(n, n, sol.as_slice())))
}
