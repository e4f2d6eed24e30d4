//! Dense small-matrix helpers: eigenvalues, norms and the matrix exponential.
//!
//! Matrices are `nalgebra::DMatrix<f64>`. The sizes that show up here are tiny
//! (state dimension plus input dimension, doubled for Hamiltonians), so every
//! routine favours robustness over asymptotic speed.

use nalgebra::{Complex, DMatrix};

use crate::error::{Error, Result};

pub type Matrix = DMatrix<f64>;

/// Upper bound on the total number of shifted QR sweeps in [`eigenvalues`].
pub const MAX_QR_SWEEPS: usize = 500;

pub(crate) fn ensure_square(m: &Matrix, what: &str) -> Result<()> {
    if m.nrows() == 0 || m.nrows() != m.ncols() {
        return Err(Error::Dimension(format!(
            "{what} must be square and non-empty, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    Ok(())
}

pub(crate) fn ensure_finite(m: &Matrix, what: &str) -> Result<()> {
    if m.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("{what} has non-finite entries")))
    }
}

pub(crate) fn ensure_shape(m: &Matrix, rows: usize, cols: usize, what: &str) -> Result<()> {
    if m.shape() != (rows, cols) {
        return Err(Error::Dimension(format!(
            "{what} must be {rows}x{cols}, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    Ok(())
}

/// Returns `(M + Mᵀ) / 2`.
pub fn symmetrize(m: &Matrix) -> Matrix {
    (m + m.transpose()) * 0.5
}

/// Builds a matrix from row slices. Panics on ragged input.
pub fn from_rows(rows: &[&[f64]]) -> Matrix {
    let nrows = rows.len();
    let ncols = rows.first().map_or(0, |r| r.len());
    assert!(rows.iter().all(|r| r.len() == ncols), "ragged rows");
    Matrix::from_fn(nrows, ncols, |i, j| rows[i][j])
}

/// Nested row vectors, the layout used by every JSON/TOML surface.
pub fn to_rows(m: &Matrix) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

pub fn try_from_rows(rows: &[Vec<f64>]) -> Result<Matrix> {
    let nrows = rows.len();
    let ncols = rows.first().map_or(0, Vec::len);
    if nrows == 0 || ncols == 0 || rows.iter().any(|r| r.len() != ncols) {
        return Err(Error::Dimension(
            "matrix rows must be non-empty and of equal length".into(),
        ));
    }
    Ok(Matrix::from_fn(nrows, ncols, |i, j| rows[i][j]))
}

/// All eigenvalues of a real square matrix.
///
/// Balancing, reduction to upper Hessenberg form by stabilized elementary
/// similarity transforms, then Francis double-shift QR with deflation.
pub fn eigenvalues(m: &Matrix) -> Result<Vec<Complex<f64>>> {
    ensure_square(m, "eigenvalue input")?;
    ensure_finite(m, "eigenvalue input")?;
    let n = m.nrows();
    let mut a: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| m[(i, j)]).collect())
        .collect();
    balance(&mut a);
    reduce_to_hessenberg(&mut a);
    hessenberg_qr(&mut a)
}

/// Largest real part over the spectrum. Negative exactly when `m` is Hurwitz.
pub fn spectral_abscissa(m: &Matrix) -> Result<f64> {
    Ok(eigenvalues(m)?
        .iter()
        .map(|z| z.re)
        .fold(f64::NEG_INFINITY, f64::max))
}

pub fn is_hurwitz(m: &Matrix) -> Result<bool> {
    Ok(spectral_abscissa(m)? < 0.0)
}

/// Largest singular value.
pub fn operator_norm(m: &Matrix) -> Result<f64> {
    ensure_finite(m, "operator_norm input")?;
    if m.is_empty() {
        return Ok(0.0);
    }
    Ok(m.singular_values().max())
}

/// Smallest eigenvalue of the symmetric part of `m`.
pub fn min_symmetric_eigenvalue(m: &Matrix) -> f64 {
    symmetrize(m).symmetric_eigenvalues().min()
}

/// `e^{M t}` by scaling and squaring with a degree-13 Padé approximant.
pub fn matrix_exponential(m: &Matrix, t: f64) -> Result<Matrix> {
    ensure_square(m, "matrix_exponential input")?;
    ensure_finite(m, "matrix_exponential input")?;
    if !t.is_finite() {
        return Err(Error::InvalidInput("time must be finite".into()));
    }
    let out = (m * t).exp();
    if out.iter().all(|v| v.is_finite()) {
        Ok(out)
    } else {
        Err(Error::Numerical(format!(
            "matrix exponential overflowed (|Mt|_1 = {:e})",
            (m * t).abs().column_sum().max()
        )))
    }
}

fn balance(a: &mut [Vec<f64>]) {
    const RADIX: f64 = 2.0;
    let sqrdx = RADIX * RADIX;
    let n = a.len();
    let mut done = false;
    while !done {
        done = true;
        for i in 0..n {
            let mut r = 0.0;
            let mut c = 0.0;
            for j in 0..n {
                if j != i {
                    c += a[j][i].abs();
                    r += a[i][j].abs();
                }
            }
            if c != 0.0 && r != 0.0 {
                let mut g = r / RADIX;
                let mut f = 1.0;
                let s = c + r;
                while c < g {
                    f *= RADIX;
                    c *= sqrdx;
                }
                g = r * RADIX;
                while c > g {
                    f /= RADIX;
                    c /= sqrdx;
                }
                if (c + r) / f < 0.95 * s {
                    done = false;
                    let g = 1.0 / f;
                    for j in 0..n {
                        a[i][j] *= g;
                    }
                    for row in a.iter_mut() {
                        row[i] *= f;
                    }
                }
            }
        }
    }
}

fn reduce_to_hessenberg(a: &mut [Vec<f64>]) {
    let n = a.len();
    for m in 1..n.saturating_sub(1) {
        let mut x = 0.0f64;
        let mut pivot = m;
        for (j, row) in a.iter().enumerate().skip(m) {
            if row[m - 1].abs() > x.abs() {
                x = row[m - 1];
                pivot = j;
            }
        }
        if pivot != m {
            a.swap(pivot, m);
            for row in a.iter_mut() {
                row.swap(pivot, m);
            }
        }
        if x != 0.0 {
            for i in (m + 1)..n {
                let mut y = a[i][m - 1];
                if y != 0.0 {
                    y /= x;
                    a[i][m - 1] = y;
                    for j in m..n {
                        a[i][j] -= y * a[m][j];
                    }
                    for row in a.iter_mut() {
                        row[m] += y * row[i];
                    }
                }
            }
        }
    }
    for (i, row) in a.iter_mut().enumerate() {
        for v in row.iter_mut().take(i.saturating_sub(1)) {
            *v = 0.0;
        }
    }
}

fn hessenberg_qr(a: &mut [Vec<f64>]) -> Result<Vec<Complex<f64>>> {
    let n = a.len() as isize;
    let mut out = vec![Complex::new(0.0, 0.0); n as usize];
    let eps = f64::EPSILON;
    let mut anorm = 0.0;
    for i in 0..n as usize {
        for j in i.saturating_sub(1)..n as usize {
            anorm += a[i][j].abs();
        }
    }
    let at = |i: isize, j: isize| (i as usize, j as usize);

    let mut nn = n - 1;
    let mut t = 0.0;
    let mut sweeps = 0usize;
    while nn >= 0 {
        let mut its = 0;
        loop {
            // Find a negligible subdiagonal element.
            let mut l = nn;
            while l >= 1 {
                let (lm, ll) = (at(l - 1, l - 1), at(l, l));
                let mut s = a[lm.0][lm.1].abs() + a[ll.0][ll.1].abs();
                if s == 0.0 {
                    s = anorm;
                }
                let (r, c) = at(l, l - 1);
                if a[r][c].abs() <= eps * s {
                    a[r][c] = 0.0;
                    break;
                }
                l -= 1;
            }
            let nu = nn as usize;
            let mut x = a[nu][nu];
            if l == nn {
                out[nu] = Complex::new(x + t, 0.0);
                nn -= 1;
            } else {
                let mut y = a[nu - 1][nu - 1];
                let mut w = a[nu][nu - 1] * a[nu - 1][nu];
                if l == nn - 1 {
                    let p = 0.5 * (y - x);
                    let q = p * p + w;
                    let z = q.abs().sqrt();
                    x += t;
                    if q >= 0.0 {
                        let z = p + z.copysign(p);
                        let mut lo = x + z;
                        let hi = x + z;
                        if z != 0.0 {
                            lo = x - w / z;
                        }
                        out[nu - 1] = Complex::new(hi, 0.0);
                        out[nu] = Complex::new(lo, 0.0);
                    } else {
                        out[nu - 1] = Complex::new(x + p, -z);
                        out[nu] = Complex::new(x + p, z);
                    }
                    nn -= 2;
                } else {
                    if sweeps >= MAX_QR_SWEEPS {
                        return Err(Error::Numerical(format!(
                            "eigenvalue QR iteration did not converge in {MAX_QR_SWEEPS} sweeps"
                        )));
                    }
                    if its > 0 && its % 10 == 0 {
                        // Exceptional shift.
                        t += x;
                        for i in 0..=nu {
                            a[i][i] -= x;
                        }
                        let s = a[nu][nu - 1].abs() + a[nu - 1][nu - 2].abs();
                        x = 0.75 * s;
                        y = x;
                        w = -0.4375 * s * s;
                    }
                    its += 1;
                    sweeps += 1;
                    francis_step(a, l as usize, nu, x, y, w);
                }
            }
            if l + 1 >= nn {
                break;
            }
        }
    }
    Ok(out)
}

fn francis_step(a: &mut [Vec<f64>], l: usize, nn: usize, x: f64, y: f64, w: f64) {
    let eps = f64::EPSILON;
    let (mut p, mut q, mut r);
    let mut z;
    let mut m = nn - 2;
    loop {
        z = a[m][m];
        let r0 = x - z;
        let s0 = y - z;
        p = (r0 * s0 - w) / a[m + 1][m] + a[m][m + 1];
        q = a[m + 1][m + 1] - z - r0 - s0;
        r = a[m + 2][m + 1];
        let s = p.abs() + q.abs() + r.abs();
        p /= s;
        q /= s;
        r /= s;
        if m == l {
            break;
        }
        let u = a[m][m - 1].abs() * (q.abs() + r.abs());
        let v = p.abs() * (a[m - 1][m - 1].abs() + z.abs() + a[m + 1][m + 1].abs());
        if u <= eps * v {
            break;
        }
        m -= 1;
    }
    for i in (m + 2)..=nn {
        a[i][i - 2] = 0.0;
        if i != m + 2 {
            a[i][i - 3] = 0.0;
        }
    }
    let mut xx = 0.0;
    for k in m..nn {
        if k != m {
            p = a[k][k - 1];
            q = a[k + 1][k - 1];
            r = if k + 1 != nn { a[k + 2][k - 1] } else { 0.0 };
            xx = p.abs() + q.abs() + r.abs();
            if xx != 0.0 {
                p /= xx;
                q /= xx;
                r /= xx;
            }
        }
        let s = (p * p + q * q + r * r).sqrt().copysign(p);
        if s != 0.0 {
            if k == m {
                if l != m {
                    a[k][k - 1] = -a[k][k - 1];
                }
            } else {
                a[k][k - 1] = -s * xx;
            }
            p += s;
            let hx = p / s;
            let hy = q / s;
            z = r / s;
            q /= p;
            r /= p;
            for j in k..=nn {
                let mut pp = a[k][j] + q * a[k + 1][j];
                if k + 1 != nn {
                    pp += r * a[k + 2][j];
                    a[k + 2][j] -= pp * z;
                }
                a[k + 1][j] -= pp * hy;
                a[k][j] -= pp * hx;
            }
            let mmin = if nn < k + 3 { nn } else { k + 3 };
            for row in a.iter_mut().take(mmin + 1).skip(l) {
                let mut pp = hx * row[k] + hy * row[k + 1];
                if k + 1 != nn {
                    pp += z * row[k + 2];
                    row[k + 2] -= pp * r;
                }
                row[k + 1] -= pp * q;
                row[k] -= pp;
            }
        }
    }
}
