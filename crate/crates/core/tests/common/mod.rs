//! Reference computations for the integration tests. Nothing here calls into
//! the crate's numerical kernels.

#![allow(dead_code)]

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type M = DMatrix<f64>;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `exp(m)` by scaling and squaring of a long Taylor series.
pub fn taylor_exp(m: &M) -> M {
    let n = m.nrows();
    let norm = m.iter().map(|v| v.abs()).sum::<f64>();
    let mut squarings = 0;
    let mut scale = 1.0;
    while norm * scale > 0.25 {
        scale *= 0.5;
        squarings += 1;
    }
    let a = m * scale;
    let mut term = M::identity(n, n);
    let mut sum = M::identity(n, n);
    for k in 1..=30 {
        term = &term * &a / k as f64;
        sum += &term;
    }
    for _ in 0..squarings {
        sum = &sum * &sum;
    }
    sum
}

/// Largest real part of the eigenvalues, via nalgebra's Schur form.
pub fn abscissa(m: &M) -> f64 {
    m.complex_eigenvalues().iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max)
}

pub fn spectral_norm(m: &M) -> f64 {
    m.singular_values().max()
}

pub fn normal_matrix<R: Rng>(rows: usize, cols: usize, rng: &mut R) -> M {
    M::from_fn(rows, cols, |_, _| rng.sample(rand_distr::StandardNormal))
}

/// Random Hurwitz matrix whose abscissa is `-margin`.
pub fn random_stable<R: Rng>(n: usize, margin: f64, rng: &mut R) -> M {
    let m = normal_matrix(n, n, rng);
    let shift = abscissa(&m) + margin;
    m - M::identity(n, n) * shift
}

/// `∫₀^∞ exp(Dᵀs) W exp(Ds) ds` by composite trapezoid on `[0, T]` with
/// Romberg extrapolation over three step sizes.
pub fn lyapunov_quadrature(d: &M, w: &M, horizon: f64, base_steps: usize) -> M {
    let trap = |steps: usize| {
        let h = horizon / steps as f64;
        let step = taylor_exp(&(d * h));
        let mut e = M::identity(d.nrows(), d.nrows());
        let mut acc = w * 0.5;
        for k in 1..=steps {
            e = &e * &step;
            let f = e.transpose() * w * &e;
            acc += if k == steps { f * 0.5 } else { f };
        }
        acc * h
    };
    let t1 = trap(base_steps);
    let t2 = trap(2 * base_steps);
    let t4 = trap(4 * base_steps);
    let r1 = (&t2 * 4.0 - &t1) / 3.0;
    let r2 = (&t4 * 4.0 - &t2) / 3.0;
    (r2 * 16.0 - r1) / 15.0
}
