//! Lanczos iteration for the smallest eigenpair of a symmetric operator.
//!
//! Full reorthogonalization against every stored basis vector; the start
//! vector is drawn from a seeded ChaCha generator so results are
//! reproducible.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::linalg::{axpy, dot, norm};

#[derive(Debug, Clone)]
pub struct LanczosResult {
    /// Rayleigh quotient of `vector`.
    pub value: f64,
    /// Unit-norm Ritz vector.
    pub vector: Vec<f64>,
    /// `‖A v - value v‖`, recomputed explicitly from the returned pair.
    pub residual: f64,
    pub iterations: usize,
    /// Whether the stopping predicate accepted the pair before `max_iters`.
    pub converged: bool,
}

/// Run Lanczos on `op` (writes `A x` into its second argument) until
/// `accept(value, residual_estimate)` holds or `max_iters` steps are taken.
pub fn smallest_eigenpair<F, P>(
    n: usize,
    mut op: F,
    max_iters: usize,
    seed: u64,
    mut accept: P,
) -> LanczosResult
where
    F: FnMut(&[f64], &mut [f64]),
    P: FnMut(f64, f64) -> bool,
{
    assert!(n > 0, "Lanczos needs a nonempty operator");
    let max_iters = max_iters.clamp(1, n);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut q: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let q_norm = norm(&q);
    q.iter_mut().for_each(|v| *v /= q_norm);

    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(max_iters);
    let mut alphas: Vec<f64> = Vec::with_capacity(max_iters);
    let mut betas: Vec<f64> = Vec::with_capacity(max_iters);
    let mut w = vec![0.0; n];
    let mut converged = false;
    let mut ritz = (0.0, vec![1.0]);

    for k in 0..max_iters {
        op(&q, &mut w);
        let alpha = dot(&q, &w);
        axpy(-alpha, &q, &mut w);
        if let Some(prev) = basis.last() {
            axpy(-betas[k - 1], prev, &mut w);
        }
        basis.push(q.clone());
        // full reorthogonalization, two passes
        for _ in 0..2 {
            for b in &basis {
                let c = dot(b, &w);
                axpy(-c, b, &mut w);
            }
        }
        alphas.push(alpha);
        let beta = norm(&w);

        ritz = smallest_ritz_pair(&alphas, &betas);
        let estimate = beta * ritz.1[k].abs();
        let exhausted = k + 1 == n || beta <= 1e-14 * alphas.iter().fold(1.0_f64, |a, v| a.max(v.abs()));
        if accept(ritz.0, estimate) || exhausted {
            converged = true;
            break;
        }
        betas.push(beta);
        q = w.iter().map(|v| v / beta).collect();
    }

    let mut vector = vec![0.0; n];
    for (b, c) in basis.iter().zip(&ritz.1) {
        axpy(*c, b, &mut vector);
    }
    let vn = norm(&vector);
    vector.iter_mut().for_each(|v| *v /= vn);
    let mut av = vec![0.0; n];
    op(&vector, &mut av);
    let value = dot(&vector, &av);
    axpy(-value, &vector, &mut av);
    let residual = norm(&av);
    LanczosResult { value, vector, residual, iterations: basis.len(), converged }
}

/// Smallest eigenpair of the tridiagonal matrix with diagonal `alphas` and
/// off-diagonal `betas` (one shorter). Ties resolve to the lowest index.
fn smallest_ritz_pair(alphas: &[f64], betas: &[f64]) -> (f64, Vec<f64>) {
    let k = alphas.len();
    let mut t = DMatrix::zeros(k, k);
    for i in 0..k {
        t[(i, i)] = alphas[i];
        if i + 1 < k {
            t[(i, i + 1)] = betas[i];
            t[(i + 1, i)] = betas[i];
        }
    }
    let eig = t.symmetric_eigen();
    let mut best = 0;
    for i in 1..k {
        if eig.eigenvalues[i] < eig.eigenvalues[best] {
            best = i;
        }
    }
    (eig.eigenvalues[best], eig.eigenvectors.column(best).iter().cloned().collect())
}
