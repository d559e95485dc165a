#![allow(dead_code)]

use hcg_core::barrier::{omega, omega_star, BarrierSpec, SparseRow};
use hcg_core::linalg;
use nalgebra::DMatrix;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BarrierKind {
    Affine,
    LogDet,
    Product,
}

pub const KINDS: [BarrierKind; 3] = [BarrierKind::Affine, BarrierKind::LogDet, BarrierKind::Product];

/// A homogeneous barrier together with a strictly feasible point.
pub struct Case {
    pub spec: BarrierSpec,
    pub x: Vec<f64>,
}

/// Standard normal sample by Box-Muller.
pub fn normal(rng: &mut ChaCha8Rng) -> f64 {
    let u: f64 = rng.gen_range(f64::EPSILON..1.0);
    let v: f64 = rng.gen();
    (-2.0 * u.ln()).sqrt() * (std::f64::consts::TAU * v).cos()
}

pub fn gaussian_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| normal(rng)).collect()
}

/// Rows `a_i` with `<a_i, x> < 0` bounded away from zero, offsets 0.
pub fn homogeneous_affine(rng: &mut ChaCha8Rng) -> Case {
    let d = rng.gen_range(1..=5);
    let m = rng.gen_range(1..=6);
    let x = loop {
        let x = gaussian_vec(rng, d);
        if linalg::norm(&x) > 0.2 {
            break x;
        }
    };
    let xn = linalg::norm(&x);
    let mut rows = Vec::with_capacity(m);
    while rows.len() < m {
        let a = gaussian_vec(rng, d);
        let ax = linalg::dot(&a, &x);
        if ax.abs() < 0.2 * linalg::norm(&a) * xn {
            continue;
        }
        let sign = if ax > 0.0 { -1.0 } else { 1.0 };
        rows.push(SparseRow::new(a.iter().enumerate().map(|(k, v)| (k, sign * v))));
    }
    let spec = BarrierSpec::affine_inequality(d, rows, vec![0.0; m]).unwrap();
    Case { spec, x }
}

/// `M(x) = x_0 I + Σ_{k>0} x_k M_k` with `x_0` large enough for `M(x) ≻ 0`.
pub fn homogeneous_log_det(rng: &mut ChaCha8Rng) -> Case {
    let d = rng.gen_range(1..=4);
    let p = rng.gen_range(1..=4);
    let mut coeffs = vec![(0, DMatrix::identity(p, p))];
    let mut x = vec![0.0; d];
    let mut m = DMatrix::zeros(p, p);
    for (k, xk) in x.iter_mut().enumerate().skip(1) {
        let g = DMatrix::from_vec(p, p, gaussian_vec(rng, p * p));
        let mk = (&g + g.transpose()) * 0.5;
        *xk = rng.gen_range(-1.0..1.0);
        m += &mk * *xk;
        coeffs.push((k, mk));
    }
    x[0] = (-linalg::min_eigenvalue(&m)).max(0.0) + rng.gen_range(0.5..1.5);
    let spec = BarrierSpec::log_det_affine(d, DMatrix::zeros(p, p), coeffs).unwrap();
    Case { spec, x }
}

pub fn homogeneous_product(rng: &mut ChaCha8Rng) -> Case {
    let a = homogeneous_affine(rng);
    let b = homogeneous_log_det(rng);
    let mut x = a.x;
    x.extend(b.x);
    Case { spec: BarrierSpec::product(vec![a.spec, b.spec]).unwrap(), x }
}

pub fn random_case(kind: BarrierKind, rng: &mut ChaCha8Rng) -> Case {
    match kind {
        BarrierKind::Affine => homogeneous_affine(rng),
        BarrierKind::LogDet => homogeneous_log_det(rng),
        BarrierKind::Product => homogeneous_product(rng),
    }
}

fn scaled(v: &[f64], s: f64) -> Vec<f64> {
    v.iter().map(|a| a * s).collect()
}

fn added(x: &[f64], h: &[f64], s: f64) -> Vec<f64> {
    x.iter().zip(h).map(|(a, b)| a + s * b).collect()
}

/// Direction with local norm exactly `tau` at `x`.
fn direction_with_norm(case: &Case, rng: &mut ChaCha8Rng, tau: f64) -> Vec<f64> {
    let p = case.spec.point(&case.x).unwrap();
    loop {
        let h = gaussian_vec(rng, case.x.len());
        let n = p.local_norm(&h);
        if n > 1e-8 {
            return scaled(&h, tau / n);
        }
    }
}

/// Every barrier invariant on one random case; returns the first violation.
pub fn check_barrier_case(case: &Case, rng: &mut ChaCha8Rng) -> Result<(), String> {
    let spec = &case.spec;
    let x = &case.x;
    let nu = spec.nu();
    let p = spec.point(x).map_err(|e| format!("x0 infeasible: {e}"))?;
    let f = p.value();

    let s = rng.gen_range(0.5..2.0);
    let fs = spec.value(&scaled(x, s)).map_err(|e| e.to_string())?;
    if (fs - f + nu * s.ln()).abs() > 1e-8 * (1.0 + f.abs()) {
        return Err(format!("log-homogeneity: F(sx) = {fs}, F(x) = {f}, s = {s}, nu = {nu}"));
    }
    let gxx = p.grad_dot(x);
    if (gxx + nu).abs() > 1e-8 * nu {
        return Err(format!("F'(x)[x] = {gxx}, expected {}", -nu));
    }
    let cxx = p.curvature(x);
    if (cxx - nu).abs() > 1e-8 * nu {
        return Err(format!("F''(x)[x,x] = {cxx}, expected {nu}"));
    }
    let tau = rng.gen_range(0.1..1.0);
    let h = direction_with_norm(case, rng, tau);
    let gh = p.grad_dot(&h);
    let gsh = spec.grad_dot(&scaled(x, s), &h).map_err(|e| e.to_string())?;
    if (gsh - gh / s).abs() > 1e-8 * gh.abs().max(1e-12) {
        return Err(format!("F'(sx)[h] = {gsh}, F'(x)[h]/s = {}", gh / s));
    }

    let eps = 1e-6;
    let fp = spec.value(&added(x, &h, eps)).map_err(|e| e.to_string())?;
    let fm = spec.value(&added(x, &h, -eps)).map_err(|e| e.to_string())?;
    let fd_grad = (fp - fm) / (2.0 * eps);
    if (fd_grad - gh).abs() > 1e-5 * (1.0 + gh.abs()) {
        return Err(format!("gradient finite difference {fd_grad} vs {gh}"));
    }
    let ch = p.curvature(&h);
    let gp = spec.grad_dot(&added(x, &h, eps), &h).map_err(|e| e.to_string())?;
    let gm = spec.grad_dot(&added(x, &h, -eps), &h).map_err(|e| e.to_string())?;
    let fd_curv = (gp - gm) / (2.0 * eps);
    if (fd_curv - ch).abs() > 1e-5 * (1.0 + ch.abs()) {
        return Err(format!("curvature finite difference {fd_curv} vs {ch}"));
    }

    let tau = rng.gen_range(0.0..0.9);
    let h = direction_with_norm(case, rng, tau);
    let fh = spec.value(&added(x, &h, 1.0)).map_err(|e| format!("Dikin point infeasible: {e}"))?;
    let upper = f + p.grad_dot(&h) + omega_star(tau).unwrap();
    if fh > upper + 1e-9 {
        return Err(format!("descent lemma: F(x+h) = {fh} > {upper} (tau = {tau})"));
    }

    let tau = rng.gen_range(0.0..3.0);
    let h = direction_with_norm(case, rng, tau);
    if p.max_step(&h) > 1.0 {
        if let Ok(fh) = spec.value(&added(x, &h, 1.0)) {
            let lower = f + p.grad_dot(&h) + omega(tau).unwrap();
            if fh < lower - 1e-9 {
                return Err(format!("lower bound: F(x+h) = {fh} < {lower} (tau = {tau})"));
            }
        }
    }

    let ms = p.max_step(&h);
    if ms.is_finite() {
        if spec.point(&added(x, &h, 0.99 * ms)).is_err() {
            return Err(format!("max_step {ms}: 0.99 of it is infeasible"));
        }
        if spec.point(&added(x, &h, 1.01 * ms)).is_ok() {
            return Err(format!("max_step {ms}: 1.01 of it is still feasible"));
        }
    }
    Ok(())
}

/// `τ²/(2-τ) <= ω*(τ) <= τ²/(2(1-τ))` on a grid of `(0, 1)`.
pub fn check_omega_star_sandwich(points: usize) -> Result<(), String> {
    for k in 1..points {
        let tau = k as f64 / points as f64;
        let w = omega_star(tau).unwrap();
        let lo = tau * tau / (2.0 - tau);
        let hi = tau * tau / (2.0 * (1.0 - tau));
        if !(lo <= w * (1.0 + 1e-12) && w <= hi * (1.0 + 1e-12)) {
            return Err(format!("tau = {tau}: {lo} <= {w} <= {hi} fails"));
        }
    }
    Ok(())
}

fn random_psd(rng: &mut ChaCha8Rng, n: usize, rank: usize) -> DMatrix<f64> {
    let b = DMatrix::from_vec(n, rank, gaussian_vec(rng, n * rank));
    &b * b.transpose() / rank as f64
}

/// Small random instance of every family, deterministic in `rng`.
pub fn random_instance(rng: &mut ChaCha8Rng) -> hcg_core::instances::ConicInstance {
    use hcg_core::instances::*;
    let seed: u64 = rng.gen();
    match rng.gen_range(0..4) {
        0 => {
            let n = rng.gen_range(2..7);
            let m = rng.gen_range(n - 1..=n * (n - 1) / 2);
            build_maxcut(&random_maxcut_graph(n, m, seed).unwrap()).unwrap()
        }
        1 => {
            let n = rng.gen_range(1..5);
            let m = rng.gen_range(1..5);
            let a: Vec<_> = (0..m).map(|_| random_psd(rng, n, 1 + n / 2)).collect();
            let c = {
                let g = DMatrix::from_vec(n, n, gaussian_vec(rng, n * n));
                (&g + g.transpose()) * 0.5
            };
            build_packing(&a, &c, rng.gen_range(0.5..4.0)).unwrap()
        }
        2 => {
            let n = rng.gen_range(1..4);
            let m = rng.gen_range(1..5);
            let mut a: Vec<_> = (0..m).map(|_| random_psd(rng, n, n)).collect();
            a[0] += DMatrix::identity(n, n) * 0.5;
            let sum: DMatrix<f64> = a.iter().fold(DMatrix::zeros(n, n), |s, x| s + x);
            let needed = 2.0 * m as f64 / linalg::min_eigenvalue(&sum);
            build_covering(&a, needed * rng.gen_range(1.2..3.0)).unwrap()
        }
        _ => {
            let n = rng.gen_range(2..7);
            let m = rng.gen_range(n - 1..=n * (n - 1) / 2);
            build_mixing(&random_mixing_graph(n, m, seed).unwrap(), rng.gen()).unwrap()
        }
    }
}

/// `max ¼(X11 + X22 - 2 X12)` over 2×2 PSD matrices with unit-bounded
/// diagonal, by grid search.
pub fn maxcut_edge_grid() -> f64 {
    let mut best = f64::NEG_INFINITY;
    for i in 0..=100 {
        let a = i as f64 / 100.0;
        for j in 0..=100 {
            let b = j as f64 / 100.0;
            for k in 0..=2000 {
                let c = -1.0 + k as f64 / 1000.0;
                if a * b >= c * c {
                    best = best.max(0.25 * (a + b - 2.0 * c));
                }
            }
        }
    }
    best
}

/// `max ¼ Σ_{i<j} (2 - 2 X_ij)` over 3×3 PSD matrices with unit diagonal,
/// by grid search over the off-diagonal entries (Sylvester test).
pub fn maxcut_triangle_grid(steps: usize) -> f64 {
    let v = |k: usize| -1.0 + 2.0 * k as f64 / steps as f64;
    let mut best = f64::NEG_INFINITY;
    for i in 0..=steps {
        let a = v(i);
        for j in 0..=steps {
            let b = v(j);
            for k in 0..=steps {
                let c = v(k);
                let det = 1.0 + 2.0 * a * b * c - a * a - b * b - c * c;
                if det >= -1e-12 {
                    best = best.max(0.25 * (6.0 - 2.0 * (a + b + c)));
                }
            }
        }
    }
    best
}

/// Path 1-2-3 with unit d²: node 1 sits at the origin and `X` is the Gram
/// matrix of nodes 2, 3. Maximizes `<I - 11ᵀ/3, X>` under `X ⪰ 0`,
/// `X11 <= 1`, `X11 + X22 - 2 X12 <= 1` on a grid of step `h`.
pub fn mixing_path3_grid(h: f64) -> f64 {
    let n11 = (1.0 / h).round() as usize;
    let n22 = (4.0 / h).round() as usize;
    let mut best = f64::NEG_INFINITY;
    for i in 0..=n11 {
        let a = i as f64 * h;
        for j in 0..=n22 {
            let b = j as f64 * h;
            let r = (a * b).sqrt();
            let lo = ((-r / h).ceil() as i64).max(((a + b - 1.0) / (2.0 * h) - 1e-9).ceil() as i64);
            let hi = (r / h + 1e-9).floor() as i64;
            if lo > hi {
                continue;
            }
            // the objective decreases in X12, so the smallest feasible value wins
            let c = lo as f64 * h;
            if a * b < c * c - 1e-12 {
                continue;
            }
            best = best.max(a + b - (a + b + 2.0 * c) / 3.0);
        }
    }
    best
}

/// Single edge with unit d²: `max X11/2` subject to `0 <= X11 <= 1`.
pub fn mixing_edge_grid() -> f64 {
    (0..=100_000).map(|k| k as f64 / 100_000.0).filter(|x| *x <= 1.0).map(|x| 0.5 * x).fold(f64::NEG_INFINITY, f64::max)
}

/// `inf x` over `x ∈ [0, 3]` with `2x - 1 > 0`, by grid search.
pub fn covering_scalar_grid() -> f64 {
    (0..=3_000_000)
        .map(|k| 3.0 * k as f64 / 3_000_000.0)
        .filter(|x| 2.0 * x - 1.0 > 0.0)
        .fold(f64::INFINITY, f64::min)
}
