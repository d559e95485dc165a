mod common;

use common::*;
use hcg_core::instances::*;
use hcg_core::linalg::{flat_from_mat, mat_from_flat, min_eigenvalue};
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn opt_ref(name: &str) -> f64 {
    builtin(name, 0).unwrap().opt_ref.unwrap().value
}

#[test]
fn maxcut_references_match_grid_oracles() {
    assert!((maxcut_edge_grid() - 1.0).abs() <= 1e-3);
    assert!((-opt_ref("maxcut-edge") - maxcut_edge_grid()).abs() <= 1e-3);
    let tri = maxcut_triangle_grid(200);
    assert!((-opt_ref("maxcut-triangle") - tri).abs() <= 1e-2, "grid {tri}");
}

#[test]
fn mixing_references_match_grid_oracles() {
    assert!((-opt_ref("mixing-edge") - mixing_edge_grid()).abs() <= 1e-4);
    let path = mixing_path3_grid(0.01);
    assert!((-opt_ref("mixing-path3") - path).abs() <= 2e-2, "grid {path}");
}

#[test]
fn covering_references_match_closed_forms() {
    assert!((opt_ref("covering-scalar") - covering_scalar_grid()).abs() <= 1e-5);
    assert_eq!(opt_ref("covering-identity-10"), 10.0);
    assert_eq!(opt_ref("packing-example"), -1.0);
}

#[test]
fn every_builtin_starts_strictly_feasible() {
    for name in BUILTINS {
        let inst = builtin(name, 1).unwrap();
        assert!(feasibility_margin(&inst, &inst.x0) > 0.0, "{name}");
        assert!(inst.barrier.point(&inst.x0).is_ok(), "{name}");
        assert_eq!(inst.dim(), inst.set.dim(), "{name}");
    }
}

#[test]
fn barrier_parameters_match_the_families() {
    let mc = builtin("maxcut-triangle", 0).unwrap();
    assert_eq!(mc.nu(), 3.0);
    let mix = builtin("mixing-path3", 0).unwrap();
    assert_eq!(mix.nu(), 2.0);
    for inst in [&mc, &mix] {
        let p = inst.barrier.point(&inst.x0).unwrap();
        assert!((p.curvature(&inst.x0) - inst.nu()).abs() <= 1e-8 * inst.nu());
        assert!((p.grad_dot(&inst.x0) + inst.nu()).abs() <= 1e-8 * inst.nu());
    }
    assert_eq!(builtin("packing-example", 0).unwrap().nu(), 1.0);
    assert_eq!(builtin("covering-identity-10", 0).unwrap().nu(), 10.0);
    assert_eq!(builtin("mixing-random", 2).unwrap().nu(), 1000.0);
    assert_eq!(builtin("maxcut-random", 2).unwrap().nu(), 50.0);
}

#[test]
fn mixing_normalization_and_trace_bound() {
    let inst = builtin("mixing-random", 3).unwrap();
    let g = inst.graph.as_ref().unwrap();
    let total: f64 = g.edges.iter().map(|e| e.w).sum();
    assert!((total - 1e4).abs() <= 1e-12 * 1e4);
    let path = builtin("mixing-path3", 0).unwrap();
    let opt = [1.0, 2.0, 2.0, 4.0, 1.0];
    assert!(feasibility_margin(&path, &opt) >= -1e-12);
    assert!((path.reported_objective(&opt) - 2.0).abs() <= 1e-12);
}

#[test]
fn repair_worked_case() {
    let x = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -0.5]);
    let (y, report) = repair_maxcut_solution(&x);
    assert_eq!(report.shift, -0.5);
    assert_eq!(report.scale, 1.5);
    assert!((y - DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0])).norm() <= 1e-15);
}

#[test]
fn mixing_repair_single_edge_divides_by_gamma_plus_one() {
    let g = Graph::new(2, [(1, 2, 1.0)]).unwrap();
    let x = DMatrix::from_element(1, 1, 2.0);
    let (y, report) = repair_mixing_solution(&x, &g, 100).unwrap();
    assert_eq!(report.steps, vec![(2, 1.0)]);
    assert_eq!(y[(0, 0)], 1.0);
    let (z, again) = repair_mixing_solution(&y, &g, 100).unwrap();
    assert!(again.steps.is_empty());
    assert_eq!(z, y);
}

fn random_sym(seed: u64, n: usize, psd: bool) -> DMatrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = DMatrix::from_vec(n, n, gaussian_vec(&mut rng, n * n));
    if psd {
        &g * g.transpose()
    } else {
        (&g + g.transpose()) * 0.5
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn maxcut_repair_is_feasible_and_idempotent(seed in any::<u64>(), n in 1usize..8, scale in 0.1f64..5.0) {
        let x = random_sym(seed, n, false) * scale;
        let (y, report) = repair_maxcut_solution(&x);
        prop_assert!(report.margin_after >= -1e-9 * scale);
        prop_assert!(min_eigenvalue(&y) >= -1e-9 * scale);
        prop_assert!((0..n).all(|i| y[(i, i)] <= 1.0 + 1e-12));
        let (z, again) = repair_maxcut_solution(&y);
        prop_assert_eq!(again.scale, 1.0);
        prop_assert!((z - &y).norm() <= 1e-12 * (1.0 + y.norm()));
    }

    #[test]
    fn mixing_repair_is_feasible_and_idempotent(seed in any::<u64>(), n in 2usize..8, extra in 0usize..6, scale in 0.1f64..5.0) {
        let m = (n - 1 + extra).min(n * (n - 1) / 2);
        let g = random_mixing_graph(n, m, seed).unwrap();
        let x = random_sym(seed ^ 0x5eed, n - 1, true) * scale;
        let (y, report) = repair_mixing_solution(&x, &g, 10_000).unwrap();
        let flat = flat_from_mat(&y);
        for (d, e) in edge_values(&g, &flat).iter().zip(&g.edges) {
            prop_assert!(*d <= e.w * (1.0 + 1e-12) + 1e-12);
        }
        prop_assert!(min_eigenvalue(&y) >= -1e-9 * (1.0 + y.norm()));
        prop_assert!(report.margin_after >= -1e-9 * (1.0 + y.norm()));
        let (z, again) = repair_mixing_solution(&y, &g, 10_000).unwrap();
        prop_assert!(again.steps.is_empty());
        prop_assert_eq!(z, y);
    }

    #[test]
    fn random_graphs_are_deterministic_and_connected(seed in any::<u64>(), n in 2usize..30, extra in 0usize..40) {
        let m = (n - 1 + extra).min(n * (n - 1) / 2);
        let a = random_mixing_graph(n, m, seed).unwrap();
        let b = random_mixing_graph(n, m, seed).unwrap();
        prop_assert_eq!(&a, &b);
        prop_assert_eq!(a.edges.len(), m);
        prop_assert!(a.distances_from_first().is_some());
        prop_assert!(a.edges.iter().all(|e| e.w > 0.0 && e.w <= 1.0 && e.i < e.j));
    }

    #[test]
    fn gset_round_trip(seed in any::<u64>(), n in 2usize..20, extra in 0usize..20) {
        let m = (n - 1 + extra).min(n * (n - 1) / 2);
        let g = random_mixing_graph(n, m, seed).unwrap();
        let mut text = format!("{} {}\n", g.n, g.edges.len());
        for e in &g.edges {
            text.push_str(&format!("{} {} {}\n", e.i, e.j, e.w));
        }
        prop_assert_eq!(parse_gset(&text).unwrap(), g);
    }

    #[test]
    fn random_builders_start_strictly_feasible(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let inst = random_instance(&mut rng);
        prop_assert!(feasibility_margin(&inst, &inst.x0) > 0.0);
        prop_assert!(inst.barrier.point(&inst.x0).is_ok());
    }

    #[test]
    fn instance_files_round_trip(seed in any::<u64>(), n in 2usize..10, normalize in any::<bool>()) {
        let m = n - 1 + (seed % 3) as usize;
        let g = random_mixing_graph(n, m.min(n * (n - 1) / 2), seed).unwrap();
        let file = InstanceFile::from_graph(InstanceKind::Mixing, &g, Some(seed), Some(normalize));
        let back: InstanceFile = serde_json::from_str(&serde_json::to_string(&file).unwrap()).unwrap();
        prop_assert_eq!(&back, &file);
        let a = back.build().unwrap();
        let b = build_mixing(&g, normalize).unwrap();
        prop_assert_eq!(a.x0, b.x0);
        prop_assert_eq!(a.objective.coeffs, b.objective.coeffs);
    }
}

#[test]
fn margin_examples() {
    let inst = builtin("maxcut-edge", 0).unwrap();
    let x = flat_from_mat(&DMatrix::from_row_slice(2, 2, &[1.2, 0.0, 0.0, 0.5]));
    let mut full = x.clone();
    full.push(1.0);
    assert!((feasibility_margin(&inst, &full) + 0.2).abs() <= 1e-12);
    let m = mat_from_flat(&x, 2);
    assert_eq!(m[(0, 0)], 1.2);
}
