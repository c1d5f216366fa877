use std::sync::Arc;

use biot_mrfem::assembly::{curl_matrix, div_matrix, mass_matrix, CellWeight};
use biot_mrfem::integration::TRIANGLE_DEG4;
use biot_mrfem::mesh::unit_square_mesh;
use biot_mrfem::quadrature::{exact_pairing, lumped_mass, norm_equivalence_ratio, vertex_inner_product, vertex_pairing};
use biot_mrfem::spaces::{BasisValue, CellGeometry, FeSpace, SpaceKind};
use biot_mrfem::sparse::dot;
use proptest::prelude::*;

mod common;
use common::jittered;

fn coeffs(n: usize, seed: u64) -> Vec<f64> {
    let mut s = seed | 1;
    (0..n)
        .map(|_| {
            s ^= s << 13;
            s ^= s >> 7;
            s ^= s << 17;
            (s >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0
        })
        .collect()
}

/// L² distance between a discrete vector field and `f`.
fn l2_error(space: &FeSpace, c: &[f64], f: impl Fn([f64; 2]) -> [f64; 2]) -> f64 {
    let mesh = space.mesh();
    let mut s = 0.0;
    for cell in 0..mesh.num_cells() {
        let geo = CellGeometry::new(mesh, cell);
        for (b, w) in TRIANGLE_DEG4 {
            let v = space.eval_field(c, cell, b).unwrap().vector();
            let e = f(geo.point(b));
            s += w * mesh.cell_area(cell) * ((v[0] - e[0]).powi(2) + (v[1] - e[1]).powi(2));
        }
    }
    s.sqrt()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn div_of_curl_vanishes(n in 1usize..7, seed in any::<u64>(), amp in 0.0f64..0.3) {
        let mesh = Arc::new(jittered(n, amp, seed));
        let r = FeSpace::unconstrained(mesh.clone(), SpaceKind::Lagrange1);
        let u = FeSpace::unconstrained(mesh.clone(), SpaceKind::Rt0);
        let p = FeSpace::unconstrained(mesh.clone(), SpaceKind::P0);
        let br = curl_matrix(&r, &u).unwrap();
        let bu = div_matrix(&u, &p).unwrap();
        // the product cancels entry by entry: each vertex meets two edges of a
        // cell with equal and opposite weights 1/|ω|
        prop_assert_eq!(bu.matmul(&br).max_abs(), 0.0);
        // applied to a vector only rounding remains
        let x = coeffs(r.dof_count(), seed);
        let d = bu.matvec(&br.matvec(&x));
        let scale = bu.max_abs() * x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        prop_assert!(d.iter().all(|v| v.abs() <= 16.0 * f64::EPSILON * scale));
    }

    #[test]
    fn curl_matrix_agrees_pointwise(n in 1usize..6, seed in any::<u64>(), amp in 0.0f64..0.3) {
        let mesh = Arc::new(jittered(n, amp, seed));
        let r = FeSpace::unconstrained(mesh.clone(), SpaceKind::Lagrange1);
        let u = FeSpace::unconstrained(mesh.clone(), SpaceKind::Rt0);
        let x = coeffs(r.dof_count(), seed ^ 7);
        let ux = curl_matrix(&r, &u).unwrap().matvec(&x);
        for c in 0..mesh.num_cells() {
            let want = r.eval_curl(&x, c).unwrap();
            for (b, _) in TRIANGLE_DEG4 {
                let got = u.eval_field(&ux, c, b).unwrap().vector();
                prop_assert!((got[0] - want[0]).abs() <= 1e-13 * (1.0 + want[0].abs()));
                prop_assert!((got[1] - want[1]).abs() <= 1e-13 * (1.0 + want[1].abs()));
            }
        }
    }

    #[test]
    fn divergence_matrix_matches_pointwise_divergence(n in 1usize..6, seed in any::<u64>(), bdm in any::<bool>()) {
        let mesh = Arc::new(jittered(n, 0.2, seed));
        let kind = if bdm { SpaceKind::Bdm1 } else { SpaceKind::Rt0 };
        let q = FeSpace::unconstrained(mesh.clone(), kind);
        let p = FeSpace::unconstrained(mesh.clone(), SpaceKind::P0);
        let x = coeffs(q.dof_count(), seed);
        let d = div_matrix(&q, &p).unwrap().matvec(&x);
        for (c, dc) in d.iter().enumerate() {
            let e = q.eval_div(&x, c).unwrap();
            prop_assert!((dc - e).abs() <= 1e-12 * (1.0 + e.abs()));
        }
    }

    #[test]
    fn linear_fields_reproduced_by_bdm1(a in proptest::array::uniform6(-2.0f64..2.0), seed in any::<u64>()) {
        let mesh = Arc::new(jittered(3, 0.25, seed));
        let q = FeSpace::unconstrained(mesh.clone(), SpaceKind::Bdm1);
        let f = |x: [f64; 2]| [a[0] + a[1] * x[0] + a[2] * x[1], a[3] + a[4] * x[0] + a[5] * x[1]];
        let c = q.interpolate_vector(f).unwrap();
        prop_assert!(l2_error(&q, &c, f) < 1e-13);
        // RT0 reproduces the constant part only
        let rt = FeSpace::unconstrained(mesh, SpaceKind::Rt0);
        let g = |_: [f64; 2]| [a[0], a[3]];
        prop_assert!(l2_error(&rt, &rt.interpolate_vector(g).unwrap(), g) < 1e-13);
    }

    #[test]
    fn vertex_rule_exact_for_piecewise_constant_test_functions(seed in any::<u64>(), kind in 0usize..3) {
        let kind = [SpaceKind::Lagrange1, SpaceKind::Rt0, SpaceKind::Bdm1][kind];
        let mesh = Arc::new(jittered(3, 0.25, seed));
        let space = FeSpace::unconstrained(mesh.clone(), kind);
        let x = coeffs(space.dof_count(), seed);
        let k = coeffs(2 * mesh.num_cells(), seed ^ 3);
        let g = |c: usize, _: [f64; 2]| if kind.is_vector() { BasisValue::Vector([k[2 * c], k[2 * c + 1]]) } else { BasisValue::Scalar(k[2 * c]) };
        let h = vertex_pairing(&space, &x, g).unwrap();
        let e = exact_pairing(&space, &x, g).unwrap();
        prop_assert!((h - e).abs() <= 1e-13 * e.abs().max(1e-300));
    }

    #[test]
    fn lumped_masses_symmetric_positive_and_vertex_local(seed in any::<u64>(), kind in 0usize..2, w in 0.1f64..10.0) {
        let kind = [SpaceKind::Lagrange1, SpaceKind::Bdm1][kind];
        let mesh = Arc::new(jittered(4, 0.25, seed));
        let space = FeSpace::unconstrained(mesh.clone(), kind);
        let lm = lumped_mass(&space, &CellWeight::Uniform(w)).unwrap();
        prop_assert!(lm.is_vertex_local());
        prop_assert!(lm.matrix().is_symmetric_exact());
        prop_assert!(lm.min_block_eigenvalue() > 0.0);
        let a = coeffs(space.dof_count(), seed);
        let b = coeffs(space.dof_count(), seed ^ 5);
        let ab = vertex_inner_product(&space, &a, &b).unwrap();
        let ba = vertex_inner_product(&space, &b, &a).unwrap();
        prop_assert!((ab - ba).abs() <= 1e-14 * ab.abs().max(1.0));
        prop_assert!(dot(&a, &lm.matrix().matvec(&a)) > 0.0);
    }

    #[test]
    fn exact_masses_are_symmetric_positive(seed in any::<u64>(), kind in 0usize..4) {
        let kind = [SpaceKind::Lagrange1, SpaceKind::Rt0, SpaceKind::Bdm1, SpaceKind::P0][kind];
        let mesh = Arc::new(jittered(3, 0.25, seed));
        let space = FeSpace::unconstrained(mesh, kind);
        let m = mass_matrix(&space, &CellWeight::Uniform(1.0)).unwrap();
        prop_assert!(m.is_symmetric_exact());
        let x = coeffs(space.dof_count(), seed);
        prop_assert!(dot(&x, &m.matvec(&x)) > 0.0);
    }
}

#[test]
fn interpolation_orders_rt0_one_bdm1_two() {
    let f = |x: [f64; 2]| [(3.0 * x[0]).sin() * x[1], (2.0 * x[1]).cos() + x[0] * x[0]];
    let errs = |kind| -> Vec<f64> {
        [4, 8, 16]
            .iter()
            .map(|&n| {
                let s = FeSpace::unconstrained(Arc::new(unit_square_mesh(n).unwrap()), kind);
                l2_error(&s, &s.interpolate_vector(f).unwrap(), f)
            })
            .collect()
    };
    let rate = |e: &[f64]| (e[1] / e[2]).log2();
    let (rt, bdm) = (errs(SpaceKind::Rt0), errs(SpaceKind::Bdm1));
    assert!((rate(&rt) - 1.0).abs() < 0.1, "RT0 rate {}", rate(&rt));
    assert!((rate(&bdm) - 2.0).abs() < 0.1, "BDM1 rate {}", rate(&bdm));
}

#[test]
fn lagrange_norm_equivalence_is_mesh_independent() {
    let rs: Vec<_> = [4, 8, 16]
        .iter()
        .map(|&n| norm_equivalence_ratio(&FeSpace::unconstrained(Arc::new(unit_square_mesh(n).unwrap()), SpaceKind::Lagrange1), 200, 3).unwrap())
        .collect();
    for r in &rs[1..] {
        assert!((r.min - rs[0].min).abs() / rs[0].min < 0.05, "{rs:?}");
        assert!((r.max - rs[0].max).abs() / rs[0].max < 0.05, "{rs:?}");
    }
    // the exact bounds for P1 with the vertex rule lie in [1, 2]
    assert!(rs.iter().all(|r| r.min >= 1.0 - 1e-12 && r.max <= 2.0 + 1e-12));
}

#[test]
fn p0_is_outside_the_vertex_rule() {
    let s = FeSpace::unconstrained(Arc::new(unit_square_mesh(2).unwrap()), SpaceKind::P0);
    assert!(matches!(lumped_mass(&s, &CellWeight::Uniform(1.0)), Err(biot_mrfem::Error::UnsupportedSpace(_))));
}
