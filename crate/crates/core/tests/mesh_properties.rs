use biot_mrfem::mesh::{mesh_stats, parse_mesh, refine_uniform, unit_square_mesh, write_mesh, BoundaryConfig, FlowBc, MechanicsBc, Mesh, SQUARE_TAGS};
use proptest::prelude::*;

mod common;
use common::jittered;

fn check_topology(m: &Mesh) {
    for e in 0..m.num_edges() {
        let k = m.edge_cells(e).len();
        assert!(k == 1 || k == 2);
        assert_eq!(m.is_boundary_edge(e), k == 1);
        assert_eq!(m.edge_tag(e).is_some(), k == 1);
    }
    for c in 0..m.num_cells() {
        assert!(m.cell_area(c) > 0.0);
    }
    assert_eq!(m.euler_characteristic(), 1);
    m.validate().unwrap();
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn topology_invariants(n in 1usize..10, seed in any::<u64>(), amp in 0.0f64..0.3) {
        let m = jittered(n, amp, seed);
        check_topology(&m);
        prop_assert!((m.total_area() - 1.0).abs() < 1e-14);
        prop_assert_eq!(m.num_vertices(), (n + 1) * (n + 1));
        prop_assert_eq!(m.num_cells(), 2 * n * n);
    }

    #[test]
    fn refinement_preserves_area_and_topology(n in 1usize..6, seed in any::<u64>(), amp in 0.0f64..0.3) {
        let m = jittered(n, amp, seed);
        let r = refine_uniform(&m).unwrap();
        check_topology(&r);
        prop_assert_eq!(r.num_cells(), 4 * m.num_cells());
        let rel = (r.total_area() - m.total_area()).abs() / m.total_area();
        prop_assert!(rel <= 1e-14, "area drift {rel:e}");
        prop_assert_eq!(r.tag_set(), m.tag_set());
        // midpoint subdivision gives four similar children
        let (a, b) = (mesh_stats(&m), mesh_stats(&r));
        prop_assert!((b.h_max - 0.5 * a.h_max).abs() <= 1e-14 * a.h_max);
        prop_assert!((b.shape_regularity - a.shape_regularity).abs() <= 1e-12 * a.shape_regularity);
    }

    #[test]
    fn text_roundtrip(n in 1usize..6, seed in any::<u64>()) {
        let m = jittered(n, 0.2, seed);
        let back = parse_mesh(&write_mesh(&m)).unwrap();
        prop_assert_eq!(back.vertices(), m.vertices());
        prop_assert_eq!(back.cells(), m.cells());
        prop_assert_eq!(back.boundary_tags(), m.boundary_tags());
    }

    #[test]
    fn boundary_configs_partition_or_fail(mask in proptest::collection::vec(any::<bool>(), 4), drop in proptest::option::of(0usize..4)) {
        let m = unit_square_mesh(2).unwrap();
        let mut bc = BoundaryConfig::uniform(&SQUARE_TAGS, MechanicsBc::Displacement, FlowBc::Flux);
        for (t, &pressure) in SQUARE_TAGS.iter().zip(&mask) {
            if pressure {
                bc = bc.set(t, MechanicsBc::Rotation, FlowBc::Pressure);
            }
        }
        if let Some(d) = drop {
            bc.flow.remove(SQUARE_TAGS[d]);
        }
        let ok = drop.is_none() && mask.iter().any(|&p| p);
        prop_assert_eq!(bc.validate(&m).is_ok(), ok);
    }
}

#[test]
fn structured_examples() {
    let m1 = unit_square_mesh(1).unwrap();
    assert_eq!((m1.num_vertices(), m1.num_cells(), m1.num_edges()), (4, 2, 5));
    assert!((mesh_stats(&m1).h_max - 2f64.sqrt()).abs() < 1e-15);
    let m2 = unit_square_mesh(2).unwrap();
    assert_eq!((m2.num_vertices(), m2.num_cells(), m2.num_edges()), (9, 8, 16));
    let m4 = unit_square_mesh(4).unwrap();
    assert!((mesh_stats(&m4).h_max - 2f64.sqrt() / 4.0).abs() < 1e-15);
    assert!((m4.total_area() - 1.0).abs() < 1e-15);
    assert_eq!(refine_uniform(&m1).unwrap().num_cells(), 8);
}

#[test]
fn unknown_tag_in_config_is_rejected() {
    let m = unit_square_mesh(2).unwrap();
    let bc = BoundaryConfig::uniform(&SQUARE_TAGS, MechanicsBc::Displacement, FlowBc::Pressure).set("front", MechanicsBc::Rotation, FlowBc::Flux);
    assert!(bc.validate(&m).is_err());
}

#[test]
fn malformed_files_report_line() {
    let text = "dim=2 nv=3 nc=1\n0 0\n1 0\n0 1\n0 1 x\n";
    match parse_mesh(text) {
        Err(biot_mrfem::Error::MeshParse { line, .. }) => assert_eq!(line, 5),
        other => panic!("expected parse error, got {other:?}"),
    }
    assert!(parse_mesh("dim=3 nv=0 nc=0\n").is_err());
}
