#![allow(dead_code)]

use biot_mrfem::mesh::{unit_square_mesh, BoundaryConfig, FlowBc, MechanicsBc, Mesh, SQUARE_TAGS};

/// Structured unit-square mesh with interior vertices moved by up to
/// `amp * h`, keeping the side tags.
pub fn jittered(n: usize, amp: f64, seed: u64) -> Mesh {
    let base = unit_square_mesh(n).unwrap();
    let h = 1.0 / n as f64;
    let mut state = seed ^ 0x9e37_79b9_7f4a_7c15;
    let mut next = || {
        state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        ((state >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
    };
    let vertices: Vec<[f64; 2]> = base
        .vertices()
        .iter()
        .map(|&[x, y]| {
            let interior = x > 1e-12 && x < 1.0 - 1e-12 && y > 1e-12 && y < 1.0 - 1e-12;
            if interior {
                [x + amp * h * next(), y + amp * h * next()]
            } else {
                [x, y]
            }
        })
        .collect();
    let boundary: Vec<(usize, usize, String)> = base
        .boundary_tags()
        .iter()
        .map(|(&e, t)| {
            let [a, b] = base.edges()[e];
            (a, b, t.clone())
        })
        .collect();
    Mesh::new(vertices, base.cells().to_vec(), &boundary).unwrap()
}

/// Rotation and flux essential on two adjacent sides.
pub fn mixed_bc() -> BoundaryConfig {
    BoundaryConfig::uniform(&SQUARE_TAGS, MechanicsBc::Displacement, FlowBc::Pressure)
        .set("bottom", MechanicsBc::Rotation, FlowBc::Flux)
        .set("left", MechanicsBc::Rotation, FlowBc::Flux)
}

pub fn rel_diff(a: &[f64], b: &[f64]) -> f64 {
    let d: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let n: f64 = b.iter().map(|y| y * y).sum::<f64>().sqrt();
    if n > 0.0 { d / n } else { d }
}
