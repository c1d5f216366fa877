//! Vertex quadrature `⟨φ, ψ⟩_h = Σ_ω |ω|/3 Σ_{x ∈ V(ω)} φ_ω(x)·ψ_ω(x)` and the
//! lumped mass matrices it induces on the rotation and flux spaces.
//!
//! Only basis functions that are nonzero at a common cell vertex interact, so
//! for `Lagrange1` and `Bdm1` the lumped matrix is block diagonal once the
//! DOFs are grouped by vertex. For `Rt0` an edge function is nonzero at both
//! endpoints and the groups overlap.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::assembly::{mass_matrix, CellWeight};
use crate::error::{Error, Result};
use crate::integration::TRIANGLE_DEG4;
use crate::spaces::{bdm_dof, BasisValue, CellGeometry, FeSpace, SpaceKind};
use crate::sparse::{dot, CholeskyFactor, CsrMatrix, TripletBuilder};

const VERTEX_BARY: [[f64; 3]; 3] = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];

#[derive(Debug, Clone)]
pub struct LumpedMass {
    matrix: CsrMatrix,
    groups: Vec<Vec<usize>>,
    vertex_local: bool,
}

impl LumpedMass {
    pub fn matrix(&self) -> &CsrMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> CsrMatrix {
        self.matrix
    }

    /// For each mesh vertex, the DOFs whose basis functions are nonzero there.
    pub fn vertex_groups(&self) -> &[Vec<usize>] {
        &self.groups
    }

    /// Whether the vertex groups partition the DOFs, making the matrix block
    /// diagonal after permutation.
    pub fn is_vertex_local(&self) -> bool {
        self.vertex_local
    }

    /// Dense per-vertex blocks.
    pub fn vertex_blocks(&self) -> Vec<DMatrix<f64>> {
        self.groups.iter().map(|g| self.matrix.dense_block(g, g)).collect()
    }

    /// Smallest eigenvalue over all per-vertex blocks.
    pub fn min_block_eigenvalue(&self) -> f64 {
        self.vertex_blocks()
            .into_iter()
            .filter(|b| b.nrows() > 0)
            .map(|b| b.symmetric_eigenvalues().min())
            .fold(f64::INFINITY, f64::min)
    }
}

fn check_space(space: &FeSpace) -> Result<()> {
    match space.kind() {
        SpaceKind::P0 => Err(Error::UnsupportedSpace(
            "the vertex rule is used on the rotation and flux spaces only".into(),
        )),
        _ => Ok(()),
    }
}

fn vertex_values(space: &FeSpace, c: usize, geo: &CellGeometry, lv: usize) -> Vec<BasisValue> {
    space.local_values(c, geo, VERTEX_BARY[lv])
}

fn pair(a: BasisValue, b: BasisValue) -> f64 {
    match (a, b) {
        (BasisValue::Scalar(x), BasisValue::Scalar(y)) => x * y,
        (BasisValue::Vector(x), BasisValue::Vector(y)) => x[0] * y[0] + x[1] * y[1],
        _ => panic!("scalar/vector mismatch"),
    }
}

fn field_value(space: &FeSpace, coeffs: &[f64], dofs: &[usize], vals: &[BasisValue]) -> BasisValue {
    if space.kind().is_vector() {
        let mut v = [0.0; 2];
        for (d, b) in dofs.iter().zip(vals) {
            let b = b.vector();
            v[0] += coeffs[*d] * b[0];
            v[1] += coeffs[*d] * b[1];
        }
        BasisValue::Vector(v)
    } else {
        BasisValue::Scalar(dofs.iter().zip(vals).map(|(d, b)| coeffs[*d] * b.scalar()).sum())
    }
}

/// Vertex-rule pairing of a discrete field with a function given per cell
/// and point (`g(cell, x)`), e.g. an elementwise constant.
pub fn vertex_pairing(space: &FeSpace, coeffs: &[f64], g: impl Fn(usize, [f64; 2]) -> BasisValue) -> Result<f64> {
    check_space(space)?;
    if coeffs.len() != space.dof_count() {
        return Err(Error::DimensionMismatch { expected: space.dof_count(), got: coeffs.len() });
    }
    let mesh = space.mesh();
    let mut sum = 0.0;
    for c in 0..mesh.num_cells() {
        let geo = CellGeometry::new(mesh, c);
        let dofs = space.local_dofs(c);
        let mut cell_sum = 0.0;
        for lv in 0..3 {
            let vals = vertex_values(space, c, &geo, lv);
            let f = field_value(space, coeffs, &dofs, &vals);
            cell_sum += pair(f, g(c, geo.x[lv]));
        }
        sum += geo.area / 3.0 * cell_sum;
    }
    Ok(sum)
}

/// Exact (degree-4 rule) pairing counterpart of [`vertex_pairing`].
pub fn exact_pairing(space: &FeSpace, coeffs: &[f64], g: impl Fn(usize, [f64; 2]) -> BasisValue) -> Result<f64> {
    if coeffs.len() != space.dof_count() {
        return Err(Error::DimensionMismatch { expected: space.dof_count(), got: coeffs.len() });
    }
    let mesh = space.mesh();
    let mut sum = 0.0;
    for c in 0..mesh.num_cells() {
        let geo = CellGeometry::new(mesh, c);
        let dofs = space.local_dofs(c);
        for (b, w) in TRIANGLE_DEG4.iter() {
            let vals = space.local_values(c, &geo, *b);
            let f = field_value(space, coeffs, &dofs, &vals);
            sum += w * geo.area * pair(f, g(c, geo.point(*b)));
        }
    }
    Ok(sum)
}

/// `⟨φ_a, φ_b⟩_h` for two coefficient vectors on the same space.
pub fn vertex_inner_product(space: &FeSpace, a: &[f64], b: &[f64]) -> Result<f64> {
    check_space(space)?;
    for v in [a, b] {
        if v.len() != space.dof_count() {
            return Err(Error::DimensionMismatch { expected: space.dof_count(), got: v.len() });
        }
    }
    let mesh = space.mesh();
    let mut sum = 0.0;
    for c in 0..mesh.num_cells() {
        let geo = CellGeometry::new(mesh, c);
        let dofs = space.local_dofs(c);
        let mut cell_sum = 0.0;
        for lv in 0..3 {
            let vals = vertex_values(space, c, &geo, lv);
            cell_sum += pair(field_value(space, a, &dofs, &vals), field_value(space, b, &dofs, &vals));
        }
        sum += geo.area / 3.0 * cell_sum;
    }
    Ok(sum)
}

/// Assembles `⟨w φ_j, φ_i⟩_h`. Tensor weights are allowed on vector spaces.
pub fn lumped_mass(space: &FeSpace, weight: &CellWeight) -> Result<LumpedMass> {
    check_space(space)?;
    let mesh = space.mesh();
    weight.validate(mesh.num_cells(), space.kind().is_vector())?;
    let n = space.dof_count();
    let nloc = space.kind().local_dim();
    let mut t = TripletBuilder::with_capacity(n, n, mesh.num_cells() * nloc * nloc);
    for c in 0..mesh.num_cells() {
        let geo = CellGeometry::new(mesh, c);
        let dofs = space.local_dofs(c);
        let mut local = vec![0.0; nloc * nloc];
        for lv in 0..3 {
            let vals = vertex_values(space, c, &geo, lv);
            for i in 0..nloc {
                for j in i..nloc {
                    let v = geo.area / 3.0 * weight.pair(c, vals[j], vals[i]);
                    local[i * nloc + j] += v;
                }
            }
        }
        for i in 0..nloc {
            for j in i..nloc {
                let v = local[i * nloc + j];
                if v == 0.0 {
                    continue;
                }
                t.push(dofs[i], dofs[j], v);
                if i != j {
                    t.push(dofs[j], dofs[i], v);
                }
            }
        }
    }
    let matrix = t.build();
    let groups: Vec<Vec<usize>> = (0..mesh.num_vertices())
        .map(|v| match space.kind() {
            SpaceKind::Lagrange1 => vec![v],
            SpaceKind::Rt0 => mesh.vertex_edges(v).to_vec(),
            SpaceKind::Bdm1 => mesh.vertex_edges(v).iter().map(|&e| bdm_dof(mesh, e, v)).collect(),
            SpaceKind::P0 => unreachable!(),
        })
        .collect();
    let vertex_local = space.kind() != SpaceKind::Rt0;
    Ok(LumpedMass { matrix, groups, vertex_local })
}

/// Inverts a matrix that is block diagonal with respect to `groups` by
/// factorizing each dense block. Fails if an entry couples two groups or a
/// block is not positive definite.
pub fn block_diagonal_inverse(m: &CsrMatrix, groups: &[Vec<usize>]) -> Result<CsrMatrix> {
    let n = m.nrows();
    let mut owner = vec![usize::MAX; n];
    for (g, dofs) in groups.iter().enumerate() {
        for &d in dofs {
            if owner[d] != usize::MAX {
                return Err(Error::NotCondensable(format!("DOF {d} belongs to two vertex groups")));
            }
            owner[d] = g;
        }
    }
    if let Some(d) = owner.iter().position(|&o| o == usize::MAX) {
        return Err(Error::NotCondensable(format!("DOF {d} is not in any vertex group")));
    }
    for (r, c, v) in m.iter() {
        if v != 0.0 && owner[r] != owner[c] {
            return Err(Error::NotCondensable(format!("entry ({r},{c}) couples two vertex groups")));
        }
    }
    let inverses: Vec<Result<DMatrix<f64>>> = groups
        .par_iter()
        .enumerate()
        .map(|(g, dofs)| {
            let block = m.dense_block(dofs, dofs);
            let chol = block
                .cholesky()
                .ok_or_else(|| Error::Factorization(format!("vertex block {g} is not positive definite")))?;
            Ok(chol.inverse())
        })
        .collect();
    let mut t = TripletBuilder::new(n, n);
    for (dofs, inv) in groups.iter().zip(inverses) {
        let inv = inv?;
        for (i, &di) in dofs.iter().enumerate() {
            for (j, &dj) in dofs.iter().enumerate() {
                // symmetrize: the dense inverse need not be bitwise symmetric
                t.push(di, dj, 0.5 * (inv[(i, j)] + inv[(j, i)]));
            }
        }
    }
    Ok(t.build())
}

/// Extremal ratios `‖φ‖_h / ‖φ‖` found from seeded random coefficient
/// vectors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EquivalenceRatio {
    pub min: f64,
    pub max: f64,
    pub samples: usize,
    pub seed: u64,
}

/// Lanczos steps grown from each random vector.
const KRYLOV_STEPS: usize = 12;

/// Each random vector starts a short Lanczos run for the pencil `(M_h, M)`
/// in the `M` inner product, and the extreme Ritz values enter the bounds.
/// Every Ritz value is the squared ratio of an actual coefficient vector, so
/// the result is always an inner estimate of the equivalence constants; the
/// bare random vectors concentrate near the mean ratio on fine meshes and
/// would make the interval look mesh dependent.
pub fn norm_equivalence_ratio(space: &FeSpace, samples: usize, seed: u64) -> Result<EquivalenceRatio> {
    check_space(space)?;
    if samples == 0 {
        return Err(Error::InvalidParameter { name: "samples", msg: "must be at least 1".into() });
    }
    let lumped = lumped_mass(space, &CellWeight::Uniform(1.0))?;
    let exact = mass_matrix(space, &CellWeight::Uniform(1.0))?;
    let chol = CholeskyFactor::new(&exact)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let starts: Vec<Vec<f64>> =
        (0..samples).map(|_| (0..space.dof_count()).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
    let (min, max) = starts
        .par_iter()
        .map(|x| ritz_extremes(&lumped.matrix, &exact, &chol, x))
        .reduce(|| (f64::INFINITY, 0.0), |a, b| (a.0.min(b.0), a.1.max(b.1)));
    Ok(EquivalenceRatio { min: min.sqrt(), max: max.sqrt(), samples, seed })
}

fn ritz_extremes(mh: &CsrMatrix, m: &CsrMatrix, chol: &CholeskyFactor, x: &[f64]) -> (f64, f64) {
    let steps = KRYLOV_STEPS.min(x.len());
    let mnorm = |v: &[f64]| dot(v, &m.matvec(v)).sqrt();
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(steps);
    let s = mnorm(x);
    basis.push(x.iter().map(|v| v / s).collect());
    let mut t = DMatrix::<f64>::zeros(steps, steps);
    let mut k = steps;
    for j in 0..steps {
        let mut w = chol.solve(&mh.matvec(&basis[j]));
        // full reorthogonalization in the M inner product
        for _ in 0..2 {
            let mw = m.matvec(&w);
            for (i, v) in basis.iter().enumerate() {
                let c = dot(v, &mw);
                if i >= j.saturating_sub(1) && i <= j {
                    t[(i, j)] += c;
                }
                w.iter_mut().zip(v).for_each(|(a, b)| *a -= c * b);
            }
        }
        if j + 1 == steps {
            break;
        }
        let beta = mnorm(&w);
        if beta <= 1e-12 * t[(j, j)].abs().max(1.0) {
            k = j + 1;
            break;
        }
        t[(j + 1, j)] = beta;
        basis.push(w.iter().map(|v| v / beta).collect());
    }
    let t = t.view((0, 0), (k, k)).into_owned();
    let sym = (&t + t.transpose()) * 0.5;
    let e = sym.symmetric_eigenvalues();
    (e.min(), e.max())
}

/// `‖φ‖_h / ‖φ‖` for one coefficient vector.
pub fn norm_ratio(lumped: &LumpedMass, exact: &CsrMatrix, x: &[f64]) -> f64 {
    (dot(x, &lumped.matrix.matvec(x)) / dot(x, &exact.matvec(x))).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{unit_square_mesh, Mesh};
    use std::sync::Arc;

    fn space(n: usize, kind: SpaceKind) -> FeSpace {
        FeSpace::unconstrained(Arc::new(unit_square_mesh(n).unwrap()), kind)
    }

    #[test]
    fn reference_triangle_hats() {
        let mesh = Mesh::new(vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]], vec![[0, 1, 2]], &[]).unwrap();
        let s = FeSpace::unconstrained(Arc::new(mesh), SpaceKind::Lagrange1);
        for i in 0..3 {
            for j in 0..3 {
                let mut a = vec![0.0; 3];
                let mut b = vec![0.0; 3];
                a[i] = 1.0;
                b[j] = 1.0;
                let v = vertex_inner_product(&s, &a, &b).unwrap();
                let expect = if i == j { 1.0 / 6.0 } else { 0.0 };
                assert!((v - expect).abs() < 1e-16);
            }
        }
    }

    #[test]
    fn lagrange_lumped_mass_is_diagonal_vertex_mass() {
        let s = space(1, SpaceKind::Lagrange1);
        let m = lumped_mass(&s, &CellWeight::Uniform(1.0)).unwrap();
        let mesh = s.mesh();
        for i in 0..4 {
            for j in 0..4 {
                let v = m.matrix().get(i, j);
                if i == j {
                    let expect: f64 = mesh.vertex_cells(i).iter().map(|&c| mesh.cell_area(c) / 3.0).sum();
                    assert!((v - expect).abs() < 1e-16);
                } else {
                    assert_eq!(v, 0.0);
                }
            }
        }
    }

    #[test]
    fn bdm_blocks_do_not_couple_vertices() {
        let s = space(3, SpaceKind::Bdm1);
        let m = lumped_mass(&s, &CellWeight::Uniform(1.0)).unwrap();
        assert!(m.is_vertex_local());
        let mut owner = vec![0; s.dof_count()];
        for (v, g) in m.vertex_groups().iter().enumerate() {
            assert_eq!(g.len(), s.mesh().vertex_edges(v).len());
            for &d in g {
                owner[d] = v;
            }
        }
        for (r, c, _) in m.matrix().iter() {
            assert_eq!(owner[r], owner[c]);
        }
        assert!(m.min_block_eigenvalue() > 0.0);
        assert!(block_diagonal_inverse(m.matrix(), m.vertex_groups()).is_ok());
    }

    #[test]
    fn tensor_weight_is_bilinear() {
        let s = space(2, SpaceKind::Bdm1);
        let nc = s.mesh().num_cells();
        let m = |k1: f64, k2: f64| {
            lumped_mass(&s, &CellWeight::Tensor(vec![[[k1, 0.0], [0.0, k2]]; nc])).unwrap().into_matrix()
        };
        let combo = m(1.0, 2.0).axpby(2.0, &m(3.0, 1.0), 1.0);
        assert!(combo.max_abs_diff(&m(5.0, 5.0)) < 1e-13);
        let bad = CellWeight::Tensor(vec![[[1.0, 2.0], [2.0, 1.0]]; nc]);
        assert!(matches!(lumped_mass(&s, &bad), Err(Error::NonSpdWeight { .. })));
    }

    #[test]
    fn p0_is_rejected() {
        let s = space(1, SpaceKind::P0);
        assert!(matches!(norm_equivalence_ratio(&s, 3, 1), Err(Error::UnsupportedSpace(_))));
    }

    #[test]
    fn single_basis_vector_ratio() {
        let s = space(2, SpaceKind::Lagrange1);
        let lumped = lumped_mass(&s, &CellWeight::Uniform(1.0)).unwrap();
        let exact = mass_matrix(&s, &CellWeight::Uniform(1.0)).unwrap();
        let mut e = vec![0.0; s.dof_count()];
        e[4] = 1.0;
        let expect = (lumped.matrix().get(4, 4) / exact.get(4, 4)).sqrt();
        assert!((norm_ratio(&lumped, &exact, &e) - expect).abs() < 1e-15);
    }
}
