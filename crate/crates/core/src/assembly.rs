//! Exact-quadrature bilinear forms and right-hand sides.

use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::integration::{EDGE_GAUSS3, TRIANGLE_DEG4};
use crate::mesh::{BoundaryConfig, FlowBc, MechanicsBc, Mesh};
use crate::spaces::{BasisValue, CellGeometry, FeSpace, SpaceKind, Spaces};
use crate::sparse::{CsrMatrix, TripletBuilder};
use crate::system::MaterialParams;

/// Coefficient of a mass-type form, per cell.
#[derive(Debug, Clone, PartialEq)]
pub enum CellWeight {
    Uniform(f64),
    Scalar(Vec<f64>),
    /// Symmetric positive definite 2×2 tensor per cell; vector spaces only.
    Tensor(Vec<[[f64; 2]; 2]>),
}

impl CellWeight {
    pub fn validate(&self, num_cells: usize, vector_space: bool) -> Result<()> {
        match self {
            CellWeight::Uniform(w) => {
                if !(*w > 0.0 && w.is_finite()) {
                    return Err(Error::InvalidParameter { name: "weight", msg: format!("must be positive, got {w}") });
                }
            }
            CellWeight::Scalar(ws) => {
                if ws.len() != num_cells {
                    return Err(Error::DimensionMismatch { expected: num_cells, got: ws.len() });
                }
                if let Some(c) = ws.iter().position(|w| !(*w > 0.0 && w.is_finite())) {
                    return Err(Error::NonSpdWeight { cell: c });
                }
            }
            CellWeight::Tensor(ts) => {
                if !vector_space {
                    return Err(Error::UnsupportedSpace("tensor weight on a scalar space".into()));
                }
                if ts.len() != num_cells {
                    return Err(Error::DimensionMismatch { expected: num_cells, got: ts.len() });
                }
                if let Some(c) = ts.iter().position(|t| !is_spd(t)) {
                    return Err(Error::NonSpdWeight { cell: c });
                }
            }
        }
        Ok(())
    }

    /// `w(c) a·b`, or `a·K(c) b` for tensors.
    #[inline]
    pub fn pair(&self, c: usize, a: BasisValue, b: BasisValue) -> f64 {
        match (self, a, b) {
            (CellWeight::Uniform(w), a, b) => w * plain_pair(a, b),
            (CellWeight::Scalar(ws), a, b) => ws[c] * plain_pair(a, b),
            (CellWeight::Tensor(ts), BasisValue::Vector(a), BasisValue::Vector(b)) => {
                let t = &ts[c];
                a[0] * (t[0][0] * b[0] + t[0][1] * b[1]) + a[1] * (t[1][0] * b[0] + t[1][1] * b[1])
            }
            _ => panic!("tensor weight on scalar values"),
        }
    }

    /// Scalar factor on cell `c`; tensors report their largest eigenvalue.
    pub fn max_on_cell(&self, c: usize) -> f64 {
        match self {
            CellWeight::Uniform(w) => *w,
            CellWeight::Scalar(ws) => ws[c],
            CellWeight::Tensor(ts) => eig_sym(&ts[c]).1,
        }
    }
}

pub(crate) fn is_spd(t: &[[f64; 2]; 2]) -> bool {
    let finite = t.iter().flatten().all(|v| v.is_finite());
    finite && t[0][1] == t[1][0] && t[0][0] > 0.0 && t[0][0] * t[1][1] - t[0][1] * t[1][0] > 0.0
}

/// Eigenvalues `(min, max)` of a symmetric 2×2 matrix.
pub(crate) fn eig_sym(t: &[[f64; 2]; 2]) -> (f64, f64) {
    let m = 0.5 * (t[0][0] + t[1][1]);
    let d = (0.25 * (t[0][0] - t[1][1]).powi(2) + t[0][1] * t[1][0]).sqrt();
    (m - d, m + d)
}

/// Inverse of a symmetric 2×2 matrix.
pub(crate) fn inv_sym(t: &[[f64; 2]; 2]) -> [[f64; 2]; 2] {
    let det = t[0][0] * t[1][1] - t[0][1] * t[1][0];
    [[t[1][1] / det, -t[0][1] / det], [-t[1][0] / det, t[0][0] / det]]
}

#[inline]
fn plain_pair(a: BasisValue, b: BasisValue) -> f64 {
    match (a, b) {
        (BasisValue::Scalar(x), BasisValue::Scalar(y)) => x * y,
        (BasisValue::Vector(x), BasisValue::Vector(y)) => x[0] * y[0] + x[1] * y[1],
        _ => panic!("scalar/vector mismatch"),
    }
}

/// Scatters symmetric local matrices (upper triangle mirrored) in cell order.
fn scatter_symmetric(n: usize, locals: Vec<(Vec<usize>, Vec<f64>)>) -> CsrMatrix {
    let cap = locals.iter().map(|(d, _)| d.len() * d.len()).sum();
    let mut t = TripletBuilder::with_capacity(n, n, cap);
    for (dofs, local) in locals {
        let k = dofs.len();
        for i in 0..k {
            for j in i..k {
                let v = local[i * k + j];
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
    t.build()
}

/// `⟨w φ_j, φ_i⟩_Ω` by the degree-4 cell rule.
pub fn mass_matrix(space: &FeSpace, weight: &CellWeight) -> Result<CsrMatrix> {
    let mesh = space.mesh();
    weight.validate(mesh.num_cells(), space.kind().is_vector())?;
    let nloc = space.kind().local_dim();
    let locals: Vec<_> = (0..mesh.num_cells())
        .into_par_iter()
        .map(|c| {
            let geo = CellGeometry::new(mesh, c);
            let mut local = vec![0.0; nloc * nloc];
            for (b, w) in TRIANGLE_DEG4.iter() {
                let vals = space.local_values(c, &geo, *b);
                for i in 0..nloc {
                    for j in i..nloc {
                        local[i * nloc + j] += w * geo.area * weight.pair(c, vals[i], vals[j]);
                    }
                }
            }
            (space.local_dofs(c), local)
        })
        .collect();
    Ok(scatter_symmetric(space.dof_count(), locals))
}

/// Coefficient map of `curl: Lagrange1 → RT0`. The flux of `curl φ` through
/// an edge `a → b` is `φ(a) − φ(b)`, so the matrix is the signed incidence.
pub fn curl_matrix(r: &FeSpace, u: &FeSpace) -> Result<CsrMatrix> {
    if r.kind() != SpaceKind::Lagrange1 || u.kind() != SpaceKind::Rt0 {
        return Err(Error::IncompatibleSpaces(format!("curl maps Lagrange1 to Rt0, got {:?} to {:?}", r.kind(), u.kind())));
    }
    if !Arc::ptr_eq(r.mesh(), u.mesh()) {
        return Err(Error::IncompatibleSpaces("spaces live on different meshes".into()));
    }
    let mesh = r.mesh();
    let mut t = TripletBuilder::with_capacity(mesh.num_edges(), mesh.num_vertices(), 2 * mesh.num_edges());
    for (e, &[a, b]) in mesh.edges().iter().enumerate() {
        t.push(e, a, 1.0);
        t.push(e, b, -1.0);
    }
    Ok(t.build())
}

/// Coefficient map of `div: Rt0/Bdm1 → P0`; row `c` holds the cell values of
/// the basis divergences.
pub fn div_matrix(space: &FeSpace, p: &FeSpace) -> Result<CsrMatrix> {
    if !space.kind().is_vector() || p.kind() != SpaceKind::P0 {
        return Err(Error::IncompatibleSpaces(format!("div maps Rt0/Bdm1 to P0, got {:?} to {:?}", space.kind(), p.kind())));
    }
    let mesh = space.mesh();
    let mut t = TripletBuilder::with_capacity(mesh.num_cells(), space.dof_count(), mesh.num_cells() * space.kind().local_dim());
    for c in 0..mesh.num_cells() {
        let geo = CellGeometry::new(mesh, c);
        for (d, v) in space.local_dofs(c).into_iter().zip(space.local_divergences(c, &geo)) {
            t.push(c, d, v);
        }
    }
    Ok(t.build())
}

/// `w ⟨div φ_j, div φ_i⟩_Ω` for a scalar weight `w`.
pub fn divdiv_matrix(space: &FeSpace, w: f64) -> Result<CsrMatrix> {
    if !space.kind().is_vector() {
        return Err(Error::UnsupportedSpace(format!("div-div on {:?}", space.kind())));
    }
    let mesh = space.mesh();
    let locals: Vec<_> = (0..mesh.num_cells())
        .map(|c| {
            let geo = CellGeometry::new(mesh, c);
            let d = space.local_divergences(c, &geo);
            let k = d.len();
            let mut local = vec![0.0; k * k];
            for i in 0..k {
                for j in i..k {
                    local[i * k + j] = w * geo.area * d[i] * d[j];
                }
            }
            (space.local_dofs(c), local)
        })
        .collect();
    Ok(scatter_symmetric(space.dof_count(), locals))
}

/// `w ⟨curl φ_j, curl φ_i⟩_Ω` on `Lagrange1`, which in 2D is the Laplacian stiffness.
pub fn curlcurl_matrix(space: &FeSpace, w: f64) -> Result<CsrMatrix> {
    if space.kind() != SpaceKind::Lagrange1 {
        return Err(Error::UnsupportedSpace(format!("curl-curl on {:?}", space.kind())));
    }
    let mesh = space.mesh();
    let locals: Vec<_> = (0..mesh.num_cells())
        .map(|c| {
            let geo = CellGeometry::new(mesh, c);
            let g = geo.grad;
            let mut local = vec![0.0; 9];
            for i in 0..3 {
                for j in i..3 {
                    local[i * 3 + j] = w * geo.area * (g[i][0] * g[j][0] + g[i][1] * g[j][1]);
                }
            }
            (space.local_dofs(c), local)
        })
        .collect();
    Ok(scatter_symmetric(space.dof_count(), locals))
}

/// Unweighted operators of one family.
#[derive(Debug, Clone)]
pub struct OperatorBlocks {
    pub m_r: CsrMatrix,
    pub m_u: CsrMatrix,
    pub m_q: CsrMatrix,
    pub m_p: CsrMatrix,
    pub b_r: CsrMatrix,
    pub b_u: CsrMatrix,
    pub b_q: CsrMatrix,
    /// `M_u B_r`
    pub bh_r: CsrMatrix,
    /// `M_p B_u`
    pub bh_u: CsrMatrix,
    /// `M_p B_q`
    pub bh_q: CsrMatrix,
}

impl OperatorBlocks {
    pub fn new(spaces: &Spaces) -> Result<Self> {
        let one = CellWeight::Uniform(1.0);
        let m_r = mass_matrix(&spaces.r, &one)?;
        let m_u = mass_matrix(&spaces.u, &one)?;
        let m_q = mass_matrix(&spaces.q, &one)?;
        let m_p = mass_matrix(&spaces.p, &one)?;
        let b_r = curl_matrix(&spaces.r, &spaces.u)?;
        let b_u = div_matrix(&spaces.u, &spaces.p)?;
        let b_q = div_matrix(&spaces.q, &spaces.p)?;
        let bh_r = m_u.matmul(&b_r);
        let bh_u = m_p.matmul(&b_u);
        let bh_q = m_p.matmul(&b_q);
        Ok(Self { m_r, m_u, m_q, m_p, b_r, b_u, b_q, bh_r, bh_u, bh_q })
    }
}

pub type ScalarFn = Arc<dyn Fn([f64; 2]) -> f64 + Send + Sync>;
pub type VectorFn = Arc<dyn Fn([f64; 2]) -> [f64; 2] + Send + Sync>;

/// Body loads and boundary data. Body terms default to zero; boundary data
/// is required wherever the matching boundary part is present.
#[derive(Clone, Default)]
pub struct ProblemData {
    pub body_force: Option<VectorFn>,
    pub source: Option<ScalarFn>,
    /// Displacement trace on the displacement part.
    pub u0: Option<VectorFn>,
    /// Normal stress datum on the displacement part.
    pub sigma0: Option<ScalarFn>,
    /// Pressure on the pressure part.
    pub p0: Option<ScalarFn>,
}

impl std::fmt::Debug for ProblemData {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ProblemData")
            .field("body_force", &self.body_force.is_some())
            .field("source", &self.source.is_some())
            .field("u0", &self.u0.is_some())
            .field("sigma0", &self.sigma0.is_some())
            .field("p0", &self.p0.is_some())
            .finish()
    }
}

impl ProblemData {
    /// All data identically zero.
    pub fn homogeneous() -> Self {
        Self {
            body_force: Some(Arc::new(|_| [0.0, 0.0])),
            source: Some(Arc::new(|_| 0.0)),
            u0: Some(Arc::new(|_| [0.0, 0.0])),
            sigma0: Some(Arc::new(|_| 0.0)),
            p0: Some(Arc::new(|_| 0.0)),
        }
    }
}

/// Right-hand side blocks in the unknown order `(r, u, q, p)`.
#[derive(Debug, Clone, PartialEq)]
pub struct RhsAssembly {
    pub f_r: Vec<f64>,
    pub f_u: Vec<f64>,
    pub f_q: Vec<f64>,
    pub f_p: Vec<f64>,
}

impl RhsAssembly {
    pub fn to_vector(&self) -> Vec<f64> {
        [&self.f_r, &self.f_u, &self.f_q, &self.f_p].iter().flat_map(|v| v.iter().copied()).collect()
    }
}

fn edge_point(mesh: &Mesh, e: usize, t: f64) -> [f64; 2] {
    let [a, b] = mesh.edges()[e];
    let (pa, pb) = (mesh.vertices()[a], mesh.vertices()[b]);
    [pa[0] + t * (pb[0] - pa[0]), pa[1] + t * (pb[1] - pa[1])]
}

/// Normal trace along the outward normal of the flux-type basis functions
/// living on boundary edge `e`, at parameter `t` from the low vertex.
fn outward_traces(space: &FeSpace, e: usize, t: f64) -> Vec<(usize, f64)> {
    let mesh = space.mesh();
    let n = mesh.edge_normal(e);
    let nu = mesh.outward_normal(e);
    let s = (n[0] * nu[0] + n[1] * nu[1]).signum();
    let len = mesh.edge_length(e);
    match space.kind() {
        SpaceKind::Rt0 => vec![(e, s / len)],
        SpaceKind::Bdm1 => vec![(2 * e, s * (1.0 - t) / len), (2 * e + 1, s * t / len)],
        _ => unreachable!(),
    }
}

/// Assembles the functional `f` of the weak problem. The `source` provider
/// yields `⟨f_p, p̃⟩` unscaled; time stepping scales it by the step.
pub fn assemble_rhs(data: &ProblemData, spaces: &Spaces, bc: &BoundaryConfig, params: &MaterialParams) -> Result<RhsAssembly> {
    let mesh = spaces.mesh();
    bc.validate(mesh)?;
    let [nr, nu, nq, np] = spaces.sizes();
    let mut rhs = RhsAssembly { f_r: vec![0.0; nr], f_u: vec![0.0; nu], f_q: vec![0.0; nq], f_p: vec![0.0; np] };

    if let Some(f) = &data.body_force {
        for c in 0..mesh.num_cells() {
            let geo = CellGeometry::new(mesh, c);
            let dofs = spaces.u.local_dofs(c);
            for (b, w) in TRIANGLE_DEG4.iter() {
                let fx = f(geo.point(*b));
                for (d, v) in dofs.iter().zip(spaces.u.local_vector_values(c, &geo, *b)) {
                    rhs.f_u[*d] += w * geo.area * (fx[0] * v[0] + fx[1] * v[1]);
                }
            }
        }
    }
    if let Some(g) = &data.source {
        for c in 0..mesh.num_cells() {
            let geo = CellGeometry::new(mesh, c);
            rhs.f_p[c] = TRIANGLE_DEG4.iter().map(|(b, w)| w * geo.area * g(geo.point(*b))).sum();
        }
    }

    let delta = params.delta();
    for &e in mesh.boundary_tags().keys() {
        let [a, b] = mesh.edges()[e];
        let len = mesh.edge_length(e);
        let nu_ = mesh.outward_normal(e);
        if bc.mechanics_of(mesh, e) == Some(MechanicsBc::Displacement) {
            let u0 = data.u0.as_ref().ok_or(Error::MissingProvider("u0"))?;
            let s0 = data.sigma0.as_ref().ok_or(Error::MissingProvider("sigma0"))?;
            for &(t, w) in &EDGE_GAUSS3 {
                let x = edge_point(mesh, e, t);
                let g = u0(x);
                // ν × r̃ = (ν₂, −ν₁) r̃ for a scalar rotation
                let tang = g[0] * nu_[1] - g[1] * nu_[0];
                rhs.f_r[a] += w * len * tang * (1.0 - t);
                rhs.f_r[b] += w * len * tang * t;
                let sv = s0(x);
                for (d, tr) in outward_traces(&spaces.u, e, t) {
                    rhs.f_u[d] += w * len * sv * tr;
                }
            }
        }
        if bc.flow_of(mesh, e) == Some(FlowBc::Pressure) {
            let p0 = data.p0.as_ref().ok_or(Error::MissingProvider("p0"))?;
            for &(t, w) in &EDGE_GAUSS3 {
                let pv = p0(edge_point(mesh, e, t));
                for (d, tr) in outward_traces(&spaces.q, e, t) {
                    rhs.f_q[d] -= delta * w * len * pv * tr;
                }
            }
        }
    }
    Ok(rhs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{unit_square_mesh, SQUARE_TAGS};
    use crate::spaces::Family;

    fn arc_mesh(n: usize) -> Arc<Mesh> {
        Arc::new(unit_square_mesh(n).unwrap())
    }

    #[test]
    fn p0_mass_is_area_diagonal() {
        let s = FeSpace::unconstrained(arc_mesh(3), SpaceKind::P0);
        let m = mass_matrix(&s, &CellWeight::Uniform(1.0)).unwrap();
        for c in 0..s.dof_count() {
            assert!((m.get(c, c) - s.mesh().cell_area(c)).abs() < 1e-16);
        }
        assert_eq!(m.nnz(), s.dof_count());
    }

    #[test]
    fn lagrange_mass_on_one_triangle() {
        let mesh = Mesh::new(vec![[0.0, 0.0], [2.0, 0.0], [0.0, 1.0]], vec![[0, 1, 2]], &[]).unwrap();
        let s = FeSpace::unconstrained(Arc::new(mesh), SpaceKind::Lagrange1);
        let m = mass_matrix(&s, &CellWeight::Uniform(1.0)).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let expect = 1.0 / 12.0 * if i == j { 2.0 } else { 1.0 };
                assert!((m.get(i, j) - expect).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn weight_is_linear() {
        let s = FeSpace::unconstrained(arc_mesh(2), SpaceKind::Bdm1);
        let a = mass_matrix(&s, &CellWeight::Uniform(1.5)).unwrap();
        let b = mass_matrix(&s, &CellWeight::Uniform(3.0)).unwrap();
        assert_eq!(a.scale(2.0).max_abs_diff(&b), 0.0);
    }

    #[test]
    fn rt0_div_entries() {
        let mesh = arc_mesh(2);
        let u = FeSpace::unconstrained(mesh.clone(), SpaceKind::Rt0);
        let p = FeSpace::unconstrained(mesh.clone(), SpaceKind::P0);
        let b = div_matrix(&u, &p).unwrap();
        for e in 0..mesh.num_edges() {
            let cells = mesh.edge_cells(e);
            let mut sum = 0.0;
            for &c in cells {
                let v = b.get(c, e);
                assert!((v.abs() - 1.0 / mesh.cell_area(c)).abs() < 1e-12);
                sum += v * mesh.cell_area(c);
            }
            if cells.len() == 2 {
                assert!(sum.abs() < 1e-14);
            }
        }
    }

    #[test]
    fn bdm_div_of_linear_field() {
        let mesh = arc_mesh(3);
        let q = FeSpace::unconstrained(mesh.clone(), SpaceKind::Bdm1);
        let p = FeSpace::unconstrained(mesh, SpaceKind::P0);
        let x = q.interpolate_vector(|x| x).unwrap();
        for v in div_matrix(&q, &p).unwrap().matvec(&x) {
            assert!((v - 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn curl_of_constant_vanishes_and_complex_is_exact() {
        let mesh = arc_mesh(4);
        let r = FeSpace::unconstrained(mesh.clone(), SpaceKind::Lagrange1);
        let u = FeSpace::unconstrained(mesh.clone(), SpaceKind::Rt0);
        let p = FeSpace::unconstrained(mesh.clone(), SpaceKind::P0);
        let br = curl_matrix(&r, &u).unwrap();
        assert!(br.matvec(&vec![3.0; mesh.num_vertices()]).iter().all(|&v| v == 0.0));
        let prod = div_matrix(&u, &p).unwrap().matmul(&br);
        assert_eq!(prod.max_abs(), 0.0);
    }

    #[test]
    fn curl_matrix_matches_pointwise_curl() {
        let mesh = arc_mesh(3);
        let r = FeSpace::unconstrained(mesh.clone(), SpaceKind::Lagrange1);
        let u = FeSpace::unconstrained(mesh.clone(), SpaceKind::Rt0);
        let x: Vec<f64> = (0..r.dof_count()).map(|i| ((i * 37 % 11) as f64).sin()).collect();
        let y = curl_matrix(&r, &u).unwrap().matvec(&x);
        for c in 0..mesh.num_cells() {
            let cu = r.eval_curl(&x, c).unwrap();
            for b in [[0.2, 0.3, 0.5], [0.6, 0.2, 0.2]] {
                let v = u.eval_field(&y, c, b).unwrap().vector();
                assert!((v[0] - cu[0]).abs() < 1e-12 && (v[1] - cu[1]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn incompatible_pairs_rejected() {
        let mesh = arc_mesh(1);
        let r = FeSpace::unconstrained(mesh.clone(), SpaceKind::Lagrange1);
        let p = FeSpace::unconstrained(mesh, SpaceKind::P0);
        assert!(matches!(curl_matrix(&r, &p), Err(Error::IncompatibleSpaces(_))));
        assert!(matches!(div_matrix(&r, &p), Err(Error::IncompatibleSpaces(_))));
    }

    #[test]
    fn pressure_datum_is_local_and_scales_with_delta() {
        let mesh = arc_mesh(3);
        let bc = BoundaryConfig::uniform(&SQUARE_TAGS, MechanicsBc::Rotation, FlowBc::Flux).set(
            "left",
            MechanicsBc::Rotation,
            FlowBc::Pressure,
        );
        let spaces = Spaces::new(mesh.clone(), Family::Two, &bc).unwrap();
        let mut data = ProblemData::homogeneous();
        data.p0 = Some(Arc::new(|x| 1.0 + x[1]));
        let params = MaterialParams::unit();
        let f1 = assemble_rhs(&data, &spaces, &bc, &params).unwrap();
        let params4 = MaterialParams { dt: 4.0, ..params.clone() };
        let f4 = assemble_rhs(&data, &spaces, &bc, &params4).unwrap();
        assert!(f1.f_r.iter().chain(&f1.f_u).chain(&f1.f_p).all(|&v| v == 0.0));
        for (d, v) in f1.f_q.iter().enumerate() {
            let e = d / 2;
            if mesh.edge_tag(e) == Some("left") {
                assert!(*v != 0.0);
            } else {
                assert_eq!(*v, 0.0);
            }
            assert!((f4.f_q[d] - 2.0 * v).abs() < 1e-15);
        }
    }

    #[test]
    fn missing_provider_is_reported() {
        let mesh = arc_mesh(2);
        let bc = BoundaryConfig::uniform(&SQUARE_TAGS, MechanicsBc::Displacement, FlowBc::Pressure);
        let spaces = Spaces::new(mesh, Family::One, &bc).unwrap();
        let mut data = ProblemData::homogeneous();
        data.sigma0 = None;
        let err = assemble_rhs(&data, &spaces, &bc, &MaterialParams::unit()).unwrap_err();
        assert_eq!(err, Error::MissingProvider("sigma0"));
    }

    #[test]
    fn flux_datum_pairs_with_constant_traces() {
        // ⟨p₀, ν·q̃⟩ over the whole boundary with p₀ = 1 equals ∫ div q̃ by the divergence theorem
        let mesh = arc_mesh(2);
        let bc = BoundaryConfig::uniform(&SQUARE_TAGS, MechanicsBc::Rotation, FlowBc::Pressure);
        let spaces = Spaces::new(mesh.clone(), Family::Two, &bc).unwrap();
        let mut data = ProblemData::homogeneous();
        data.p0 = Some(Arc::new(|_| 1.0));
        let f = assemble_rhs(&data, &spaces, &bc, &MaterialParams::unit()).unwrap();
        let bq = div_matrix(&spaces.q, &spaces.p).unwrap();
        let areas: Vec<f64> = (0..mesh.num_cells()).map(|c| mesh.cell_area(c)).collect();
        let integral = bq.transpose().matvec(&areas);
        for (a, b) in f.f_q.iter().zip(integral) {
            assert!((a + b).abs() < 1e-13);
        }
    }
}
