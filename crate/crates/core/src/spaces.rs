//! Lowest-order finite element spaces on a [`Mesh`]: continuous P1 for the
//! rotation, RT0 for the displacement (and flux in the first family), BDM1 for
//! the flux in the second family, and piecewise constants for the pressure.
//!
//! DOF coordinates:
//! * `Lagrange1`: value at each vertex;
//! * `Rt0`: total flux through each edge along its global normal;
//! * `Bdm1`: two DOFs per edge `e = (a, b)` (`a < b`), DOF `2e` at `a` and
//!   `2e + 1` at `b`. The coefficient is `|e|` times the normal trace at that
//!   endpoint, so the two basis functions of an edge sum to its RT0 function
//!   and each basis function vanishes at every vertex except its own;
//! * `P0`: cell value (indicator basis).

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::integration::{bary_to_point, EDGE_GAUSS3, TRIANGLE_DEG4};
use crate::mesh::{BoundaryConfig, FlowBc, MechanicsBc, Mesh};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SpaceKind {
    Lagrange1,
    Rt0,
    Bdm1,
    P0,
}

impl SpaceKind {
    pub fn is_vector(self) -> bool {
        matches!(self, SpaceKind::Rt0 | SpaceKind::Bdm1)
    }

    pub fn local_dim(self) -> usize {
        match self {
            SpaceKind::Lagrange1 | SpaceKind::Rt0 => 3,
            SpaceKind::Bdm1 => 6,
            SpaceKind::P0 => 1,
        }
    }
}

/// Which of the two discrete families is used. They differ in the flux space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Family {
    /// `L1 x RT0 x RT0 x P0`
    One,
    /// `L1 x RT0 x BDM1 x P0`
    Two,
}

impl Family {
    pub fn flux_kind(self) -> SpaceKind {
        match self {
            Family::One => SpaceKind::Rt0,
            Family::Two => SpaceKind::Bdm1,
        }
    }

    pub fn index(self) -> u8 {
        match self {
            Family::One => 1,
            Family::Two => 2,
        }
    }
}

impl TryFrom<u8> for Family {
    type Error = Error;
    fn try_from(v: u8) -> Result<Self> {
        match v {
            1 => Ok(Family::One),
            2 => Ok(Family::Two),
            other => Err(Error::UnknownFamily(other.to_string())),
        }
    }
}

impl FromStr for Family {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        s.trim()
            .parse::<u8>()
            .map_err(|_| Error::UnknownFamily(s.to_string()))
            .and_then(Family::try_from)
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.index())
    }
}

/// The variable a space discretizes; decides which boundary part is essential.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldRole {
    Rotation,
    Displacement,
    Flux,
    Pressure,
}

/// Point value of a basis function or field.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BasisValue {
    Scalar(f64),
    Vector([f64; 2]),
}

impl BasisValue {
    pub fn scalar(self) -> f64 {
        match self {
            BasisValue::Scalar(v) => v,
            BasisValue::Vector(_) => panic!("vector value used as scalar"),
        }
    }
    pub fn vector(self) -> [f64; 2] {
        match self {
            BasisValue::Vector(v) => v,
            BasisValue::Scalar(_) => panic!("scalar value used as vector"),
        }
    }
}

/// Affine data of one triangle.
#[derive(Debug, Clone, Copy)]
pub struct CellGeometry {
    pub x: [[f64; 2]; 3],
    pub area: f64,
    /// Gradients of the barycentric coordinates.
    pub grad: [[f64; 2]; 3],
}

impl CellGeometry {
    pub fn new(mesh: &Mesh, c: usize) -> Self {
        let x = mesh.cell_coords(c);
        let area = mesh.cell_area(c);
        let mut grad = [[0.0; 2]; 3];
        for (i, g) in grad.iter_mut().enumerate() {
            let a = x[(i + 1) % 3];
            let b = x[(i + 2) % 3];
            *g = [(a[1] - b[1]) / (2.0 * area), (b[0] - a[0]) / (2.0 * area)];
        }
        Self { x, area, grad }
    }

    #[inline]
    pub fn point(&self, bary: [f64; 3]) -> [f64; 2] {
        bary_to_point(&self.x, bary)
    }

    /// `curl λ_i = (-∂₂λ_i, ∂₁λ_i)`.
    #[inline]
    pub fn curl_bary(&self, i: usize) -> [f64; 2] {
        [-self.grad[i][1], self.grad[i][0]]
    }
}

#[derive(Debug, Clone)]
pub struct FeSpace {
    kind: SpaceKind,
    role: FieldRole,
    mesh: Arc<Mesh>,
    essential: Vec<bool>,
}

impl FeSpace {
    /// Space of `kind` for the variable `role` with the essential DOFs implied
    /// by `bc`. Returns an error for pairings that do not occur in either
    /// family.
    pub fn new(mesh: Arc<Mesh>, kind: SpaceKind, role: FieldRole, bc: &BoundaryConfig) -> Result<Self> {
        let ok = matches!(
            (role, kind),
            (FieldRole::Rotation, SpaceKind::Lagrange1)
                | (FieldRole::Displacement, SpaceKind::Rt0)
                | (FieldRole::Flux, SpaceKind::Rt0 | SpaceKind::Bdm1)
                | (FieldRole::Pressure, SpaceKind::P0)
        );
        if !ok {
            return Err(Error::IncompatibleSpaces(format!("{kind:?} cannot discretize {role:?}")));
        }
        let n = dof_count(&mesh, kind);
        let mut essential = vec![false; n];
        for &e in mesh.boundary_tags().keys() {
            let is_ess = match role {
                FieldRole::Rotation | FieldRole::Displacement => {
                    bc.mechanics_of(&mesh, e) == Some(MechanicsBc::Rotation)
                }
                FieldRole::Flux => bc.flow_of(&mesh, e) == Some(FlowBc::Flux),
                FieldRole::Pressure => false,
            };
            if !is_ess {
                continue;
            }
            match kind {
                SpaceKind::Lagrange1 => {
                    let [a, b] = mesh.edges()[e];
                    essential[a] = true;
                    essential[b] = true;
                }
                SpaceKind::Rt0 => essential[e] = true,
                SpaceKind::Bdm1 => {
                    essential[2 * e] = true;
                    essential[2 * e + 1] = true;
                }
                SpaceKind::P0 => {}
            }
        }
        Ok(Self { kind, role, mesh, essential })
    }

    /// Space without essential DOFs.
    pub fn unconstrained(mesh: Arc<Mesh>, kind: SpaceKind) -> Self {
        let role = match kind {
            SpaceKind::Lagrange1 => FieldRole::Rotation,
            SpaceKind::Rt0 => FieldRole::Displacement,
            SpaceKind::Bdm1 => FieldRole::Flux,
            SpaceKind::P0 => FieldRole::Pressure,
        };
        let n = dof_count(&mesh, kind);
        Self { kind, role, mesh, essential: vec![false; n] }
    }

    pub fn kind(&self) -> SpaceKind {
        self.kind
    }
    pub fn role(&self) -> FieldRole {
        self.role
    }
    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }
    pub fn dof_count(&self) -> usize {
        self.essential.len()
    }
    pub fn essential(&self) -> &[bool] {
        &self.essential
    }
    pub fn num_essential(&self) -> usize {
        self.essential.iter().filter(|&&e| e).count()
    }

    /// Sets essential entries of `v` to zero.
    pub fn zero_essential(&self, v: &mut [f64]) {
        for (x, &e) in v.iter_mut().zip(&self.essential) {
            if e {
                *x = 0.0;
            }
        }
    }

    /// Global DOF ids of the local basis on cell `c`, in local order.
    pub fn local_dofs(&self, c: usize) -> Vec<usize> {
        let mesh = &self.mesh;
        match self.kind {
            SpaceKind::Lagrange1 => mesh.cells()[c].to_vec(),
            SpaceKind::Rt0 => mesh.cell_edges(c).to_vec(),
            SpaceKind::Bdm1 => {
                let cell = mesh.cells()[c];
                let ce = mesh.cell_edges(c);
                let mut out = Vec::with_capacity(6);
                for i in 0..3 {
                    let e = ce[i];
                    for v in [cell[(i + 1) % 3], cell[(i + 2) % 3]] {
                        out.push(bdm_dof(mesh, e, v));
                    }
                }
                out
            }
            SpaceKind::P0 => vec![c],
        }
    }

    /// Values of the local scalar basis (`Lagrange1`, `P0`) at `bary`.
    pub fn local_scalar_values(&self, bary: [f64; 3]) -> Vec<f64> {
        match self.kind {
            SpaceKind::Lagrange1 => bary.to_vec(),
            SpaceKind::P0 => vec![1.0],
            _ => panic!("scalar values requested from a vector space"),
        }
    }

    /// Values of the local vector basis (`Rt0`, `Bdm1`) at `bary`.
    pub fn local_vector_values(&self, c: usize, geo: &CellGeometry, bary: [f64; 3]) -> Vec<[f64; 2]> {
        let s = self.mesh.cell_edge_signs(c);
        match self.kind {
            SpaceKind::Rt0 => {
                let x = geo.point(bary);
                (0..3)
                    .map(|i| {
                        let f = s[i] / (2.0 * geo.area);
                        [f * (x[0] - geo.x[i][0]), f * (x[1] - geo.x[i][1])]
                    })
                    .collect()
            }
            SpaceKind::Bdm1 => {
                let mut out = Vec::with_capacity(6);
                for i in 0..3 {
                    let j = (i + 1) % 3;
                    let k = (i + 2) % 3;
                    let (cj, ck) = (geo.curl_bary(j), geo.curl_bary(k));
                    // outward normal traces on edge i: λ_j/|e| and λ_k/|e|
                    out.push([-s[i] * bary[j] * ck[0], -s[i] * bary[j] * ck[1]]);
                    out.push([s[i] * bary[k] * cj[0], s[i] * bary[k] * cj[1]]);
                }
                out
            }
            _ => panic!("vector values requested from a scalar space"),
        }
    }

    /// Local basis values at `bary`, scalar or vector according to the kind.
    pub fn local_values(&self, c: usize, geo: &CellGeometry, bary: [f64; 3]) -> Vec<BasisValue> {
        if self.kind.is_vector() {
            self.local_vector_values(c, geo, bary).into_iter().map(BasisValue::Vector).collect()
        } else {
            self.local_scalar_values(bary).into_iter().map(BasisValue::Scalar).collect()
        }
    }

    /// Cellwise-constant divergence of the local vector basis on `c`.
    pub fn local_divergences(&self, c: usize, geo: &CellGeometry) -> Vec<f64> {
        let s = self.mesh.cell_edge_signs(c);
        match self.kind {
            SpaceKind::Rt0 => s.iter().map(|si| si / geo.area).collect(),
            SpaceKind::Bdm1 => s.iter().flat_map(|si| [si / (2.0 * geo.area); 2]).collect(),
            _ => panic!("divergence requested from a scalar space"),
        }
    }

    /// Cellwise-constant curl `(-∂₂φ, ∂₁φ)` of the local `Lagrange1` basis.
    pub fn local_curls(&self, geo: &CellGeometry) -> Vec<[f64; 2]> {
        assert_eq!(self.kind, SpaceKind::Lagrange1, "curl is defined on Lagrange1");
        (0..3).map(|i| geo.curl_bary(i)).collect()
    }

    fn check_cell(&self, c: usize) -> Result<()> {
        if c >= self.mesh.num_cells() {
            return Err(Error::OutOfRange { index: c, len: self.mesh.num_cells() });
        }
        Ok(())
    }

    fn check_coeffs(&self, coeffs: &[f64]) -> Result<()> {
        if coeffs.len() != self.dof_count() {
            return Err(Error::DimensionMismatch { expected: self.dof_count(), got: coeffs.len() });
        }
        Ok(())
    }

    /// Global basis functions that live on cell `c`, evaluated at `bary`.
    pub fn eval_basis(&self, c: usize, bary: [f64; 3]) -> Result<Vec<(usize, BasisValue)>> {
        self.check_cell(c)?;
        let dofs = self.local_dofs(c);
        Ok(if self.kind.is_vector() {
            let geo = CellGeometry::new(&self.mesh, c);
            dofs.into_iter()
                .zip(self.local_vector_values(c, &geo, bary))
                .map(|(d, v)| (d, BasisValue::Vector(v)))
                .collect()
        } else {
            dofs.into_iter()
                .zip(self.local_scalar_values(bary))
                .map(|(d, v)| (d, BasisValue::Scalar(v)))
                .collect()
        })
    }

    pub fn eval_field(&self, coeffs: &[f64], c: usize, bary: [f64; 3]) -> Result<BasisValue> {
        self.check_coeffs(coeffs)?;
        let basis = self.eval_basis(c, bary)?;
        Ok(if self.kind.is_vector() {
            let mut v = [0.0; 2];
            for (d, b) in basis {
                let b = b.vector();
                v[0] += coeffs[d] * b[0];
                v[1] += coeffs[d] * b[1];
            }
            BasisValue::Vector(v)
        } else {
            BasisValue::Scalar(basis.into_iter().map(|(d, b)| coeffs[d] * b.scalar()).sum())
        })
    }

    /// Curl of a `Lagrange1` field on cell `c` (constant on the cell).
    pub fn eval_curl(&self, coeffs: &[f64], c: usize) -> Result<[f64; 2]> {
        if self.kind != SpaceKind::Lagrange1 {
            return Err(Error::UnsupportedSpace(format!("curl of {:?}", self.kind)));
        }
        self.check_coeffs(coeffs)?;
        self.check_cell(c)?;
        let geo = CellGeometry::new(&self.mesh, c);
        let mut v = [0.0; 2];
        for (d, cu) in self.local_dofs(c).into_iter().zip(self.local_curls(&geo)) {
            v[0] += coeffs[d] * cu[0];
            v[1] += coeffs[d] * cu[1];
        }
        Ok(v)
    }

    /// Divergence of an `Rt0`/`Bdm1` field on cell `c` (constant on the cell).
    pub fn eval_div(&self, coeffs: &[f64], c: usize) -> Result<f64> {
        if !self.kind.is_vector() {
            return Err(Error::UnsupportedSpace(format!("divergence of {:?}", self.kind)));
        }
        self.check_coeffs(coeffs)?;
        self.check_cell(c)?;
        let geo = CellGeometry::new(&self.mesh, c);
        Ok(self
            .local_dofs(c)
            .into_iter()
            .zip(self.local_divergences(c, &geo))
            .map(|(d, dv)| coeffs[d] * dv)
            .sum())
    }

    /// Canonical interpolant of a scalar field: vertex values for `Lagrange1`,
    /// cell means for `P0`.
    pub fn interpolate_scalar(&self, f: impl Fn([f64; 2]) -> f64) -> Result<Vec<f64>> {
        let mesh = &self.mesh;
        match self.kind {
            SpaceKind::Lagrange1 => Ok(mesh.vertices().iter().map(|&x| f(x)).collect()),
            SpaceKind::P0 => Ok((0..mesh.num_cells())
                .map(|c| {
                    let geo = CellGeometry::new(mesh, c);
                    TRIANGLE_DEG4.iter().map(|(b, w)| w * f(geo.point(*b))).sum()
                })
                .collect()),
            k => Err(Error::UnsupportedSpace(format!("scalar interpolation into {k:?}"))),
        }
    }

    /// Canonical interpolant of a vector field from its normal-trace moments
    /// on each edge: the mean flux for `Rt0`; the moments against the constant
    /// and linear Legendre polynomials for `Bdm1`.
    pub fn interpolate_vector(&self, f: impl Fn([f64; 2]) -> [f64; 2]) -> Result<Vec<f64>> {
        if !self.kind.is_vector() {
            return Err(Error::UnsupportedSpace(format!("vector interpolation into {:?}", self.kind)));
        }
        let mesh = &self.mesh;
        let mut out = vec![0.0; self.dof_count()];
        for e in 0..mesh.num_edges() {
            let [a, b] = mesh.edges()[e];
            let (pa, pb) = (mesh.vertices()[a], mesh.vertices()[b]);
            let n = mesh.edge_normal(e);
            let len = mesh.edge_length(e);
            let (mut m0, mut m1) = (0.0, 0.0);
            for &(t, w) in &EDGE_GAUSS3 {
                let x = [pa[0] + t * (pb[0] - pa[0]), pa[1] + t * (pb[1] - pa[1])];
                let v = f(x);
                let fn_ = v[0] * n[0] + v[1] * n[1];
                m0 += w * len * fn_;
                m1 += w * len * fn_ * (2.0 * t - 1.0);
            }
            match self.kind {
                SpaceKind::Rt0 => out[e] = m0,
                _ => {
                    // linear trace g(t) = (m0 + 3 m1 (2t - 1)) / |e|
                    out[2 * e] = m0 - 3.0 * m1;
                    out[2 * e + 1] = m0 + 3.0 * m1;
                }
            }
        }
        Ok(out)
    }
}

/// Global BDM1 DOF of edge `e` located at its endpoint `v`.
#[inline]
pub fn bdm_dof(mesh: &Mesh, e: usize, v: usize) -> usize {
    if mesh.edges()[e][0] == v {
        2 * e
    } else {
        debug_assert_eq!(mesh.edges()[e][1], v);
        2 * e + 1
    }
}

pub fn dof_count(mesh: &Mesh, kind: SpaceKind) -> usize {
    match kind {
        SpaceKind::Lagrange1 => mesh.num_vertices(),
        SpaceKind::Rt0 => mesh.num_edges(),
        SpaceKind::Bdm1 => 2 * mesh.num_edges(),
        SpaceKind::P0 => mesh.num_cells(),
    }
}

/// Builds the space of `kind` for `role`; convenience wrapper over [`FeSpace::new`].
pub fn build_space(mesh: Arc<Mesh>, kind: SpaceKind, role: FieldRole, bc: &BoundaryConfig) -> Result<FeSpace> {
    FeSpace::new(mesh, kind, role, bc)
}

/// Injection of RT0 coefficients into BDM1 coordinates.
pub fn rt0_to_bdm1(rt: &[f64]) -> Vec<f64> {
    rt.iter().flat_map(|&c| [c, c]).collect()
}

/// The four spaces `(R_h, U_h, Q_h, P_h)` of one family.
#[derive(Debug, Clone)]
pub struct Spaces {
    pub family: Family,
    pub r: FeSpace,
    pub u: FeSpace,
    pub q: FeSpace,
    pub p: FeSpace,
}

impl Spaces {
    pub fn new(mesh: Arc<Mesh>, family: Family, bc: &BoundaryConfig) -> Result<Self> {
        bc.validate(&mesh)?;
        Ok(Self {
            family,
            r: FeSpace::new(mesh.clone(), SpaceKind::Lagrange1, FieldRole::Rotation, bc)?,
            u: FeSpace::new(mesh.clone(), SpaceKind::Rt0, FieldRole::Displacement, bc)?,
            q: FeSpace::new(mesh.clone(), family.flux_kind(), FieldRole::Flux, bc)?,
            p: FeSpace::new(mesh, SpaceKind::P0, FieldRole::Pressure, bc)?,
        })
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        self.r.mesh()
    }

    pub fn sizes(&self) -> [usize; 4] {
        [self.r.dof_count(), self.u.dof_count(), self.q.dof_count(), self.p.dof_count()]
    }

    pub fn total_dofs(&self) -> usize {
        self.sizes().iter().sum()
    }

    pub fn essential_mask(&self) -> Vec<bool> {
        [&self.r, &self.u, &self.q, &self.p]
            .iter()
            .flat_map(|s| s.essential().iter().copied())
            .collect()
    }
}

/// Coefficient vectors of `(r, u, q, p)` on a set of [`Spaces`].
#[derive(Debug, Clone, PartialEq)]
pub struct FieldState {
    pub family: Family,
    pub r: Vec<f64>,
    pub u: Vec<f64>,
    pub q: Vec<f64>,
    pub p: Vec<f64>,
}

impl FieldState {
    pub fn zeros(spaces: &Spaces) -> Self {
        let [nr, nu, nq, np] = spaces.sizes();
        Self { family: spaces.family, r: vec![0.0; nr], u: vec![0.0; nu], q: vec![0.0; nq], p: vec![0.0; np] }
    }

    pub fn from_vector(spaces: &Spaces, x: &[f64]) -> Result<Self> {
        let [nr, nu, nq, np] = spaces.sizes();
        if x.len() != nr + nu + nq + np {
            return Err(Error::DimensionMismatch { expected: nr + nu + nq + np, got: x.len() });
        }
        Ok(Self {
            family: spaces.family,
            r: x[..nr].to_vec(),
            u: x[nr..nr + nu].to_vec(),
            q: x[nr + nu..nr + nu + nq].to_vec(),
            p: x[nr + nu + nq..].to_vec(),
        })
    }

    pub fn to_vector(&self) -> Vec<f64> {
        [&self.r, &self.u, &self.q, &self.p].iter().flat_map(|v| v.iter().copied()).collect()
    }

    /// Checks the vector lengths against `spaces`.
    pub fn check(&self, spaces: &Spaces) -> Result<()> {
        let lens = [self.r.len(), self.u.len(), self.q.len(), self.p.len()];
        for (l, s) in lens.iter().zip(spaces.sizes()) {
            if *l != s {
                return Err(Error::DimensionMismatch { expected: s, got: *l });
            }
        }
        if self.family != spaces.family {
            return Err(Error::IncompatibleSpaces("family of state and spaces differ".into()));
        }
        Ok(())
    }

    pub fn sub(&self, other: &FieldState) -> FieldState {
        let d = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x - y).collect();
        FieldState { family: self.family, r: d(&self.r, &other.r), u: d(&self.u, &other.u), q: d(&self.q, &other.q), p: d(&self.p, &other.p) }
    }

    pub fn scaled(&self, s: f64) -> FieldState {
        let f = |a: &[f64]| a.iter().map(|x| s * x).collect();
        FieldState { family: self.family, r: f(&self.r), u: f(&self.u), q: f(&self.q), p: f(&self.p) }
    }
}
