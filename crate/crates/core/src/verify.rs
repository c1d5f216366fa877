//! Weighted norms, the discrete energy norm, manufactured solutions and
//! convergence studies.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::sync::Arc;

use crate::assembly::{OperatorBlocks, ProblemData, ScalarFn, VectorFn};
use crate::error::{Error, Result};
use crate::integration::TRIANGLE_DEG4;
use crate::mesh::{mesh_stats, refine_uniform, unit_square_mesh, BoundaryConfig, FlowBc, MechanicsBc, Mesh, SQUARE_TAGS};
use crate::reduction::condense;
use crate::spaces::{CellGeometry, Family, FieldState, Spaces};
use crate::sparse::{dot, CholeskyFactor, CsrMatrix};
use crate::system::{assemble_biot, Conductivity, MaterialParams};

/// Analytic fields an approximation is compared against. `None` entries are
/// treated as zero.
#[derive(Clone, Default)]
pub struct ExactFields {
    pub r: Option<ScalarFn>,
    pub curl_r: Option<VectorFn>,
    pub u: Option<VectorFn>,
    pub div_u: Option<ScalarFn>,
    pub q: Option<VectorFn>,
    pub div_q: Option<ScalarFn>,
    pub p: Option<ScalarFn>,
}

/// Unsquared L² norms of the seven components plus the `K⁻¹`-weighted flux norm.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Components {
    pub r: f64,
    pub curl_r: f64,
    pub u: f64,
    pub div_u: f64,
    pub q: f64,
    pub q_kinv: f64,
    pub div_q: f64,
    pub p: f64,
}

impl Components {
    /// `‖·‖_X` assembled from the components.
    pub fn x_norm(&self, params: &MaterialParams) -> f64 {
        let w = params.eta() + params.c0;
        let s = (self.r.powi(2) + self.curl_r.powi(2)) / params.mu
            + params.mu * self.u.powi(2)
            + (2.0 * params.mu + params.lambda) * self.div_u.powi(2)
            + self.q_kinv.powi(2)
            + params.dt / w * self.div_q.powi(2)
            + w * self.p.powi(2);
        s.sqrt()
    }
}

fn eval_or_zero_s(f: &Option<ScalarFn>, x: [f64; 2]) -> f64 {
    f.as_ref().map_or(0.0, |f| f(x))
}

fn eval_or_zero_v(f: &Option<VectorFn>, x: [f64; 2]) -> [f64; 2] {
    f.as_ref().map_or([0.0; 2], |f| f(x))
}

/// Norms of `state − exact`, integrated cell by cell with the degree-4 rule.
pub fn component_errors(state: &FieldState, spaces: &Spaces, params: &MaterialParams, exact: &ExactFields) -> Result<Components> {
    state.check(spaces)?;
    let mesh = spaces.mesh();
    let kinv = params.k_inverse_weight();
    let mut acc = [0.0f64; 8];
    for c in 0..mesh.num_cells() {
        let geo = CellGeometry::new(mesh, c);
        let curl_h = spaces.r.eval_curl(&state.r, c)?;
        let div_u_h = spaces.u.eval_div(&state.u, c)?;
        let div_q_h = spaces.q.eval_div(&state.q, c)?;
        for (b, w) in TRIANGLE_DEG4.iter() {
            let x = geo.point(*b);
            let wa = w * geo.area;
            let r = spaces.r.eval_field(&state.r, c, *b)?.scalar() - eval_or_zero_s(&exact.r, x);
            let cr = eval_or_zero_v(&exact.curl_r, x);
            let u_h = spaces.u.eval_field(&state.u, c, *b)?.vector();
            let u = eval_or_zero_v(&exact.u, x);
            let q_h = spaces.q.eval_field(&state.q, c, *b)?.vector();
            let q = eval_or_zero_v(&exact.q, x);
            let dq = [q_h[0] - q[0], q_h[1] - q[1]];
            let p = state.p[c] - eval_or_zero_s(&exact.p, x);
            acc[0] += wa * r * r;
            acc[1] += wa * ((curl_h[0] - cr[0]).powi(2) + (curl_h[1] - cr[1]).powi(2));
            acc[2] += wa * ((u_h[0] - u[0]).powi(2) + (u_h[1] - u[1]).powi(2));
            acc[3] += wa * (div_u_h - eval_or_zero_s(&exact.div_u, x)).powi(2);
            acc[4] += wa * (dq[0] * dq[0] + dq[1] * dq[1]);
            acc[5] += wa * kinv.pair(c, crate::spaces::BasisValue::Vector(dq), crate::spaces::BasisValue::Vector(dq));
            acc[6] += wa * (div_q_h - eval_or_zero_s(&exact.div_q, x)).powi(2);
            acc[7] += wa * p * p;
        }
    }
    let s = acc.map(f64::sqrt);
    Ok(Components { r: s[0], curl_r: s[1], u: s[2], div_u: s[3], q: s[4], q_kinv: s[5], div_q: s[6], p: s[7] })
}

/// `‖x‖_X` of a discrete state.
pub fn weighted_norm_x(state: &FieldState, spaces: &Spaces, params: &MaterialParams) -> Result<f64> {
    Ok(component_errors(state, spaces, params, &ExactFields::default())?.x_norm(params))
}

/// L²-projection onto `Ran(curl, R_h)` inside `U_h`.
#[derive(Debug)]
pub struct CurlProjector {
    b_r: CsrMatrix,
    bh_rt: CsrMatrix,
    free: Vec<bool>,
    factor: CholeskyFactor,
}

impl CurlProjector {
    pub fn new(spaces: &Spaces, ops: &OperatorBlocks) -> Result<Self> {
        let mut fixed = spaces.r.essential().to_vec();
        if !fixed.iter().any(|&f| f) {
            // curl annihilates constants; pin one vertex
            fixed[0] = true;
        }
        let gram = ops.b_r.transpose().matmul(&ops.bh_r).eliminate(&fixed, &fixed, true);
        let factor = CholeskyFactor::new(&gram)?;
        Ok(Self { b_r: ops.b_r.clone(), bh_rt: ops.bh_r.transpose(), free: fixed.iter().map(|f| !f).collect(), factor })
    }

    pub fn project(&self, u: &[f64]) -> Vec<f64> {
        let mut rhs = self.bh_rt.matvec(u);
        for (v, &f) in rhs.iter_mut().zip(&self.free) {
            if !f {
                *v = 0.0;
            }
        }
        self.b_r.matvec(&self.factor.solve(&rhs))
    }
}

/// Discrete energy norm with `μ‖Π_h u‖²` and the combined divergence term
/// `‖div(αu + δq)‖² / (η + c₀)`.
pub fn energy_norm(state: &FieldState, spaces: &Spaces, params: &MaterialParams, ops: &OperatorBlocks, proj: &CurlProjector) -> Result<f64> {
    let c = component_errors(state, spaces, params, &ExactFields::default())?;
    let w = params.eta() + params.c0;
    let pu = proj.project(&state.u);
    let pu_sq = dot(&pu, &ops.m_u.matvec(&pu));
    let mesh = spaces.mesh();
    let delta = params.delta();
    let mut coupled = 0.0;
    for cell in 0..mesh.num_cells() {
        let d = params.alpha * spaces.u.eval_div(&state.u, cell)? + delta * spaces.q.eval_div(&state.q, cell)?;
        coupled += mesh.cell_area(cell) * d * d;
    }
    let s = (c.r.powi(2) + c.curl_r.powi(2)) / params.mu
        + params.mu * pu_sq
        + (2.0 * params.mu + params.lambda) * c.div_u.powi(2)
        + c.q_kinv.powi(2)
        + coupled / w
        + w * c.p.powi(2);
    Ok(s.sqrt())
}

/// Manufactured solution with forcing derived from the strong form.
#[derive(Clone)]
pub struct ManufacturedCase {
    pub name: String,
    pub params: MaterialParams,
    pub u: VectorFn,
    pub p: ScalarFn,
    pub r: ScalarFn,
    pub curl_r: VectorFn,
    pub div_u: ScalarFn,
    pub q: VectorFn,
    pub div_q: ScalarFn,
    pub f_u: VectorFn,
    pub f_p: ScalarFn,
    pub sigma0: ScalarFn,
    /// Boundary conditions the exact fields satisfy.
    pub bc: BoundaryConfig,
}

impl std::fmt::Debug for ManufacturedCase {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ManufacturedCase").field("name", &self.name).field("params", &self.params).finish()
    }
}

pub const CASE_NAMES: [&str; 2] = ["poly", "trig"];

/// `poly`: `u = (x²y, −xy²)`, `p = x(1−x)y(1−y)` with natural conditions
/// everywhere. `trig`: `u = (sin πx sin πy, cos πx cos πy)`,
/// `p = cos πx cos πy` with essential rotation and flux conditions on the
/// left side, where `r`, `ν·u` and `ν·q` vanish.
pub fn make_case(name: &str, params: &MaterialParams) -> Result<ManufacturedCase> {
    params.validate()?;
    let Conductivity::Scalar(k) = params.k else {
        return Err(Error::InvalidParameter { name: "k", msg: "manufactured cases use a scalar conductivity".into() });
    };
    let (mu, lam, al, c0, dt) = (params.mu, params.lambda, params.alpha, params.c0, params.dt);
    let delta = params.delta();
    match name {
        "poly" => {
            let p = |x: [f64; 2]| x[0] * (1.0 - x[0]) * x[1] * (1.0 - x[1]);
            let grad_p = |x: [f64; 2]| [(1.0 - 2.0 * x[0]) * x[1] * (1.0 - x[1]), x[0] * (1.0 - x[0]) * (1.0 - 2.0 * x[1])];
            let lap_p = |x: [f64; 2]| -2.0 * x[1] * (1.0 - x[1]) - 2.0 * x[0] * (1.0 - x[0]);
            Ok(ManufacturedCase {
                name: name.into(),
                params: params.clone(),
                u: Arc::new(|x| [x[0] * x[0] * x[1], -x[0] * x[1] * x[1]]),
                p: Arc::new(p),
                r: Arc::new(move |x| mu * (x[0] * x[0] + x[1] * x[1])),
                curl_r: Arc::new(move |x| [-2.0 * mu * x[1], 2.0 * mu * x[0]]),
                div_u: Arc::new(|_| 0.0),
                q: Arc::new(move |x| {
                    let g = grad_p(x);
                    [-delta * k * g[0], -delta * k * g[1]]
                }),
                div_q: Arc::new(move |x| -delta * k * lap_p(x)),
                f_u: Arc::new(move |x| {
                    let g = grad_p(x);
                    [-2.0 * mu * x[1] + al * g[0], 2.0 * mu * x[0] + al * g[1]]
                }),
                f_p: Arc::new(move |x| -dt * k * lap_p(x) + c0 * p(x)),
                sigma0: Arc::new(move |x| -al * p(x)),
                bc: BoundaryConfig::uniform(&SQUARE_TAGS, MechanicsBc::Displacement, FlowBc::Pressure),
            })
        }
        "trig" => {
            let p = |x: [f64; 2]| (PI * x[0]).cos() * (PI * x[1]).cos();
            let u = |x: [f64; 2]| {
                let (sx, cx) = (PI * x[0]).sin_cos();
                let (sy, cy) = (PI * x[1]).sin_cos();
                [sx * sy, cx * cy]
            };
            let grad_p = |x: [f64; 2]| {
                let (sx, cx) = (PI * x[0]).sin_cos();
                let (sy, cy) = (PI * x[1]).sin_cos();
                [-PI * sx * cy, -PI * cx * sy]
            };
            let _ = lam;
            Ok(ManufacturedCase {
                name: name.into(),
                params: params.clone(),
                u: Arc::new(u),
                p: Arc::new(p),
                r: Arc::new(move |x| 2.0 * PI * mu * (PI * x[0]).sin() * (PI * x[1]).cos()),
                curl_r: Arc::new(move |x| {
                    let v = u(x);
                    [2.0 * PI * PI * mu * v[0], 2.0 * PI * PI * mu * v[1]]
                }),
                div_u: Arc::new(|_| 0.0),
                q: Arc::new(move |x| {
                    let g = grad_p(x);
                    [-delta * k * g[0], -delta * k * g[1]]
                }),
                div_q: Arc::new(move |x| 2.0 * PI * PI * delta * k * p(x)),
                f_u: Arc::new(move |x| {
                    let v = u(x);
                    let g = grad_p(x);
                    [2.0 * PI * PI * mu * v[0] + al * g[0], 2.0 * PI * PI * mu * v[1] + al * g[1]]
                }),
                f_p: Arc::new(move |x| 2.0 * PI * PI * dt * k * p(x) + c0 * p(x)),
                sigma0: Arc::new(move |x| -al * p(x)),
                bc: BoundaryConfig::uniform(&SQUARE_TAGS, MechanicsBc::Displacement, FlowBc::Pressure).set(
                    "left",
                    MechanicsBc::Rotation,
                    FlowBc::Flux,
                ),
            })
        }
        other => Err(Error::UnknownCase(other.into())),
    }
}

impl ManufacturedCase {
    pub fn problem_data(&self) -> ProblemData {
        ProblemData {
            body_force: Some(self.f_u.clone()),
            source: Some(self.f_p.clone()),
            u0: Some(self.u.clone()),
            sigma0: Some(self.sigma0.clone()),
            p0: Some(self.p.clone()),
        }
    }

    pub fn exact_fields(&self) -> ExactFields {
        ExactFields {
            r: Some(self.r.clone()),
            curl_r: Some(self.curl_r.clone()),
            u: Some(self.u.clone()),
            div_u: Some(self.div_u.clone()),
            q: Some(self.q.clone()),
            div_q: Some(self.div_q.clone()),
            p: Some(self.p.clone()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    /// Four-field method with exact masses.
    FourField,
    /// Lumped and condensed multipoint rotation-flux method.
    Mr,
}

impl std::str::FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "4F" => Ok(Method::FourField),
            "MR" => Ok(Method::Mr),
            _ => Err(Error::InvalidParameter { name: "method", msg: format!("expected 4F or MR, got `{s}`") }),
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Method::FourField => "4F",
            Method::Mr => "MR",
        })
    }
}

/// Solves the manufactured problem on `mesh` and returns spaces and state.
pub fn solve_case(case: &ManufacturedCase, mesh: Arc<Mesh>, family: Family, method: Method) -> Result<(Spaces, FieldState)> {
    let lumped = method == Method::Mr;
    let mut sys = assemble_biot(mesh, family, &case.params, &case.bc, lumped)?;
    sys.assemble_rhs(&case.problem_data(), &case.bc)?;
    let state = match method {
        Method::FourField => sys.solve_direct()?,
        Method::Mr => condense(&sys)?.solve_direct(&sys.rhs)?,
    };
    Ok((sys.spaces, state))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorRow {
    pub level: usize,
    pub h: f64,
    pub errors: Components,
    pub err_x: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ErrorTable {
    pub rows: Vec<ErrorRow>,
}

fn rate(e0: f64, e1: f64, h0: f64, h1: f64) -> f64 {
    (e0 / e1).ln() / (h0 / h1).ln()
}

impl ErrorTable {
    /// Observed rates of `f(row)` between consecutive rows.
    pub fn rates_of(&self, f: impl Fn(&ErrorRow) -> f64) -> Vec<f64> {
        self.rows.windows(2).map(|w| rate(f(&w[0]), f(&w[1]), w[0].h, w[1].h)).collect()
    }

    pub fn rates_x(&self) -> Vec<f64> {
        self.rates_of(|r| r.err_x)
    }

    /// Rate on the final interval.
    pub fn final_rate(&self, f: impl Fn(&ErrorRow) -> f64) -> Option<f64> {
        self.rates_of(f).last().copied()
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("level,h,err_r,err_curl_r,err_u,err_div_u,err_q,err_div_q,err_p,err_X,rate_X\n");
        let rates = self.rates_x();
        for (i, row) in self.rows.iter().enumerate() {
            let e = &row.errors;
            let rate = if i == 0 { String::new() } else { format!("{:.16e}", rates[i - 1]) };
            let _ = writeln!(
                s,
                "{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{}",
                row.level, row.h, e.r, e.curl_r, e.u, e.div_u, e.q, e.div_q, e.p, row.err_x, rate
            );
        }
        s
    }
}

/// Runs the manufactured case on `levels` uniformly refined meshes starting
/// from `unit_square_mesh(n0)`. On a solver failure the partial table is
/// returned alongside the error.
pub fn convergence_study(
    case: &ManufacturedCase,
    family: Family,
    method: Method,
    n0: usize,
    levels: usize,
) -> std::result::Result<ErrorTable, (ErrorTable, Error)> {
    let mut table = ErrorTable::default();
    if levels < 3 {
        return Err((table, Error::TooFewLevels(levels)));
    }
    let mut mesh = match unit_square_mesh(n0) {
        Ok(m) => m,
        Err(e) => return Err((table, e)),
    };
    for level in 0..levels {
        if level > 0 {
            mesh = match refine_uniform(&mesh) {
                Ok(m) => m,
                Err(e) => return Err((table, e)),
            };
        }
        let h = mesh_stats(&mesh).h_max;
        let mesh_arc = Arc::new(mesh.clone());
        let res = solve_case(case, mesh_arc, family, method)
            .and_then(|(spaces, state)| component_errors(&state, &spaces, &case.params, &case.exact_fields()));
        match res {
            Ok(errors) => {
                let err_x = errors.x_norm(&case.params);
                table.rows.push(ErrorRow { level, h, errors, err_x });
            }
            Err(e) => return Err((table, e)),
        }
    }
    Ok(table)
}

/// Extremes of `f(sample)` over `samples` seeded random states.
pub fn ratio_interval(samples: usize, seed: u64, spaces: &Spaces, mut f: impl FnMut(&FieldState) -> Result<f64>) -> Result<(f64, f64)> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    for _ in 0..samples {
        let mut st = FieldState::zeros(spaces);
        for (v, sp) in [(&mut st.r, &spaces.r), (&mut st.u, &spaces.u), (&mut st.q, &spaces.q), (&mut st.p, &spaces.p)] {
            v.iter_mut().for_each(|x| *x = rng.random_range(-1.0..1.0));
            sp.zero_essential(v);
        }
        let r = f(&st)?;
        lo = lo.min(r);
        hi = hi.max(r);
    }
    Ok((lo, hi))
}
