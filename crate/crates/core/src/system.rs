//! The 4×4 block Biot system in the unknown order `(r, u, q, p)`:
//!
//! ```text
//! | μ⁻¹M_r   −B̂_rᵀ        0        0     | r |   | f_r |
//! | B̂_r   (2μ+λ)D_u      0     −αB̂_uᵀ  | u | = | f_u |
//! | 0         0       K⁻¹M_q  −δB̂_qᵀ  | q |   | f_q |
//! | 0       αB̂_u      δB̂_q    c₀M_p   | p |   | f_p |
//! ```
//!
//! with `D_u` the div-div form on `U_h`. The lumped variant replaces `M_r`
//! and `M_q` by their vertex-quadrature counterparts.

use std::sync::Arc;

use crate::assembly::{assemble_rhs, divdiv_matrix, eig_sym, inv_sym, is_spd, CellWeight, OperatorBlocks, ProblemData, RhsAssembly};
use crate::error::{Error, Result};
use crate::mesh::{BoundaryConfig, Mesh};
use crate::quadrature::lumped_mass;
use crate::solver::direct_solve;
use crate::spaces::{Family, FieldState, Spaces};
use crate::sparse::{block_matrix, offsets, CsrMatrix};

/// Hydraulic conductivity.
#[derive(Debug, Clone, PartialEq)]
pub enum Conductivity {
    Scalar(f64),
    /// SPD tensor per cell; only usable with lumped flux mass.
    Tensor(Vec<[[f64; 2]; 2]>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct MaterialParams {
    pub mu: f64,
    pub lambda: f64,
    pub alpha: f64,
    pub c0: f64,
    pub k: Conductivity,
    pub dt: f64,
}

impl MaterialParams {
    /// All coefficients one, `λ = 0`, `c₀ = 0`.
    pub fn unit() -> Self {
        Self { mu: 1.0, lambda: 0.0, alpha: 1.0, c0: 0.0, k: Conductivity::Scalar(1.0), dt: 1.0 }
    }

    pub fn new(mu: f64, lambda: f64, alpha: f64, c0: f64, k: f64, dt: f64) -> Result<Self> {
        let p = Self { mu, lambda, alpha, c0, k: Conductivity::Scalar(k), dt };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |name: &'static str, msg: String| Err(Error::InvalidParameter { name, msg });
        let all = [self.mu, self.lambda, self.alpha, self.c0, self.dt];
        if all.iter().any(|v| !v.is_finite()) {
            return bad("params", "all parameters must be finite".into());
        }
        if self.mu <= 0.0 {
            return bad("mu", format!("must be positive, got {}", self.mu));
        }
        if self.lambda < 0.0 {
            return bad("lambda", format!("must be non-negative, got {}", self.lambda));
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return bad("alpha", format!("must lie in [0, 1], got {}", self.alpha));
        }
        if self.c0 < 0.0 {
            return bad("c0", format!("must be non-negative, got {}", self.c0));
        }
        if self.dt <= 0.0 {
            return bad("dt", format!("must be positive, got {}", self.dt));
        }
        match &self.k {
            Conductivity::Scalar(k) if !(*k > 0.0 && k.is_finite()) => return bad("k", format!("must be positive, got {k}")),
            Conductivity::Tensor(ts) => {
                if let Some(c) = ts.iter().position(|t| !is_spd(t)) {
                    return Err(Error::NonSpdWeight { cell: c });
                }
            }
            _ => {}
        }
        if self.eta() + self.c0 <= 0.0 {
            return bad("c0", "eta + c0 must be positive".into());
        }
        Ok(())
    }

    /// `δ = √Δt`.
    pub fn delta(&self) -> f64 {
        self.dt.sqrt()
    }

    /// Scalar conductivity, or the largest eigenvalue over all cells.
    pub fn k_max(&self) -> f64 {
        match &self.k {
            Conductivity::Scalar(k) => *k,
            Conductivity::Tensor(ts) => ts.iter().map(|t| eig_sym(t).1).fold(0.0, f64::max),
        }
    }

    /// `η = α²/(2μ+λ) + ΔtK`; `δ²` is taken as `Δt` itself.
    pub fn eta(&self) -> f64 {
        self.alpha * self.alpha / (2.0 * self.mu + self.lambda) + self.dt * self.k_max()
    }

    pub fn with_dt(&self, dt: f64) -> Self {
        Self { dt, ..self.clone() }
    }

    /// Weight `K⁻¹` for the flux mass form.
    pub fn k_inverse_weight(&self) -> CellWeight {
        match &self.k {
            Conductivity::Scalar(k) => CellWeight::Uniform(1.0 / k),
            Conductivity::Tensor(ts) => CellWeight::Tensor(ts.iter().map(inv_sym).collect()),
        }
    }
}

/// Blocks indexed `[row][col]` in the order `(r, u, q, p)`.
pub type Blocks = [[Option<CsrMatrix>; 4]; 4];

/// Assembled, BC-eliminated block system.
#[derive(Debug, Clone)]
pub struct BlockSystem {
    pub spaces: Spaces,
    pub params: MaterialParams,
    pub lumped: bool,
    pub ops: Arc<OperatorBlocks>,
    pub blocks: Blocks,
    pub matrix: CsrMatrix,
    pub rhs: Vec<f64>,
    pub essential: Vec<bool>,
}

pub fn assemble_biot(mesh: Arc<Mesh>, family: Family, params: &MaterialParams, bc: &BoundaryConfig, lumped: bool) -> Result<BlockSystem> {
    let spaces = Spaces::new(mesh, family, bc)?;
    let ops = Arc::new(OperatorBlocks::new(&spaces)?);
    assemble_with(spaces, ops, params, lumped)
}

/// Assembly reusing precomputed spaces and operators.
pub fn assemble_with(spaces: Spaces, ops: Arc<OperatorBlocks>, params: &MaterialParams, lumped: bool) -> Result<BlockSystem> {
    params.validate()?;
    let tensor = matches!(params.k, Conductivity::Tensor(_));
    if tensor && !lumped {
        return Err(Error::InvalidParameter { name: "k", msg: "tensor conductivity requires the lumped flux mass".into() });
    }
    let (mu, a, delta) = (params.mu, params.alpha, params.delta());
    let (a_rr, a_qq) = if lumped {
        let mr = lumped_mass(&spaces.r, &CellWeight::Uniform(1.0))?.into_matrix().scale(1.0 / mu);
        let mq = lumped_mass(&spaces.q, &params.k_inverse_weight())?.into_matrix();
        (mr, mq)
    } else {
        let Conductivity::Scalar(k) = params.k else { unreachable!() };
        (ops.m_r.scale(1.0 / mu), ops.m_q.scale(1.0 / k))
    };
    let a_uu = divdiv_matrix(&spaces.u, 2.0 * mu + params.lambda)?;
    let a_ur = ops.bh_r.clone();
    let a_ru = ops.bh_r.transpose().scale(-1.0);
    let a_pu = ops.bh_u.scale(a);
    let a_up = a_pu.transpose().scale(-1.0);
    let a_pq = ops.bh_q.scale(delta);
    let a_qp = a_pq.transpose().scale(-1.0);
    let a_pp = ops.m_p.scale(params.c0);

    let ess: Vec<&[bool]> = vec![spaces.r.essential(), spaces.u.essential(), spaces.q.essential(), spaces.p.essential()];
    let mut blocks: Blocks = Default::default();
    let raw = [
        (0, 0, a_rr),
        (0, 1, a_ru),
        (1, 0, a_ur),
        (1, 1, a_uu),
        (1, 3, a_up),
        (2, 2, a_qq),
        (2, 3, a_qp),
        (3, 1, a_pu),
        (3, 2, a_pq),
        (3, 3, a_pp),
    ];
    for (i, j, m) in raw {
        blocks[i][j] = Some(m.eliminate(ess[i], ess[j], i == j));
    }
    let matrix = assemble_blocks(&blocks, &spaces.sizes());
    let essential = spaces.essential_mask();
    let rhs = vec![0.0; spaces.total_dofs()];
    Ok(BlockSystem { spaces, params: params.clone(), lumped, ops, blocks, matrix, rhs, essential })
}

pub(crate) fn assemble_blocks(blocks: &Blocks, sizes: &[usize; 4]) -> CsrMatrix {
    let refs: Vec<Vec<Option<&CsrMatrix>>> = blocks.iter().map(|row| row.iter().map(|b| b.as_ref()).collect()).collect();
    block_matrix(&refs, sizes, sizes)
}

impl BlockSystem {
    pub fn block(&self, i: usize, j: usize) -> Option<&CsrMatrix> {
        self.blocks[i][j].as_ref()
    }

    /// Sets the right-hand side, zeroing essential entries.
    pub fn set_rhs(&mut self, rhs: &RhsAssembly) -> Result<()> {
        let v = rhs.to_vector();
        if v.len() != self.matrix.nrows() {
            return Err(Error::DimensionMismatch { expected: self.matrix.nrows(), got: v.len() });
        }
        self.rhs = v.into_iter().zip(&self.essential).map(|(x, &e)| if e { 0.0 } else { x }).collect();
        Ok(())
    }

    /// Assembles the data functional and installs it as right-hand side.
    pub fn assemble_rhs(&mut self, data: &ProblemData, bc: &BoundaryConfig) -> Result<RhsAssembly> {
        let rhs = assemble_rhs(data, &self.spaces, bc, &self.params)?;
        self.set_rhs(&rhs)?;
        Ok(rhs)
    }

    /// Block-diagonal part `A = sym(𝒜)`.
    pub fn a_part(&self) -> CsrMatrix {
        let mut diag: Blocks = Default::default();
        for i in 0..4 {
            diag[i][i] = self.blocks[i][i].clone();
        }
        assemble_blocks(&diag, &self.spaces.sizes())
    }

    pub fn offsets(&self) -> Vec<usize> {
        offsets(&self.spaces.sizes())
    }

    pub fn solve_direct(&self) -> Result<FieldState> {
        let x = direct_solve(&self.matrix, &self.rhs)?;
        FieldState::from_vector(&self.spaces, &x)
    }

    /// `‖𝒜x − f‖ / ‖f‖`, or the absolute residual when `f = 0`.
    pub fn relative_residual(&self, x: &[f64]) -> f64 {
        let r = self.matrix.residual_compensated(x, &self.rhs);
        let nf = crate::sparse::norm2(&self.rhs);
        let nr = crate::sparse::norm2(&r);
        if nf > 0.0 {
            nr / nf
        } else {
            nr
        }
    }
}

/// Returns `𝒜S` and the diagonal of `S = diag(I, −I, −I, I)`. Solving
/// `(𝒜S) y = f` gives the solution `x = S y`.
pub fn symmetrize(sys: &BlockSystem) -> (CsrMatrix, Vec<f64>) {
    let s = sign_map(&sys.spaces.sizes());
    let mut blocks = sys.blocks.clone();
    for row in blocks.iter_mut() {
        for (j, b) in row.iter_mut().enumerate() {
            if j == 1 || j == 2 {
                if let Some(m) = b.as_mut() {
                    *m = m.scale(-1.0);
                }
            }
        }
    }
    (assemble_blocks(&blocks, &sys.spaces.sizes()), s)
}

pub fn sign_map(sizes: &[usize; 4]) -> Vec<f64> {
    sizes
        .iter()
        .enumerate()
        .flat_map(|(i, &n)| std::iter::repeat_n(if i == 1 || i == 2 { -1.0 } else { 1.0 }, n))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TimeScheme {
    #[default]
    BackwardEuler,
    CrankNicolson,
}

impl TimeScheme {
    /// The step entering the stationary system: `Δt` for backward Euler,
    /// `Δt/2` for Crank–Nicolson. The flux scaling is its square root.
    pub fn effective_dt(self, dt: f64) -> f64 {
        match self {
            TimeScheme::BackwardEuler => dt,
            TimeScheme::CrankNicolson => 0.5 * dt,
        }
    }
}

/// Per-step data: `sources(t)` gives body force, rate source `f̌_p` and
/// boundary data at time `t`.
pub struct TimeLoop<'a> {
    pub mesh: Arc<Mesh>,
    pub family: Family,
    pub params: MaterialParams,
    pub bc: BoundaryConfig,
    pub lumped: bool,
    pub scheme: TimeScheme,
    pub sources: &'a (dyn Fn(f64) -> ProblemData + Sync),
}

impl TimeLoop<'_> {
    /// Marches `n_steps` from `initial` (time 0), returning every state
    /// including the initial one. Fluxes are stored scaled; the physical flux
    /// is `q / √(effective Δt)`.
    pub fn run(&self, initial: &FieldState, n_steps: usize) -> Result<Vec<FieldState>> {
        let dt = self.params.dt;
        let dt_eff = self.scheme.effective_dt(dt);
        let step_params = self.params.with_dt(dt_eff);
        let mut sys = assemble_biot(self.mesh.clone(), self.family, &step_params, &self.bc, self.lumped)?;
        initial.check(&sys.spaces)?;
        let delta = step_params.delta();
        let alpha = self.params.alpha;
        let mut states = vec![initial.clone()];
        for n in 1..=n_steps {
            let wrap = |e: Error| Error::TimeStep { step: n, source: Box::new(e) };
            let t = n as f64 * dt;
            let prev = states.last().unwrap();
            let mut rhs = assemble_rhs(&(self.sources)(t), &sys.spaces, &self.bc, &step_params).map_err(wrap)?;
            let history_p = sys.ops.m_p.matvec(&prev.p);
            let history_u = sys.ops.bh_u.matvec(&prev.u);
            match self.scheme {
                TimeScheme::BackwardEuler => {
                    for c in 0..rhs.f_p.len() {
                        rhs.f_p[c] = dt * rhs.f_p[c] + self.params.c0 * history_p[c] + alpha * history_u[c];
                    }
                }
                TimeScheme::CrankNicolson => {
                    let old = assemble_rhs(&(self.sources)(t - dt), &sys.spaces, &self.bc, &step_params).map_err(wrap)?;
                    let history_q = sys.ops.bh_q.matvec(&prev.q);
                    for c in 0..rhs.f_p.len() {
                        rhs.f_p[c] = dt_eff * (rhs.f_p[c] + old.f_p[c]) + self.params.c0 * history_p[c] + alpha * history_u[c]
                            - delta * history_q[c];
                    }
                }
            }
            sys.set_rhs(&rhs).map_err(wrap)?;
            let next = sys.solve_direct().map_err(wrap)?;
            states.push(next);
        }
        Ok(states)
    }
}

/// Physical flux `q̌ = q/δ`.
pub fn unscaled_flux(q: &[f64], delta: f64) -> Vec<f64> {
    q.iter().map(|v| v / delta).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{unit_square_mesh, FlowBc, MechanicsBc, SQUARE_TAGS};

    fn mixed_bc() -> BoundaryConfig {
        BoundaryConfig::uniform(&SQUARE_TAGS, MechanicsBc::Displacement, FlowBc::Pressure)
            .set("bottom", MechanicsBc::Rotation, FlowBc::Flux)
            .set("right", MechanicsBc::Rotation, FlowBc::Pressure)
    }

    fn params() -> MaterialParams {
        MaterialParams::new(2.0, 3.0, 0.7, 0.4, 0.5, 0.25).unwrap()
    }

    #[test]
    fn param_validation() {
        assert!(MaterialParams::new(0.0, 1.0, 0.5, 0.0, 1.0, 1.0).is_err());
        assert!(MaterialParams::new(1.0, 1.0, 1.5, 0.0, 1.0, 1.0).is_err());
        assert!(MaterialParams::new(1.0, 1.0, 0.5, 0.0, -1.0, 1.0).is_err());
        assert!(MaterialParams::new(1.0, 1.0, 0.5, 0.0, 1.0, 0.0).is_err());
        let p = params();
        assert_eq!(p.delta() * p.delta(), 0.25);
        assert!((p.eta() - (0.49 / 7.0 + 0.125)).abs() < 1e-15);
    }

    #[test]
    fn symmetric_part_is_block_diagonal() {
        let mesh = Arc::new(unit_square_mesh(3).unwrap());
        for family in [Family::One, Family::Two] {
            let sys = assemble_biot(mesh.clone(), family, &params(), &mixed_bc(), false).unwrap();
            let sym = sys.matrix.add(&sys.matrix.transpose()).scale(0.5);
            assert_eq!(sym.max_abs_diff(&sys.a_part()), 0.0);
            let (as_, s) = symmetrize(&sys);
            assert!(as_.is_symmetric_exact());
            assert!(s.iter().all(|v| v * v == 1.0));
        }
    }

    #[test]
    fn alpha_zero_decouples() {
        let mesh = Arc::new(unit_square_mesh(2).unwrap());
        let p = MaterialParams { alpha: 0.0, ..params() };
        let sys = assemble_biot(mesh, Family::One, &p, &mixed_bc(), false).unwrap();
        assert_eq!(sys.block(1, 3).unwrap().max_abs(), 0.0);
        assert_eq!(sys.block(3, 1).unwrap().max_abs(), 0.0);
    }

    #[test]
    fn lumping_touches_only_rotation_and_flux_mass() {
        let mesh = Arc::new(unit_square_mesh(3).unwrap());
        let exact = assemble_biot(mesh.clone(), Family::Two, &params(), &mixed_bc(), false).unwrap();
        let lumped = assemble_biot(mesh, Family::Two, &params(), &mixed_bc(), true).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                let (a, b) = (exact.block(i, j), lumped.block(i, j));
                let diff = match (a, b) {
                    (Some(a), Some(b)) => a.max_abs_diff(b),
                    (None, None) => 0.0,
                    _ => panic!("block pattern differs"),
                };
                if (i, j) == (0, 0) || (i, j) == (2, 2) {
                    assert!(diff > 0.0);
                } else {
                    assert_eq!(diff, 0.0);
                }
            }
        }
    }

    #[test]
    fn tensor_k_requires_lumping() {
        let mesh = Arc::new(unit_square_mesh(2).unwrap());
        let mut p = params();
        p.k = Conductivity::Tensor(vec![[[1.0, 0.2], [0.2, 2.0]]; mesh.num_cells()]);
        assert!(matches!(
            assemble_biot(mesh.clone(), Family::Two, &p, &mixed_bc(), false),
            Err(Error::InvalidParameter { name: "k", .. })
        ));
        assert!(assemble_biot(mesh, Family::Two, &p, &mixed_bc(), true).is_ok());
        assert!((p.k_max() - (1.5 + (0.25f64 + 0.04).sqrt())).abs() < 1e-14);
    }

    #[test]
    fn homogeneous_problem_has_zero_solution() {
        let mesh = Arc::new(unit_square_mesh(3).unwrap());
        let bc = mixed_bc();
        let mut sys = assemble_biot(mesh, Family::One, &params(), &bc, false).unwrap();
        sys.assemble_rhs(&ProblemData::homogeneous(), &bc).unwrap();
        let x = sys.solve_direct().unwrap();
        assert!(x.to_vector().iter().all(|v| v.abs() < 1e-14));
    }

    #[test]
    fn symmetrized_solve_matches_direct() {
        let mesh = Arc::new(unit_square_mesh(3).unwrap());
        let bc = mixed_bc();
        let mut sys = assemble_biot(mesh, Family::Two, &params(), &bc, false).unwrap();
        let mut data = ProblemData::homogeneous();
        data.body_force = Some(Arc::new(|x| [x[1], 1.0 - x[0]]));
        data.source = Some(Arc::new(|x| x[0] * x[1]));
        data.p0 = Some(Arc::new(|x| x[0]));
        sys.assemble_rhs(&data, &bc).unwrap();
        let x = sys.solve_direct().unwrap().to_vector();
        assert!(sys.relative_residual(&x) < 1e-12);
        let (as_, s) = symmetrize(&sys);
        let y = direct_solve(&as_, &sys.rhs).unwrap();
        let xs: Vec<f64> = y.iter().zip(&s).map(|(a, b)| a * b).collect();
        let err = xs.iter().zip(&x).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        let scale = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(err <= 1e-10 * scale);
    }

    #[test]
    fn steady_state_persists() {
        let mesh = Arc::new(unit_square_mesh(2).unwrap());
        let bc = mixed_bc();
        let sources = |_t: f64| ProblemData::homogeneous();
        for scheme in [TimeScheme::BackwardEuler, TimeScheme::CrankNicolson] {
            let tl = TimeLoop { mesh: mesh.clone(), family: Family::One, params: params(), bc: bc.clone(), lumped: false, scheme, sources: &sources };
            let spaces = Spaces::new(mesh.clone(), Family::One, &bc).unwrap();
            let states = tl.run(&FieldState::zeros(&spaces), 3).unwrap();
            assert_eq!(states.len(), 4);
            assert!(states.iter().all(|s| s.to_vector().iter().all(|v| v.abs() < 1e-14)));
        }
    }

    #[test]
    fn decoupled_pressure_ignores_history() {
        let mesh = Arc::new(unit_square_mesh(2).unwrap());
        let bc = mixed_bc();
        let p = MaterialParams { alpha: 0.0, c0: 0.0, ..params() };
        let sources = |_t: f64| {
            let mut d = ProblemData::homogeneous();
            d.source = Some(Arc::new(|x| x[0] + 2.0 * x[1]));
            d
        };
        let tl = TimeLoop { mesh: mesh.clone(), family: Family::Two, params: p, bc: bc.clone(), lumped: false, scheme: TimeScheme::BackwardEuler, sources: &sources };
        let spaces = Spaces::new(mesh, Family::Two, &bc).unwrap();
        let mut init = FieldState::zeros(&spaces);
        init.p.iter_mut().for_each(|v| *v = 5.0);
        let states = tl.run(&init, 2).unwrap();
        let d: f64 = states[1].p.iter().zip(&states[2].p).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(d < 1e-12);
    }

    #[test]
    fn backward_euler_step_matches_hand_folded_system() {
        let mesh = Arc::new(unit_square_mesh(2).unwrap());
        let bc = mixed_bc();
        let pr = params();
        let spaces = Spaces::new(mesh.clone(), Family::One, &bc).unwrap();
        let mut init = FieldState::zeros(&spaces);
        init.p = (0..init.p.len()).map(|c| c as f64 * 0.1).collect();
        init.u = (0..init.u.len()).map(|e| (e as f64).cos()).collect();
        spaces.u.zero_essential(&mut init.u);
        let sources = |_t: f64| ProblemData::homogeneous();
        let tl = TimeLoop { mesh: mesh.clone(), family: Family::One, params: pr.clone(), bc: bc.clone(), lumped: false, scheme: TimeScheme::BackwardEuler, sources: &sources };
        let step = tl.run(&init, 1).unwrap().pop().unwrap();
        let mut sys = assemble_biot(mesh, Family::One, &pr, &bc, false).unwrap();
        let mut rhs = assemble_rhs(&ProblemData::homogeneous(), &sys.spaces, &bc, &pr).unwrap();
        let hp = sys.ops.m_p.matvec(&init.p);
        let hu = sys.ops.bh_u.matvec(&init.u);
        for c in 0..rhs.f_p.len() {
            rhs.f_p[c] = pr.c0 * hp[c] + pr.alpha * hu[c];
        }
        sys.set_rhs(&rhs).unwrap();
        let direct = sys.solve_direct().unwrap();
        let diff = step.sub(&direct).to_vector().iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(diff < 1e-13);
    }
}
