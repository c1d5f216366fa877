//! Direct and Krylov solvers and the block-diagonal Riesz preconditioner.

use std::time::Instant;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::assembly::{curlcurl_matrix, divdiv_matrix, mass_matrix, CellWeight};
use crate::error::{Error, Result};
use crate::mesh::{unit_square_mesh, BoundaryConfig, FlowBc, MechanicsBc, SQUARE_TAGS};
use crate::reduction::CondensedSystem;
use crate::spaces::{Family, FeSpace, Spaces};
use crate::sparse::{dot, norm2, offsets, CholeskyFactor, CsrMatrix, LuFactor};
use crate::system::{assemble_biot, symmetrize, Conductivity, MaterialParams};

/// Sparse LU solve. Fails with [`Error::Singular`] when the factorization
/// breaks down or yields a non-finite or inaccurate solution; the hint is
/// the index of the largest solution component, where a near-nullspace
/// vector concentrates.
pub fn direct_solve(a: &CsrMatrix, b: &[f64]) -> Result<Vec<f64>> {
    if a.nrows() != a.ncols() {
        return Err(Error::DimensionMismatch { expected: a.nrows(), got: a.ncols() });
    }
    if b.len() != a.nrows() {
        return Err(Error::DimensionMismatch { expected: a.nrows(), got: b.len() });
    }
    if norm2(b) == 0.0 {
        return Ok(vec![0.0; b.len()]);
    }
    let hint_of = |x: &[f64]| {
        x.iter()
            .enumerate()
            .max_by(|a, b| a.1.abs().partial_cmp(&b.1.abs()).unwrap_or(std::cmp::Ordering::Greater))
            .map(|(i, _)| i)
            .unwrap_or(0)
    };
    let lu = match EquilibratedLu::new(a) {
        Ok(lu) => lu,
        Err(_) => {
            let d = a.diagonal();
            let hint = d
                .iter()
                .enumerate()
                .min_by(|x, y| x.1.abs().total_cmp(&y.1.abs()))
                .map(|(i, _)| i)
                .unwrap_or(0);
            return Err(Error::Singular { hint });
        }
    };
    let solve = |rhs: &[f64]| lu.solve(rhs);
    let mut x = solve(b);
    if x.iter().any(|v| !v.is_finite()) {
        let hint = x.iter().position(|v| !v.is_finite()).unwrap_or(0);
        return Err(Error::Singular { hint });
    }
    // Iterative refinement with compensated residuals; stops once the
    // correction reaches working precision or stagnates.
    let mut r = a.residual_compensated(&x, b);
    let mut last = f64::INFINITY;
    for _ in 0..8 {
        let dx = solve(&r);
        let size = norm2(&dx);
        if !size.is_finite() || size > 0.5 * last {
            break;
        }
        x.iter_mut().zip(&dx).for_each(|(p, q)| *p += q);
        r = a.residual_compensated(&x, b);
        last = size;
        if size <= f64::EPSILON * norm2(&x) {
            break;
        }
    }
    if norm2(&r) > 1e-6 * norm2(b) {
        return Err(Error::Singular { hint: hint_of(&x) });
    }
    Ok(x)
}

/// Sparse LU of `D_r A D_c`, where the Ruiz scalings `D_r`, `D_c` bring
/// every row and column to unit max-norm. The blocks of the Biot system can
/// differ in scale by many orders of magnitude (K⁻¹ against μ⁻¹), which
/// otherwise costs digits in a pivoted LU.
pub struct EquilibratedLu {
    lu: LuFactor,
    dr: Vec<f64>,
    dc: Vec<f64>,
}

impl EquilibratedLu {
    pub fn new(a: &CsrMatrix) -> Result<Self> {
        let (dr, dc) = equilibrate(a, 8);
        let lu = LuFactor::new(&a.scale_rows_cols(&dr, &dc))?;
        Ok(Self { lu, dr, dc })
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let y = self.lu.solve(&b.iter().zip(&self.dr).map(|(v, d)| v * d).collect::<Vec<_>>());
        y.iter().zip(&self.dc).map(|(v, d)| v * d).collect()
    }
}

impl std::fmt::Debug for EquilibratedLu {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("EquilibratedLu").field("n", &self.dr.len()).finish()
    }
}

/// Row and column scalings that bring every row and column of `a` to unit
/// max-norm (Ruiz iteration). Empty rows or columns keep scale one.
fn equilibrate(a: &CsrMatrix, sweeps: usize) -> (Vec<f64>, Vec<f64>) {
    let mut dr = vec![1.0; a.nrows()];
    let mut dc = vec![1.0; a.ncols()];
    for _ in 0..sweeps {
        let mut rmax = vec![0.0f64; a.nrows()];
        let mut cmax = vec![0.0f64; a.ncols()];
        for (i, j, v) in a.iter() {
            let s = (v * dr[i] * dc[j]).abs();
            rmax[i] = rmax[i].max(s);
            cmax[j] = cmax[j].max(s);
        }
        for (d, m) in dr.iter_mut().zip(&rmax) {
            if *m > 0.0 {
                *d /= m.sqrt();
            }
        }
        for (d, m) in dc.iter_mut().zip(&cmax) {
            if *m > 0.0 {
                *d /= m.sqrt();
            }
        }
    }
    (dr, dc)
}

pub trait LinearOperator: Sync {
    fn dim(&self) -> usize;
    fn apply(&self, x: &[f64], y: &mut [f64]);
}

impl LinearOperator for CsrMatrix {
    fn dim(&self) -> usize {
        self.nrows()
    }
    fn apply(&self, x: &[f64], y: &mut [f64]) {
        self.matvec_into(x, y)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Identity(pub usize);

impl LinearOperator for Identity {
    fn dim(&self) -> usize {
        self.0
    }
    fn apply(&self, x: &[f64], y: &mut [f64]) {
        y.copy_from_slice(x)
    }
}

/// Solver for one Riesz block.
#[derive(Debug)]
pub enum BlockSolver {
    Cholesky(CholeskyFactor),
    /// `μ M + λ' Bᵀ M_p B` through its mixed form, see [`MixedDivSolver`].
    Mixed(MixedDivSolver),
}

impl BlockSolver {
    fn solve(&self, b: &[f64]) -> Vec<f64> {
        match self {
            BlockSolver::Cholesky(f) => f.solve(b),
            BlockSolver::Mixed(m) => m.solve(b),
        }
    }
}

/// Solves `(μ M + λ' Bᵀ M_p B) z = r` for a diagonal `M_p` via
///
/// ```text
/// [ M   Bᵀ       ] [z]   [r/μ]
/// [ B   −ε M_p⁻¹ ] [t] = [ 0 ],   ε = μ/λ'
/// ```
///
/// which stays well conditioned as `λ'/μ → ∞`, where the primal block's
/// condition number grows like `λ'/μ`. Essential DOFs keep the unit rows of
/// the eliminated primal block.
#[derive(Debug)]
pub struct MixedDivSolver {
    lu: EquilibratedLu,
    n: usize,
    mu: f64,
    essential: Vec<bool>,
}

impl MixedDivSolver {
    pub fn new(mass: &CsrMatrix, div: &CsrMatrix, p_mass: &[f64], mu: f64, lambda_eff: f64, essential: &[bool]) -> Result<Self> {
        let (n, np) = (mass.nrows(), div.nrows());
        let eps = mu / lambda_eff;
        let none = vec![false; np];
        let m = mass.eliminate(essential, essential, true);
        let b = div.eliminate(&none, essential, false);
        let c = CsrMatrix::from_diagonal(&p_mass.iter().map(|w| -eps / w).collect::<Vec<_>>());
        let bt = b.transpose();
        let k = crate::sparse::block_matrix(&[vec![Some(&m), Some(&bt)], vec![Some(&b), Some(&c)]], &[n, np], &[n, np]);
        Ok(Self { lu: EquilibratedLu::new(&k)?, n, mu, essential: essential.to_vec() })
    }

    pub fn solve(&self, r: &[f64]) -> Vec<f64> {
        let np = self.lu.dr.len() - self.n;
        let rhs: Vec<f64> = r
            .iter()
            .zip(&self.essential)
            .map(|(v, &e)| if e { *v } else { v / self.mu })
            .chain(std::iter::repeat_n(0.0, np))
            .collect();
        let mut z = self.lu.solve(&rhs);
        z.truncate(self.n);
        z
    }
}

/// Block-diagonal operator `P = diag(P_i)`, stored through the factorized
/// inverses `P_i⁻¹`.
#[derive(Debug)]
pub struct Preconditioner {
    inverses: Vec<CsrMatrix>,
    solvers: Vec<BlockSolver>,
    offsets: Vec<usize>,
}

impl Preconditioner {
    /// Factorizes each SPD block `P_i⁻¹` by Cholesky.
    pub fn from_blocks(inverses: Vec<CsrMatrix>) -> Result<Self> {
        let solvers = inverses
            .par_iter()
            .map(|m| CholeskyFactor::new(m).map(BlockSolver::Cholesky))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self::with_solvers(inverses, solvers))
    }

    /// Pairs each block `P_i⁻¹` with a prepared solver.
    pub fn with_solvers(inverses: Vec<CsrMatrix>, solvers: Vec<BlockSolver>) -> Self {
        assert_eq!(inverses.len(), solvers.len());
        let sizes: Vec<usize> = inverses.iter().map(|m| m.nrows()).collect();
        Self { inverses, solvers, offsets: offsets(&sizes) }
    }

    pub fn blocks(&self) -> &[CsrMatrix] {
        &self.inverses
    }

    /// The block-diagonal matrix `P⁻¹`.
    pub fn inverse_matrix(&self) -> CsrMatrix {
        let n = self.inverses.len();
        let sizes: Vec<usize> = self.inverses.iter().map(|m| m.nrows()).collect();
        let grid: Vec<Vec<Option<&CsrMatrix>>> =
            (0..n).map(|i| (0..n).map(|j| (i == j).then(|| &self.inverses[i])).collect()).collect();
        crate::sparse::block_matrix(&grid, &sizes, &sizes)
    }
}

impl LinearOperator for Preconditioner {
    fn dim(&self) -> usize {
        *self.offsets.last().unwrap()
    }
    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let parts: Vec<Vec<f64>> = self
            .solvers
            .par_iter()
            .enumerate()
            .map(|(i, f)| refined_solve(&self.inverses[i], f, &x[self.offsets[i]..self.offsets[i + 1]]))
            .collect();
        for (i, p) in parts.into_iter().enumerate() {
            y[self.offsets[i]..self.offsets[i + 1]].copy_from_slice(&p);
        }
    }
}

/// Refinement steps with compensated residuals applied to every block
/// solve. A fixed count keeps the preconditioner a linear map.
const BLOCK_REFINEMENT_STEPS: usize = 2;

fn refined_solve(m: &CsrMatrix, f: &BlockSolver, b: &[f64]) -> Vec<f64> {
    let mut z = f.solve(b);
    for _ in 0..BLOCK_REFINEMENT_STEPS {
        let r = m.residual_compensated(&z, b);
        let dz = f.solve(&r);
        z.iter_mut().zip(&dz).for_each(|(a, d)| *a += d);
    }
    z
}

fn eliminate_block(m: CsrMatrix, space: &FeSpace) -> CsrMatrix {
    m.eliminate(space.essential(), space.essential(), true)
}

/// The four Riesz blocks `P_r⁻¹, P_u⁻¹, P_q⁻¹, P_p⁻¹` of the X-norm, with
/// essential DOFs replaced by unit rows.
pub fn riesz_blocks(spaces: &Spaces, params: &MaterialParams) -> Result<[CsrMatrix; 4]> {
    params.validate()?;
    let (mu, lam) = (params.mu, params.lambda);
    let w = params.eta() + params.c0;
    let one = CellWeight::Uniform(1.0);
    let pr = mass_matrix(&spaces.r, &one)?.add(&curlcurl_matrix(&spaces.r, 1.0)?).scale(1.0 / mu);
    let pu = mass_matrix(&spaces.u, &CellWeight::Uniform(mu))?.add(&divdiv_matrix(&spaces.u, 2.0 * mu + lam)?);
    let mq = match &params.k {
        Conductivity::Scalar(k) => mass_matrix(&spaces.q, &CellWeight::Uniform(1.0 / k))?,
        Conductivity::Tensor(_) => mass_matrix(&spaces.q, &params.k_inverse_weight())?,
    };
    let pq = mq.add(&divdiv_matrix(&spaces.q, params.dt / w)?);
    let pp = mass_matrix(&spaces.p, &CellWeight::Uniform(w))?;
    Ok([
        eliminate_block(pr, &spaces.r),
        eliminate_block(pu, &spaces.u),
        eliminate_block(pq, &spaces.q),
        eliminate_block(pp, &spaces.p),
    ])
}

pub fn build_preconditioner(spaces: &Spaces, params: &MaterialParams) -> Result<Preconditioner> {
    let [pr, pu, pq, pp] = riesz_blocks(spaces, params)?;
    let us = displacement_solver(spaces, params)?;
    let chol = [&pr, &pq, &pp].par_iter().map(|m| CholeskyFactor::new(m)).collect::<Result<Vec<_>>>()?;
    let mut chol = chol.into_iter().map(BlockSolver::Cholesky);
    let (sr, sq, sp) = (chol.next().unwrap(), chol.next().unwrap(), chol.next().unwrap());
    Ok(Preconditioner::with_solvers(vec![pr, pu, pq, pp], vec![sr, us, sq, sp]))
}

pub fn build_condensed_preconditioner(spaces: &Spaces, params: &MaterialParams) -> Result<Preconditioner> {
    let [_, pu, _, pp] = riesz_blocks(spaces, params)?;
    let us = displacement_solver(spaces, params)?;
    let sp = BlockSolver::Cholesky(CholeskyFactor::new(&pp)?);
    Ok(Preconditioner::with_solvers(vec![pu, pp], vec![us, sp]))
}

/// Mixed-form solver for the displacement block `μ M + (2μ+λ) div-div`.
fn displacement_solver(spaces: &Spaces, params: &MaterialParams) -> Result<BlockSolver> {
    let mass = mass_matrix(&spaces.u, &CellWeight::Uniform(1.0))?;
    let div = crate::assembly::div_matrix(&spaces.u, &spaces.p)?;
    let p_mass: Vec<f64> = (0..spaces.mesh().num_cells()).map(|c| spaces.mesh().cell_area(c)).collect();
    let m = MixedDivSolver::new(&mass, &div, &p_mass, params.mu, 2.0 * params.mu + params.lambda, spaces.u.essential())?;
    Ok(BlockSolver::Mixed(m))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub converged: bool,
    pub iterations: usize,
    /// Final preconditioned residual relative to the initial one.
    pub relative_residual: f64,
    pub wall_time: f64,
    /// Extremal magnitudes of the Lanczos Ritz values of the preconditioned operator.
    pub ritz_min: f64,
    pub ritz_max: f64,
    pub condition_estimate: f64,
}

/// Relative drift `|⟨Ax,y⟩ − ⟨x,Ay⟩| / (‖Ax‖‖y‖)` on seeded probes.
pub fn symmetry_drift(a: &dyn LinearOperator, probes: usize, seed: u64) -> f64 {
    let n = a.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    let mut ax = vec![0.0; n];
    let mut ay = vec![0.0; n];
    for _ in 0..probes {
        let x: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let y: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        a.apply(&x, &mut ax);
        a.apply(&y, &mut ay);
        let scale = (norm2(&ax) * norm2(&y)).max(norm2(&ay) * norm2(&x));
        if scale > 0.0 {
            worst = worst.max((dot(&ax, &y) - dot(&x, &ay)).abs() / scale);
        }
    }
    worst
}

fn ritz_values(alphas: &[f64], betas: &[f64]) -> (f64, f64) {
    let k = alphas.len();
    if k == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mut t = DMatrix::zeros(k, k);
    for i in 0..k {
        t[(i, i)] = alphas[i];
        if i + 1 < k {
            t[(i, i + 1)] = betas[i];
            t[(i + 1, i)] = betas[i];
        }
    }
    let eig = SymmetricEigen::new(t).eigenvalues;
    let abs = eig.iter().map(|v| v.abs());
    let lo = abs.clone().fold(f64::INFINITY, f64::min);
    let hi = abs.fold(0.0, f64::max);
    (lo, hi)
}

/// Preconditioned MINRES for symmetric `a` and SPD `p`. Stops when the
/// `P`-norm of the residual drops below `tol` times its initial value.
pub fn minres(a: &dyn LinearOperator, p: &dyn LinearOperator, b: &[f64], tol: f64, max_iter: usize) -> Result<(Vec<f64>, SolveReport)> {
    let n = a.dim();
    if b.len() != n || p.dim() != n {
        return Err(Error::DimensionMismatch { expected: n, got: if b.len() != n { b.len() } else { p.dim() } });
    }
    let drift = symmetry_drift(a, 2, 0x5eed);
    if drift > 1e-8 {
        return Err(Error::Asymmetric { drift });
    }
    let start = Instant::now();
    let mut x = vec![0.0; n];
    let mut r1 = b.to_vec();
    let mut y = vec![0.0; n];
    p.apply(&r1, &mut y);
    let beta1 = dot(&r1, &y);
    if beta1 < 0.0 {
        return Err(Error::InvalidParameter { name: "preconditioner", msg: "not positive definite".into() });
    }
    let beta1 = beta1.sqrt();
    let mut report = SolveReport {
        converged: true,
        iterations: 0,
        relative_residual: 0.0,
        wall_time: 0.0,
        ritz_min: f64::NAN,
        ritz_max: f64::NAN,
        condition_estimate: f64::NAN,
    };
    if beta1 == 0.0 {
        return Ok((x, report));
    }
    let mut r2 = r1.clone();
    let (mut oldb, mut beta) = (0.0, beta1);
    let (mut dbar, mut epsln, mut phibar) = (0.0, 0.0, beta1);
    let (mut cs, mut sn) = (-1.0f64, 0.0f64);
    let mut w = vec![0.0; n];
    let mut w2 = vec![0.0; n];
    let mut v = vec![0.0; n];
    let (mut alphas, mut betas) = (Vec::new(), Vec::new());
    let mut converged = false;
    let mut itn = 0;
    while itn < max_iter {
        itn += 1;
        let s = 1.0 / beta;
        for i in 0..n {
            v[i] = s * y[i];
        }
        a.apply(&v, &mut y);
        if itn >= 2 {
            let f = beta / oldb;
            for i in 0..n {
                y[i] -= f * r1[i];
            }
        }
        let alfa = dot(&v, &y);
        let f = alfa / beta;
        for i in 0..n {
            y[i] -= f * r2[i];
        }
        std::mem::swap(&mut r1, &mut r2);
        r2.copy_from_slice(&y);
        p.apply(&r2, &mut y);
        oldb = beta;
        let bb = dot(&r2, &y);
        if bb < 0.0 {
            return Err(Error::InvalidParameter { name: "preconditioner", msg: "not positive definite".into() });
        }
        beta = bb.sqrt();
        alphas.push(alfa);
        betas.push(beta);

        let oldeps = epsln;
        let delta = cs * dbar + sn * alfa;
        let gbar = sn * dbar - cs * alfa;
        epsln = sn * beta;
        dbar = -cs * beta;
        let gamma = gbar.hypot(beta).max(f64::EPSILON);
        cs = gbar / gamma;
        sn = beta / gamma;
        let phi = cs * phibar;
        phibar *= sn;
        let denom = 1.0 / gamma;
        for i in 0..n {
            let w1 = w2[i];
            w2[i] = w[i];
            w[i] = (v[i] - oldeps * w1 - delta * w2[i]) * denom;
            x[i] += phi * w[i];
        }
        if phibar <= tol * beta1 || beta == 0.0 {
            converged = true;
            break;
        }
    }
    let (lo, hi) = ritz_values(&alphas, &betas[..alphas.len().saturating_sub(1)]);
    report.converged = converged;
    report.iterations = itn;
    report.relative_residual = phibar / beta1;
    report.wall_time = start.elapsed().as_secs_f64();
    report.ritz_min = lo;
    report.ritz_max = hi;
    report.condition_estimate = hi / lo;
    Ok((x, report))
}

/// Restarted GMRES without preconditioning, for diagnostics on
/// nonsymmetric systems. Returns the iterate and the number of inner steps.
pub fn gmres(a: &dyn LinearOperator, b: &[f64], tol: f64, restart: usize, max_iter: usize) -> Result<(Vec<f64>, usize, bool)> {
    let n = a.dim();
    if b.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: b.len() });
    }
    let bnorm = norm2(b);
    let mut x = vec![0.0; n];
    if bnorm == 0.0 {
        return Ok((x, 0, true));
    }
    let m = restart.max(1);
    let mut total = 0;
    let mut tmp = vec![0.0; n];
    while total < max_iter {
        a.apply(&x, &mut tmp);
        let r: Vec<f64> = b.iter().zip(&tmp).map(|(p, q)| p - q).collect();
        let rnorm = norm2(&r);
        if rnorm <= tol * bnorm {
            return Ok((x, total, true));
        }
        let mut basis = vec![r.iter().map(|v| v / rnorm).collect::<Vec<f64>>()];
        let mut h = vec![vec![0.0; m]; m + 1];
        let (mut cs, mut sn) = (vec![0.0; m], vec![0.0; m]);
        let mut g = vec![0.0; m + 1];
        g[0] = rnorm;
        let mut k_used = 0;
        for k in 0..m {
            if total >= max_iter {
                break;
            }
            total += 1;
            let mut wv = vec![0.0; n];
            a.apply(&basis[k], &mut wv);
            for (j, bj) in basis.iter().enumerate() {
                h[j][k] = dot(&wv, bj);
                for i in 0..n {
                    wv[i] -= h[j][k] * bj[i];
                }
            }
            h[k + 1][k] = norm2(&wv);
            for j in 0..k {
                let t = cs[j] * h[j][k] + sn[j] * h[j + 1][k];
                h[j + 1][k] = -sn[j] * h[j][k] + cs[j] * h[j + 1][k];
                h[j][k] = t;
            }
            let d = h[k][k].hypot(h[k + 1][k]);
            cs[k] = h[k][k] / d;
            sn[k] = h[k + 1][k] / d;
            h[k][k] = d;
            h[k + 1][k] = 0.0;
            g[k + 1] = -sn[k] * g[k];
            g[k] *= cs[k];
            k_used = k + 1;
            let hk = h[k][k];
            let next = norm2(&wv);
            if g[k + 1].abs() <= tol * bnorm || next == 0.0 || hk == 0.0 {
                break;
            }
            basis.push(wv.iter().map(|v| v / next).collect());
        }
        let mut yk = vec![0.0; k_used];
        for i in (0..k_used).rev() {
            let s: f64 = (i + 1..k_used).map(|j| h[i][j] * yk[j]).sum();
            yk[i] = (g[i] - s) / h[i][i];
        }
        for (j, c) in yk.iter().enumerate() {
            for i in 0..n {
                x[i] += c * basis[j][i];
            }
        }
        if g[k_used].abs() <= tol * bnorm {
            a.apply(&x, &mut tmp);
            let res = norm2(&b.iter().zip(&tmp).map(|(p, q)| p - q).collect::<Vec<_>>());
            if res <= 10.0 * tol * bnorm {
                return Ok((x, total, true));
            }
        }
    }
    Ok((x, total, false))
}

/// Solves the four-field system with preconditioned MINRES on `𝒜S`.
pub fn solve_minres(sys: &crate::system::BlockSystem, tol: f64, max_iter: usize) -> Result<(Vec<f64>, SolveReport)> {
    let (as_, s) = symmetrize(sys);
    let prec = build_preconditioner(&sys.spaces, &sys.params)?;
    let (y, report) = minres(&as_, &prec, &sys.rhs, tol, max_iter)?;
    Ok((y.iter().zip(&s).map(|(a, b)| a * b).collect(), report))
}

/// Solves the condensed system with MINRES and the `(P_u, P_p)` blocks.
pub fn solve_condensed_minres(cs: &CondensedSystem, spaces: &Spaces, params: &MaterialParams, tol: f64, max_iter: usize) -> Result<(Vec<f64>, SolveReport)> {
    let (m, s) = cs.symmetrized();
    let prec = build_condensed_preconditioner(spaces, params)?;
    let (y, report) = minres(&m, &prec, &cs.rhs, tol, max_iter)?;
    Ok((y.iter().zip(&s).map(|(a, b)| a * b).collect(), report))
}

/// Boundary configuration used by the sweep: rotation (essential) on the
/// bottom and left, displacement data on the top and right; no-flux on the
/// bottom and top, pressure on the sides. Putting the rotation part on two
/// opposite sides instead would leave `u = curl y` in the kernel.
pub fn sweep_boundary() -> BoundaryConfig {
    BoundaryConfig::uniform(&SQUARE_TAGS, MechanicsBc::Displacement, FlowBc::Pressure)
        .set("bottom", MechanicsBc::Rotation, FlowBc::Flux)
        .set("left", MechanicsBc::Rotation, FlowBc::Pressure)
        .set("top", MechanicsBc::Displacement, FlowBc::Flux)
}

/// μ, K ∈ {1e-6, 1, 1e6}, λ ∈ {0, 1, 1e6}, c₀ ∈ {0, 1}, α ∈ {0, 0.5, 1},
/// Δt ∈ {1e-6, 1}: 324 parameter sets.
pub fn default_grid() -> Vec<MaterialParams> {
    let mut out = Vec::with_capacity(324);
    for mu in [1e-6, 1.0, 1e6] {
        for k in [1e-6, 1.0, 1e6] {
            for lambda in [0.0, 1.0, 1e6] {
                for c0 in [0.0, 1.0] {
                    for alpha in [0.0, 0.5, 1.0] {
                        for dt in [1e-6, 1.0] {
                            out.push(MaterialParams { mu, lambda, alpha, c0, k: Conductivity::Scalar(k), dt });
                        }
                    }
                }
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub params: MaterialParams,
    pub n: usize,
    pub result: std::result::Result<SolveReport, String>,
}

/// MINRES on every `(params, level)` pair with a seeded random right-hand
/// side. Rows come back in grid-major, level-minor order; failures are
/// recorded per row.
pub fn parameter_sweep(grid: &[MaterialParams], levels: &[usize], family: Family, tol: f64, max_iter: usize, seed: u64) -> Vec<SweepRow> {
    let bc = sweep_boundary();
    let tasks: Vec<(usize, usize)> = (0..grid.len()).flat_map(|g| levels.iter().map(move |&n| (g, n))).collect();
    tasks
        .par_iter()
        .map(|&(g, n)| {
            let params = &grid[g];
            let result = sweep_one(params, n, family, &bc, tol, max_iter, seed).map_err(|e| e.to_string());
            SweepRow { params: params.clone(), n, result }
        })
        .collect()
}

fn sweep_one(params: &MaterialParams, n: usize, family: Family, bc: &BoundaryConfig, tol: f64, max_iter: usize, seed: u64) -> Result<SolveReport> {
    let mesh = std::sync::Arc::new(unit_square_mesh(n)?);
    let mut sys = assemble_biot(mesh, family, params, bc, false)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sys.rhs = sys.essential.iter().map(|&e| {
        let v: f64 = rng.random_range(-1.0..1.0);
        if e { 0.0 } else { v }
    }).collect();
    let (_, report) = solve_minres(&sys, tol, max_iter)?;
    Ok(report)
}
