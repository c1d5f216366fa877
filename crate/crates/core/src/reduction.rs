//! Static condensation of the lumped system to `(u, p)` and local recovery
//! of `(r, q)`.
//!
//! With the lumped rotation and flux masses block diagonal per vertex,
//!
//! ```text
//! S_uu = K_uu − K_ur K_rr⁻¹ K_ru,   g_u = f_u − K_ur K_rr⁻¹ f_r
//! S_pp = K_pp − K_pq K_qq⁻¹ K_qp,   g_p = f_p − K_pq K_qq⁻¹ f_q
//! r = K_rr⁻¹ (f_r − K_ru u),        q = K_qq⁻¹ (f_q − K_qp p)
//! ```

use crate::error::{Error, Result};
use crate::quadrature::{block_diagonal_inverse, lumped_mass};
use crate::assembly::CellWeight;
use crate::solver::direct_solve;
use crate::spaces::{FieldState, SpaceKind};
use crate::sparse::{block_matrix, norm2, CsrMatrix, LuFactor};
use crate::system::BlockSystem;

#[derive(Debug, Clone)]
pub struct CondensedSystem {
    pub s_uu: CsrMatrix,
    pub s_up: CsrMatrix,
    pub s_pu: CsrMatrix,
    pub s_pp: CsrMatrix,
    /// The 2×2 block matrix.
    pub matrix: CsrMatrix,
    pub rhs: Vec<f64>,
    kinv_r: CsrMatrix,
    kinv_q: CsrMatrix,
    k_ru: CsrMatrix,
    k_qp: CsrMatrix,
    k_ur: CsrMatrix,
    k_pq: CsrMatrix,
    /// The reducible lumped matrix, kept for refinement.
    full: CsrMatrix,
    sizes: [usize; 4],
    family: crate::spaces::Family,
}

fn symmetric_part(m: &CsrMatrix) -> CsrMatrix {
    m.add(&m.transpose()).scale(0.5)
}

pub fn condense(sys: &BlockSystem) -> Result<CondensedSystem> {
    if !sys.lumped {
        return Err(Error::NotCondensable("the system uses exact rotation and flux masses".into()));
    }
    if sys.spaces.q.kind() != SpaceKind::Bdm1 {
        return Err(Error::NotCondensable("the RT0 flux mass is not vertex local under the vertex rule".into()));
    }
    let block = |i: usize, j: usize| sys.blocks[i][j].clone().expect("block present");
    let groups_r = lumped_mass(&sys.spaces.r, &CellWeight::Uniform(1.0))?.vertex_groups().to_vec();
    let groups_q = lumped_mass(&sys.spaces.q, &CellWeight::Uniform(1.0))?.vertex_groups().to_vec();
    let kinv_r = block_diagonal_inverse(&block(0, 0), &groups_r)?;
    let kinv_q = block_diagonal_inverse(&block(2, 2), &groups_q)?;
    let (k_ur, k_ru, k_pq, k_qp) = (block(1, 0), block(0, 1), block(3, 2), block(2, 3));
    let s_uu = block(1, 1).axpby(1.0, &symmetric_part(&k_ur.matmul(&kinv_r).matmul(&k_ru)), -1.0);
    let s_pp = block(3, 3).axpby(1.0, &symmetric_part(&k_pq.matmul(&kinv_q).matmul(&k_qp)), -1.0);
    let (s_up, s_pu) = (block(1, 3), block(3, 1));
    let sizes = sys.spaces.sizes();
    let matrix = block_matrix(
        &[vec![Some(&s_uu), Some(&s_up)], vec![Some(&s_pu), Some(&s_pp)]],
        &[sizes[1], sizes[3]],
        &[sizes[1], sizes[3]],
    );
    let mut cs = CondensedSystem {
        s_uu,
        s_up,
        s_pu,
        s_pp,
        matrix,
        rhs: Vec::new(),
        kinv_r,
        kinv_q,
        k_ru,
        k_qp,
        k_ur,
        k_pq,
        full: sys.matrix.clone(),
        sizes,
        family: sys.spaces.family,
    };
    cs.rhs = cs.condense_rhs(&sys.rhs)?;
    Ok(cs)
}

impl CondensedSystem {
    fn split<'a>(&self, f: &'a [f64]) -> Result<[&'a [f64]; 4]> {
        let total: usize = self.sizes.iter().sum();
        if f.len() != total {
            return Err(Error::DimensionMismatch { expected: total, got: f.len() });
        }
        let [nr, nu, nq, _] = self.sizes;
        Ok([&f[..nr], &f[nr..nr + nu], &f[nr + nu..nr + nu + nq], &f[nr + nu + nq..]])
    }

    /// `(g_u, g_p)` from a full four-block right-hand side.
    pub fn condense_rhs(&self, f: &[f64]) -> Result<Vec<f64>> {
        let [fr, fu, fq, fp] = self.split(f)?;
        let cu = self.k_ur.matvec(&self.kinv_r.matvec(fr));
        let cp = self.k_pq.matvec(&self.kinv_q.matvec(fq));
        Ok(fu.iter().zip(&cu).map(|(a, b)| a - b).chain(fp.iter().zip(&cp).map(|(a, b)| a - b)).collect())
    }

    /// Back-substitutes `r` and `q` from `(u, p)` and the full right-hand side.
    pub fn recover(&self, u: &[f64], p: &[f64], f: &[f64]) -> Result<FieldState> {
        let [fr, _, fq, _] = self.split(f)?;
        if u.len() != self.sizes[1] {
            return Err(Error::DimensionMismatch { expected: self.sizes[1], got: u.len() });
        }
        if p.len() != self.sizes[3] {
            return Err(Error::DimensionMismatch { expected: self.sizes[3], got: p.len() });
        }
        let tr = self.k_ru.matvec(u);
        let tq = self.k_qp.matvec(p);
        let r = self.kinv_r.matvec(&fr.iter().zip(&tr).map(|(a, b)| a - b).collect::<Vec<_>>());
        let q = self.kinv_q.matvec(&fq.iter().zip(&tq).map(|(a, b)| a - b).collect::<Vec<_>>());
        Ok(FieldState { family: self.family, r, u: u.to_vec(), q, p: p.to_vec() })
    }

    /// Splits a condensed vector into `(u, p)`.
    pub fn split_up<'a>(&self, x: &'a [f64]) -> (&'a [f64], &'a [f64]) {
        x.split_at(self.sizes[1])
    }

    /// Direct solve of the condensed system followed by recovery, with a
    /// few refinement steps on the reducible system. Forming the Schur
    /// complements in floating point loses digits when the blocks differ
    /// strongly in scale; correcting against the reducible residual
    /// recovers them.
    pub fn solve_direct(&self, full_rhs: &[f64]) -> Result<FieldState> {
        let lu = LuFactor::new(&self.matrix)?;
        let solve = |f: &[f64]| -> Result<Vec<f64>> {
            let g = self.condense_rhs(f)?;
            let y = lu.solve(&g);
            let (u, p) = self.split_up(&y);
            Ok(self.recover(u, p, f)?.to_vector())
        };
        let first = direct_solve(&self.matrix, &self.condense_rhs(full_rhs)?)?;
        let (u, p) = self.split_up(&first);
        let mut x = self.recover(u, p, full_rhs)?.to_vector();
        let mut last = f64::INFINITY;
        for _ in 0..8 {
            let r = self.full.residual_compensated(&x, full_rhs);
            let dx = solve(&r)?;
            let size = norm2(&dx);
            if !size.is_finite() || size > 0.5 * last {
                break;
            }
            x.iter_mut().zip(&dx).for_each(|(a, b)| *a += b);
            last = size;
            if size <= f64::EPSILON * norm2(&x) {
                break;
            }
        }
        let [nr, nu, nq, _] = self.sizes;
        Ok(FieldState {
            family: self.family,
            r: x[..nr].to_vec(),
            u: x[nr..nr + nu].to_vec(),
            q: x[nr + nu..nr + nu + nq].to_vec(),
            p: x[nr + nu + nq..].to_vec(),
        })
    }

    /// `(M S, s)` with `S = diag(−I_u, I_p)`, which makes the matrix symmetric.
    pub fn symmetrized(&self) -> (CsrMatrix, Vec<f64>) {
        let neg = self.s_uu.scale(-1.0);
        let neg_pu = self.s_pu.scale(-1.0);
        let m = block_matrix(
            &[vec![Some(&neg), Some(&self.s_up)], vec![Some(&neg_pu), Some(&self.s_pp)]],
            &[self.sizes[1], self.sizes[3]],
            &[self.sizes[1], self.sizes[3]],
        );
        let s = std::iter::repeat_n(-1.0, self.sizes[1]).chain(std::iter::repeat_n(1.0, self.sizes[3])).collect();
        (m, s)
    }
}
