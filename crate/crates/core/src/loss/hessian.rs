//! Explicit Hessian of the separate-variable loss over `vec(W, H, β, Γ)`,
//! for verification-scale problems. Vectorization is column-major.

use crate::classifier::hddot;
use crate::error::{Result, SdlError};
use crate::linalg::{commutation_matrix, kron, DenseMatrix};

use super::problem::{FactorState, Mode, SdlProblem};
use super::separate::{activations, grad_blocks, k_matrix};

/// Largest parameter dimension accepted by [`assemble_hessian_small`].
pub const HESSIAN_DIM_LIMIT: usize = 2000;

/// Offsets of the four blocks inside the stacked parameter vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HessianLayout {
    pub w: (usize, usize),
    pub h: (usize, usize),
    pub beta: (usize, usize),
    pub gamma: (usize, usize),
}

impl HessianLayout {
    pub fn new(prob: &SdlProblem) -> Self {
        let (p, n, r, q, k) = (prob.p(), prob.n(), prob.r(), prob.q(), prob.kappa);
        let w = (0, p * r);
        let h = (w.1, w.1 + r * n);
        let beta = (h.1, h.1 + r * k);
        let gamma = (beta.1, beta.1 + q * k);
        HessianLayout { w, h, beta, gamma }
    }

    pub fn dim(&self) -> usize {
        self.gamma.1
    }

    pub fn ranges(&self) -> [(usize, usize); 4] {
        [self.w, self.h, self.beta, self.gamma]
    }
}

/// Stacks `vec(W), vec(H), vec(β), vec(Γ)`.
pub fn flatten_state(st: &FactorState) -> Vec<f64> {
    let mut v = st.w.vec();
    v.extend(st.h.vec());
    v.extend(st.beta.vec());
    v.extend(st.gamma.vec());
    v
}

/// Inverse of [`flatten_state`].
pub fn unflatten_state(prob: &SdlProblem, v: &[f64]) -> FactorState {
    let l = HessianLayout::new(prob);
    let (p, n, r, q, k) = (prob.p(), prob.n(), prob.r(), prob.q(), prob.kappa);
    FactorState {
        w: DenseMatrix::from_col_major(p, r, &v[l.w.0..l.w.1]),
        h: DenseMatrix::from_col_major(r, n, &v[l.h.0..l.h.1]),
        beta: DenseMatrix::from_col_major(r, k, &v[l.beta.0..l.beta.1]),
        gamma: DenseMatrix::from_col_major(q, k, &v[l.gamma.0..l.gamma.1]),
    }
}

fn put_block(out: &mut DenseMatrix, rows: (usize, usize), cols: (usize, usize), b: &DenseMatrix) {
    debug_assert_eq!(b.shape(), (rows.1 - rows.0, cols.1 - cols.0));
    for i in 0..b.rows() {
        for j in 0..b.cols() {
            out.add_at(rows.0 + i, cols.0 + j, b.get(i, j));
        }
    }
}

/// `blockdiag(Ḧ(y_1, a_1), …, Ḧ(y_n, a_n))`, `κn×κn`, ordered by sample.
fn curvature_blocks(prob: &SdlProblem, act: &DenseMatrix) -> Result<DenseMatrix> {
    let k = prob.kappa;
    let n = prob.n();
    let mut d = DenseMatrix::zeros(k * n, k * n);
    for s in 0..n {
        let hs = hddot(prob.labels[s], &act.col(s), prob.score)?;
        for i in 0..k {
            for j in 0..k {
                d.set(s * k + i, s * k + j, hs.get(i, j));
            }
        }
    }
    Ok(d)
}

/// Hessian of [`super::loss_separate`] at `state`.
///
/// Filter mode is assembled analytically: each activation-Jacobian block is
/// `J_θᵀ D J_θ'` with `D` the per-sample curvature, plus the bilinear terms of
/// the NLL, the reconstruction term and the ν term. Feature mode assembles
/// the diagonal blocks analytically and fills cross blocks by central
/// differences of the analytic gradient.
pub fn assemble_hessian_small(prob: &SdlProblem, state: &FactorState) -> Result<DenseMatrix> {
    state.check_shapes(prob)?;
    let layout = HessianLayout::new(prob);
    if layout.dim() > HESSIAN_DIM_LIMIT {
        return Err(SdlError::argument(format!(
            "parameter dimension {} exceeds the Hessian limit {HESSIAN_DIM_LIMIT}",
            layout.dim()
        )));
    }
    match prob.mode {
        Mode::Filter => filter_hessian(prob, state, &layout),
        Mode::Feature => feature_hessian(prob, state, &layout),
    }
}

fn filter_hessian(prob: &SdlProblem, st: &FactorState, l: &HessianLayout) -> Result<DenseMatrix> {
    let (p, n, r, q, k) = (prob.p(), prob.n(), prob.r(), prob.q(), prob.kappa);
    let (xi, nu) = (prob.xi, prob.nu);
    let x = &prob.x_data;
    let act = activations(prob, st);
    let d = curvature_blocks(prob, &act)?;
    let kmat = k_matrix(prob, &act)?;
    let eye_k = DenseMatrix::identity(k);

    // Activation Jacobians, vec(act) = J_θ vec(θ).
    let j_w = kron(&x.transpose(), &st.beta.transpose()).matmul(&commutation_matrix(p, r));
    let j_beta = kron(&x.t_matmul(&st.w), &eye_k).matmul(&commutation_matrix(r, k));
    let j_gamma = kron(&prob.x_aux.transpose(), &eye_k).matmul(&commutation_matrix(q, k));
    let jac = [(l.w, &j_w), (l.beta, &j_beta), (l.gamma, &j_gamma)];

    let mut hess = DenseMatrix::zeros(l.dim(), l.dim());
    for (ra, ja) in jac.iter() {
        let left = ja.t_matmul(&d);
        for (rb, jb) in jac.iter() {
            put_block(&mut hess, *ra, *rb, &left.matmul(jb));
        }
    }

    // NLL bilinear term between β and W: C^{(κ,r)} (I_r ⊗ X Kᵀ)ᵀ.
    let xk = x.matmul_t(&kmat);
    let bw = commutation_matrix(k, r).matmul(&kron(&DenseMatrix::identity(r), &xk).transpose());
    put_block(&mut hess, l.beta, l.w, &bw);
    put_block(&mut hess, l.w, l.beta, &bw.transpose());

    // Reconstruction ξ‖WH − X‖².
    let hht = st.h.matmul_t(&st.h);
    put_block(&mut hess, l.w, l.w, &kron(&hht, &DenseMatrix::identity(p)).scale(2.0 * xi));
    let wtw = st.w.t_matmul(&st.w);
    put_block(&mut hess, l.h, l.h, &kron(&DenseMatrix::identity(n), &wtw).scale(2.0 * xi));
    let resid = &st.w.matmul(&st.h) - x;
    let mut hw = kron(&st.h.transpose(), &st.w.transpose());
    hw += &kron(&resid.transpose(), &DenseMatrix::identity(r)).matmul(&commutation_matrix(p, r));
    hw.scale_in_place(2.0 * xi);
    put_block(&mut hess, l.h, l.w, &hw);
    put_block(&mut hess, l.w, l.h, &hw.transpose());

    // ν(‖Wβ‖² + ‖Γ‖²).
    if nu != 0.0 {
        let bbt = st.beta.matmul_t(&st.beta);
        put_block(&mut hess, l.w, l.w, &kron(&bbt, &DenseMatrix::identity(p)).scale(2.0 * nu));
        put_block(&mut hess, l.beta, l.beta, &kron(&eye_k, &wtw).scale(2.0 * nu));
        let a = st.w.matmul(&st.beta);
        let mut cross = kron(&st.beta.transpose(), &st.w.transpose());
        cross += &kron(&a.transpose(), &DenseMatrix::identity(r)).matmul(&commutation_matrix(p, r));
        cross.scale_in_place(2.0 * nu);
        put_block(&mut hess, l.beta, l.w, &cross);
        put_block(&mut hess, l.w, l.beta, &cross.transpose());
        put_block(&mut hess, l.gamma, l.gamma, &DenseMatrix::identity(q * k).scale(2.0 * nu));
    }
    Ok(hess)
}

fn feature_hessian(prob: &SdlProblem, st: &FactorState, l: &HessianLayout) -> Result<DenseMatrix> {
    let (p, n, r, q, k) = (prob.p(), prob.n(), prob.r(), prob.q(), prob.kappa);
    let (xi, nu) = (prob.xi, prob.nu);
    let act = activations(prob, st);
    let d = curvature_blocks(prob, &act)?;
    let eye_k = DenseMatrix::identity(k);

    let j_h = kron(&DenseMatrix::identity(n), &st.beta.transpose());
    let j_beta = kron(&st.h.transpose(), &eye_k).matmul(&commutation_matrix(r, k));
    let j_gamma = kron(&prob.x_aux.transpose(), &eye_k).matmul(&commutation_matrix(q, k));

    let mut hess = DenseMatrix::zeros(l.dim(), l.dim());
    let hht = st.h.matmul_t(&st.h);
    let wtw = st.w.t_matmul(&st.w);
    put_block(&mut hess, l.w, l.w, &kron(&hht, &DenseMatrix::identity(p)).scale(2.0 * xi));
    let mut hh = j_h.t_matmul(&d).matmul(&j_h);
    hh += &kron(&DenseMatrix::identity(n), &wtw).scale(2.0 * xi);
    let mut bb = j_beta.t_matmul(&d).matmul(&j_beta);
    let mut gg = j_gamma.t_matmul(&d).matmul(&j_gamma);
    if nu != 0.0 {
        hh += &kron(&DenseMatrix::identity(n), &st.beta.matmul_t(&st.beta)).scale(2.0 * nu);
        bb += &kron(&eye_k, &hht).scale(2.0 * nu);
        gg += &DenseMatrix::identity(q * k).scale(2.0 * nu);
    }
    put_block(&mut hess, l.h, l.h, &hh);
    put_block(&mut hess, l.beta, l.beta, &bb);
    put_block(&mut hess, l.gamma, l.gamma, &gg);

    // Cross blocks from central differences of the analytic gradient.
    let x0 = flatten_state(st);
    let ranges = l.ranges();
    for (bi, rb) in ranges.iter().enumerate() {
        for col in rb.0..rb.1 {
            let step = 1e-6 * x0[col].abs().max(1.0);
            let mut xp = x0.clone();
            let mut xm = x0.clone();
            xp[col] += step;
            xm[col] -= step;
            let gp = flatten_state(&grad_blocks(prob, &unflatten_state(prob, &xp))?);
            let gm = flatten_state(&grad_blocks(prob, &unflatten_state(prob, &xm))?);
            for (ai, ra) in ranges.iter().enumerate() {
                if ai == bi {
                    continue;
                }
                for row in ra.0..ra.1 {
                    hess.set(row, col, (gp[row] - gm[row]) / (2.0 * step));
                }
            }
        }
    }
    // Symmetrize the finite-difference part.
    let sym = DenseMatrix::from_fn(l.dim(), l.dim(), |i, j| 0.5 * (hess.get(i, j) + hess.get(j, i)));
    Ok(sym)
}
