//! Separate-variable SDL loss `L(W, H, β, Γ)` and its block gradients.

use crate::classifier::{hdot, nll};
use crate::error::{Result, SdlError};
use crate::linalg::DenseMatrix;

use super::problem::{FactorState, Mode, SdlProblem};

/// Which parameter block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Block {
    W,
    H,
    Beta,
    Gamma,
}

/// Activation of sample `s`.
pub fn activation(prob: &SdlProblem, s: usize, state: &FactorState) -> Vec<f64> {
    let k = prob.kappa;
    let mut a = vec![0.0; k];
    match prob.mode {
        Mode::Filter => {
            let x = prob.x_data.col(s);
            let wx = state.w.t_matvec(&x);
            for (j, aj) in a.iter_mut().enumerate() {
                *aj = (0..prob.r()).map(|l| state.beta.get(l, j) * wx[l]).sum();
            }
        }
        Mode::Feature => {
            for (j, aj) in a.iter_mut().enumerate() {
                *aj = (0..prob.r()).map(|l| state.beta.get(l, j) * state.h.get(l, s)).sum();
            }
        }
    }
    if prob.q() > 0 {
        let xa = prob.x_aux.col(s);
        let ga = state.gamma.t_matvec(&xa);
        for (aj, g) in a.iter_mut().zip(ga) {
            *aj += g;
        }
    }
    a
}

/// All activations as a `κ×n` matrix.
pub fn activations(prob: &SdlProblem, state: &FactorState) -> DenseMatrix {
    let mut act = match prob.mode {
        Mode::Filter => state.beta.t_matmul(&state.w.t_matmul(&prob.x_data)),
        Mode::Feature => state.beta.t_matmul(&state.h),
    };
    add_aux_activation(prob, &state.gamma, &mut act);
    act
}

pub(crate) fn add_aux_activation(prob: &SdlProblem, gamma: &DenseMatrix, act: &mut DenseMatrix) {
    if prob.q() > 0 {
        *act += &gamma.t_matmul(&prob.x_aux);
    }
}

/// Summed NLL over samples from a `κ×n` activation matrix.
pub(crate) fn nll_sum(prob: &SdlProblem, act: &DenseMatrix) -> Result<f64> {
    let mut total = 0.0;
    let mut a = vec![0.0; prob.kappa];
    for s in 0..prob.n() {
        for (j, aj) in a.iter_mut().enumerate() {
            *aj = act.get(j, s);
        }
        let v = nll(prob.labels[s], &a, prob.score)?;
        if v.infinite {
            return Err(SdlError::numeric(format!("zero predicted probability for sample {s}")));
        }
        total += v.value;
    }
    Ok(total)
}

/// `K = [ḣ(y_1, a_1), …, ḣ(y_n, a_n)]`, `κ×n`.
pub(crate) fn k_matrix(prob: &SdlProblem, act: &DenseMatrix) -> Result<DenseMatrix> {
    let mut k = DenseMatrix::zeros(prob.kappa, prob.n());
    let mut a = vec![0.0; prob.kappa];
    for s in 0..prob.n() {
        for (j, aj) in a.iter_mut().enumerate() {
            *aj = act.get(j, s);
        }
        let d = hdot(prob.labels[s], &a, prob.score)?;
        for (j, v) in d.into_iter().enumerate() {
            k.set(j, s, v);
        }
    }
    Ok(k)
}

/// The ν-weighted L2 term. Filter mode penalizes `‖Wβ‖²` (the filter
/// `A = Wβ`), Feature mode `‖βᵀH‖²`; both add `‖Γ‖²`.
pub fn l2_term(prob: &SdlProblem, state: &FactorState) -> f64 {
    if prob.nu == 0.0 {
        return 0.0;
    }
    let main = match prob.mode {
        Mode::Filter => state.w.matmul(&state.beta).frobenius_norm_sq(),
        Mode::Feature => state.beta.t_matmul(&state.h).frobenius_norm_sq(),
    };
    prob.nu * (main + state.gamma.frobenius_norm_sq())
}

/// `Σ_s ℓ(y_s, a_s) + ξ‖X − WH‖² + ν·(L2 term)`. Excludes the optional L1 penalty.
pub fn loss_separate(prob: &SdlProblem, state: &FactorState) -> Result<f64> {
    let act = activations(prob, state);
    let mut total = nll_sum(prob, &act)?;
    if prob.xi != 0.0 {
        let resid = &state.w.matmul(&state.h) - &prob.x_data;
        total += prob.xi * resid.frobenius_norm_sq();
    }
    total += l2_term(prob, state);
    if !total.is_finite() {
        return Err(SdlError::numeric("loss overflowed"));
    }
    Ok(total)
}

/// Gradient with respect to every block.
pub fn grad_blocks(prob: &SdlProblem, state: &FactorState) -> Result<FactorState> {
    let act = activations(prob, state);
    let k = k_matrix(prob, &act)?;
    let resid = &state.w.matmul(&state.h) - &prob.x_data;
    Ok(FactorState {
        w: grad_w(prob, state, &k, &resid),
        h: grad_h(prob, state, &k, &resid),
        beta: grad_beta(prob, state, &k),
        gamma: grad_gamma(prob, state, &k),
    })
}

/// Gradient of one block only.
pub fn grad_block(prob: &SdlProblem, state: &FactorState, block: Block) -> Result<DenseMatrix> {
    let act = activations(prob, state);
    let k = k_matrix(prob, &act)?;
    Ok(match block {
        Block::W => grad_w(prob, state, &k, &(&state.w.matmul(&state.h) - &prob.x_data)),
        Block::H => grad_h(prob, state, &k, &(&state.w.matmul(&state.h) - &prob.x_data)),
        Block::Beta => grad_beta(prob, state, &k),
        Block::Gamma => grad_gamma(prob, state, &k),
    })
}

fn grad_w(prob: &SdlProblem, st: &FactorState, k: &DenseMatrix, resid: &DenseMatrix) -> DenseMatrix {
    let mut g = resid.matmul_t(&st.h).scale(2.0 * prob.xi);
    if prob.mode == Mode::Filter {
        // X Kᵀ βᵀ
        g += &prob.x_data.matmul_t(k).matmul_t(&st.beta);
        if prob.nu != 0.0 {
            let a = st.w.matmul(&st.beta);
            g.axpy(2.0 * prob.nu, &a.matmul_t(&st.beta));
        }
    }
    g
}

fn grad_h(prob: &SdlProblem, st: &FactorState, k: &DenseMatrix, resid: &DenseMatrix) -> DenseMatrix {
    let mut g = st.w.t_matmul(resid).scale(2.0 * prob.xi);
    if prob.mode == Mode::Feature {
        g += &st.beta.matmul(k);
        if prob.nu != 0.0 {
            let a = st.beta.t_matmul(&st.h);
            g.axpy(2.0 * prob.nu, &st.beta.matmul(&a));
        }
    }
    g
}

fn grad_beta(prob: &SdlProblem, st: &FactorState, k: &DenseMatrix) -> DenseMatrix {
    match prob.mode {
        Mode::Filter => {
            let mut g = st.w.t_matmul(&prob.x_data.matmul_t(k));
            if prob.nu != 0.0 {
                let a = st.w.matmul(&st.beta);
                g.axpy(2.0 * prob.nu, &st.w.t_matmul(&a));
            }
            g
        }
        Mode::Feature => {
            let mut g = st.h.matmul_t(k);
            if prob.nu != 0.0 {
                let a = st.beta.t_matmul(&st.h);
                g.axpy(2.0 * prob.nu, &st.h.matmul_t(&a));
            }
            g
        }
    }
}

fn grad_gamma(prob: &SdlProblem, st: &FactorState, k: &DenseMatrix) -> DenseMatrix {
    let mut g = prob.x_aux.matmul_t(k);
    if prob.nu != 0.0 {
        g.axpy(2.0 * prob.nu, &st.gamma);
    }
    g
}
