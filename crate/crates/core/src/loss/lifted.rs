//! Lifted losses `f_SDL-filt([A, B], Γ)` and `f_SDL-feat([A; B], Γ)`.

use crate::error::{Result, SdlError};
use crate::linalg::DenseMatrix;

use super::problem::{LiftedState, Mode, SdlProblem};
use super::separate::{add_aux_activation, k_matrix, nll_sum};

/// `κ×n` activations: `AᵀX + ΓᵀX_aux` (Filter) or `A + ΓᵀX_aux` (Feature).
pub fn lifted_activations(prob: &SdlProblem, z: &LiftedState) -> DenseMatrix {
    let mut act = match prob.mode {
        Mode::Filter => z.a.t_matmul(&prob.x_data),
        Mode::Feature => z.a.clone(),
    };
    add_aux_activation(prob, &z.gamma, &mut act);
    act
}

/// Filter: `ν(‖A‖ + ‖Γ‖)²`. Feature: `ν(‖A‖² + ‖Γ‖²)`.
pub fn lifted_regularizer(prob: &SdlProblem, z: &LiftedState) -> f64 {
    if prob.nu == 0.0 {
        return 0.0;
    }
    match prob.mode {
        Mode::Filter => {
            let s = z.a.frobenius_norm() + z.gamma.frobenius_norm();
            prob.nu * s * s
        }
        Mode::Feature => prob.nu * (z.a.frobenius_norm_sq() + z.gamma.frobenius_norm_sq()),
    }
}

pub fn loss_lifted(prob: &SdlProblem, z: &LiftedState) -> Result<f64> {
    let act = lifted_activations(prob, z);
    let mut total = nll_sum(prob, &act)?;
    if prob.xi != 0.0 {
        total += prob.xi * (&z.b - &prob.x_data).frobenius_norm_sq();
    }
    total += lifted_regularizer(prob, z);
    if !total.is_finite() {
        return Err(SdlError::numeric("lifted loss overflowed"));
    }
    Ok(total)
}

pub fn grad_lifted(prob: &SdlProblem, z: &LiftedState) -> Result<LiftedState> {
    let act = lifted_activations(prob, z);
    let k = k_matrix(prob, &act)?;
    let mut ga = match prob.mode {
        Mode::Filter => prob.x_data.matmul_t(&k),
        Mode::Feature => k.clone(),
    };
    let mut gg = prob.x_aux.matmul_t(&k);
    if prob.nu != 0.0 {
        match prob.mode {
            Mode::Filter => {
                // d/dA (‖A‖+‖Γ‖)² = 2(‖A‖+‖Γ‖) A/‖A‖; the zero matrix gets 0.
                let na = z.a.frobenius_norm();
                let ng = z.gamma.frobenius_norm();
                let s = 2.0 * prob.nu * (na + ng);
                if na > 0.0 {
                    ga.axpy(s / na, &z.a);
                }
                if ng > 0.0 {
                    gg.axpy(s / ng, &z.gamma);
                }
            }
            Mode::Feature => {
                ga.axpy(2.0 * prob.nu, &z.a);
                gg.axpy(2.0 * prob.nu, &z.gamma);
            }
        }
    }
    let gb = (&z.b - &prob.x_data).scale(2.0 * prob.xi);
    Ok(LiftedState { a: ga, b: gb, gamma: gg })
}
