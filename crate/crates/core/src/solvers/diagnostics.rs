//! Stationarity measures, gradient mapping, conditioning and prediction.

use serde::{Deserialize, Serialize};

use crate::classifier::{logit_bounds, predictive_distribution};
use crate::error::{Result, SdlError};
use crate::linalg::{singular_values, symmetric_eigenvalues, ConstraintSpec, DenseMatrix};
use crate::loss::{FactorState, Mode, SdlProblem};

/// `−inf ⟨∇f, d/‖d‖⟩` over feasible directions at `point`, clamped at 0.
///
/// Computed as the norm of the tangent-cone projection of `−∇f`.
pub fn epsilon_stationarity(grad: &DenseMatrix, point: &DenseMatrix, theta: &ConstraintSpec) -> f64 {
    theta.tangent_project(point, &-grad).frobenius_norm()
}

/// Stationarity over a product of sets: the tangent cone is the product of
/// the factor cones, so the measures combine in quadrature.
pub fn epsilon_stationarity_blocks(parts: &[(&DenseMatrix, &DenseMatrix, &ConstraintSpec)]) -> f64 {
    parts
        .iter()
        .map(|(g, x, c)| epsilon_stationarity(g, x, c).powi(2))
        .sum::<f64>()
        .sqrt()
}

pub fn is_epsilon_stationary(measure: f64, eps: f64) -> bool {
    measure <= eps.sqrt()
}

/// `G(Z, τ) = (Z − Π_Θ(Z − τ∇f(Z)))/τ`.
pub fn gradient_mapping(grad: &DenseMatrix, point: &DenseMatrix, tau: f64, theta: &ConstraintSpec) -> DenseMatrix {
    assert!(tau > 0.0, "gradient mapping needs a positive stepsize");
    let step = point - &grad.scale(tau);
    (point - &theta.project(&step)).scale(1.0 / tau)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditioningReport {
    pub mode: Mode,
    pub mu_star: f64,
    pub l_star: f64,
    pub delta_minus: f64,
    pub delta_plus: f64,
    pub alpha_minus: f64,
    pub alpha_plus: f64,
    pub gamma_max: f64,
    pub lambda_max_aux: f64,
    pub mu: f64,
    pub l: f64,
    pub ratio: f64,
    pub condition_ok: bool,
    /// `(1/(2μ), 3/(2L))` when nonempty.
    pub tau_interval: Option<[f64; 2]>,
}

impl ConditioningReport {
    /// `ρ(τ) = 2·max(|1−τμ|, |1−τL|)`.
    pub fn rho(&self, tau: f64) -> f64 {
        2.0 * (1.0 - tau * self.mu).abs().max((1.0 - tau * self.l).abs())
    }

    pub fn tau_midpoint(&self) -> Option<f64> {
        self.tau_interval.map(|[a, b]| 0.5 * (a + b))
    }
}

fn extreme_eigs(m: &DenseMatrix) -> Result<(f64, f64)> {
    if m.rows() == 0 {
        return Ok((0.0, 0.0));
    }
    let n = m.cols() as f64;
    let gram = m.matmul_t(m).scale(1.0 / n);
    let ev = symmetric_eigenvalues(&gram)?;
    Ok((ev[0].max(0.0), ev[ev.len() - 1].max(0.0)))
}

/// Restricted strong convexity / smoothness constants for the lifted
/// problems, for activations bounded by `M`.
pub fn conditioning(prob: &SdlProblem, m: f64) -> Result<ConditioningReport> {
    let b = logit_bounds(m, prob.kappa)?;
    let phi = prob.x_data.vstack(&prob.x_aux);
    let (delta_minus, delta_plus) = extreme_eigs(&phi)?;
    let (_, lambda_max_aux) = extreme_eigs(&prob.x_aux)?;
    let mu_star = delta_minus * b.alpha_minus;
    let l_star = delta_plus * b.alpha_plus;
    let n = prob.n() as f64;
    let (xi, nu) = (prob.xi, prob.nu);
    let (mu, l) = match prob.mode {
        Mode::Filter => ((2.0 * xi).min(2.0 * nu + n * mu_star), (2.0 * xi).max(2.0 * nu + n * l_star)),
        Mode::Feature => (
            (2.0 * xi).min(2.0 * nu + b.alpha_minus),
            (2.0 * xi).max(2.0 * nu + b.alpha_plus * lambda_max_aux * n).max(b.alpha_plus + 2.0 * nu),
        ),
    };
    let ratio = if mu > 0.0 { l / mu } else { f64::INFINITY };
    let condition_ok = ratio < 3.0;
    let tau_interval = condition_ok.then(|| [1.0 / (2.0 * mu), 3.0 / (2.0 * l)]);
    Ok(ConditioningReport {
        mode: prob.mode,
        mu_star,
        l_star,
        delta_minus,
        delta_plus,
        alpha_minus: b.alpha_minus,
        alpha_plus: b.alpha_plus,
        gamma_max: b.gamma_max,
        lambda_max_aux,
        mu,
        l,
        ratio,
        condition_ok,
        tau_interval,
    })
}

/// Stepsize used when none is given: the midpoint of the admissible interval
/// when the conditioning check passes, otherwise `min(0.01, 1/L)`. The
/// fixed 0.01 alone diverges once `L > 200`, e.g. for small noise levels.
pub fn default_tau(prob: &SdlProblem, m: f64) -> Result<(f64, ConditioningReport)> {
    let rep = conditioning(prob, m)?;
    let tau = rep.tau_midpoint().unwrap_or_else(|| DEFAULT_TAU.min(1.0 / rep.l));
    Ok((tau, rep))
}

/// Fixed stepsize of the paper's convex-solver experiments.
pub const DEFAULT_TAU: f64 = 0.01;

/// Unsupervised code for one sample: `argmin ‖x − Wh‖²` over the code set,
/// by projected gradient from zero.
pub fn encode(w: &DenseMatrix, x: &[f64], code: &ConstraintSpec) -> Result<Vec<f64>> {
    let r = w.cols();
    let smax = singular_values(w)?.first().copied().unwrap_or(0.0);
    if smax == 0.0 {
        return Ok(vec![0.0; r]);
    }
    let step = 1.0 / (2.0 * smax * smax);
    let xv = DenseMatrix::column(x);
    let mut h = code.project(&DenseMatrix::zeros(r, 1));
    for _ in 0..20_000 {
        let resid = &w.matmul(&h) - &xv;
        let g = w.t_matmul(&resid).scale(2.0);
        let next = code.project(&(&h - &g.scale(step)));
        let moved = (&next - &h).frobenius_norm();
        h = next;
        if moved <= 1e-15 * h.frobenius_norm().max(1.0) {
            break;
        }
    }
    Ok(h.into_data())
}

/// Predicted label (ties go to the smallest index) and class probabilities.
pub fn predict(prob: &SdlProblem, state: &FactorState, x: &[f64], x_aux: &[f64]) -> Result<(usize, Vec<f64>)> {
    if x.len() != prob.p() || x_aux.len() != prob.q() {
        return Err(SdlError::argument("sample dimensions do not match the problem"));
    }
    let feat = match prob.mode {
        Mode::Filter => state.w.t_matvec(x),
        Mode::Feature => encode(&state.w, x, &prob.constraints.code)?,
    };
    let mut a = state.beta.t_matvec(&feat);
    if prob.q() > 0 {
        for (ai, gi) in a.iter_mut().zip(state.gamma.t_matvec(x_aux)) {
            *ai += gi;
        }
    }
    let probs = predictive_distribution(&a, prob.score)?;
    Ok((argmax(&probs), probs))
}

/// Predictions for every column of `x` (and `x_aux`).
pub fn predict_batch(prob: &SdlProblem, state: &FactorState, x: &DenseMatrix, x_aux: &DenseMatrix) -> Result<Vec<usize>> {
    (0..x.cols())
        .map(|s| {
            let aux = if x_aux.rows() > 0 { x_aux.col(s) } else { Vec::new() };
            predict(prob, state, &x.col(s), &aux).map(|(y, _)| y)
        })
        .collect()
}

pub(crate) fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}
