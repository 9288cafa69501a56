//! Convex lifted solvers and factor recovery.

use crate::error::{Result, SdlError};
use crate::linalg::{svd_full, DenseMatrix};
use crate::loss::{grad_lifted, loss_lifted, FactorState, LiftedState, Mode, SdlProblem};

use super::lpgd::{lpgd_observed, LpgdConfig, LpgdObjective, LpgdPoint};
use super::report::SolverReport;

/// The lifted loss seen as a function of the stacked matrix and `Γ`.
pub struct LiftedObjective<'a> {
    prob: &'a SdlProblem,
}

impl<'a> LiftedObjective<'a> {
    pub fn new(prob: &'a SdlProblem) -> Self {
        LiftedObjective { prob }
    }

    pub fn to_point(&self, z: &LiftedState) -> LpgdPoint {
        LpgdPoint::new(z.stacked(self.prob.mode), z.gamma.clone())
    }

    pub fn to_state(&self, z: &LpgdPoint) -> LiftedState {
        LiftedState::from_stacked(self.prob.mode, &z.matrix, self.prob.kappa, z.aux.clone())
    }
}

impl LpgdObjective for LiftedObjective<'_> {
    fn value(&self, z: &LpgdPoint) -> Result<f64> {
        loss_lifted(self.prob, &self.to_state(z))
    }

    fn grad(&self, z: &LpgdPoint) -> Result<LpgdPoint> {
        Ok(self.to_point(&grad_lifted(self.prob, &self.to_state(z))?))
    }
}

/// Split a lifted point into factors via the rank-r SVD of the stack.
///
/// Filter: `W = UΣ^{1/2}`, `[β, H] = Σ^{1/2}Vᵀ`.
/// Feature: `[βᵀ; W] = UΣ^{1/2}`, `H = Σ^{1/2}Vᵀ`.
/// Returns the factors and whether the stack had fewer than `r` nonzero
/// singular values (the missing directions come back as zero columns).
pub fn recover_factors(mode: Mode, z: &LiftedState, rank: usize) -> Result<(FactorState, bool)> {
    let stack = z.stacked(mode);
    let kappa = match mode {
        Mode::Filter => z.a.cols(),
        Mode::Feature => z.a.rows(),
    };
    let svd = svd_full(&stack)?;
    let k = svd.sigma.len();
    let smax = svd.sigma.first().copied().unwrap_or(0.0);
    let tol = smax * 1e-13 * stack.rows().max(stack.cols()) as f64;
    let deficient = (0..rank).any(|i| i >= k || svd.sigma[i] <= tol);
    let left = DenseMatrix::from_fn(stack.rows(), rank, |i, j| {
        if j < k {
            svd.u.get(i, j) * svd.sigma[j].sqrt()
        } else {
            0.0
        }
    });
    let right = DenseMatrix::from_fn(rank, stack.cols(), |i, j| {
        if i < k {
            svd.sigma[i].sqrt() * svd.v.get(j, i)
        } else {
            0.0
        }
    });
    let f = match mode {
        Mode::Filter => FactorState {
            w: left,
            beta: right.cols_range(0, kappa),
            h: right.cols_range(kappa, stack.cols()),
            gamma: z.gamma.clone(),
        },
        Mode::Feature => FactorState {
            beta: left.rows_range(0, kappa).transpose(),
            w: left.rows_range(kappa, stack.rows()),
            h: right,
            gamma: z.gamma.clone(),
        },
    };
    Ok((f, deficient))
}

fn run(
    prob: &SdlProblem,
    cfg: &LpgdConfig,
    init: &LiftedState,
    mode: Mode,
    observe: &mut dyn FnMut(usize, &LiftedState),
) -> Result<(FactorState, LiftedState, SolverReport)> {
    if prob.mode != mode {
        return Err(SdlError::argument(format!("solver expects {mode:?} mode, problem is {:?}", prob.mode)));
    }
    init.check_shapes(prob)?;
    let mut cfg = *cfg;
    cfg.theta = prob.lifted.matrix;
    cfg.theta_aux = prob.lifted.aux;
    let obj = LiftedObjective::new(prob);
    let (z, mut report) =
        lpgd_observed(&obj, &cfg, &obj.to_point(init), &mut |t, p| observe(t, &obj.to_state(p)))?;
    let lifted = obj.to_state(&z);
    let (factors, deficient) = recover_factors(mode, &lifted, cfg.rank)?;
    if deficient {
        report.flags.push("rank_deficient".to_string());
    }
    report.final_factors = Some(factors.clone());
    report.final_lifted = Some(lifted.clone());
    Ok((factors, lifted, report))
}

/// LPGD on the filter-based lifted loss over `[A, B]`.
pub fn sdl_conv_filt(prob: &SdlProblem, cfg: &LpgdConfig, init: &LiftedState) -> Result<(FactorState, LiftedState, SolverReport)> {
    run(prob, cfg, init, Mode::Filter, &mut |_, _| {})
}

/// LPGD on the feature-based lifted loss over `[A; B]`.
pub fn sdl_conv_feat(prob: &SdlProblem, cfg: &LpgdConfig, init: &LiftedState) -> Result<(FactorState, LiftedState, SolverReport)> {
    run(prob, cfg, init, Mode::Feature, &mut |_, _| {})
}

/// Either lifted solver (picked by the problem's mode) with an iterate observer.
pub fn sdl_conv_observed(
    prob: &SdlProblem,
    cfg: &LpgdConfig,
    init: &LiftedState,
    observe: &mut dyn FnMut(usize, &LiftedState),
) -> Result<(FactorState, LiftedState, SolverReport)> {
    run(prob, cfg, init, prob.mode, observe)
}
