//! Low-rank projected gradient descent.

use serde::{Deserialize, Serialize};

use crate::error::{Result, SdlError};
use crate::linalg::{rank_r_project, ConstraintSpec, DenseMatrix};

use super::diagnostics::{epsilon_stationarity_blocks, gradient_mapping};
use super::report::{SolverReport, Termination};

/// Iterate `[matrix, aux]`. Only `matrix` is rank-projected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LpgdPoint {
    pub matrix: DenseMatrix,
    pub aux: DenseMatrix,
}

impl LpgdPoint {
    pub fn new(matrix: DenseMatrix, aux: DenseMatrix) -> Self {
        LpgdPoint { matrix, aux }
    }

    pub fn distance(&self, other: &LpgdPoint) -> f64 {
        ((&self.matrix - &other.matrix).frobenius_norm_sq() + (&self.aux - &other.aux).frobenius_norm_sq()).sqrt()
    }
}

/// Smooth objective over `[matrix, aux]`.
pub trait LpgdObjective {
    fn value(&self, z: &LpgdPoint) -> Result<f64>;
    fn grad(&self, z: &LpgdPoint) -> Result<LpgdPoint>;
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LpgdConfig {
    pub tau: f64,
    pub iters: usize,
    pub rank: usize,
    /// Constraint on the matrix coordinate.
    #[serde(default)]
    pub theta: ConstraintSpec,
    /// Constraint on the auxiliary coordinate.
    #[serde(default)]
    pub theta_aux: ConstraintSpec,
    /// Stop early once the stationarity measure drops to `√ε`.
    #[serde(default)]
    pub tol_eps: Option<f64>,
}

impl LpgdConfig {
    pub fn new(tau: f64, iters: usize, rank: usize) -> Self {
        LpgdConfig {
            tau,
            iters,
            rank,
            theta: ConstraintSpec::Unbounded,
            theta_aux: ConstraintSpec::Unbounded,
            tol_eps: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0) || !self.tau.is_finite() {
            return Err(SdlError::argument(format!("stepsize must be positive, got {}", self.tau)));
        }
        if self.iters == 0 {
            return Err(SdlError::argument("iteration budget must be at least 1"));
        }
        if self.rank == 0 {
            return Err(SdlError::argument("rank must be at least 1"));
        }
        self.theta.validate()?;
        self.theta_aux.validate()
    }
}

/// `Π_r` on the matrix coordinate; a no-op when `r` covers the full rank.
pub fn rank_project_point(m: &DenseMatrix, r: usize) -> Result<DenseMatrix> {
    if r >= m.rows().min(m.cols()) {
        Ok(m.clone())
    } else {
        rank_r_project(m, r)
    }
}

fn measure(cfg: &LpgdConfig, z: &LpgdPoint, g: &LpgdPoint) -> (f64, f64) {
    let stat = epsilon_stationarity_blocks(&[(&g.matrix, &z.matrix, &cfg.theta), (&g.aux, &z.aux, &cfg.theta_aux)]);
    let gm = gradient_mapping(&g.matrix, &z.matrix, cfg.tau, &cfg.theta).frobenius_norm_sq()
        + gradient_mapping(&g.aux, &z.aux, cfg.tau, &cfg.theta_aux).frobenius_norm_sq();
    (stat, gm.sqrt())
}

pub fn lpgd(f: &dyn LpgdObjective, cfg: &LpgdConfig, z0: &LpgdPoint) -> Result<(LpgdPoint, SolverReport)> {
    lpgd_observed(f, cfg, z0, &mut |_, _| {})
}

/// As [`lpgd`], calling `observe(t, Z_t)` for `t = 0..=N`.
pub fn lpgd_observed(
    f: &dyn LpgdObjective,
    cfg: &LpgdConfig,
    z0: &LpgdPoint,
    observe: &mut dyn FnMut(usize, &LpgdPoint),
) -> Result<(LpgdPoint, SolverReport)> {
    cfg.validate()?;
    if !cfg.theta.contains(&z0.matrix, 1e-9) || !cfg.theta_aux.contains(&z0.aux, 1e-9) {
        return Err(SdlError::argument("initial point is not feasible"));
    }
    let mut report = SolverReport::started();
    let mut z = z0.clone();
    let mut g = f.grad(&z)?;
    let (stat, gm) = measure(cfg, &z, &g);
    report.push(0, checked(f.value(&z)?, 0)?, stat, gm);
    observe(0, &z);
    for t in 1..=cfg.iters {
        let step_m = &z.matrix - &g.matrix.scale(cfg.tau);
        let step_a = &z.aux - &g.aux.scale(cfg.tau);
        z = LpgdPoint {
            matrix: rank_project_point(&cfg.theta.project(&step_m), cfg.rank)?,
            aux: cfg.theta_aux.project(&step_a),
        };
        g = f.grad(&z)?;
        let loss = checked(f.value(&z)?, t)?;
        let (stat, gm) = measure(cfg, &z, &g);
        report.push(t, loss, stat, gm);
        observe(t, &z);
        if cfg.tol_eps.is_some_and(|eps| stat <= eps.sqrt()) {
            report.termination = Termination::Stationary;
            break;
        }
    }
    Ok((z, report))
}

fn checked(loss: f64, t: usize) -> Result<f64> {
    if loss.is_finite() {
        Ok(loss)
    } else {
        Err(SdlError::numeric(format!("non-finite loss at iteration {t}")))
    }
}
