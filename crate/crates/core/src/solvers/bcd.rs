//! Block coordinate descent with diminishing radius.

use serde::{Deserialize, Serialize};

use crate::error::{Result, SdlError};
use crate::linalg::{ConstraintSpec, DenseMatrix};
use crate::loss::{grad_block, loss_separate, Block, FactorState, SdlProblem};

use super::diagnostics::epsilon_stationarity;
use super::report::{BlockMove, SolverReport, Termination};

const ARMIJO_C: f64 = 1e-4;
const MAX_HALVINGS: usize = 60;
const PROJECTION_ROUNDS: usize = 10;
const MAX_STEP: f64 = 1e8;

/// Objective split into blocks, each with its own convex constraint set and
/// an optional `λ‖·‖₁` penalty handled by soft-thresholding.
pub trait BlockObjective {
    fn num_blocks(&self) -> usize;
    /// Full objective, penalties included.
    fn value(&self, blocks: &[DenseMatrix]) -> Result<f64>;
    /// Gradient of the smooth part with respect to block `i`.
    fn grad(&self, blocks: &[DenseMatrix], i: usize) -> Result<DenseMatrix>;
    fn constraint(&self, i: usize) -> ConstraintSpec;
    fn l1(&self, _i: usize) -> f64 {
        0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RadiusSchedule {
    /// `r_k = min(1, 1/(√k·ln(k+1)))`
    #[default]
    InvSqrtLog,
    Constant { radius: f64 },
}

impl RadiusSchedule {
    pub fn radius(&self, k: usize) -> f64 {
        match *self {
            RadiusSchedule::InvSqrtLog => {
                let kf = k.max(1) as f64;
                (1.0 / (kf.sqrt() * (kf + 1.0).ln())).min(1.0)
            }
            RadiusSchedule::Constant { radius } => radius,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let RadiusSchedule::Constant { radius } = *self {
            if !(radius > 0.0 && radius <= 1.0) {
                return Err(SdlError::argument(format!("radius must lie in (0, 1], got {radius}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SubStep {
    #[default]
    Backtracking,
    Fixed { step: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BcdConfig {
    pub iters: usize,
    #[serde(default)]
    pub radius_schedule: RadiusSchedule,
    pub sub_iters: usize,
    #[serde(default)]
    pub sub_step: SubStep,
    #[serde(default)]
    pub tol_eps: Option<f64>,
}

impl Default for BcdConfig {
    fn default() -> Self {
        BcdConfig {
            iters: 100,
            radius_schedule: RadiusSchedule::InvSqrtLog,
            sub_iters: 5,
            sub_step: SubStep::Backtracking,
            tol_eps: None,
        }
    }
}

impl BcdConfig {
    pub fn validate(&self) -> Result<()> {
        if self.iters == 0 || self.sub_iters == 0 {
            return Err(SdlError::argument("iteration counts must be at least 1"));
        }
        if let SubStep::Fixed { step } = self.sub_step {
            if !(step > 0.0) || !step.is_finite() {
                return Err(SdlError::argument(format!("fixed sub-step must be positive, got {step}")));
            }
        }
        self.radius_schedule.validate()
    }
}

pub fn soft_threshold(m: &DenseMatrix, t: f64) -> DenseMatrix {
    m.map(|v| v.signum() * (v.abs() - t).max(0.0))
}

/// Point of `C ∩ {‖y − anchor‖ ≤ radius}` reached by alternating projections.
/// The anchor must lie in `C`; the final pull toward it keeps both
/// memberships by convexity.
pub fn project_with_radius(c: &ConstraintSpec, y: &DenseMatrix, anchor: &DenseMatrix, radius: f64) -> DenseMatrix {
    let into_ball = |m: &DenseMatrix| {
        let d = m - anchor;
        let nd = d.frobenius_norm();
        if nd > radius {
            anchor + &d.scale(radius / nd)
        } else {
            m.clone()
        }
    };
    let mut cur = y.clone();
    for _ in 0..PROJECTION_ROUNDS {
        cur = into_ball(&c.project(&cur));
    }
    into_ball(&c.project(&cur))
}

/// Min-norm element of `∇f + λ∂‖x‖₁`, entrywise.
fn composite_grad(g: &DenseMatrix, x: &DenseMatrix, lambda: f64) -> DenseMatrix {
    if lambda == 0.0 {
        return g.clone();
    }
    let mut out = g.clone();
    for (o, xi) in out.data_mut().iter_mut().zip(x.data()) {
        if *xi != 0.0 {
            *o += lambda * xi.signum();
        } else {
            *o = o.signum() * (o.abs() - lambda).max(0.0);
        }
    }
    out
}

/// Stationarity of the block objective over the product of block sets.
pub fn block_stationarity(obj: &dyn BlockObjective, blocks: &[DenseMatrix]) -> Result<f64> {
    let mut total = 0.0;
    for i in 0..obj.num_blocks() {
        let g = composite_grad(&obj.grad(blocks, i)?, &blocks[i], obj.l1(i));
        total += epsilon_stationarity(&g, &blocks[i], &obj.constraint(i)).powi(2);
    }
    Ok(total.sqrt())
}

/// Block gradient mapping at unit step, for the trace.
fn block_grad_mapping(obj: &dyn BlockObjective, blocks: &[DenseMatrix]) -> Result<f64> {
    let mut total = 0.0;
    for i in 0..obj.num_blocks() {
        let g = obj.grad(blocks, i)?;
        let y = soft_threshold(&(&blocks[i] - &g), obj.l1(i));
        total += (&blocks[i] - &obj.constraint(i).project(&y)).frobenius_norm_sq();
    }
    Ok(total.sqrt())
}

/// Runs the outer loop over blocks in index order.
pub fn block_coordinate_descent(
    obj: &dyn BlockObjective,
    cfg: &BcdConfig,
    init: &[DenseMatrix],
) -> Result<(Vec<DenseMatrix>, SolverReport)> {
    cfg.validate()?;
    if init.len() != obj.num_blocks() {
        return Err(SdlError::argument("initial point has the wrong number of blocks"));
    }
    for (i, b) in init.iter().enumerate() {
        if !obj.constraint(i).contains(b, 1e-9) {
            return Err(SdlError::argument(format!("initial block {i} is infeasible")));
        }
    }
    let mut report = SolverReport::started();
    let mut blocks = init.to_vec();
    let mut loss = finite(obj.value(&blocks)?)?;
    let stat = block_stationarity(obj, &blocks)?;
    report.push(0, loss, stat, block_grad_mapping(obj, &blocks)?);
    let mut steps = vec![1.0; obj.num_blocks()];
    for k in 1..=cfg.iters {
        let radius = cfg.radius_schedule.radius(k);
        for i in 0..obj.num_blocks() {
            let anchor = blocks[i].clone();
            loss = update_block(obj, cfg, &mut blocks, i, &anchor, radius, loss, &mut steps[i])?;
            report.moves.push(BlockMove {
                iter: k,
                block: i,
                step: (&blocks[i] - &anchor).frobenius_norm(),
                radius,
                loss,
            });
        }
        let stat = block_stationarity(obj, &blocks)?;
        report.push(k, loss, stat, block_grad_mapping(obj, &blocks)?);
        if cfg.tol_eps.is_some_and(|eps| stat <= eps.sqrt()) {
            report.termination = Termination::Stationary;
            break;
        }
    }
    Ok((blocks, report))
}

#[allow(clippy::too_many_arguments)]
fn update_block(
    obj: &dyn BlockObjective,
    cfg: &BcdConfig,
    blocks: &mut [DenseMatrix],
    i: usize,
    anchor: &DenseMatrix,
    radius: f64,
    mut loss: f64,
    last_step: &mut f64,
) -> Result<f64> {
    let c = obj.constraint(i);
    let lambda = obj.l1(i);
    for _ in 0..cfg.sub_iters {
        let x = blocks[i].clone();
        let g = obj.grad(blocks, i)?;
        if g.frobenius_norm() == 0.0 && lambda == 0.0 {
            break;
        }
        let trial = |s: f64, blocks: &mut [DenseMatrix]| -> Result<(DenseMatrix, f64)> {
            let y = soft_threshold(&(&x - &g.scale(s)), s * lambda);
            let y = project_with_radius(&c, &y, anchor, radius);
            blocks[i] = y.clone();
            let v = obj.value(blocks);
            blocks[i] = x.clone();
            Ok((y, v?))
        };
        let accepted = match cfg.sub_step {
            SubStep::Fixed { step } => {
                let (y, v) = trial(step, blocks)?;
                (v.is_finite() && v <= loss).then_some((y, v))
            }
            SubStep::Backtracking => {
                let mut s = 2.0 * *last_step;
                let mut found = None;
                for _ in 0..MAX_HALVINGS {
                    let (y, v) = trial(s, blocks)?;
                    let moved = (&y - &x).frobenius_norm_sq();
                    if moved == 0.0 {
                        break;
                    }
                    if v.is_finite() && v <= loss - ARMIJO_C / s * moved {
                        *last_step = s.min(MAX_STEP);
                        found = Some((y, v));
                        break;
                    }
                    s *= 0.5;
                }
                found
            }
        };
        match accepted {
            Some((y, v)) => {
                blocks[i] = y;
                loss = v;
            }
            None => break,
        }
    }
    Ok(loss)
}

fn finite(v: f64) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(SdlError::numeric("non-finite objective at the initial point"))
    }
}

/// The SDL loss with block order `W, β, Γ, H`.
pub struct SdlBlocks<'a> {
    prob: &'a SdlProblem,
}

pub const SDL_BLOCK_ORDER: [Block; 4] = [Block::W, Block::Beta, Block::Gamma, Block::H];

impl<'a> SdlBlocks<'a> {
    pub fn new(prob: &'a SdlProblem) -> Self {
        SdlBlocks { prob }
    }

    pub fn split(st: &FactorState) -> Vec<DenseMatrix> {
        vec![st.w.clone(), st.beta.clone(), st.gamma.clone(), st.h.clone()]
    }

    pub fn join(blocks: &[DenseMatrix]) -> FactorState {
        FactorState { w: blocks[0].clone(), beta: blocks[1].clone(), gamma: blocks[2].clone(), h: blocks[3].clone() }
    }
}

impl BlockObjective for SdlBlocks<'_> {
    fn num_blocks(&self) -> usize {
        4
    }

    fn value(&self, blocks: &[DenseMatrix]) -> Result<f64> {
        let v = loss_separate(self.prob, &Self::join(blocks))?;
        Ok(v + self.prob.l1_code * blocks[3].data().iter().map(|x| x.abs()).sum::<f64>())
    }

    fn grad(&self, blocks: &[DenseMatrix], i: usize) -> Result<DenseMatrix> {
        grad_block(self.prob, &Self::join(blocks), SDL_BLOCK_ORDER[i])
    }

    fn constraint(&self, i: usize) -> ConstraintSpec {
        let c = &self.prob.constraints;
        match SDL_BLOCK_ORDER[i] {
            Block::W => c.dict,
            Block::Beta => c.beta,
            Block::Gamma => c.aux,
            Block::H => c.code,
        }
    }

    fn l1(&self, i: usize) -> f64 {
        if SDL_BLOCK_ORDER[i] == Block::H {
            self.prob.l1_code
        } else {
            0.0
        }
    }
}

/// BCD-DR on the separate-variable SDL loss.
pub fn bcd_dr(prob: &SdlProblem, cfg: &BcdConfig, init: &FactorState) -> Result<(FactorState, SolverReport)> {
    init.check_shapes(prob)?;
    let obj = SdlBlocks::new(prob);
    let (blocks, mut report) = block_coordinate_descent(&obj, cfg, &SdlBlocks::split(init))?;
    let out = SdlBlocks::join(&blocks);
    report.final_factors = Some(out.clone());
    Ok((out, report))
}
