//! Estimation pipelines for the generative models.

use serde::{Deserialize, Serialize};

use crate::error::{Result, SdlError};
use crate::linalg::{ConstraintSpec, DenseMatrix};
use crate::loss::separate::{k_matrix, nll_sum};
use crate::loss::{activations, BlockConstraints, FactorState, LiftedState, Mode, SdlProblem};
use crate::solvers::{
    block_coordinate_descent, default_tau, init_block, sdl_conv_observed, BcdConfig, BlockObjective,
    ConditioningReport, LpgdConfig, SolverReport,
};

use super::models::{SimulatedData, Variant};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeakEstimateConfig {
    pub sigma: f64,
    pub nu: f64,
    pub rank: usize,
    pub kappa: usize,
    /// Iteration budget; `None` means `ceil(iter_factor · ln n)`.
    pub iters: Option<usize>,
    pub iter_factor: f64,
    /// Activation bound used for the conditioning constants.
    pub m_bound: f64,
    /// Fixed stepsize overriding the conditioning choice.
    pub tau: Option<f64>,
}

impl WeakEstimateConfig {
    pub fn new(sigma: f64, nu: f64, rank: usize, kappa: usize) -> Self {
        WeakEstimateConfig { sigma, nu, rank, kappa, iters: None, iter_factor: 10.0, m_bound: 1.0, tau: None }
    }
}

#[derive(Debug, Clone)]
pub struct WeakEstimate {
    pub lifted: LiftedState,
    pub factors: FactorState,
    pub conditioning: ConditioningReport,
    pub tau: f64,
    pub iters: usize,
}

/// `ξ = 1/(2σ²)`.
pub fn xi_from_sigma(sigma: f64) -> Result<f64> {
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(SdlError::argument(format!("sigma must be positive, got {sigma}")));
    }
    Ok(1.0 / (2.0 * sigma * sigma))
}

/// Lifted-solver estimate of `[A*, B*, Γ*]` with `ξ = 1/(2σ²)`.
///
/// The stepsize defaults to [`default_tau`].
pub fn estimate_weak(variant: Variant, data: &SimulatedData, cfg: &WeakEstimateConfig) -> Result<(WeakEstimate, SolverReport)> {
    let mode = match variant {
        Variant::WeakFilter => Mode::Filter,
        Variant::WeakFeature => Mode::Feature,
        Variant::StrongFilter => return Err(SdlError::argument("estimate_weak needs a weak model variant")),
    };
    let xi = xi_from_sigma(cfg.sigma)?;
    let aux = (data.x_aux.rows() > 0).then(|| data.x_aux.clone());
    let prob = SdlProblem::new(data.x_data.clone(), aux, data.labels.clone(), cfg.kappa, cfg.rank, xi, cfg.nu, mode)?;
    let (auto_tau, cond) = default_tau(&prob, cfg.m_bound)?;
    let tau = cfg.tau.unwrap_or(auto_tau);
    let n = prob.n() as f64;
    let iters = cfg.iters.unwrap_or_else(|| (cfg.iter_factor * n.ln()).ceil().max(1.0) as usize);
    let lp = LpgdConfig::new(tau, iters, cfg.rank);
    let (factors, lifted, report) = sdl_conv_observed(&prob, &lp, &LiftedState::zeros(&prob), &mut |_, _| {})?;
    Ok((WeakEstimate { lifted, factors, conditioning: cond, tau, iters }, report))
}

/// Regularized likelihood of the strong filter model with the code shared
/// by all samples. Blocks are `W, β, Γ, h` in that order.
///
/// `Σᵢ‖xᵢ − Wh‖² = n‖x̄ − Wh‖² + Σᵢ‖xᵢ − x̄‖²`, so only the mean enters the
/// gradients.
pub struct StrongObjective {
    prob: SdlProblem,
    xbar: DenseMatrix,
    spread: f64,
    lambda_sq: f64,
    constraints: BlockConstraints,
}

impl StrongObjective {
    pub fn new(data: &SimulatedData, kappa: usize, rank: usize, xi: f64, nu: f64, constraints: BlockConstraints) -> Result<Self> {
        let aux = (data.x_aux.rows() > 0).then(|| data.x_aux.clone());
        let prob = SdlProblem::new(data.x_data.clone(), aux, data.labels.clone(), kappa, rank, xi, nu, Mode::Filter)?;
        let xbar = DenseMatrix::column(&data.x_data.col_mean());
        let mut spread = 0.0;
        for s in 0..prob.n() {
            for i in 0..prob.p() {
                spread += (data.x_data.get(i, s) - xbar.get(i, 0)).powi(2);
            }
        }
        let lambda_sq = data.x_aux.col_mean().iter().map(|v| v * v).sum();
        Ok(StrongObjective { prob, xbar, spread, lambda_sq, constraints })
    }

    fn n(&self) -> f64 {
        self.prob.n() as f64
    }

    fn act(&self, blocks: &[DenseMatrix]) -> DenseMatrix {
        let st = FactorState {
            w: blocks[0].clone(),
            beta: blocks[1].clone(),
            gamma: blocks[2].clone(),
            h: DenseMatrix::zeros(self.prob.r(), self.prob.n()),
        };
        activations(&self.prob, &st)
    }

    fn resid(&self, blocks: &[DenseMatrix]) -> DenseMatrix {
        &self.xbar - &blocks[0].matmul(&blocks[3])
    }
}

impl BlockObjective for StrongObjective {
    fn num_blocks(&self) -> usize {
        4
    }

    fn value(&self, blocks: &[DenseMatrix]) -> Result<f64> {
        let n = self.n();
        let nll = nll_sum(&self.prob, &self.act(blocks))?;
        let recon = self.prob.xi * (n * self.resid(blocks).frobenius_norm_sq() + self.spread);
        let reg = n
            * self.prob.nu
            * (blocks[0].frobenius_norm_sq() + blocks[3].frobenius_norm_sq() + self.lambda_sq + blocks[2].frobenius_norm_sq());
        Ok(nll + recon + reg)
    }

    fn grad(&self, blocks: &[DenseMatrix], i: usize) -> Result<DenseMatrix> {
        let n = self.n();
        let (xi, nu) = (self.prob.xi, self.prob.nu);
        let needs_k = i != 3;
        let k = if needs_k { Some(k_matrix(&self.prob, &self.act(blocks))?) } else { None };
        Ok(match i {
            0 => {
                let k = k.unwrap();
                let mut g = self.prob.x_data.matmul_t(&k).matmul_t(&blocks[1]);
                g.axpy(-2.0 * xi * n, &self.resid(blocks).matmul_t(&blocks[3]));
                g.axpy(2.0 * n * nu, &blocks[0]);
                g
            }
            1 => blocks[0].t_matmul(&self.prob.x_data.matmul_t(&k.unwrap())),
            2 => {
                let mut g = self.prob.x_aux.matmul_t(&k.unwrap());
                g.axpy(2.0 * n * nu, &blocks[2]);
                g
            }
            _ => {
                let mut g = blocks[0].t_matmul(&self.resid(blocks)).scale(-2.0 * xi * n);
                g.axpy(2.0 * n * nu, &blocks[3]);
                g
            }
        })
    }

    fn constraint(&self, i: usize) -> ConstraintSpec {
        let c = &self.constraints;
        [c.dict, c.beta, c.aux, c.code][i]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StrongEstimateConfig {
    pub sigma: f64,
    pub nu: f64,
    pub rank: usize,
    pub kappa: usize,
    pub bcd: BcdConfig,
    pub constraints: BlockConstraints,
    pub seed: u64,
}

impl StrongEstimateConfig {
    pub fn new(sigma: f64, nu: f64, rank: usize, kappa: usize) -> Self {
        StrongEstimateConfig {
            sigma,
            nu,
            rank,
            kappa,
            bcd: BcdConfig { iters: 300, ..Default::default() },
            constraints: BlockConstraints::default(),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StrongEstimate {
    /// `h` is `r×1`.
    pub factors: FactorState,
    pub lambda: Vec<f64>,
}

impl StrongEstimate {
    pub fn wh(&self) -> DenseMatrix {
        self.factors.w.matmul(&self.factors.h)
    }
}

/// BCD-DR on the strong-model likelihood; `λ̂` is the auxiliary sample mean.
pub fn estimate_strong(data: &SimulatedData, cfg: &StrongEstimateConfig) -> Result<(StrongEstimate, SolverReport)> {
    use rand::SeedableRng;
    let xi = xi_from_sigma(cfg.sigma)?;
    let obj = StrongObjective::new(data, cfg.kappa, cfg.rank, xi, cfg.nu, cfg.constraints)?;
    let (p, q, r) = (data.x_data.rows(), data.x_aux.rows(), cfg.rank);
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(cfg.seed);
    let c = &cfg.constraints;
    let init = vec![
        init_block(&mut rng, p, r, &c.dict),
        init_block(&mut rng, r, cfg.kappa, &c.beta),
        init_block(&mut rng, q, cfg.kappa, &c.aux),
        init_block(&mut rng, r, 1, &c.code),
    ];
    let (blocks, mut report) = block_coordinate_descent(&obj, &cfg.bcd, &init)?;
    let factors = FactorState { w: blocks[0].clone(), beta: blocks[1].clone(), gamma: blocks[2].clone(), h: blocks[3].clone() };
    report.final_factors = Some(factors.clone());
    Ok((StrongEstimate { factors, lambda: data.x_aux.col_mean() }, report))
}
