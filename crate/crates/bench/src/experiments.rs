//! Experiment runners behind `bench-pareto`, `bench-curves` and
//! `consistency`. Seed replicates run on the rayon pool; results are merged
//! in replicate order so outputs do not depend on scheduling.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use sdl_core::generative::{
    estimate_strong, estimate_weak, random_strong_params, random_weak_params, sample, Dims, StrongEstimateConfig,
    Truth, Variant, WeakEstimateConfig,
};
use sdl_core::linalg::io::fmt_f64;
use sdl_core::loss::{BlockConstraints, FactorState, LiftedState, Mode, SdlProblem};
use sdl_core::metrics::{classification_metrics, relative_recon};
use sdl_core::solvers::{
    bcd_dr, default_tau, init_factors, predict_batch, sdl_conv_observed, BcdConfig, LpgdConfig, RadiusSchedule,
    SolverReport,
};
use sdl_core::{ConstraintSpec, DenseMatrix, Result, SdlError};

use crate::baselines::{fit_logistic, nmf_encode, nmf_hals, LogisticConfig};

/// Derived seed of replicate `i`.
pub fn replicate_seed(seed: u64, i: usize) -> u64 {
    seed ^ i as u64
}

/// Labelled data with optional auxiliary covariates.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub x: DenseMatrix,
    /// `q×n`, `q = 0` when absent.
    pub aux: DenseMatrix,
    pub labels: Vec<usize>,
    pub kappa: usize,
}

impl Dataset {
    pub fn new(x: DenseMatrix, aux: Option<DenseMatrix>, labels: Vec<usize>, kappa: Option<usize>) -> Result<Self> {
        let n = x.cols();
        let aux = aux.unwrap_or_else(|| DenseMatrix::zeros(0, n));
        if aux.cols() != n || labels.len() != n {
            return Err(SdlError::argument(format!(
                "data has {n} samples but aux has {} and labels {}",
                aux.cols(),
                labels.len()
            )));
        }
        let max_label = labels.iter().copied().max().unwrap_or(0);
        let kappa = kappa.unwrap_or(max_label.max(1));
        if max_label > kappa {
            return Err(SdlError::argument(format!("label {max_label} exceeds kappa {kappa}")));
        }
        Ok(Dataset { x, aux, labels, kappa })
    }

    pub fn n(&self) -> usize {
        self.x.cols()
    }

    pub fn select(&self, idx: &[usize]) -> Dataset {
        Dataset {
            x: self.x.select_cols(idx),
            aux: self.aux.select_cols(idx),
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
            kappa: self.kappa,
        }
    }

    /// Seeded shuffle split; the first `frac` share goes to training.
    pub fn split(&self, frac: f64, seed: u64) -> Result<(Dataset, Dataset)> {
        let n = self.n();
        let n_train = (frac * n as f64).round() as usize;
        if n_train == 0 || n_train >= n {
            return Err(SdlError::argument(format!("split fraction {frac} leaves an empty part of {n} samples")));
        }
        let mut idx: Vec<usize> = (0..n).collect();
        idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        Ok((self.select(&idx[..n_train]), self.select(&idx[n_train..])))
    }

    fn aux_opt(&self) -> Option<DenseMatrix> {
        (self.aux.rows() > 0).then(|| self.aux.clone())
    }

    fn positive(&self) -> Option<usize> {
        (self.kappa == 1).then_some(1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Lr,
    NmfLr,
    SdlFilt,
    SdlFeat,
    SdlConvFilt,
    SdlConvFeat,
}

impl Method {
    pub fn tag(&self) -> &'static str {
        match self {
            Method::Lr => "lr",
            Method::NmfLr => "nmf-lr",
            Method::SdlFilt => "sdl-filt",
            Method::SdlFeat => "sdl-feat",
            Method::SdlConvFilt => "sdl-conv-filt",
            Method::SdlConvFeat => "sdl-conv-feat",
        }
    }

    fn uses_xi(&self) -> bool {
        !matches!(self, Method::Lr | Method::NmfLr)
    }
}

/// Settings of the Pareto sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ParetoConfig {
    pub methods: Vec<Method>,
    pub xi_grid: Vec<f64>,
    pub seeds: usize,
    pub train_frac: f64,
    pub rank: usize,
    /// `ν` for the block solvers.
    pub nu: f64,
    /// `ν` for the lifted solvers.
    pub nu_conv: f64,
    pub iters: usize,
    pub sub_iters: usize,
    pub radius_schedule: RadiusSchedule,
    /// Nonnegative `W` and `H` for the block solvers.
    pub nonneg: bool,
    /// Block solvers start with `β` entries drawn from `U[0, beta_init)`.
    pub beta_init: Option<f64>,
    /// Fixed lifted stepsize; chosen from the conditioning report when unset.
    pub tau: Option<f64>,
    pub m_bound: f64,
    pub nmf_iters: usize,
    pub lr_ridge: f64,
    pub lr_iters: usize,
}

impl Default for ParetoConfig {
    fn default() -> Self {
        ParetoConfig {
            methods: vec![Method::Lr, Method::NmfLr, Method::SdlFilt, Method::SdlFeat],
            xi_grid: vec![0.1, 1.0, 5.0, 10.0],
            seeds: 5,
            train_frac: 0.8,
            rank: 2,
            nu: 0.0,
            nu_conv: 2.0,
            iters: 200,
            sub_iters: 2,
            radius_schedule: RadiusSchedule::Constant { radius: 1.0 },
            nonneg: true,
            beta_init: Some(10.0),
            tau: None,
            m_bound: 1.0,
            nmf_iters: 200,
            lr_ridge: 1.0,
            lr_iters: 300,
        }
    }
}

impl ParetoConfig {
    pub fn validate(&self) -> Result<()> {
        if self.methods.is_empty() || self.xi_grid.is_empty() || self.seeds == 0 {
            return Err(SdlError::argument("pareto sweep needs methods, a xi grid and at least one seed"));
        }
        if self.xi_grid.iter().any(|&x| !(x >= 0.0) || !x.is_finite()) {
            return Err(SdlError::argument("xi values must be finite and nonnegative"));
        }
        if self.rank == 0 {
            return Err(SdlError::argument("rank must be at least 1"));
        }
        self.radius_schedule.validate()
    }

    fn bcd(&self) -> BcdConfig {
        BcdConfig {
            iters: self.iters,
            radius_schedule: self.radius_schedule,
            sub_iters: self.sub_iters,
            ..Default::default()
        }
    }

    fn lr(&self) -> LogisticConfig {
        LogisticConfig { ridge: self.lr_ridge, iters: self.lr_iters }
    }
}

/// One method/ξ evaluation on one replicate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation {
    pub recon_rel: f64,
    pub accuracy: f64,
    pub f_score: f64,
}

/// A row of `pareto.csv`: seed means and standard deviations.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParetoRow {
    pub method: Method,
    pub xi: f64,
    pub recon_rel: f64,
    pub accuracy: f64,
    pub f_score: f64,
    pub seed: u64,
    pub recon_rel_sd: f64,
    pub accuracy_sd: f64,
    pub f_score_sd: f64,
}

pub const PARETO_HEADER: &str = "method,xi,recon_rel,accuracy,f_score,seed,recon_rel_sd,accuracy_sd,f_score_sd";

pub fn pareto_csv(rows: &[ParetoRow]) -> String {
    let mut out = String::from(PARETO_HEADER);
    out.push('\n');
    for r in rows {
        let vals = [r.xi, r.recon_rel, r.accuracy, r.f_score];
        let vals: Vec<String> = vals.iter().map(|&v| fmt_f64(v)).collect();
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.method.tag(),
            vals.join(","),
            r.seed,
            fmt_f64(r.recon_rel_sd),
            fmt_f64(r.accuracy_sd),
            fmt_f64(r.f_score_sd)
        ));
    }
    out
}

/// Sample mean and (n−1) standard deviation; the deviation is 0 for one value.
pub fn mean_sd(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

fn evaluate_predictions(pred: &[usize], test: &Dataset, recon_rel: f64) -> Result<Evaluation> {
    let m = classification_metrics(pred, &test.labels, test.positive())?;
    Ok(Evaluation { recon_rel, accuracy: m.accuracy, f_score: m.f_score })
}

fn sdl_problem(train: &Dataset, method: Method, xi: f64, cfg: &ParetoConfig) -> Result<SdlProblem> {
    let (mode, nu) = match method {
        Method::SdlFilt => (Mode::Filter, cfg.nu),
        Method::SdlFeat => (Mode::Feature, cfg.nu),
        Method::SdlConvFilt => (Mode::Filter, cfg.nu_conv),
        Method::SdlConvFeat => (Mode::Feature, cfg.nu_conv),
        _ => return Err(SdlError::argument("baseline is not an SDL method")),
    };
    let prob = SdlProblem::new(train.x.clone(), train.aux_opt(), train.labels.clone(), train.kappa, cfg.rank, xi, nu, mode)?;
    if cfg.nonneg && matches!(method, Method::SdlFilt | Method::SdlFeat) {
        prob.with_constraints(BlockConstraints {
            dict: ConstraintSpec::NonnegOrthant,
            code: ConstraintSpec::NonnegOrthant,
            ..Default::default()
        })
    } else {
        Ok(prob)
    }
}

/// [`init_factors`] with an optional wider draw for `β`.
///
/// With the default tenth-scale `β` the block solver tends to settle in the
/// unsupervised NMF-like minimum: the classifier cannot use an atom that
/// still carries reconstructive mass, and the reconstruction term clears the
/// discriminative pixels before `β` has grown.
pub fn initial_factors(prob: &SdlProblem, seed: u64, beta_init: Option<f64>) -> Result<FactorState> {
    let mut st = init_factors(prob, seed)?;
    if let Some(b) = beta_init {
        if !(b > 0.0) || !b.is_finite() {
            return Err(SdlError::argument(format!("beta_init must be positive, got {b}")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ BETA_STREAM);
        let beta = DenseMatrix::from_fn(st.beta.rows(), st.beta.cols(), |_, _| b * rng.random::<f64>());
        st.beta = prob.constraints.beta.project(&beta);
    }
    Ok(st)
}

const BETA_STREAM: u64 = 0x9e37_79b9_7f4a_7c15;

/// Trains one SDL method on `train` and scores it on `test`.
pub fn evaluate_sdl(train: &Dataset, test: &Dataset, method: Method, xi: f64, cfg: &ParetoConfig, seed: u64) -> Result<Evaluation> {
    let prob = sdl_problem(train, method, xi, cfg)?;
    let factors = match method {
        Method::SdlFilt | Method::SdlFeat => bcd_dr(&prob, &cfg.bcd(), &initial_factors(&prob, seed, cfg.beta_init)?)?.0,
        _ => {
            let tau = match cfg.tau {
                Some(t) => t,
                None => default_tau(&prob, cfg.m_bound)?.0,
            };
            let lp = LpgdConfig::new(tau, cfg.iters, cfg.rank);
            sdl_conv_observed(&prob, &lp, &LiftedState::zeros(&prob), &mut |_, _| {})?.0
        }
    };
    let recon = relative_recon(&train.x, &factors.w, &factors.h)?;
    let pred = predict_batch(&prob, &factors, &test.x, &test.aux)?;
    evaluate_predictions(&pred, test, recon)
}

fn with_aux(features: DenseMatrix, aux: &DenseMatrix) -> DenseMatrix {
    if aux.rows() > 0 {
        features.vstack(aux)
    } else {
        features
    }
}

/// Logistic regression on the raw features; reconstruction error is 1 by
/// convention since nothing is reconstructed.
pub fn evaluate_lr(train: &Dataset, test: &Dataset, cfg: &ParetoConfig) -> Result<Evaluation> {
    let model = fit_logistic(&with_aux(train.x.clone(), &train.aux), &train.labels, train.kappa, &cfg.lr())?;
    let pred = model.predict(&with_aux(test.x.clone(), &test.aux))?;
    evaluate_predictions(&pred, test, 1.0)
}

/// NMF on the training inputs, then logistic regression on the codes.
pub fn evaluate_nmf_lr(train: &Dataset, test: &Dataset, cfg: &ParetoConfig, seed: u64) -> Result<Evaluation> {
    let fit = nmf_hals(&train.x, cfg.rank, cfg.nmf_iters, seed)?;
    let recon = relative_recon(&train.x, &fit.w, &fit.h)?;
    let model = fit_logistic(&with_aux(fit.h.clone(), &train.aux), &train.labels, train.kappa, &cfg.lr())?;
    let codes = nmf_encode(&fit.w, &test.x, cfg.nmf_iters);
    let pred = model.predict(&with_aux(codes, &test.aux))?;
    evaluate_predictions(&pred, test, recon)
}

/// All (method, ξ) evaluations of one replicate, in sweep order.
pub fn pareto_replicate(data: &Dataset, cfg: &ParetoConfig, seed: u64) -> Result<Vec<Evaluation>> {
    let (train, test) = data.split(cfg.train_frac, seed)?;
    let mut out = Vec::with_capacity(cfg.methods.len() * cfg.xi_grid.len());
    for &method in &cfg.methods {
        if method.uses_xi() {
            for &xi in &cfg.xi_grid {
                out.push(evaluate_sdl(&train, &test, method, xi, cfg, seed)?);
            }
        } else {
            let e = match method {
                Method::Lr => evaluate_lr(&train, &test, cfg)?,
                _ => evaluate_nmf_lr(&train, &test, cfg, seed)?,
            };
            out.extend(std::iter::repeat_n(e, cfg.xi_grid.len()));
        }
    }
    Ok(out)
}

/// Pareto sweep: one row per (method, ξ), averaged over the seed replicates.
/// Baselines do not depend on ξ and repeat the same numbers on each row.
pub fn run_pareto(data: &Dataset, cfg: &ParetoConfig, seed: u64) -> Result<Vec<ParetoRow>> {
    cfg.validate()?;
    let reps: Vec<Vec<Evaluation>> = (0..cfg.seeds)
        .into_par_iter()
        .map(|i| pareto_replicate(data, cfg, replicate_seed(seed, i)))
        .collect::<Result<_>>()?;
    let mut rows = Vec::new();
    let mut k = 0;
    for &method in &cfg.methods {
        for &xi in &cfg.xi_grid {
            let pick = |f: fn(&Evaluation) -> f64| mean_sd(&reps.iter().map(|r| f(&r[k])).collect::<Vec<_>>());
            let (recon_rel, recon_rel_sd) = pick(|e| e.recon_rel);
            let (accuracy, accuracy_sd) = pick(|e| e.accuracy);
            let (f_score, f_score_sd) = pick(|e| e.f_score);
            rows.push(ParetoRow { method, xi, recon_rel, accuracy, f_score, seed, recon_rel_sd, accuracy_sd, f_score_sd });
            k += 1;
        }
    }
    Ok(rows)
}

/// Settings of the training-curve benchmark.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CurvesConfig {
    pub methods: Vec<Method>,
    pub xi_grid: Vec<f64>,
    pub seeds: usize,
    #[serde(flatten)]
    pub solver: ParetoConfig,
}

impl Default for CurvesConfig {
    fn default() -> Self {
        CurvesConfig {
            methods: vec![Method::SdlFilt, Method::SdlConvFilt],
            xi_grid: vec![0.1, 1.0, 10.0],
            seeds: 1,
            solver: ParetoConfig { methods: vec![Method::SdlFilt], ..Default::default() },
        }
    }
}

/// One solver trace.
#[derive(Debug, Clone)]
pub struct Curve {
    pub method: Method,
    pub xi: f64,
    pub seed: u64,
    pub report: SolverReport,
}

pub const CURVES_HEADER: &str = "method,xi,seed,iter,loss,elapsed_s";

pub fn curves_csv(curves: &[Curve]) -> String {
    let mut out = String::from(CURVES_HEADER);
    out.push('\n');
    for c in curves {
        for r in &c.report.records {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                c.method.tag(),
                fmt_f64(c.xi),
                c.seed,
                r.iter,
                fmt_f64(r.loss),
                fmt_f64(r.elapsed_s)
            ));
        }
    }
    out
}

/// Training loss against wall-clock for each (method, ξ, replicate), all on
/// the full dataset.
pub fn run_curves(data: &Dataset, cfg: &CurvesConfig, seed: u64) -> Result<Vec<Curve>> {
    if cfg.methods.iter().any(|m| !m.uses_xi()) {
        return Err(SdlError::argument("training curves are only defined for SDL methods"));
    }
    cfg.solver.validate()?;
    let mut jobs = Vec::new();
    for i in 0..cfg.seeds {
        for &method in &cfg.methods {
            for &xi in &cfg.xi_grid {
                jobs.push((method, xi, replicate_seed(seed, i)));
            }
        }
    }
    jobs.into_par_iter()
        .map(|(method, xi, s)| {
            let prob = sdl_problem(data, method, xi, &cfg.solver)?;
            let report = match method {
                Method::SdlFilt | Method::SdlFeat => {
                    bcd_dr(&prob, &cfg.solver.bcd(), &initial_factors(&prob, s, cfg.solver.beta_init)?)?.1
                }
                _ => {
                    let tau = match cfg.solver.tau {
                        Some(t) => t,
                        None => default_tau(&prob, cfg.solver.m_bound)?.0,
                    };
                    let lp = LpgdConfig::new(tau, cfg.solver.iters, cfg.solver.rank);
                    sdl_conv_observed(&prob, &lp, &LiftedState::zeros(&prob), &mut |_, _| {})?.2
                }
            };
            Ok(Curve { method, xi, seed: s, report })
        })
        .collect()
}

/// Settings of the estimation-consistency sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConsistencyConfig {
    pub variant: Variant,
    pub n_grid: Vec<usize>,
    pub seeds: usize,
    pub sigma: f64,
    pub sigma_aux: f64,
    pub p: usize,
    pub q: usize,
    pub r: usize,
    pub kappa: usize,
    pub nu: f64,
    /// Lifted-solver budget; `ceil(10 ln n)` when unset.
    pub iters: Option<usize>,
    /// Block-solver budget for the strong model.
    pub strong_iters: usize,
}

impl Default for ConsistencyConfig {
    fn default() -> Self {
        ConsistencyConfig {
            variant: Variant::WeakFilter,
            n_grid: vec![200, 800, 3200],
            seeds: 5,
            sigma: 0.05,
            sigma_aux: 1.0,
            p: 10,
            q: 2,
            r: 2,
            kappa: 1,
            nu: 0.0,
            iters: None,
            strong_iters: 300,
        }
    }
}

/// Per-n error summary.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConsistencyRow {
    pub n: usize,
    pub mean_error: f64,
    pub sd_error: f64,
    /// Mean relative reconstruction-block error.
    pub mean_recon_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConsistencyResult {
    pub rows: Vec<ConsistencyRow>,
    /// Least-squares slope of log mean error on log n.
    pub slope: f64,
    /// `errors[i][k]`: replicate `i` at `n_grid[k]`.
    pub errors: Vec<Vec<EstimationError>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EstimationError {
    pub error: f64,
    pub recon_error: f64,
}

pub const CONSISTENCY_HEADER: &str = "n,mean_error,sd_error,mean_recon_error";

pub fn consistency_csv(res: &ConsistencyResult) -> String {
    let mut out = String::from(CONSISTENCY_HEADER);
    out.push('\n');
    for r in &res.rows {
        out.push_str(&format!(
            "{},{},{},{}\n",
            r.n,
            fmt_f64(r.mean_error),
            fmt_f64(r.sd_error),
            fmt_f64(r.mean_recon_error)
        ));
    }
    out
}

/// Ordinary least-squares slope of `y` on `x`.
pub fn ls_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

fn diff_norm(a: &DenseMatrix, b: &DenseMatrix) -> f64 {
    let mut d = a.clone();
    d.axpy(-1.0, b);
    d.frobenius_norm()
}

/// Estimation error at one sample size. Weak filter: error of the classifier
/// block `[A; Γ]`. Weak feature: `A` is per-sample, so its error is divided
/// by `√n`. Strong: `‖Ŵĥ − W*h*‖`.
///
/// Labels stay random however small σ is, so only the reconstruction error
/// (`‖B̂ − B*‖/‖B*‖`, or `‖Ŵĥ − W*h*‖/‖W*h*‖`) vanishes in the noiseless limit.
pub fn consistency_error(cfg: &ConsistencyConfig, n: usize, seed: u64) -> Result<EstimationError> {
    let dims = Dims { p: cfg.p, q: cfg.q, n, r: cfg.r, kappa: cfg.kappa };
    match cfg.variant {
        Variant::StrongFilter => {
            let gp = random_strong_params(dims, cfg.sigma, cfg.sigma_aux, seed)?;
            let data = sample(&gp, seed)?;
            let mut sc = StrongEstimateConfig::new(cfg.sigma, cfg.nu, cfg.r, cfg.kappa);
            sc.bcd.iters = cfg.strong_iters;
            sc.seed = seed;
            let (est, _) = estimate_strong(&data, &sc)?;
            let Truth::Strong { w, h, .. } = &gp.truth else {
                return Err(SdlError::numeric("strong sampler returned a lifted truth"));
            };
            let truth = w.matmul(h);
            let error = diff_norm(&est.wh(), &truth);
            Ok(EstimationError { error, recon_error: error / truth.frobenius_norm() })
        }
        variant => {
            let gp = random_weak_params(variant, dims, cfg.sigma, cfg.sigma_aux, seed)?;
            let data = sample(&gp, seed)?;
            let mut wc = WeakEstimateConfig::new(cfg.sigma, cfg.nu, cfg.r, cfg.kappa);
            wc.iters = cfg.iters;
            let (est, _) = estimate_weak(variant, &data, &wc)?;
            let Truth::Lifted { a, b, gamma, .. } = &gp.truth else {
                return Err(SdlError::numeric("weak sampler returned a strong truth"));
            };
            let ea = diff_norm(&est.lifted.a, a);
            let ea = if variant == Variant::WeakFeature { ea / (n as f64).sqrt() } else { ea };
            let eg = diff_norm(&est.lifted.gamma, gamma);
            Ok(EstimationError {
                error: (ea * ea + eg * eg).sqrt(),
                recon_error: diff_norm(&est.lifted.b, b) / b.frobenius_norm(),
            })
        }
    }
}

pub fn run_consistency(cfg: &ConsistencyConfig, seed: u64) -> Result<ConsistencyResult> {
    if cfg.n_grid.len() < 2 || cfg.seeds == 0 {
        return Err(SdlError::argument("consistency needs at least two sample sizes and one seed"));
    }
    let errors: Vec<Vec<EstimationError>> = (0..cfg.seeds)
        .into_par_iter()
        .map(|i| {
            let s = replicate_seed(seed, i);
            cfg.n_grid.iter().map(|&n| consistency_error(cfg, n, s)).collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    let rows: Vec<ConsistencyRow> = cfg
        .n_grid
        .iter()
        .enumerate()
        .map(|(k, &n)| {
            let (mean_error, sd_error) = mean_sd(&errors.iter().map(|e| e[k].error).collect::<Vec<_>>());
            let (mean_recon_error, _) = mean_sd(&errors.iter().map(|e| e[k].recon_error).collect::<Vec<_>>());
            ConsistencyRow { n, mean_error, sd_error, mean_recon_error }
        })
        .collect();
    let lx: Vec<f64> = rows.iter().map(|r| (r.n as f64).ln()).collect();
    let ly: Vec<f64> = rows.iter().map(|r| r.mean_error.ln()).collect();
    Ok(ConsistencyResult { slope: ls_slope(&lx, &ly), rows, errors })
}
