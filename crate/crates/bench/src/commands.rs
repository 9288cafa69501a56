//! The CLI commands. Each writes its artifacts under the output directory
//! and returns the text to print on stdout.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::json;

use sdl_core::classifier::{predictive_distribution, ScoreFunction};
use sdl_core::generative::{
    make_semisynthetic, random_strong_params, random_weak_params, sample, Dims, SemiSyntheticSpec,
    Truth, Variant,
};
use sdl_core::linalg::io::{read_labels, read_matrix_csv, write_labels, write_matrix_csv};
use sdl_core::loss::{BlockConstraints, FactorState, LiftedConstraints, LiftedState, Mode, SdlProblem};
use sdl_core::metrics::{classification_metrics, relative_recon};
use sdl_core::solvers::{
    bcd_dr, conditioning, default_tau, encode, predict_batch, sdl_conv_observed, BcdConfig, LpgdConfig, SolverReport,
};
use sdl_core::{DenseMatrix, Result, SdlError};

use crate::config::{Command, ModelConfig, RunConfig, SimKind, Solver};
use crate::experiments::{
    consistency_csv, curves_csv, initial_factors, pareto_csv, run_consistency, run_curves, run_pareto, Dataset,
};

pub fn run(cmd: Command, cfg: &RunConfig) -> Result<String> {
    match cmd {
        Command::Train => train(cfg),
        Command::Predict => predict(cfg),
        Command::Simulate => simulate(cfg),
        Command::BenchPareto => bench_pareto(cfg),
        Command::BenchCurves => bench_curves(cfg),
        Command::Consistency => consistency(cfg),
        Command::CheckConditioning => check_conditioning(cfg),
    }
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> SdlError {
    SdlError::Io(format!("{}: {e}", path.display()))
}

fn out_dir(cfg: &RunConfig) -> Result<PathBuf> {
    let dir = cfg.out_dir();
    fs::create_dir_all(&dir).map_err(|e| io_err(&dir, e))?;
    Ok(dir)
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| io_err(path, e))
}

fn write_json(path: &Path, v: &impl Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(v).map_err(|e| SdlError::Io(e.to_string()))?;
    text.push('\n');
    write_text(path, &text)
}

fn existing(path: &Path) -> Result<&Path> {
    if path.exists() {
        Ok(path)
    } else {
        Err(SdlError::argument(format!("{} does not exist", path.display())))
    }
}

/// The configured dataset, or the bundled semi-synthetic set drawn with the
/// run seed.
pub fn load_dataset(cfg: &RunConfig) -> Result<Dataset> {
    let d = &cfg.data;
    match (&d.data, d.bundled) {
        (Some(path), false) => {
            let x = read_matrix_csv(existing(path)?)?;
            let aux = d.aux.as_deref().map(|p| existing(p).and_then(read_matrix_csv)).transpose()?;
            let labels = match &d.labels {
                Some(p) => read_labels(existing(p)?)?,
                None => return Err(SdlError::argument("a labels file is required with --data")),
            };
            Dataset::new(x, aux, labels, d.kappa)
        }
        _ => {
            let (x, labels, _) = make_semisynthetic(&SemiSyntheticSpec::bundled(), cfg.seed)?;
            Dataset::new(x, None, labels, d.kappa.or(Some(1)))
        }
    }
}

pub fn build_problem(data: &Dataset, m: &ModelConfig) -> Result<SdlProblem> {
    let aux = (data.aux.rows() > 0).then(|| data.aux.clone());
    SdlProblem::new(data.x.clone(), aux, data.labels.clone(), data.kappa, m.rank, m.xi, m.nu, m.mode())?
        .with_constraints(m.constraints)?
        .with_lifted_constraints(m.lifted)?
        .with_l1_code(m.l1)
        .map(|p| p.with_score(m.score))
}

/// Result of one training run.
pub struct Fit {
    pub factors: FactorState,
    pub lifted: Option<LiftedState>,
    pub report: SolverReport,
    pub tau: Option<f64>,
}

pub fn fit_model(prob: &SdlProblem, m: &ModelConfig, seed: u64) -> Result<Fit> {
    m.validate()?;
    if m.solver.is_lifted() {
        let tau = match m.tau {
            Some(t) => t,
            None => default_tau(prob, m.m_bound)?.0,
        };
        let lp = LpgdConfig::new(tau, m.iters, m.rank);
        let (factors, lifted, report) = sdl_conv_observed(prob, &lp, &LiftedState::zeros(prob), &mut |_, _| {})?;
        Ok(Fit { factors, lifted: Some(lifted), report, tau: Some(tau) })
    } else {
        let bcd = BcdConfig {
            iters: m.iters,
            sub_iters: m.sub_iters,
            radius_schedule: m.radius_schedule,
            ..Default::default()
        };
        let (factors, report) = bcd_dr(prob, &bcd, &initial_factors(prob, seed, m.beta_init)?)?;
        Ok(Fit { factors, lifted: None, report, tau: None })
    }
}

/// `model.json`: everything needed to rebuild the predictor, plus the names
/// of the factor files next to it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelManifest {
    pub solver: Solver,
    pub mode: Mode,
    pub p: usize,
    pub q: usize,
    pub rank: usize,
    pub kappa: usize,
    pub xi: f64,
    pub nu: f64,
    pub l1: f64,
    pub tau: Option<f64>,
    pub score: ScoreFunction,
    pub constraints: BlockConstraints,
    pub lifted_constraints: LiftedConstraints,
    pub seed: u64,
    pub iterations: usize,
    pub final_loss: Option<f64>,
    pub files: ModelFiles,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFiles {
    pub w: String,
    pub h: String,
    pub beta: String,
    pub gamma: Option<String>,
    pub a: Option<String>,
    pub b: Option<String>,
}

fn train(cfg: &RunConfig) -> Result<String> {
    cfg.validate_model()?;
    let data = load_dataset(cfg)?;
    let m = &cfg.model;
    let prob = build_problem(&data, m)?;
    let fit = fit_model(&prob, m, cfg.seed)?;
    let dir = out_dir(cfg)?;

    let f = &fit.factors;
    write_matrix_csv(&dir.join("W.csv"), &f.w)?;
    write_matrix_csv(&dir.join("H.csv"), &f.h)?;
    write_matrix_csv(&dir.join("beta.csv"), &f.beta)?;
    let gamma = if prob.q() > 0 {
        write_matrix_csv(&dir.join("gamma.csv"), &f.gamma)?;
        Some("gamma.csv".to_string())
    } else {
        None
    };
    let (a, b) = match &fit.lifted {
        Some(z) => {
            write_matrix_csv(&dir.join("A.csv"), &z.a)?;
            write_matrix_csv(&dir.join("B.csv"), &z.b)?;
            (Some("A.csv".to_string()), Some("B.csv".to_string()))
        }
        None => (None, None),
    };
    let manifest = ModelManifest {
        solver: m.solver,
        mode: m.mode(),
        p: prob.p(),
        q: prob.q(),
        rank: m.rank,
        kappa: prob.kappa,
        xi: m.xi,
        nu: m.nu,
        l1: m.l1,
        tau: fit.tau,
        score: m.score,
        constraints: m.constraints,
        lifted_constraints: m.lifted,
        seed: cfg.seed,
        iterations: fit.report.records.last().map(|r| r.iter).unwrap_or(0),
        final_loss: fit.report.final_loss(),
        files: ModelFiles { w: "W.csv".into(), h: "H.csv".into(), beta: "beta.csv".into(), gamma, a, b },
    };
    write_json(&dir.join("model.json"), &manifest)?;
    write_text(&dir.join("report.csv"), &fit.report.to_csv_string())?;

    let pred = predict_batch(&prob, f, &data.x, &data.aux)?;
    let mut summary = classification_metrics(&pred, &data.labels, (data.kappa == 1).then_some(1))?;
    summary.recon_rel = Some(relative_recon(&data.x, &f.w, &f.h)?);
    let metrics = json!({
        "train": summary,
        "final_loss": fit.report.final_loss(),
        "iterations": manifest.iterations,
        "termination": fit.report.termination,
        "flags": fit.report.flags,
        "tau": fit.tau,
    });
    write_json(&dir.join("metrics.json"), &metrics)?;
    Ok(format!(
        "trained {} on {} samples: loss {:.6e}, train accuracy {:.4}, recon_rel {:.4}\n",
        m.solver.tag(),
        data.n(),
        fit.report.final_loss().unwrap_or(f64::NAN),
        summary.accuracy,
        summary.recon_rel.unwrap_or(f64::NAN)
    ))
}

/// Saved model read back from a `train` output directory.
pub struct LoadedModel {
    pub manifest: ModelManifest,
    pub factors: FactorState,
}

pub fn load_model(dir: &Path) -> Result<LoadedModel> {
    let path = dir.join("model.json");
    let text = fs::read_to_string(existing(&path)?).map_err(|e| io_err(&path, e))?;
    let manifest: ModelManifest =
        serde_json::from_str(&text).map_err(|e| SdlError::Parse(format!("{}: {e}", path.display())))?;
    let fl = &manifest.files;
    let w = read_matrix_csv(&dir.join(&fl.w))?;
    let h = read_matrix_csv(&dir.join(&fl.h))?;
    let beta = read_matrix_csv(&dir.join(&fl.beta))?;
    let gamma = match &fl.gamma {
        Some(g) => read_matrix_csv(&dir.join(g))?,
        None => DenseMatrix::zeros(0, manifest.kappa),
    };
    if w.shape() != (manifest.p, manifest.rank)
        || beta.shape() != (manifest.rank, manifest.kappa)
        || gamma.shape() != (manifest.q, manifest.kappa)
    {
        return Err(SdlError::Parse(format!("{}: factor shapes disagree with the manifest", dir.display())));
    }
    Ok(LoadedModel { manifest, factors: FactorState { w, h, beta, gamma } })
}

impl LoadedModel {
    /// Class probabilities of each column, `n×(κ+1)`.
    pub fn probabilities(&self, x: &DenseMatrix, aux: &DenseMatrix) -> Result<DenseMatrix> {
        let m = &self.manifest;
        if x.rows() != m.p || aux.rows() != m.q || aux.cols() != x.cols() {
            return Err(SdlError::argument(format!(
                "model expects {} data and {} auxiliary rows, got {} and {}",
                m.p,
                m.q,
                x.rows(),
                aux.rows()
            )));
        }
        let f = &self.factors;
        let mut out = DenseMatrix::zeros(x.cols(), m.kappa + 1);
        for s in 0..x.cols() {
            let xs = x.col(s);
            let feat = match m.mode {
                Mode::Filter => f.w.t_matvec(&xs),
                Mode::Feature => encode(&f.w, &xs, &m.constraints.code)?,
            };
            let mut a = f.beta.t_matvec(&feat);
            if m.q > 0 {
                for (ai, gi) in a.iter_mut().zip(f.gamma.t_matvec(&aux.col(s))) {
                    *ai += gi;
                }
            }
            for (j, g) in predictive_distribution(&a, m.score)?.into_iter().enumerate() {
                out.set(s, j, g);
            }
        }
        Ok(out)
    }
}

fn argmax_rows(p: &DenseMatrix) -> Vec<usize> {
    (0..p.rows())
        .map(|i| {
            let row = p.row(i);
            let mut best = 0;
            for (j, &v) in row.iter().enumerate() {
                if v > row[best] {
                    best = j;
                }
            }
            best
        })
        .collect()
}

fn predict(cfg: &RunConfig) -> Result<String> {
    let model_dir = cfg
        .predict
        .model
        .as_deref()
        .ok_or_else(|| SdlError::argument("predict needs --model DIR"))?;
    let model = load_model(model_dir)?;
    let d = &cfg.data;
    let (x, aux, labels) = match (&d.data, d.bundled) {
        (Some(path), false) => {
            let x = read_matrix_csv(existing(path)?)?;
            let aux = match &d.aux {
                Some(p) => read_matrix_csv(existing(p)?)?,
                None => DenseMatrix::zeros(0, x.cols()),
            };
            let labels = d.labels.as_deref().map(|p| existing(p).and_then(read_labels)).transpose()?;
            (x, aux, labels)
        }
        _ => {
            let data = load_dataset(cfg)?;
            (data.x, data.aux, Some(data.labels))
        }
    };
    let probs = model.probabilities(&x, &aux)?;
    let pred = argmax_rows(&probs);
    let dir = out_dir(cfg)?;
    write_labels(&dir.join("predictions.csv"), &pred)?;
    write_matrix_csv(&dir.join("probabilities.csv"), &probs)?;
    let mut msg = format!("predicted {} samples\n", pred.len());
    if let Some(labels) = labels {
        if labels.len() != pred.len() {
            return Err(SdlError::argument(format!("{} labels for {} samples", labels.len(), pred.len())));
        }
        let positive = (model.manifest.kappa == 1).then_some(1);
        let summary = classification_metrics(&pred, &labels, positive)?;
        write_json(&dir.join("metrics.json"), &json!({ "test": summary }))?;
        msg.push_str(&format!("accuracy {:.4}, f_score {:.4}\n", summary.accuracy, summary.f_score));
    }
    Ok(msg)
}

fn simulate(cfg: &RunConfig) -> Result<String> {
    let s = &cfg.simulate;
    let dir = out_dir(cfg)?;
    let sigma = s.sigma.unwrap_or(0.5);
    match s.kind.variant() {
        Some(variant) => {
            let n = s.n.unwrap_or(200);
            let dims = Dims { p: s.p, q: s.q, n, r: s.r, kappa: s.kappa };
            let gp = match variant {
                Variant::StrongFilter => random_strong_params(dims, sigma, s.sigma_aux, cfg.seed)?,
                v => random_weak_params(v, dims, sigma, s.sigma_aux, cfg.seed)?,
            };
            let data = sample(&gp, cfg.seed)?;
            write_matrix_csv(&dir.join("data.csv"), &data.x_data)?;
            if s.q > 0 {
                write_matrix_csv(&dir.join("aux.csv"), &data.x_aux)?;
            }
            write_labels(&dir.join("labels.csv"), &data.labels)?;
            let mut truth_files = Vec::new();
            let mut put = |name: &str, m: &DenseMatrix| -> Result<()> {
                if m.len() > 0 {
                    write_matrix_csv(&dir.join(name), m)?;
                    truth_files.push(name.to_string());
                }
                Ok(())
            };
            match &gp.truth {
                Truth::Lifted { a, b, c, gamma } => {
                    put("A_true.csv", a)?;
                    put("B_true.csv", b)?;
                    put("C_true.csv", c)?;
                    put("gamma_true.csv", gamma)?;
                }
                Truth::Strong { w, h, beta, gamma, lambda } => {
                    put("W_true.csv", w)?;
                    put("h_true.csv", h)?;
                    put("beta_true.csv", beta)?;
                    put("gamma_true.csv", gamma)?;
                    put("lambda_true.csv", lambda)?;
                }
            }
            let truth = json!({
                "kind": s.kind,
                "dims": gp.dims,
                "sigma": gp.sigma,
                "sigma_aux": gp.sigma_aux,
                "xi": 1.0 / (2.0 * sigma * sigma),
                "seed": cfg.seed,
                "files": truth_files,
            });
            write_json(&dir.join("truth.json"), &truth)?;
            Ok(format!("simulated {n} samples ({:?}) into {}\n", s.kind, dir.display()))
        }
        None => {
            let mut spec = SemiSyntheticSpec::bundled();
            if let Some(n) = s.n {
                spec.n = n;
            }
            spec.sigma = s.sigma.unwrap_or(spec.sigma);
            spec = match (&s.basis_x, &s.basis_y) {
                (Some(bx), Some(by)) => spec.with_bases(read_matrix_csv(existing(bx)?)?, read_matrix_csv(existing(by)?)?)?,
                (None, None) => spec,
                _ => return Err(SdlError::argument("basis_x and basis_y must be given together")),
            };
            let (x, labels, truth) = make_semisynthetic(&spec, cfg.seed)?;
            write_matrix_csv(&dir.join("data.csv"), &x)?;
            write_labels(&dir.join("labels.csv"), &labels)?;
            write_matrix_csv(&dir.join("H_true.csv"), &truth.h_true)?;
            write_matrix_csv(&dir.join("basis_x.csv"), &spec.basis_x)?;
            write_matrix_csv(&dir.join("basis_y.csv"), &spec.basis_y)?;
            write_matrix_csv(&dir.join("probs_true.csv"), &DenseMatrix::from_fn(truth.probs.len(), 1, |i, _| truth.probs[i]))?;
            let meta = json!({
                "kind": SimKind::Semisynthetic,
                "p": spec.p,
                "n": spec.n,
                "r_bar": spec.r_bar,
                "r": spec.r,
                "kappa": spec.kappa,
                "sigma": spec.sigma,
                "beta_true_y": spec.beta_true_y,
                "bundled_bases": s.basis_x.is_none(),
                "seed": cfg.seed,
            });
            write_json(&dir.join("truth.json"), &meta)?;
            Ok(format!("simulated {} semi-synthetic samples into {}\n", spec.n, dir.display()))
        }
    }
}

fn bench_pareto(cfg: &RunConfig) -> Result<String> {
    let data = load_dataset(cfg)?;
    let rows = run_pareto(&data, &cfg.pareto, cfg.seed)?;
    let dir = out_dir(cfg)?;
    write_text(&dir.join("pareto.csv"), &pareto_csv(&rows))?;
    write_json(&dir.join("pareto.json"), &json!({ "config": cfg.pareto, "seed": cfg.seed, "rows": rows }))?;
    let mut msg = String::new();
    for r in &rows {
        msg.push_str(&format!(
            "{:<14} xi={:<6} recon_rel={:.4} accuracy={:.4}±{:.4} f={:.4}\n",
            r.method.tag(),
            r.xi,
            r.recon_rel,
            r.accuracy,
            r.accuracy_sd,
            r.f_score
        ));
    }
    Ok(msg)
}

fn bench_curves(cfg: &RunConfig) -> Result<String> {
    let data = load_dataset(cfg)?;
    let curves = run_curves(&data, &cfg.curves, cfg.seed)?;
    let dir = out_dir(cfg)?;
    write_text(&dir.join("curves.csv"), &curves_csv(&curves))?;
    Ok(format!("wrote {} traces to {}\n", curves.len(), dir.join("curves.csv").display()))
}

fn consistency(cfg: &RunConfig) -> Result<String> {
    let res = run_consistency(&cfg.consistency, cfg.seed)?;
    let dir = out_dir(cfg)?;
    write_text(&dir.join("consistency.csv"), &consistency_csv(&res))?;
    write_json(
        &dir.join("consistency.json"),
        &json!({ "config": cfg.consistency, "seed": cfg.seed, "slope": res.slope, "rows": res.rows }),
    )?;
    Ok(format!("log-log slope {:.4}\n", res.slope))
}

/// Conditioning constants as JSON, with the default stepsize and its
/// contraction factor when the admissible interval is nonempty.
pub fn conditioning_json(prob: &SdlProblem, m_bound: f64) -> Result<serde_json::Value> {
    let rep = conditioning(prob, m_bound)?;
    let mut v = serde_json::to_value(&rep).map_err(|e| SdlError::numeric(e.to_string()))?;
    let tau = rep.tau_midpoint();
    v["tau_midpoint"] = json!(tau);
    v["rho"] = json!(tau.map(|t| rep.rho(t)));
    Ok(v)
}

fn check_conditioning(cfg: &RunConfig) -> Result<String> {
    cfg.validate_model()?;
    let data = load_dataset(cfg)?;
    let prob = build_problem(&data, &cfg.model)?;
    let v = conditioning_json(&prob, cfg.model.m_bound)?;
    let mut text = serde_json::to_string_pretty(&v).map_err(|e| SdlError::numeric(e.to_string()))?;
    text.push('\n');
    if cfg.out.is_some() {
        let dir = out_dir(cfg)?;
        write_text(&dir.join("conditioning.json"), &text)?;
    }
    Ok(text)
}
