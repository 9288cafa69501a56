//! Run configuration: a TOML file plus command-line overrides.
//!
//! Relative paths inside a config file resolve against the file's directory.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use sdl_core::classifier::ScoreFunction;
use sdl_core::generative::Variant;
use sdl_core::loss::{BlockConstraints, LiftedConstraints, Mode};
use sdl_core::solvers::RadiusSchedule;
use sdl_core::{Result, SdlError};

use crate::experiments::{ConsistencyConfig, CurvesConfig, ParetoConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Train,
    Predict,
    Simulate,
    BenchPareto,
    BenchCurves,
    Consistency,
    CheckConditioning,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Solver {
    ConvFilt,
    ConvFeat,
    #[default]
    BcdFilt,
    BcdFeat,
}

impl Solver {
    pub fn mode(&self) -> Mode {
        match self {
            Solver::ConvFilt | Solver::BcdFilt => Mode::Filter,
            Solver::ConvFeat | Solver::BcdFeat => Mode::Feature,
        }
    }

    pub fn is_lifted(&self) -> bool {
        matches!(self, Solver::ConvFilt | Solver::ConvFeat)
    }

    pub fn tag(&self) -> &'static str {
        match self {
            Solver::ConvFilt => "conv-filt",
            Solver::ConvFeat => "conv-feat",
            Solver::BcdFilt => "bcd-filt",
            Solver::BcdFeat => "bcd-feat",
        }
    }
}

/// Input files. Commands that accept a dataset fall back to the bundled
/// semi-synthetic set when `bundled` is set or no data file is given.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    pub data: Option<PathBuf>,
    pub aux: Option<PathBuf>,
    pub labels: Option<PathBuf>,
    /// Number of non-reference classes; inferred from the labels when unset.
    pub kappa: Option<usize>,
    pub bundled: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    /// Must agree with the solver when both are given.
    pub mode: Option<Mode>,
    pub solver: Solver,
    pub rank: usize,
    pub xi: f64,
    pub nu: f64,
    pub l1: f64,
    /// Lifted stepsize; the conditioning-based default is used when unset.
    pub tau: Option<f64>,
    pub iters: usize,
    pub sub_iters: usize,
    pub radius_schedule: RadiusSchedule,
    pub score: ScoreFunction,
    /// Activation bound for the conditioning constants.
    pub m_bound: f64,
    pub beta_init: Option<f64>,
    pub constraints: BlockConstraints,
    pub lifted: LiftedConstraints,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            mode: None,
            solver: Solver::BcdFilt,
            rank: 2,
            xi: 1.0,
            nu: 0.0,
            l1: 0.0,
            tau: None,
            iters: 200,
            sub_iters: 2,
            radius_schedule: RadiusSchedule::Constant { radius: 1.0 },
            score: ScoreFunction::Exp,
            m_bound: 1.0,
            beta_init: Some(10.0),
            constraints: BlockConstraints::default(),
            lifted: LiftedConstraints::default(),
        }
    }
}

impl ModelConfig {
    pub fn mode(&self) -> Mode {
        self.solver.mode()
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(m) = self.mode {
            if m != self.solver.mode() {
                return Err(SdlError::argument(format!(
                    "mode {m:?} conflicts with solver {}",
                    self.solver.tag()
                )));
            }
        }
        if self.rank == 0 || self.iters == 0 || self.sub_iters == 0 {
            return Err(SdlError::argument("rank, iters and sub_iters must be at least 1"));
        }
        for (name, v) in [("xi", self.xi), ("nu", self.nu), ("l1", self.l1)] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(SdlError::argument(format!("{name} must be finite and nonnegative, got {v}")));
            }
        }
        if let Some(t) = self.tau {
            if !(t > 0.0) || !t.is_finite() {
                return Err(SdlError::argument(format!("tau must be positive, got {t}")));
            }
        }
        if !(self.m_bound > 0.0) {
            return Err(SdlError::argument("m_bound must be positive"));
        }
        self.radius_schedule.validate()?;
        self.constraints.validate()?;
        self.lifted.matrix.validate()?;
        self.lifted.aux.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SimKind {
    #[default]
    WeakFilter,
    WeakFeature,
    StrongFilter,
    Semisynthetic,
}

impl SimKind {
    pub fn variant(&self) -> Option<Variant> {
        match self {
            SimKind::WeakFilter => Some(Variant::WeakFilter),
            SimKind::WeakFeature => Some(Variant::WeakFeature),
            SimKind::StrongFilter => Some(Variant::StrongFilter),
            SimKind::Semisynthetic => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateConfig {
    pub kind: SimKind,
    pub p: usize,
    pub q: usize,
    /// Defaults to 200, or 500 for the semi-synthetic set.
    pub n: Option<usize>,
    pub r: usize,
    pub kappa: usize,
    /// Defaults to 0.5.
    pub sigma: Option<f64>,
    pub sigma_aux: f64,
    /// Semi-synthetic only: user dictionaries replacing the bundled bases.
    pub basis_x: Option<PathBuf>,
    pub basis_y: Option<PathBuf>,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        SimulateConfig {
            kind: SimKind::WeakFilter,
            p: 20,
            q: 2,
            n: None,
            r: 2,
            kappa: 1,
            sigma: None,
            sigma_aux: 1.0,
            basis_x: None,
            basis_y: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct PredictConfig {
    /// Directory holding `model.json` and the factor files.
    pub model: Option<PathBuf>,
}

/// Everything a command needs. Sections irrelevant to the command are ignored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    #[serde(skip)]
    pub command: Option<Command>,
    pub seed: u64,
    /// Output directory; `check-conditioning` only writes a file when set.
    pub out: Option<PathBuf>,
    pub data: DataConfig,
    pub model: ModelConfig,
    pub simulate: SimulateConfig,
    pub predict: PredictConfig,
    pub pareto: ParetoConfig,
    pub curves: CurvesConfig,
    pub consistency: ConsistencyConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            command: None,
            seed: 0,
            out: None,
            data: DataConfig::default(),
            model: ModelConfig::default(),
            simulate: SimulateConfig::default(),
            predict: PredictConfig::default(),
            pareto: ParetoConfig::default(),
            curves: CurvesConfig::default(),
            consistency: ConsistencyConfig::default(),
        }
    }
}

/// Per-field overrides from the command line; `None` leaves the file value.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub xi: Option<f64>,
    pub nu: Option<f64>,
    pub tau: Option<f64>,
    pub rank: Option<usize>,
    pub iters: Option<usize>,
    pub mode: Option<Mode>,
    pub solver: Option<Solver>,
    pub data: Option<PathBuf>,
    pub aux: Option<PathBuf>,
    pub labels: Option<PathBuf>,
    pub model: Option<PathBuf>,
}

fn rebase(base: &Path, p: &mut Option<PathBuf>) {
    if let Some(path) = p {
        if path.is_relative() {
            *path = base.join(&*path);
        }
    }
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| SdlError::Parse(format!("config: {e}")))
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| SdlError::Io(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::from_toml_str(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [&mut cfg.data.data, &mut cfg.data.aux, &mut cfg.data.labels, &mut cfg.predict.model] {
            rebase(base, p);
        }
        rebase(base, &mut cfg.simulate.basis_x);
        rebase(base, &mut cfg.simulate.basis_y);
        rebase(base, &mut cfg.out);
        Ok(cfg)
    }

    pub fn validate_model(&self) -> Result<()> {
        self.model.validate()
    }

    pub fn out_dir(&self) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from("out"))
    }

    /// Flags win over file values. `--xi` replaces the sweep grids with a
    /// single value and `--iters` every iteration budget.
    pub fn apply(&mut self, o: &Overrides) {
        if let Some(s) = o.seed {
            self.seed = s;
        }
        if o.out.is_some() {
            self.out = o.out.clone();
        }
        if let Some(xi) = o.xi {
            self.model.xi = xi;
            self.pareto.xi_grid = vec![xi];
            self.curves.xi_grid = vec![xi];
        }
        if let Some(nu) = o.nu {
            self.model.nu = nu;
            self.pareto.nu = nu;
            self.pareto.nu_conv = nu;
            self.curves.solver.nu = nu;
            self.curves.solver.nu_conv = nu;
            self.consistency.nu = nu;
        }
        if let Some(tau) = o.tau {
            self.model.tau = Some(tau);
            self.pareto.tau = Some(tau);
            self.curves.solver.tau = Some(tau);
        }
        if let Some(r) = o.rank {
            self.model.rank = r;
            self.pareto.rank = r;
            self.curves.solver.rank = r;
            self.consistency.r = r;
        }
        if let Some(it) = o.iters {
            self.model.iters = it;
            self.pareto.iters = it;
            self.curves.solver.iters = it;
            self.consistency.iters = Some(it);
            self.consistency.strong_iters = it;
        }
        if let Some(m) = o.mode {
            self.model.mode = Some(m);
        }
        if let Some(s) = o.solver {
            self.model.solver = s;
        }
        if let (Some(m), None) = (o.mode, o.solver) {
            // A bare --mode keeps the solver family and switches its mode.
            self.model.solver = match (self.model.solver.is_lifted(), m) {
                (true, Mode::Filter) => Solver::ConvFilt,
                (true, Mode::Feature) => Solver::ConvFeat,
                (false, Mode::Filter) => Solver::BcdFilt,
                (false, Mode::Feature) => Solver::BcdFeat,
            };
        }
        if o.data.is_some() {
            self.data.data = o.data.clone();
        }
        if o.aux.is_some() {
            self.data.aux = o.aux.clone();
        }
        if o.labels.is_some() {
            self.data.labels = o.labels.clone();
        }
        if o.model.is_some() {
            self.predict.model = o.model.clone();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiments::Method;
    use sdl_core::ConstraintSpec;

    #[test]
    fn parses_nested_sections() {
        let cfg = RunConfig::from_toml_str(
            r#"
seed = 7
[model]
solver = "conv-feat"
xi = 5.0
tau = 0.01
[model.constraints.dict]
kind = "frobenius_ball"
radius = 3.0
[model.radius_schedule]
kind = "constant"
radius = 0.5
[pareto]
methods = ["lr", "sdl-filt"]
xi_grid = [0.1, 1.0]
[curves]
methods = ["sdl-conv-filt"]
iters = 7
[consistency]
variant = "strong_filter"
n_grid = [100, 400]
"#,
        )
        .unwrap();
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.model.solver, Solver::ConvFeat);
        assert_eq!(cfg.model.mode(), Mode::Feature);
        assert_eq!(cfg.model.constraints.dict, ConstraintSpec::FrobeniusBall { radius: 3.0 });
        assert_eq!(cfg.model.radius_schedule, RadiusSchedule::Constant { radius: 0.5 });
        assert_eq!(cfg.pareto.xi_grid, vec![0.1, 1.0]);
        assert_eq!(cfg.consistency.variant, Variant::StrongFilter);
        assert_eq!(cfg.pareto.seeds, 5);
        assert_eq!(cfg.curves.methods, vec![Method::SdlConvFilt]);
        assert_eq!(cfg.curves.solver.iters, 7);
    }

    #[test]
    fn rejects_unknown_keys() {
        assert!(matches!(RunConfig::from_toml_str("[model]\nrank_typo = 3\n"), Err(SdlError::Parse(_))));
    }

    #[test]
    fn flags_win() {
        let mut cfg = RunConfig::from_toml_str("[model]\nxi = 5.0\niters = 10\n").unwrap();
        cfg.apply(&Overrides { xi: Some(0.5), iters: Some(3), seed: Some(9), ..Default::default() });
        assert_eq!(cfg.model.xi, 0.5);
        assert_eq!(cfg.pareto.xi_grid, vec![0.5]);
        assert_eq!(cfg.model.iters, 3);
        assert_eq!(cfg.seed, 9);
    }

    #[test]
    fn mode_solver_conflict() {
        let mut cfg = RunConfig::default();
        cfg.apply(&Overrides { mode: Some(Mode::Feature), ..Default::default() });
        assert_eq!(cfg.model.solver, Solver::BcdFeat);
        cfg.validate_model().unwrap();
        cfg.apply(&Overrides { mode: Some(Mode::Filter), solver: Some(Solver::ConvFeat), ..Default::default() });
        assert!(cfg.validate_model().is_err());
    }

    #[test]
    fn relative_paths_follow_the_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        std::fs::write(&path, "out = \"res\"\n[data]\ndata = \"x.csv\"\n").unwrap();
        let cfg = RunConfig::from_file(&path).unwrap();
        assert_eq!(cfg.data.data.unwrap(), dir.path().join("x.csv"));
        assert_eq!(cfg.out.unwrap(), dir.path().join("res"));
    }
}
