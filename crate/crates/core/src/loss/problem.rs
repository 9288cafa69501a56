//! Problem definition and parameter containers.

use serde::{Deserialize, Serialize};

use crate::classifier::ScoreFunction;
use crate::error::{Result, SdlError};
use crate::linalg::{ConstraintSpec, DenseMatrix};

/// Where the classifier reads from: the filtered input `Wᵀx` or the code `h`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    #[default]
    Filter,
    Feature,
}

/// Per-block constraint sets for the separate-variable solver.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct BlockConstraints {
    pub dict: ConstraintSpec,
    pub code: ConstraintSpec,
    pub beta: ConstraintSpec,
    pub aux: ConstraintSpec,
}

impl BlockConstraints {
    pub fn validate(&self) -> Result<()> {
        self.dict.validate()?;
        self.code.validate()?;
        self.beta.validate()?;
        self.aux.validate()
    }
}

/// Constraints for the lifted solvers: `matrix` applies to the stacked
/// `[A, B]` (or `[A; B]`), `aux` to `Γ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct LiftedConstraints {
    pub matrix: ConstraintSpec,
    pub aux: ConstraintSpec,
}

/// Dataset plus hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SdlProblem {
    pub x_data: DenseMatrix,
    /// `q×n`; `q = 0` when there are no auxiliary covariates.
    pub x_aux: DenseMatrix,
    pub labels: Vec<usize>,
    pub kappa: usize,
    pub rank: usize,
    pub xi: f64,
    pub nu: f64,
    pub mode: Mode,
    pub score: ScoreFunction,
    pub constraints: BlockConstraints,
    pub lifted: LiftedConstraints,
    /// Coefficient of the optional `λ‖H‖₁` penalty (block solver only).
    pub l1_code: f64,
}

impl SdlProblem {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        x_data: DenseMatrix,
        x_aux: Option<DenseMatrix>,
        labels: Vec<usize>,
        kappa: usize,
        rank: usize,
        xi: f64,
        nu: f64,
        mode: Mode,
    ) -> Result<Self> {
        let n = x_data.cols();
        let x_aux = x_aux.unwrap_or_else(|| DenseMatrix::zeros(0, n));
        let prob = SdlProblem {
            x_data,
            x_aux,
            labels,
            kappa,
            rank,
            xi,
            nu,
            mode,
            score: ScoreFunction::Exp,
            constraints: BlockConstraints::default(),
            lifted: LiftedConstraints::default(),
            l1_code: 0.0,
        };
        prob.validate()?;
        Ok(prob)
    }

    pub fn with_constraints(mut self, c: BlockConstraints) -> Result<Self> {
        c.validate()?;
        self.constraints = c;
        Ok(self)
    }

    pub fn with_lifted_constraints(mut self, c: LiftedConstraints) -> Result<Self> {
        c.matrix.validate()?;
        c.aux.validate()?;
        self.lifted = c;
        Ok(self)
    }

    pub fn with_score(mut self, h: ScoreFunction) -> Self {
        self.score = h;
        self
    }

    pub fn with_l1_code(mut self, lambda: f64) -> Result<Self> {
        if !(lambda >= 0.0) {
            return Err(SdlError::argument("L1 coefficient must be nonnegative"));
        }
        self.l1_code = lambda;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n();
        if n == 0 || self.p() == 0 {
            return Err(SdlError::argument("data matrix must be non-empty"));
        }
        if self.x_aux.cols() != n {
            return Err(SdlError::argument(format!("X_aux has {} columns, X_data has {n}", self.x_aux.cols())));
        }
        if self.labels.len() != n {
            return Err(SdlError::argument(format!("{} labels for {n} samples", self.labels.len())));
        }
        if self.kappa == 0 {
            return Err(SdlError::argument("kappa must be at least 1"));
        }
        if let Some(&y) = self.labels.iter().find(|&&y| y > self.kappa) {
            return Err(SdlError::argument(format!("label {y} outside 0..={}", self.kappa)));
        }
        if self.rank == 0 || self.rank > self.p().min(n) {
            return Err(SdlError::argument(format!(
                "rank {} outside 1..={}",
                self.rank,
                self.p().min(n)
            )));
        }
        if !(self.xi >= 0.0 && self.xi.is_finite()) || !(self.nu >= 0.0 && self.nu.is_finite()) {
            return Err(SdlError::argument("xi and nu must be finite and nonnegative"));
        }
        if !self.x_data.is_finite() || !self.x_aux.is_finite() {
            return Err(SdlError::argument("data contains non-finite values"));
        }
        self.constraints.validate()?;
        self.lifted.matrix.validate()?;
        self.lifted.aux.validate()
    }

    pub fn p(&self) -> usize {
        self.x_data.rows()
    }

    pub fn q(&self) -> usize {
        self.x_aux.rows()
    }

    pub fn n(&self) -> usize {
        self.x_data.cols()
    }

    pub fn r(&self) -> usize {
        self.rank
    }

    /// Copy of the problem restricted to the given sample indices.
    pub fn subset(&self, idx: &[usize]) -> SdlProblem {
        let mut out = self.clone();
        out.x_data = self.x_data.select_cols(idx);
        out.x_aux = self.x_aux.select_cols(idx);
        out.labels = idx.iter().map(|&i| self.labels[i]).collect();
        out
    }
}

/// Separate-variable parameters `(W, H, β, Γ)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactorState {
    /// `p×r`
    pub w: DenseMatrix,
    /// `r×n`
    pub h: DenseMatrix,
    /// `r×κ`
    pub beta: DenseMatrix,
    /// `q×κ`
    pub gamma: DenseMatrix,
}

impl FactorState {
    pub fn zeros(prob: &SdlProblem) -> Self {
        FactorState {
            w: DenseMatrix::zeros(prob.p(), prob.r()),
            h: DenseMatrix::zeros(prob.r(), prob.n()),
            beta: DenseMatrix::zeros(prob.r(), prob.kappa),
            gamma: DenseMatrix::zeros(prob.q(), prob.kappa),
        }
    }

    pub fn check_shapes(&self, prob: &SdlProblem) -> Result<()> {
        let want = [
            ("W", self.w.shape(), (prob.p(), prob.r())),
            ("H", self.h.shape(), (prob.r(), prob.n())),
            ("beta", self.beta.shape(), (prob.r(), prob.kappa)),
            ("gamma", self.gamma.shape(), (prob.q(), prob.kappa)),
        ];
        for (name, got, exp) in want {
            if got != exp {
                return Err(SdlError::argument(format!("{name} has shape {got:?}, expected {exp:?}")));
            }
        }
        Ok(())
    }

    /// Blocks in storage order `[W, H, β, Γ]`.
    pub fn blocks(&self) -> [&DenseMatrix; 4] {
        [&self.w, &self.h, &self.beta, &self.gamma]
    }

    pub fn norm(&self) -> f64 {
        self.blocks().iter().map(|b| b.frobenius_norm_sq()).sum::<f64>().sqrt()
    }
}

/// Lifted parameters. `A` is `p×κ` in Filter mode and `κ×n` in Feature mode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LiftedState {
    pub a: DenseMatrix,
    pub b: DenseMatrix,
    pub gamma: DenseMatrix,
}

impl LiftedState {
    pub fn zeros(prob: &SdlProblem) -> Self {
        let a = match prob.mode {
            Mode::Filter => DenseMatrix::zeros(prob.p(), prob.kappa),
            Mode::Feature => DenseMatrix::zeros(prob.kappa, prob.n()),
        };
        LiftedState { a, b: DenseMatrix::zeros(prob.p(), prob.n()), gamma: DenseMatrix::zeros(prob.q(), prob.kappa) }
    }

    pub fn check_shapes(&self, prob: &SdlProblem) -> Result<()> {
        let a_shape = match prob.mode {
            Mode::Filter => (prob.p(), prob.kappa),
            Mode::Feature => (prob.kappa, prob.n()),
        };
        if self.a.shape() != a_shape
            || self.b.shape() != (prob.p(), prob.n())
            || self.gamma.shape() != (prob.q(), prob.kappa)
        {
            return Err(SdlError::argument("lifted state shapes do not match the problem"));
        }
        Ok(())
    }

    /// `[A, B]` in Filter mode, `[A; B]` in Feature mode.
    pub fn stacked(&self, mode: Mode) -> DenseMatrix {
        match mode {
            Mode::Filter => self.a.hstack(&self.b),
            Mode::Feature => self.a.vstack(&self.b),
        }
    }

    /// Inverse of [`LiftedState::stacked`].
    pub fn from_stacked(mode: Mode, stacked: &DenseMatrix, kappa: usize, gamma: DenseMatrix) -> Self {
        match mode {
            Mode::Filter => LiftedState {
                a: stacked.cols_range(0, kappa),
                b: stacked.cols_range(kappa, stacked.cols()),
                gamma,
            },
            Mode::Feature => LiftedState {
                a: stacked.rows_range(0, kappa),
                b: stacked.rows_range(kappa, stacked.rows()),
                gamma,
            },
        }
    }

    /// The lifted point implied by separate factors: `A = Wβ` (Filter) or
    /// `A = βᵀH` (Feature), `B = WH`.
    pub fn from_factors(mode: Mode, f: &FactorState) -> Self {
        let a = match mode {
            Mode::Filter => f.w.matmul(&f.beta),
            Mode::Feature => f.beta.t_matmul(&f.h),
        };
        LiftedState { a, b: f.w.matmul(&f.h), gamma: f.gamma.clone() }
    }
}
