//! Generative SDL models and their samplers.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::classifier::{predictive_distribution, ScoreFunction};
use crate::error::{Result, SdlError};
use crate::linalg::{svd_full, DenseMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    WeakFilter,
    WeakFeature,
    StrongFilter,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dims {
    pub p: usize,
    pub q: usize,
    pub n: usize,
    pub r: usize,
    pub kappa: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Truth {
    /// `A*` is `p×κ` (filter) or `κ×n` (feature); `C*` is the auxiliary mean.
    Lifted { a: DenseMatrix, b: DenseMatrix, c: DenseMatrix, gamma: DenseMatrix },
    /// Shared code `h*` (`r×1`) and auxiliary mean `λ*` (`q×1`).
    Strong { w: DenseMatrix, h: DenseMatrix, beta: DenseMatrix, gamma: DenseMatrix, lambda: DenseMatrix },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerativeParams {
    pub variant: Variant,
    pub truth: Truth,
    pub sigma: f64,
    pub sigma_aux: f64,
    pub dims: Dims,
}

/// One simulated dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulatedData {
    pub x_data: DenseMatrix,
    pub x_aux: DenseMatrix,
    pub labels: Vec<usize>,
}

impl GenerativeParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma > 0.0) || !(self.sigma_aux > 0.0) {
            return Err(SdlError::argument("noise levels must be positive"));
        }
        let d = self.dims;
        let ok = match (&self.variant, &self.truth) {
            (Variant::WeakFilter, Truth::Lifted { a, b, c, gamma }) => {
                a.shape() == (d.p, d.kappa) && b.shape() == (d.p, d.n) && c.shape() == (d.q, d.n) && gamma.shape() == (d.q, d.kappa)
            }
            (Variant::WeakFeature, Truth::Lifted { a, b, c, gamma }) => {
                a.shape() == (d.kappa, d.n) && b.shape() == (d.p, d.n) && c.shape() == (d.q, d.n) && gamma.shape() == (d.q, d.kappa)
            }
            (Variant::StrongFilter, Truth::Strong { w, h, beta, gamma, lambda }) => {
                w.shape() == (d.p, d.r)
                    && h.shape() == (d.r, 1)
                    && beta.shape() == (d.r, d.kappa)
                    && gamma.shape() == (d.q, d.kappa)
                    && lambda.shape() == (d.q, 1)
            }
            _ => false,
        };
        if ok {
            Ok(())
        } else {
            Err(SdlError::argument("truth does not match the variant and dimensions"))
        }
    }

    /// `[A*, B*]` (filter) or `[A*; B*]` (feature).
    pub fn stacked_truth(&self) -> Option<DenseMatrix> {
        match (&self.variant, &self.truth) {
            (Variant::WeakFilter, Truth::Lifted { a, b, .. }) => Some(a.hstack(b)),
            (Variant::WeakFeature, Truth::Lifted { a, b, .. }) => Some(a.vstack(b)),
            _ => None,
        }
    }
}

fn gauss(rng: &mut ChaCha8Rng, rows: usize, cols: usize, scale: f64) -> DenseMatrix {
    DenseMatrix::from_fn(rows, cols, |_, _| scale * rng.sample::<f64, _>(StandardNormal))
}

fn orthonormal(rng: &mut ChaCha8Rng, p: usize, r: usize) -> Result<DenseMatrix> {
    let g = gauss(rng, p, r, 1.0);
    Ok(svd_full(&g)?.u.cols_range(0, r))
}

fn check_dims(d: &Dims) -> Result<()> {
    if d.r == 0 || d.kappa == 0 || d.n == 0 || d.r > d.p.min(d.n) {
        return Err(SdlError::argument(format!("invalid generative dimensions {d:?}")));
    }
    Ok(())
}

/// Random weak-model truth. The sample-independent parameters (`W`, `β`, `Γ*`)
/// come from a stream that does not depend on `n`, so the filter-mode `A*`
/// is shared across sample sizes for a fixed seed.
pub fn random_weak_params(variant: Variant, dims: Dims, sigma: f64, sigma_aux: f64, seed: u64) -> Result<GenerativeParams> {
    check_dims(&dims)?;
    let mut fixed = ChaCha8Rng::seed_from_u64(seed);
    let mut per_sample = ChaCha8Rng::seed_from_u64(seed ^ 0x5bd1_e995);
    let w = orthonormal(&mut fixed, dims.p, dims.r)?;
    let beta = gauss(&mut fixed, dims.r, dims.kappa, 0.35);
    let gamma = gauss(&mut fixed, dims.q, dims.kappa, 0.3);
    let h = gauss(&mut per_sample, dims.r, dims.n, 2.0);
    let c = gauss(&mut per_sample, dims.q, dims.n, 1.0);
    let b = w.matmul(&h);
    let a = match variant {
        Variant::WeakFilter => w.matmul(&beta),
        Variant::WeakFeature => beta.t_matmul(&h),
        Variant::StrongFilter => return Err(SdlError::argument("use random_strong_params for the strong model")),
    };
    let gp = GenerativeParams { variant, truth: Truth::Lifted { a, b, c, gamma }, sigma, sigma_aux, dims };
    gp.validate()?;
    Ok(gp)
}

pub fn random_strong_params(dims: Dims, sigma: f64, sigma_aux: f64, seed: u64) -> Result<GenerativeParams> {
    check_dims(&dims)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let truth = Truth::Strong {
        w: orthonormal(&mut rng, dims.p, dims.r)?,
        h: gauss(&mut rng, dims.r, 1, 1.0),
        beta: gauss(&mut rng, dims.r, dims.kappa, 0.5),
        gamma: gauss(&mut rng, dims.q, dims.kappa, 0.3),
        lambda: gauss(&mut rng, dims.q, 1, 1.0),
    };
    let gp = GenerativeParams { variant: Variant::StrongFilter, truth, sigma, sigma_aux, dims };
    gp.validate()?;
    Ok(gp)
}

fn add_noise(rng: &mut ChaCha8Rng, mean: &DenseMatrix, sd: f64) -> Result<DenseMatrix> {
    let normal = Normal::new(0.0, sd).map_err(|e| SdlError::argument(e.to_string()))?;
    let mut out = mean.clone();
    for v in out.data_mut() {
        *v += normal.sample(rng);
    }
    Ok(out)
}

/// Draw a label from `g(a)` by inverse CDF.
pub(crate) fn draw_label(rng: &mut ChaCha8Rng, a: &[f64]) -> Result<usize> {
    let probs = predictive_distribution(a, ScoreFunction::Exp)?;
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (j, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return Ok(j);
        }
    }
    Ok(probs.len() - 1)
}

fn sample_labels(rng: &mut ChaCha8Rng, act: &DenseMatrix) -> Result<Vec<usize>> {
    (0..act.cols()).map(|s| draw_label(rng, &act.col(s))).collect()
}

fn expect(gp: &GenerativeParams, v: Variant) -> Result<()> {
    gp.validate()?;
    if gp.variant != v {
        return Err(SdlError::argument(format!("expected a {v:?} model, got {:?}", gp.variant)));
    }
    Ok(())
}

pub fn sample_weak_filter(gp: &GenerativeParams, seed: u64) -> Result<SimulatedData> {
    expect(gp, Variant::WeakFilter)?;
    let Truth::Lifted { a, b, c, gamma } = &gp.truth else { unreachable!() };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x_data = add_noise(&mut rng, b, gp.sigma)?;
    let x_aux = add_noise(&mut rng, c, gp.sigma_aux)?;
    let act = &a.t_matmul(&x_data) + &gamma.t_matmul(&x_aux);
    let labels = sample_labels(&mut rng, &act)?;
    Ok(SimulatedData { x_data, x_aux, labels })
}

pub fn sample_weak_feature(gp: &GenerativeParams, seed: u64) -> Result<SimulatedData> {
    expect(gp, Variant::WeakFeature)?;
    let Truth::Lifted { a, b, c, gamma } = &gp.truth else { unreachable!() };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x_data = add_noise(&mut rng, b, gp.sigma)?;
    let x_aux = add_noise(&mut rng, c, gp.sigma_aux)?;
    let act = a + &gamma.t_matmul(&x_aux);
    let labels = sample_labels(&mut rng, &act)?;
    Ok(SimulatedData { x_data, x_aux, labels })
}

pub fn sample_strong_filter(gp: &GenerativeParams, seed: u64) -> Result<SimulatedData> {
    expect(gp, Variant::StrongFilter)?;
    let Truth::Strong { w, h, beta, gamma, lambda } = &gp.truth else { unreachable!() };
    let d = gp.dims;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let wh = w.matmul(h);
    let mean_x = DenseMatrix::from_fn(d.p, d.n, |i, _| wh.get(i, 0));
    let mean_aux = DenseMatrix::from_fn(d.q, d.n, |i, _| lambda.get(i, 0));
    let x_data = add_noise(&mut rng, &mean_x, gp.sigma)?;
    let x_aux = add_noise(&mut rng, &mean_aux, gp.sigma_aux)?;
    let act = &w.matmul(beta).t_matmul(&x_data) + &gamma.t_matmul(&x_aux);
    let labels = sample_labels(&mut rng, &act)?;
    Ok(SimulatedData { x_data, x_aux, labels })
}

/// Dispatch on the model variant.
pub fn sample(gp: &GenerativeParams, seed: u64) -> Result<SimulatedData> {
    match gp.variant {
        Variant::WeakFilter => sample_weak_filter(gp, seed),
        Variant::WeakFeature => sample_weak_feature(gp, seed),
        Variant::StrongFilter => sample_strong_filter(gp, seed),
    }
}
