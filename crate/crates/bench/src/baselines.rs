//! Reference methods for the Pareto comparison: logistic regression on raw
//! features and NMF (HALS) followed by logistic regression on the codes.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sdl_core::classifier::{hdot, nll, predictive_distribution, ScoreFunction};
use sdl_core::{DenseMatrix, Result, SdlError};

/// Multinomial logistic regression with an intercept and a ridge penalty,
/// fit on row-standardized features.
#[derive(Debug, Clone)]
pub struct LogisticModel {
    /// `d×κ` weights on standardized features.
    pub theta: DenseMatrix,
    pub intercept: Vec<f64>,
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

#[derive(Debug, Clone, Copy)]
pub struct LogisticConfig {
    pub ridge: f64,
    pub iters: usize,
}

impl Default for LogisticConfig {
    fn default() -> Self {
        LogisticConfig { ridge: 1.0, iters: 300 }
    }
}

fn standardize(f: &DenseMatrix, mean: &[f64], scale: &[f64]) -> DenseMatrix {
    DenseMatrix::from_fn(f.rows(), f.cols(), |i, j| (f.get(i, j) - mean[i]) / scale[i])
}

fn lr_objective(z: &DenseMatrix, labels: &[usize], theta: &DenseMatrix, b: &[f64], ridge: f64) -> Result<f64> {
    let act = theta.t_matmul(z);
    let mut total = ridge * theta.frobenius_norm_sq();
    for (s, &y) in labels.iter().enumerate() {
        let a: Vec<f64> = (0..b.len()).map(|c| act.get(c, s) + b[c]).collect();
        total += nll(y, &a, ScoreFunction::Exp)?.value;
    }
    Ok(total)
}

/// Gradient descent with Armijo backtracking on the (convex) penalized NLL.
pub fn fit_logistic(features: &DenseMatrix, labels: &[usize], kappa: usize, cfg: &LogisticConfig) -> Result<LogisticModel> {
    let (d, n) = features.shape();
    if labels.len() != n || n == 0 {
        return Err(SdlError::argument("feature/label count mismatch"));
    }
    let mean = features.col_mean();
    let scale: Vec<f64> = (0..d)
        .map(|i| {
            let v = features.row(i).iter().map(|x| (x - mean[i]).powi(2)).sum::<f64>() / n as f64;
            if v > 1e-24 {
                v.sqrt()
            } else {
                1.0
            }
        })
        .collect();
    let z = standardize(features, &mean, &scale);
    let mut theta = DenseMatrix::zeros(d, kappa);
    let mut b = vec![0.0; kappa];
    let mut f = lr_objective(&z, labels, &theta, &b, cfg.ridge)?;
    let mut step = 1.0 / n as f64;
    for _ in 0..cfg.iters {
        let act = theta.t_matmul(&z);
        let mut k = DenseMatrix::zeros(kappa, n);
        for (s, &y) in labels.iter().enumerate() {
            let a: Vec<f64> = (0..kappa).map(|c| act.get(c, s) + b[c]).collect();
            for (c, v) in hdot(y, &a, ScoreFunction::Exp)?.into_iter().enumerate() {
                k.set(c, s, v);
            }
        }
        let mut g = z.matmul_t(&k);
        g.axpy(2.0 * cfg.ridge, &theta);
        let gb: Vec<f64> = (0..kappa).map(|c| k.row(c).iter().sum()).collect();
        let gnorm_sq = g.frobenius_norm_sq() + gb.iter().map(|v| v * v).sum::<f64>();
        if gnorm_sq < 1e-20 {
            break;
        }
        step *= 2.0;
        loop {
            let mut t2 = theta.clone();
            t2.axpy(-step, &g);
            let b2: Vec<f64> = b.iter().zip(&gb).map(|(x, g)| x - step * g).collect();
            let f2 = lr_objective(&z, labels, &t2, &b2, cfg.ridge)?;
            if f2 <= f - 0.5 * step * gnorm_sq {
                theta = t2;
                b = b2;
                f = f2;
                break;
            }
            step *= 0.5;
            if step < 1e-16 {
                return Ok(LogisticModel { theta, intercept: b, mean, scale });
            }
        }
    }
    Ok(LogisticModel { theta, intercept: b, mean, scale })
}

impl LogisticModel {
    pub fn predict(&self, features: &DenseMatrix) -> Result<Vec<usize>> {
        let z = standardize(features, &self.mean, &self.scale);
        let act = self.theta.t_matmul(&z);
        (0..z.cols())
            .map(|s| {
                let a: Vec<f64> = (0..self.intercept.len()).map(|c| act.get(c, s) + self.intercept[c]).collect();
                let g = predictive_distribution(&a, ScoreFunction::Exp)?;
                let mut best = 0;
                for (j, &v) in g.iter().enumerate() {
                    if v > g[best] {
                        best = j;
                    }
                }
                Ok(best)
            })
            .collect()
    }
}

/// Nonnegative factorization `X ≈ WH` by hierarchical alternating least
/// squares. `X` itself may have negative entries.
#[derive(Debug, Clone)]
pub struct NmfFit {
    pub w: DenseMatrix,
    pub h: DenseMatrix,
}

const HALS_FLOOR: f64 = 1e-12;

pub fn nmf_hals(x: &DenseMatrix, r: usize, iters: usize, seed: u64) -> Result<NmfFit> {
    let (p, n) = x.shape();
    if r == 0 || r > p.min(n) {
        return Err(SdlError::argument(format!("NMF rank {r} out of range")));
    }
    let pos_mean = x.data().iter().map(|v| v.max(0.0)).sum::<f64>() / x.len() as f64;
    let s = (pos_mean / r as f64).sqrt().max(1e-6);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut w = DenseMatrix::from_fn(p, r, |_, _| s * rng.random::<f64>());
    let mut h = DenseMatrix::from_fn(r, n, |_, _| s * rng.random::<f64>());
    for _ in 0..iters {
        let wtx = w.t_matmul(x);
        let wtw = w.t_matmul(&w);
        for k in 0..r {
            let d = wtw.get(k, k).max(HALS_FLOOR);
            for j in 0..n {
                let mut acc = wtx.get(k, j);
                for l in 0..r {
                    acc -= wtw.get(k, l) * h.get(l, j);
                }
                let v = (h.get(k, j) + acc / d).max(0.0);
                h.set(k, j, v);
            }
        }
        let xht = x.matmul_t(&h);
        let hht = h.matmul_t(&h);
        for k in 0..r {
            let d = hht.get(k, k).max(HALS_FLOOR);
            for i in 0..p {
                let mut acc = xht.get(i, k);
                for l in 0..r {
                    acc -= w.get(i, l) * hht.get(l, k);
                }
                let v = (w.get(i, k) + acc / d).max(0.0);
                w.set(i, k, v);
            }
        }
    }
    if !w.is_finite() || !h.is_finite() {
        return Err(SdlError::numeric("NMF produced non-finite factors"));
    }
    Ok(NmfFit { w, h })
}

/// Nonnegative least-squares codes of new samples against a fixed `W`.
pub fn nmf_encode(w: &DenseMatrix, x: &DenseMatrix, iters: usize) -> DenseMatrix {
    let r = w.cols();
    let n = x.cols();
    let wtx = w.t_matmul(x);
    let wtw = w.t_matmul(w);
    let mut h = DenseMatrix::zeros(r, n);
    for _ in 0..iters {
        for k in 0..r {
            let d = wtw.get(k, k).max(HALS_FLOOR);
            for j in 0..n {
                let mut acc = wtx.get(k, j);
                for l in 0..r {
                    acc -= wtw.get(k, l) * h.get(l, j);
                }
                h.set(k, j, (h.get(k, j) + acc / d).max(0.0));
            }
        }
    }
    h
}
