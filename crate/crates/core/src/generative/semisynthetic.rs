//! Semi-synthetic image-like data with separate reconstructive and
//! discriminative dictionaries.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::classifier::sigmoid;
use crate::error::{Result, SdlError};
use crate::linalg::DenseMatrix;

const SIDE: usize = 14;
const OWN_AMPLITUDE: f64 = 0.1;
/// Norm of the mean reconstructive atom in the bundled bases.
pub const BUNDLED_ATOM_NORM: f64 = 2.0;
/// Noise level of the bundled dataset.
pub const BUNDLED_SIGMA: f64 = 0.5;
/// Norm of the pooled discriminative direction in the bundled bases, so
/// that the label logits have standard deviation 6.
pub const BUNDLED_SIGNAL_NORM: f64 = 12.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SemiSyntheticSpec {
    pub p: usize,
    pub n: usize,
    pub r_bar: usize,
    pub r: usize,
    pub kappa: usize,
    pub sigma: f64,
    /// `p×r̄` reconstruction dictionary.
    pub basis_x: DenseMatrix,
    /// `p×r̄` discriminative dictionary.
    pub basis_y: DenseMatrix,
    /// Weights of the two pooled halves of `basis_y`.
    pub beta_true_y: [f64; 2],
}

impl SemiSyntheticSpec {
    /// Paper sample size, ranks and noise level with the bundled 14×14 blob
    /// bases.
    pub fn bundled() -> Self {
        let (basis_x, basis_y) = bundled_bases();
        SemiSyntheticSpec { p: SIDE * SIDE, n: 500, r_bar: 20, r: 2, kappa: 1, sigma: BUNDLED_SIGMA, basis_x, basis_y, beta_true_y: [1.0, -1.0] }
    }

    pub fn with_bases(mut self, basis_x: DenseMatrix, basis_y: DenseMatrix) -> Result<Self> {
        self.p = basis_x.rows();
        self.r_bar = basis_x.cols();
        self.basis_x = basis_x;
        self.basis_y = basis_y;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        let want = (self.p, self.r_bar);
        if self.basis_x.shape() != want || self.basis_y.shape() != want {
            return Err(SdlError::argument(format!(
                "bases must be {}x{}, got {:?} and {:?}",
                self.p,
                self.r_bar,
                self.basis_x.shape(),
                self.basis_y.shape()
            )));
        }
        if self.r_bar < 2 || self.n == 0 || !(self.sigma >= 0.0) {
            return Err(SdlError::argument("semi-synthetic spec needs r_bar >= 2, n >= 1, sigma >= 0"));
        }
        Ok(())
    }

    /// `[Σ first half, Σ second half]` of `basis_y`, `p×2`.
    pub fn pooled_y(&self) -> DenseMatrix {
        let half = self.r_bar.div_ceil(2);
        DenseMatrix::from_fn(self.p, 2, |i, k| {
            let range = if k == 0 { 0..half } else { half..self.r_bar };
            range.map(|j| self.basis_y.get(i, j)).sum()
        })
    }

    /// `W_Y,pooled · β_Y`, the direction the labels depend on.
    pub fn signal_direction(&self) -> Vec<f64> {
        self.pooled_y().matvec(&self.beta_true_y)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SemiSyntheticTruth {
    /// `r̄×n` codes, entries in `[0, 1)`.
    pub h_true: DenseMatrix,
    /// Pre-noise data `W_X H`.
    pub x0: DenseMatrix,
    pub probs: Vec<f64>,
    pub seed: u64,
}

fn bump(ci: f64, cj: f64, width: f64, cols: std::ops::Range<usize>, rows: std::ops::Range<usize>) -> Vec<f64> {
    let mut v = vec![0.0; SIDE * SIDE];
    for i in rows {
        for j in cols.clone() {
            let d2 = (i as f64 - ci).powi(2) + (j as f64 - cj).powi(2);
            v[i * SIDE + j] = (-d2 / (2.0 * width * width)).exp();
        }
    }
    v
}

/// Bundled 14×14 blob dictionaries.
///
/// Reconstructive atoms live on the left half of the image and share a
/// large common blob, so most of `W_X H` is captured by one component.
/// Discriminative atoms live on the right half: the first ten in the top
/// quadrant, the last ten (at a quarter of the amplitude) in the bottom one.
/// The two dictionaries have disjoint supports and are orthogonal.
pub fn bundled_bases() -> (DenseMatrix, DenseMatrix) {
    let p = SIDE * SIDE;
    let half = SIDE / 2;
    let f = SIDE as f64 / 28.0;
    let mut bx = DenseMatrix::zeros(p, 20);
    let mut by = DenseMatrix::zeros(p, 20);
    let common = bump(13.5 * f, 6.5 * f, 4.0 * f, 0..half, 0..SIDE);
    for j in 0..20 {
        let ci = f * (3.0 + 2.2 * (j % 10) as f64);
        let cj = f * (2.0 + 8.0 * (j / 10) as f64);
        let own = bump(ci, cj, 1.5 * f, 0..half, 0..SIDE);
        for i in 0..p {
            bx.set(i, j, common[i] + OWN_AMPLITUDE * own[i]);
        }
        let (rows, amp) = if j < 10 { (0..half, 1.0) } else { (half..SIDE, 0.25) };
        let k = (j % 10) as f64;
        let ci = rows.start as f64 + f * (2.0 + k);
        let cj = f * (15.0 + 1.2 * k);
        let blob = bump(ci, cj, 2.0 * f, half..SIDE, rows);
        for i in 0..p {
            by.set(i, j, amp * blob[i]);
        }
    }
    let mean_atom: Vec<f64> = (0..p).map(|i| bx.row(i).iter().sum::<f64>() / 20.0).collect();
    let norm = mean_atom.iter().map(|v| v * v).sum::<f64>().sqrt();
    bx.scale_in_place(BUNDLED_ATOM_NORM / norm);
    let spec = SemiSyntheticSpec { p, n: 1, r_bar: 20, r: 2, kappa: 1, sigma: 0.0, basis_x: bx.clone(), basis_y: by.clone(), beta_true_y: [1.0, -1.0] };
    let u = spec.signal_direction();
    let unorm = u.iter().map(|v| v * v).sum::<f64>().sqrt();
    by.scale_in_place(BUNDLED_SIGNAL_NORM / unorm);
    (bx, by)
}

/// `X = W_X H + N(0, σ²)`, `yᵢ ~ Bernoulli(σ(β_Yᵀ W_Y,pooledᵀ xᵢ))`.
pub fn make_semisynthetic(spec: &SemiSyntheticSpec, seed: u64) -> Result<(DenseMatrix, Vec<usize>, SemiSyntheticTruth)> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let h_true = DenseMatrix::from_fn(spec.r_bar, spec.n, |_, _| rng.random::<f64>());
    let x0 = spec.basis_x.matmul(&h_true);
    let mut x = x0.clone();
    if spec.sigma > 0.0 {
        let normal = Normal::new(0.0, spec.sigma).map_err(|e| SdlError::argument(e.to_string()))?;
        for v in x.data_mut() {
            *v += normal.sample(&mut rng);
        }
    }
    let u = spec.signal_direction();
    let logits = x.t_matvec(&u);
    let probs: Vec<f64> = logits.iter().map(|&l| sigmoid(l)).collect();
    let labels = probs.iter().map(|&pi| usize::from(rng.random::<f64>() < pi)).collect();
    Ok((x, labels, SemiSyntheticTruth { h_true, x0, probs, seed }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_bases_are_orthogonal_and_nonnegative() {
        let (bx, by) = bundled_bases();
        assert_eq!(bx.shape(), (196, 20));
        assert!(bx.min_entry() >= 0.0 && by.min_entry() >= 0.0);
        assert!(bx.t_matmul(&by).max_abs() == 0.0);
        let spec = SemiSyntheticSpec::bundled();
        let u = spec.signal_direction();
        let unorm = u.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!((unorm - BUNDLED_SIGNAL_NORM).abs() < 1e-9);
    }

    #[test]
    fn null_signal_gives_fair_coin() {
        let mut spec = SemiSyntheticSpec::bundled();
        spec.sigma = 0.0;
        spec.beta_true_y = [0.0, 0.0];
        spec.n = 4000;
        let (_, labels, truth) = make_semisynthetic(&spec, 3).unwrap();
        assert!(truth.probs.iter().all(|&p| p == 0.5));
        let rate = labels.iter().sum::<usize>() as f64 / spec.n as f64;
        assert!((rate - 0.5).abs() <= 3.0 / (4.0 * spec.n as f64).sqrt());
    }

    #[test]
    fn codes_in_unit_interval_and_pre_noise_nonnegative() {
        let spec = SemiSyntheticSpec::bundled();
        let (_, _, truth) = make_semisynthetic(&spec, 4).unwrap();
        assert!(truth.h_true.data().iter().all(|&v| (0.0..1.0).contains(&v)));
        assert!(truth.x0.min_entry() >= 0.0);
    }

    #[test]
    fn deterministic_and_shape_checked() {
        let spec = SemiSyntheticSpec::bundled();
        let a = make_semisynthetic(&spec, 5).unwrap();
        let b = make_semisynthetic(&spec, 5).unwrap();
        assert_eq!(a.0, b.0);
        assert_eq!(a.1, b.1);
        let bad = SemiSyntheticSpec::bundled().with_bases(DenseMatrix::zeros(196, 20), DenseMatrix::zeros(150, 20));
        assert!(matches!(bad, Err(SdlError::Argument(_))));
    }

    #[test]
    fn labels_carry_signal() {
        let spec = SemiSyntheticSpec::bundled();
        let (x, labels, _) = make_semisynthetic(&spec, 6).unwrap();
        let u = spec.signal_direction();
        let logits = x.t_matvec(&u);
        let agree = logits.iter().zip(&labels).filter(|(l, y)| (**l > 0.0) == (**y == 1)).count();
        assert!(agree as f64 / spec.n as f64 > 0.75);
    }
}
