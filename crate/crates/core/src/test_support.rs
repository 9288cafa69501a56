//! Seeded fixtures shared by unit tests.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::linalg::DenseMatrix;
use crate::loss::{FactorState, Mode, SdlProblem};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian(rng: &mut ChaCha8Rng, rows: usize, cols: usize, scale: f64) -> DenseMatrix {
    DenseMatrix::from_fn(rows, cols, |_, _| scale * rng.sample::<f64, _>(StandardNormal))
}

#[allow(clippy::too_many_arguments)]
pub fn random_problem(
    seed: u64,
    p: usize,
    n: usize,
    r: usize,
    q: usize,
    kappa: usize,
    xi: f64,
    nu: f64,
    mode: Mode,
) -> SdlProblem {
    let mut g = rng(seed);
    let x = gaussian(&mut g, p, n, 1.0);
    let aux = if q > 0 { Some(gaussian(&mut g, q, n, 1.0)) } else { None };
    let labels = (0..n).map(|_| g.random_range(0..=kappa)).collect();
    SdlProblem::new(x, aux, labels, kappa, r, xi, nu, mode).unwrap()
}

pub fn random_state(seed: u64, prob: &SdlProblem, scale: f64) -> FactorState {
    let mut g = rng(seed ^ 0x9e37_79b9_7f4a_7c15);
    FactorState {
        w: gaussian(&mut g, prob.p(), prob.r(), scale),
        h: gaussian(&mut g, prob.r(), prob.n(), scale),
        beta: gaussian(&mut g, prob.r(), prob.kappa, scale),
        gamma: gaussian(&mut g, prob.q(), prob.kappa, scale),
    }
}
