//! Multinomial classification head with a general score function `h`.
//!
//! Class 0 is the reference class: `g_0(a) = 1/(1+Σ_c h(a_c))` and
//! `g_j(a) = h(a_j)/(1+Σ_c h(a_c))` for `j = 1..κ`. Label `y = j` pairs with
//! activation entry `a[j-1]`.

use serde::{Deserialize, Serialize};

use crate::error::{Result, SdlError};
use crate::linalg::{symmetric_eigenvalues, DenseMatrix};

/// Nonnegative score function with its first two derivatives.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ScoreFunction {
    /// `h = exp`, the multinomial logit.
    #[default]
    Exp,
    /// `h(x) = ln(1 + e^x)`. Exercises the general formulas only.
    Softplus,
}

impl ScoreFunction {
    pub fn tag(&self) -> &'static str {
        match self {
            ScoreFunction::Exp => "exp",
            ScoreFunction::Softplus => "softplus",
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        match self {
            ScoreFunction::Exp => x.exp(),
            ScoreFunction::Softplus => softplus(x),
        }
    }

    pub fn deriv1(&self, x: f64) -> f64 {
        match self {
            ScoreFunction::Exp => x.exp(),
            ScoreFunction::Softplus => sigmoid(x),
        }
    }

    pub fn deriv2(&self, x: f64) -> f64 {
        match self {
            ScoreFunction::Exp => x.exp(),
            ScoreFunction::Softplus => {
                let s = sigmoid(x);
                s * (1.0 - s)
            }
        }
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn softplus(x: f64) -> f64 {
    if x > 30.0 {
        x + (-x).exp()
    } else {
        x.exp().ln_1p()
    }
}

/// Eigenvalue and stiffness constants for the multinomial logit under `‖a‖ ≤ M`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassBounds {
    pub gamma_max: f64,
    pub alpha_minus: f64,
    pub alpha_plus: f64,
    #[serde(rename = "M")]
    pub m: f64,
}

impl ClassBounds {
    /// Whether `0 < α⁻ ≤ α⁺` and `γ_max > 0`. The closed forms break the
    /// ordering for `κ = 1`.
    pub fn is_ordered(&self) -> bool {
        self.alpha_minus > 0.0 && self.alpha_minus <= self.alpha_plus && self.gamma_max > 0.0
    }
}

/// `h(a_j)` for every entry, with the normalizer `1 + Σ h(a_j)`.
fn scores(a: &[f64], h: ScoreFunction) -> Result<(Vec<f64>, f64)> {
    let s: Vec<f64> = a.iter().map(|&x| h.eval(x)).collect();
    if s.iter().any(|v| !v.is_finite()) {
        return Err(SdlError::numeric(format!("score {} overflowed at activation {a:?}", h.tag())));
    }
    let z = 1.0 + s.iter().sum::<f64>();
    Ok((s, z))
}

/// Probabilities `(g_0, g_1, …, g_κ)`.
pub fn predictive_distribution(a: &[f64], h: ScoreFunction) -> Result<Vec<f64>> {
    if a.iter().any(|v| !v.is_finite()) {
        return Err(SdlError::numeric("non-finite activation"));
    }
    match h {
        ScoreFunction::Exp => {
            let mx = a.iter().cloned().fold(0.0f64, f64::max);
            let mut out = Vec::with_capacity(a.len() + 1);
            out.push((-mx).exp());
            out.extend(a.iter().map(|&x| (x - mx).exp()));
            let z: f64 = out.iter().sum();
            out.iter_mut().for_each(|v| *v /= z);
            Ok(out)
        }
        _ => {
            let (s, z) = scores(a, h)?;
            let mut out = Vec::with_capacity(a.len() + 1);
            out.push(1.0 / z);
            out.extend(s.iter().map(|v| v / z));
            Ok(out)
        }
    }
}

/// Negative log likelihood of one label.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Nll {
    pub value: f64,
    /// Set when `g_y = 0`; `value` is then `+∞`.
    pub infinite: bool,
}

/// `-log g_y(a)`. Log-sum-exp stabilized for `h = exp`.
pub fn nll(y: usize, a: &[f64], h: ScoreFunction) -> Result<Nll> {
    check_label(y, a.len())?;
    match h {
        ScoreFunction::Exp => {
            let mx = a.iter().cloned().fold(0.0f64, f64::max);
            let lse = mx + ((-mx).exp() + a.iter().map(|&x| (x - mx).exp()).sum::<f64>()).ln();
            let ay = if y == 0 { 0.0 } else { a[y - 1] };
            let value = lse - ay;
            if !value.is_finite() {
                return Err(SdlError::numeric("non-finite nll"));
            }
            Ok(Nll { value: value.max(0.0), infinite: false })
        }
        _ => {
            let (s, z) = scores(a, h)?;
            let num = if y == 0 { 1.0 } else { s[y - 1] };
            if num <= 0.0 {
                return Ok(Nll { value: f64::INFINITY, infinite: true });
            }
            Ok(Nll { value: (z / num).ln(), infinite: false })
        }
    }
}

fn check_label(y: usize, kappa: usize) -> Result<()> {
    if y > kappa {
        return Err(SdlError::argument(format!("label {y} outside 0..={kappa}")));
    }
    Ok(())
}

/// Gradient of `nll(y, ·)` at `a`: `ḣ_j = h'(a_j)/(1+Σh) − 1(y=j) h'(a_j)/h(a_j)`.
pub fn hdot(y: usize, a: &[f64], h: ScoreFunction) -> Result<Vec<f64>> {
    check_label(y, a.len())?;
    match h {
        ScoreFunction::Exp => {
            let g = predictive_distribution(a, h)?;
            Ok((0..a.len()).map(|j| g[j + 1] - if y == j + 1 { 1.0 } else { 0.0 }).collect())
        }
        _ => {
            let (s, z) = scores(a, h)?;
            let mut out = Vec::with_capacity(a.len());
            for j in 0..a.len() {
                let d1 = h.deriv1(a[j]);
                let mut v = d1 / z;
                if y == j + 1 {
                    if s[j] <= 0.0 {
                        return Err(SdlError::numeric("h(a_j) = 0 in hdot"));
                    }
                    v -= d1 / s[j];
                }
                out.push(v);
            }
            Ok(out)
        }
    }
}

/// Hessian of `nll(y, ·)` at `a` (κ×κ, symmetric).
pub fn hddot(y: usize, a: &[f64], h: ScoreFunction) -> Result<DenseMatrix> {
    check_label(y, a.len())?;
    let k = a.len();
    match h {
        ScoreFunction::Exp => {
            let g = predictive_distribution(a, h)?;
            Ok(DenseMatrix::from_fn(k, k, |i, j| {
                let gi = g[i + 1];
                gi * (if i == j { 1.0 } else { 0.0 } - g[j + 1])
            }))
        }
        _ => {
            let (s, z) = scores(a, h)?;
            let d1: Vec<f64> = a.iter().map(|&x| h.deriv1(x)).collect();
            let d2: Vec<f64> = a.iter().map(|&x| h.deriv2(x)).collect();
            let mut m = DenseMatrix::zeros(k, k);
            for i in 0..k {
                for j in 0..k {
                    let mut v = -d1[i] * d1[j] / (z * z);
                    if i == j {
                        v += d2[j] / z;
                        if y == j + 1 {
                            if s[j] <= 0.0 {
                                return Err(SdlError::numeric("h(a_j) = 0 in hddot"));
                            }
                            v -= d2[j] / s[j] - d1[j] * d1[j] / (s[j] * s[j]);
                        }
                    }
                    m.set(i, j, v);
                }
            }
            Ok(m)
        }
    }
}

/// Closed-form multinomial-logit constants for `‖a‖ ≤ M`:
/// `γ_max = 1 + e^M/(1+e^M+(κ−1)e^{−M})`,
/// `α⁻ = e^{−M}/(1+e^{−M}+(κ−1)e^M)`,
/// `α⁺ = e^M(1+2(κ−1)e^M)/(1+e^M+(κ−1)e^{−M})²`.
pub fn logit_bounds(m: f64, kappa: usize) -> Result<ClassBounds> {
    if !(m > 0.0) || !m.is_finite() {
        return Err(SdlError::argument(format!("activation bound M must be positive, got {m}")));
    }
    if kappa == 0 {
        return Err(SdlError::argument("kappa must be at least 1"));
    }
    let k1 = (kappa - 1) as f64;
    let ep = m.exp();
    let em = (-m).exp();
    let denom_plus = 1.0 + ep + k1 * em;
    Ok(ClassBounds {
        gamma_max: 1.0 + ep / denom_plus,
        alpha_minus: em / (1.0 + em + k1 * ep),
        alpha_plus: ep * (1.0 + 2.0 * k1 * ep) / (denom_plus * denom_plus),
        m,
    })
}

/// Smallest eigenvalue of `Ḧ(y, a)` over labels `y` and the given activations.
/// Used at problem setup to flag score functions that lose positive curvature.
pub fn min_curvature(h: ScoreFunction, activations: &[Vec<f64>]) -> Result<f64> {
    let mut lo = f64::INFINITY;
    for a in activations {
        for y in 0..=a.len() {
            let ev = symmetric_eigenvalues(&hddot(y, a, h)?)?;
            lo = lo.min(ev[0]);
        }
    }
    Ok(lo)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const SCORES: [ScoreFunction; 2] = [ScoreFunction::Exp, ScoreFunction::Softplus];

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * b.abs().max(1.0)
    }

    #[test]
    fn distribution_examples() {
        assert_eq!(predictive_distribution(&[0.0], ScoreFunction::Exp).unwrap(), vec![0.5, 0.5]);
        let g = predictive_distribution(&[0.0, 0.0], ScoreFunction::Exp).unwrap();
        for v in g {
            assert!((v - 1.0 / 3.0).abs() < 1e-15);
        }
        let g = predictive_distribution(&[3f64.ln()], ScoreFunction::Exp).unwrap();
        assert!((g[0] - 0.25).abs() < 1e-15 && (g[1] - 0.75).abs() < 1e-15);
    }

    #[test]
    fn nll_examples() {
        let e = ScoreFunction::Exp;
        assert!((nll(0, &[0.0], e).unwrap().value - 2f64.ln()).abs() < 1e-15);
        for y in 0..3 {
            assert!((nll(y, &[0.0, 0.0], e).unwrap().value - 3f64.ln()).abs() < 1e-15);
        }
        assert!((nll(1, &[3f64.ln()], e).unwrap().value + 0.75f64.ln()).abs() < 1e-15);
        assert!(nll(2, &[0.0], e).is_err());
    }

    #[test]
    fn nll_stable_at_large_activation() {
        let v = nll(0, &[800.0, -5.0], ScoreFunction::Exp).unwrap();
        assert!((v.value - 800.0).abs() < 1e-9);
        assert!(!v.infinite);
    }

    #[test]
    fn hdot_and_hddot_examples() {
        let e = ScoreFunction::Exp;
        assert_eq!(hdot(0, &[0.0], e).unwrap(), vec![0.5]);
        assert_eq!(hdot(1, &[0.0], e).unwrap(), vec![-0.5]);
        assert!((hddot(0, &[0.0], e).unwrap().get(0, 0) - 0.25).abs() < 1e-15);
        let h = hddot(1, &[0.0, 0.0], e).unwrap();
        let want = [[2.0 / 9.0, -1.0 / 9.0], [-1.0 / 9.0, 2.0 / 9.0]];
        for i in 0..2 {
            for j in 0..2 {
                assert!((h.get(i, j) - want[i][j]).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn generic_path_matches_exp_specialization() {
        // The general formulas with h = exp written out by hand.
        let a = [0.3, -1.2, 0.8];
        for y in 0..4 {
            let z = 1.0 + a.iter().map(|x: &f64| x.exp()).sum::<f64>();
            let direct: Vec<f64> = (0..3)
                .map(|j| a[j].exp() / z - if y == j + 1 { 1.0 } else { 0.0 })
                .collect();
            let got = hdot(y, &a, ScoreFunction::Exp).unwrap();
            for (g, d) in got.iter().zip(&direct) {
                assert!((g - d).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn unbiased_at_truth() {
        // E_{y~g(a)} hdot(y, a) = 0 for h = exp.
        let a = [0.7, -0.4];
        let g = predictive_distribution(&a, ScoreFunction::Exp).unwrap();
        let mut acc = [0.0; 2];
        for (y, gy) in g.iter().enumerate() {
            let d = hdot(y, &a, ScoreFunction::Exp).unwrap();
            acc[0] += gy * d[0];
            acc[1] += gy * d[1];
        }
        assert!(acc[0].abs() < 1e-16 && acc[1].abs() < 1e-16);
    }

    #[test]
    fn score_derivatives_match_finite_differences() {
        for h in SCORES {
            for i in -20..=20 {
                let x = i as f64 * 0.25;
                let eps = 1e-5;
                let d1 = (h.eval(x + eps) - h.eval(x - eps)) / (2.0 * eps);
                let d2 = (h.deriv1(x + eps) - h.deriv1(x - eps)) / (2.0 * eps);
                assert!(close(h.deriv1(x), d1, 1e-6), "{} d1 at {x}", h.tag());
                assert!(close(h.deriv2(x), d2, 1e-6), "{} d2 at {x}", h.tag());
                assert!(h.eval(x) >= 0.0);
            }
        }
    }

    #[test]
    fn logit_bounds_paper_facts() {
        for i in 1..=40 {
            let m = i as f64 * 0.25;
            let b = logit_bounds(m, 1).unwrap();
            assert!(b.alpha_plus <= 0.25, "M={m}: α⁺={}", b.alpha_plus);
            for kappa in 1..=5 {
                assert!(logit_bounds(m, kappa).unwrap().gamma_max <= 2.0);
            }
        }
        assert!(logit_bounds(0.0, 1).is_err());
        assert!(logit_bounds(1.0, 0).is_err());
    }

    #[test]
    fn logit_bounds_kappa_one_ordering_breaks() {
        // For κ = 1, α⁻ = 1/(1+e^M) while α⁺ = e^M/(1+e^M)², so α⁻ > α⁺.
        let b = logit_bounds(0.5, 1).unwrap();
        assert!(b.alpha_minus > b.alpha_plus);
        assert!(!b.is_ordered());
        assert!(logit_bounds(1.0, 2).unwrap().is_ordered());
    }

    #[test]
    fn curvature_check_separates_scores() {
        let acts: Vec<Vec<f64>> = (0..20).map(|i| vec![i as f64 * 0.2 - 2.0, 1.0 - i as f64 * 0.1]).collect();
        assert!(min_curvature(ScoreFunction::Exp, &acts).unwrap() > 0.0);
        // Softplus is not log-concave enough everywhere: the observed-label
        // term can make Ḧ indefinite. This is what the setup warning catches.
        assert!(min_curvature(ScoreFunction::Softplus, &acts).unwrap() < 0.0);
    }

    fn act_strategy() -> impl Strategy<Value = (usize, Vec<f64>)> {
        (1usize..=3).prop_flat_map(|k| (0..=k, proptest::collection::vec(-3.0f64..3.0, k)))
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(50))]

        #[test]
        fn distribution_normalized(a in proptest::collection::vec(-50.0f64..50.0, 1..5)) {
            for h in SCORES {
                let g = predictive_distribution(&a, h).unwrap();
                prop_assert!((g.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
                prop_assert!(g.iter().all(|&v| v >= 0.0));
            }
        }

        #[test]
        fn derivatives_match_nll_finite_differences((y, a) in act_strategy()) {
            let eps = 1e-5;
            for h in SCORES {
                let d = hdot(y, &a, h).unwrap();
                let hh = hddot(y, &a, h).unwrap();
                for j in 0..a.len() {
                    let mut ap = a.clone();
                    let mut am = a.clone();
                    ap[j] += eps;
                    am[j] -= eps;
                    let fd = (nll(y, &ap, h).unwrap().value - nll(y, &am, h).unwrap().value) / (2.0 * eps);
                    prop_assert!(close(d[j], fd, 1e-6), "{} hdot[{j}] {} vs {fd}", h.tag(), d[j]);
                    let gp = hdot(y, &ap, h).unwrap();
                    let gm = hdot(y, &am, h).unwrap();
                    for i in 0..a.len() {
                        let fd2 = (gp[i] - gm[i]) / (2.0 * eps);
                        prop_assert!(close(hh.get(i, j), fd2, 1e-5), "{} hddot[{i},{j}]", h.tag());
                    }
                }
                prop_assert!((&hh - &hh.transpose()).max_abs() == 0.0);
            }
        }
    }
}
