use super::*;
use crate::classifier::ScoreFunction;
use crate::linalg::{symmetric_eigenvalues, DenseMatrix};
use crate::test_support::{random_problem, random_state};

/// Scalar-loop oracle for the separate loss, exp score only.
fn naive_loss(prob: &SdlProblem, st: &FactorState) -> f64 {
    let (p, n, r, q, k) = (prob.p(), prob.n(), prob.r(), prob.q(), prob.kappa);
    let mut total = 0.0;
    for s in 0..n {
        let mut a = vec![0.0; k];
        for j in 0..k {
            for l in 0..r {
                let feat = match prob.mode {
                    Mode::Filter => (0..p).map(|i| st.w.get(i, l) * prob.x_data.get(i, s)).sum::<f64>(),
                    Mode::Feature => st.h.get(l, s),
                };
                a[j] += st.beta.get(l, j) * feat;
            }
            for i in 0..q {
                a[j] += st.gamma.get(i, j) * prob.x_aux.get(i, s);
            }
        }
        let z: f64 = 1.0 + a.iter().map(|v| v.exp()).sum::<f64>();
        let y = prob.labels[s];
        let num = if y == 0 { 1.0 } else { a[y - 1].exp() };
        total -= (num / z).ln();
    }
    for i in 0..p {
        for s in 0..n {
            let wh: f64 = (0..r).map(|l| st.w.get(i, l) * st.h.get(l, s)).sum();
            total += prob.xi * (prob.x_data.get(i, s) - wh).powi(2);
        }
    }
    let mut reg = 0.0;
    match prob.mode {
        Mode::Filter => {
            for i in 0..p {
                for j in 0..k {
                    let v: f64 = (0..r).map(|l| st.w.get(i, l) * st.beta.get(l, j)).sum();
                    reg += v * v;
                }
            }
        }
        Mode::Feature => {
            for j in 0..k {
                for s in 0..n {
                    let v: f64 = (0..r).map(|l| st.beta.get(l, j) * st.h.get(l, s)).sum();
                    reg += v * v;
                }
            }
        }
    }
    reg += st.gamma.frobenius_norm_sq();
    total + prob.nu * reg
}

fn fd_grad(f: impl Fn(&[f64]) -> f64, x: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(x.len());
    let mut xp = x.to_vec();
    for i in 0..x.len() {
        let h = 1e-6 * x[i].abs().max(1.0);
        let orig = xp[i];
        xp[i] = orig + h;
        let fp = f(&xp);
        xp[i] = orig - h;
        let fm = f(&xp);
        xp[i] = orig;
        out.push((fp - fm) / (2.0 * h));
    }
    out
}

fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let scale: f64 = b.iter().map(|y| y * y).sum::<f64>().sqrt().max(1e-8);
    diff / scale
}

#[test]
fn activation_examples() {
    let prob = random_problem(1, 5, 4, 2, 2, 1, 1.0, 0.0, Mode::Filter);
    let st = FactorState::zeros(&prob);
    assert_eq!(activation(&prob, 0, &st), vec![0.0]);

    let mut x = DenseMatrix::zeros(3, 2);
    x.set(0, 0, 2.0);
    let prob = SdlProblem::new(x, None, vec![0, 1], 1, 1, 1.0, 0.0, Mode::Filter).unwrap();
    let mut st = FactorState::zeros(&prob);
    st.w.set(0, 0, 1.0);
    st.beta.set(0, 0, 1.0);
    assert_eq!(activation(&prob, 0, &st), vec![2.0]);
}

#[test]
fn activation_matrix_matches_per_sample() {
    for mode in [Mode::Filter, Mode::Feature] {
        let prob = random_problem(3, 6, 9, 2, 2, 2, 1.0, 0.5, mode);
        let st = random_state(4, &prob, 0.5);
        let act = activations(&prob, &st);
        for s in 0..prob.n() {
            let a = activation(&prob, s, &st);
            for j in 0..prob.kappa {
                assert!((a[j] - act.get(j, s)).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn loss_zero_state() {
    for mode in [Mode::Filter, Mode::Feature] {
        let prob = random_problem(5, 6, 9, 2, 2, 2, 0.7, 0.0, mode);
        let st = FactorState::zeros(&prob);
        let want = prob.n() as f64 * 3f64.ln() + 0.7 * prob.x_data.frobenius_norm_sq();
        assert!((loss_separate(&prob, &st).unwrap() - want).abs() < 1e-10);
        let z = LiftedState::zeros(&prob);
        assert!((loss_lifted(&prob, &z).unwrap() - want).abs() < 1e-10);
    }
}

#[test]
fn loss_matches_scalar_oracle() {
    for mode in [Mode::Filter, Mode::Feature] {
        for seed in 0..5 {
            let prob = random_problem(seed, 6, 9, 2, 2, 2, 0.8, 0.3, mode);
            let st = random_state(seed + 100, &prob, 0.7);
            let got = loss_separate(&prob, &st).unwrap();
            let want = naive_loss(&prob, &st);
            assert!((got - want).abs() <= 1e-10 * want.abs().max(1.0), "{mode:?} seed {seed}: {got} vs {want}");
        }
    }
}

#[test]
fn xi_zero_leaves_pure_nll() {
    let prob = random_problem(9, 5, 7, 2, 0, 1, 0.0, 0.0, Mode::Filter);
    let st = random_state(10, &prob, 1.0);
    let act = activations(&prob, &st);
    let direct: f64 = (0..prob.n())
        .map(|s| crate::classifier::nll(prob.labels[s], &act.col(s), ScoreFunction::Exp).unwrap().value)
        .sum();
    assert!((loss_separate(&prob, &st).unwrap() - direct).abs() < 1e-12);
}

#[test]
fn doubling_xi_doubles_reconstruction_term() {
    let prob = random_problem(11, 5, 7, 2, 1, 2, 1.3, 0.4, Mode::Feature);
    let st = random_state(12, &prob, 0.5);
    let mut p0 = prob.clone();
    p0.xi = 0.0;
    let mut p2 = prob.clone();
    p2.xi = 2.6;
    let base = loss_separate(&p0, &st).unwrap();
    let r1 = loss_separate(&prob, &st).unwrap() - base;
    let r2 = loss_separate(&p2, &st).unwrap() - base;
    assert!((r2 - 2.0 * r1).abs() <= 1e-10 * r2.abs());
}

#[test]
fn gradient_examples() {
    // Residual-free H gradient.
    let prob = random_problem(13, 5, 7, 2, 0, 1, 1.0, 0.0, Mode::Filter);
    let mut st = random_state(14, &prob, 0.5);
    let mut exact = prob.clone();
    exact.x_data = st.w.matmul(&st.h);
    let g = grad_blocks(&exact, &st).unwrap();
    assert!(g.h.max_abs() < 1e-12);

    // Zero activation: K_js = 1/(1+κ) − 1(y_s = j).
    let mut p0 = random_problem(15, 5, 7, 2, 0, 2, 0.0, 0.0, Mode::Filter);
    p0.xi = 0.0;
    st = random_state(16, &p0, 0.5);
    st.beta = DenseMatrix::zeros(2, 2);
    let k = DenseMatrix::from_fn(2, 7, |j, s| 1.0 / 3.0 - if p0.labels[s] == j + 1 { 1.0 } else { 0.0 });
    let want = st.w.t_matmul(&p0.x_data.matmul_t(&k));
    let g = grad_blocks(&p0, &st).unwrap();
    assert!((&g.beta - &want).max_abs() < 1e-12);

    // Lifted: B = X gives zero B-gradient; zero activation gives X Kᵀ.
    let mut z = LiftedState::zeros(&p0);
    z.b = p0.x_data.clone();
    let gl = grad_lifted(&p0, &z).unwrap();
    assert!(gl.b.max_abs() == 0.0);
    assert!((&gl.a - &p0.x_data.matmul_t(&k)).max_abs() < 1e-12);
}

fn check_separate_grads(prob: &SdlProblem, st: &FactorState) {
    let g = flatten_state(&grad_blocks(prob, st).unwrap());
    let x0 = flatten_state(st);
    let fd = fd_grad(|v| loss_separate(prob, &unflatten_state(prob, v)).unwrap(), &x0);
    let layout = HessianLayout::new(prob);
    for (name, (a, b)) in ["W", "H", "beta", "gamma"].iter().zip(layout.ranges()) {
        if a == b {
            continue;
        }
        let e = rel_err(&g[a..b], &fd[a..b]);
        assert!(e <= 1e-6, "{:?} block {name}: rel err {e}", prob.mode);
    }
}

#[test]
fn separate_gradients_match_finite_differences() {
    let mut seed = 0;
    for mode in [Mode::Filter, Mode::Feature] {
        for q in [0, 2] {
            for nu in [0.0, 0.7] {
                seed += 1;
                let prob = random_problem(seed, 6, 8, 2, q, 2, 0.9, nu, mode);
                let st = random_state(seed + 50, &prob, 0.6);
                check_separate_grads(&prob, &st);
                let soft = prob.clone().with_score(ScoreFunction::Softplus);
                check_separate_grads(&soft, &st);
            }
        }
    }
}

#[test]
fn block_gradient_matches_full() {
    let prob = random_problem(21, 5, 6, 2, 1, 2, 0.5, 0.2, Mode::Feature);
    let st = random_state(22, &prob, 0.5);
    let all = grad_blocks(&prob, &st).unwrap();
    assert_eq!(grad_block(&prob, &st, Block::W).unwrap(), all.w);
    assert_eq!(grad_block(&prob, &st, Block::H).unwrap(), all.h);
    assert_eq!(grad_block(&prob, &st, Block::Beta).unwrap(), all.beta);
    assert_eq!(grad_block(&prob, &st, Block::Gamma).unwrap(), all.gamma);
}

fn lifted_flat(z: &LiftedState) -> Vec<f64> {
    let mut v = z.a.vec();
    v.extend(z.b.vec());
    v.extend(z.gamma.vec());
    v
}

fn lifted_unflat(like: &LiftedState, v: &[f64]) -> LiftedState {
    let na = like.a.len();
    let nb = like.b.len();
    LiftedState {
        a: DenseMatrix::from_col_major(like.a.rows(), like.a.cols(), &v[..na]),
        b: DenseMatrix::from_col_major(like.b.rows(), like.b.cols(), &v[na..na + nb]),
        gamma: DenseMatrix::from_col_major(like.gamma.rows(), like.gamma.cols(), &v[na + nb..]),
    }
}

#[test]
fn lifted_gradients_match_finite_differences() {
    for (i, mode) in [Mode::Filter, Mode::Feature].into_iter().enumerate() {
        for q in [0, 2] {
            for nu in [0.0, 0.5] {
                let prob = random_problem(30 + i as u64, 6, 8, 2, q, 2, 0.9, nu, mode);
                let st = random_state(31, &prob, 0.6);
                let z = LiftedState::from_factors(mode, &st);
                let g = lifted_flat(&grad_lifted(&prob, &z).unwrap());
                let fd = fd_grad(|v| loss_lifted(&prob, &lifted_unflat(&z, v)).unwrap(), &lifted_flat(&z));
                let e = rel_err(&g, &fd);
                assert!(e <= 1e-6, "{mode:?} q={q} nu={nu}: rel err {e}");
            }
        }
    }
}

#[test]
fn lifted_and_separate_agree_without_regularizer() {
    for mode in [Mode::Filter, Mode::Feature] {
        let prob = random_problem(40, 6, 8, 2, 2, 2, 1.1, 0.0, mode);
        let st = random_state(41, &prob, 0.6);
        let z = LiftedState::from_factors(mode, &st);
        let a = loss_separate(&prob, &st).unwrap();
        let b = loss_lifted(&prob, &z).unwrap();
        assert!((a - b).abs() <= 1e-10 * a.abs().max(1.0), "{mode:?}: {a} vs {b}");
    }
}

#[test]
fn filter_regularizers_differ_as_documented() {
    let prob = random_problem(42, 6, 8, 2, 2, 1, 1.0, 0.8, Mode::Filter);
    let st = random_state(43, &prob, 0.6);
    let z = LiftedState::from_factors(Mode::Filter, &st);
    let na = z.a.frobenius_norm();
    let ng = z.gamma.frobenius_norm();
    let diff = loss_lifted(&prob, &z).unwrap() - loss_separate(&prob, &st).unwrap();
    let want = prob.nu * ((na + ng).powi(2) - (na * na + ng * ng));
    assert!((diff - want).abs() < 1e-10 * want.abs().max(1.0));
}

fn fd_hessian(prob: &SdlProblem, st: &FactorState) -> DenseMatrix {
    let x0 = flatten_state(st);
    let d = x0.len();
    let mut h = DenseMatrix::zeros(d, d);
    for j in 0..d {
        let step = 1e-5 * x0[j].abs().max(1.0);
        let mut xp = x0.clone();
        let mut xm = x0.clone();
        xp[j] += step;
        xm[j] -= step;
        let gp = flatten_state(&grad_blocks(prob, &unflatten_state(prob, &xp)).unwrap());
        let gm = flatten_state(&grad_blocks(prob, &unflatten_state(prob, &xm)).unwrap());
        for i in 0..d {
            h.set(i, j, (gp[i] - gm[i]) / (2.0 * step));
        }
    }
    h
}

fn max_entry_rel_err(a: &DenseMatrix, b: &DenseMatrix) -> f64 {
    let floor = 1e-3 * b.max_abs().max(1e-12);
    a.data().iter().zip(b.data()).map(|(x, y)| (x - y).abs() / y.abs().max(floor)).fold(0.0, f64::max)
}

#[test]
fn filter_hessian_matches_finite_differences() {
    for (seed, nu, q) in [(50, 0.0, 1), (51, 0.6, 1), (52, 0.3, 2)] {
        let prob = random_problem(seed, 4, 5, 2, q, if q == 1 { 1 } else { 2 }, 0.8, nu, Mode::Filter);
        let st = random_state(seed + 1, &prob, 0.7);
        let h = assemble_hessian_small(&prob, &st).unwrap();
        let fd = fd_hessian(&prob, &st);
        let e = max_entry_rel_err(&h, &fd);
        assert!(e <= 1e-4, "seed {seed}: entrywise rel err {e}");
        assert!((&h - &h.transpose()).max_abs() <= 1e-9);
    }
}

#[test]
fn feature_hessian_matches_finite_differences() {
    let prob = random_problem(60, 4, 5, 2, 1, 2, 0.8, 0.4, Mode::Feature);
    let st = random_state(61, &prob, 0.7);
    let h = assemble_hessian_small(&prob, &st).unwrap();
    let fd = fd_hessian(&prob, &st);
    assert!(max_entry_rel_err(&h, &fd) <= 1e-4);
}

#[test]
fn hessian_diagonal_blocks_psd_without_regularizer() {
    for mode in [Mode::Filter, Mode::Feature] {
        let prob = random_problem(70, 4, 5, 2, 1, 1, 0.8, 0.0, mode);
        let st = random_state(71, &prob, 0.7);
        let h = assemble_hessian_small(&prob, &st).unwrap();
        for (a, b) in HessianLayout::new(&prob).ranges() {
            let block = DenseMatrix::from_fn(b - a, b - a, |i, j| h.get(a + i, a + j));
            let ev = symmetric_eigenvalues(&block).unwrap();
            assert!(ev[0] >= -1e-10, "{mode:?}: min eigenvalue {}", ev[0]);
        }
    }
}

#[test]
fn hessian_dimension_guard() {
    let prob = random_problem(80, 200, 200, 5, 0, 1, 1.0, 0.0, Mode::Filter);
    let st = FactorState::zeros(&prob);
    assert!(matches!(assemble_hessian_small(&prob, &st), Err(crate::SdlError::Argument(_))));
}

#[test]
fn problem_validation() {
    let x = DenseMatrix::zeros(3, 4);
    assert!(SdlProblem::new(x.clone(), None, vec![0; 3], 1, 1, 1.0, 0.0, Mode::Filter).is_err());
    assert!(SdlProblem::new(x.clone(), None, vec![0, 0, 0, 2], 1, 1, 1.0, 0.0, Mode::Filter).is_err());
    assert!(SdlProblem::new(x.clone(), None, vec![0; 4], 1, 4, 1.0, 0.0, Mode::Filter).is_err());
    assert!(SdlProblem::new(x.clone(), None, vec![0; 4], 1, 2, -1.0, 0.0, Mode::Filter).is_err());
    assert!(SdlProblem::new(x.clone(), Some(DenseMatrix::zeros(2, 3)), vec![0; 4], 1, 2, 1.0, 0.0, Mode::Filter).is_err());
    assert!(SdlProblem::new(x, None, vec![0; 4], 1, 2, 1.0, 0.0, Mode::Filter).is_ok());
}

mod properties {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        /// Restricting the loss to one block along a segment gives a convex
        /// function (midpoint inequality).
        #[test]
        fn loss_is_blockwise_convex(seed in 0u64..1000, block in 0usize..4, feature in any::<bool>()) {
            let mode = if feature { Mode::Feature } else { Mode::Filter };
            let prob = random_problem(seed, 5, 6, 2, 1, 2, 0.7, 0.0, mode);
            let s0 = random_state(seed + 1, &prob, 0.8);
            let s1 = random_state(seed + 2, &prob, 0.8);
            let mix = |t: f64| {
                let mut st = s0.clone();
                let pick = |a: &DenseMatrix, b: &DenseMatrix| &a.scale(1.0 - t) + &b.scale(t);
                match block {
                    0 => st.w = pick(&s0.w, &s1.w),
                    1 => st.h = pick(&s0.h, &s1.h),
                    2 => st.beta = pick(&s0.beta, &s1.beta),
                    _ => st.gamma = pick(&s0.gamma, &s1.gamma),
                }
                loss_separate(&prob, &st).unwrap()
            };
            let (f0, fm, f1) = (mix(0.0), mix(0.5), mix(1.0));
            prop_assert!(fm <= 0.5 * (f0 + f1) + 1e-10 * f0.abs().max(1.0));
        }
    }
}
