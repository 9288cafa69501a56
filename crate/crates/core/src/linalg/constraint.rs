//! Convex constraint sets with exact Euclidean projections and tangent cones.

use serde::{Deserialize, Serialize};

use super::matrix::DenseMatrix;
use crate::error::{Result, SdlError};

/// Declarative convex set applied to one parameter block.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ConstraintSpec {
    #[default]
    Unbounded,
    FrobeniusBall { radius: f64 },
    NonnegOrthant,
    NonnegFrobeniusBall { radius: f64 },
    Box { lo: f64, hi: f64 },
}

/// Relative slack used when deciding whether a constraint is active.
const ACTIVE_TOL: f64 = 1e-12;

impl ConstraintSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            ConstraintSpec::FrobeniusBall { radius } | ConstraintSpec::NonnegFrobeniusBall { radius } => {
                if !(radius > 0.0 && radius.is_finite()) {
                    return Err(SdlError::argument(format!("ball radius must be positive, got {radius}")));
                }
            }
            ConstraintSpec::Box { lo, hi } => {
                if lo.is_nan() || hi.is_nan() || lo > hi {
                    return Err(SdlError::argument(format!("box bounds need lo <= hi, got [{lo}, {hi}]")));
                }
            }
            _ => {}
        }
        Ok(())
    }

    /// Radius of the set when it is a ball, `None` otherwise.
    pub fn radius(&self) -> Option<f64> {
        match *self {
            ConstraintSpec::FrobeniusBall { radius } | ConstraintSpec::NonnegFrobeniusBall { radius } => Some(radius),
            _ => None,
        }
    }

    pub fn is_unbounded(&self) -> bool {
        matches!(self, ConstraintSpec::Unbounded)
    }

    /// Euclidean projection onto the set.
    pub fn project(&self, m: &DenseMatrix) -> DenseMatrix {
        match *self {
            ConstraintSpec::Unbounded => m.clone(),
            ConstraintSpec::FrobeniusBall { radius } => scale_into_ball(m.clone(), radius),
            ConstraintSpec::NonnegOrthant => m.map(|v| v.max(0.0)),
            ConstraintSpec::NonnegFrobeniusBall { radius } => scale_into_ball(m.map(|v| v.max(0.0)), radius),
            ConstraintSpec::Box { lo, hi } => m.map(|v| v.clamp(lo, hi)),
        }
    }

    /// Membership test with absolute slack `tol`.
    pub fn contains(&self, m: &DenseMatrix, tol: f64) -> bool {
        match *self {
            ConstraintSpec::Unbounded => true,
            ConstraintSpec::FrobeniusBall { radius } => m.frobenius_norm() <= radius + tol,
            ConstraintSpec::NonnegOrthant => m.data().iter().all(|&v| v >= -tol),
            ConstraintSpec::NonnegFrobeniusBall { radius } => {
                m.data().iter().all(|&v| v >= -tol) && m.frobenius_norm() <= radius + tol
            }
            ConstraintSpec::Box { lo, hi } => m.data().iter().all(|&v| v >= lo - tol && v <= hi + tol),
        }
    }

    /// Projection of `v` onto the tangent cone of the set at the feasible point `x`.
    ///
    /// Its norm, applied to `v = -∇f`, is the stationarity measure
    /// `-inf ⟨∇f, d/‖d‖⟩` over feasible directions `d` (clamped at 0).
    pub fn tangent_project(&self, x: &DenseMatrix, v: &DenseMatrix) -> DenseMatrix {
        match *self {
            ConstraintSpec::Unbounded => v.clone(),
            ConstraintSpec::FrobeniusBall { radius } => {
                if x.frobenius_norm() < radius * (1.0 - ACTIVE_TOL) {
                    v.clone()
                } else {
                    halfspace_cone(x, v, None)
                }
            }
            ConstraintSpec::NonnegOrthant => {
                let scale = x.max_abs().max(1.0);
                let mut out = v.clone();
                for (o, xi) in out.data_mut().iter_mut().zip(x.data()) {
                    if *xi <= ACTIVE_TOL * scale {
                        *o = o.max(0.0);
                    }
                }
                out
            }
            ConstraintSpec::NonnegFrobeniusBall { radius } => {
                // Active coordinates (x_i = 0) only see d_i >= 0; the ball's
                // half-space only involves the inactive ones. The cone splits.
                let scale = x.max_abs().max(1.0);
                let active: Vec<bool> = x.data().iter().map(|&xi| xi <= ACTIVE_TOL * scale).collect();
                let mut out = v.clone();
                for (o, a) in out.data_mut().iter_mut().zip(&active) {
                    if *a {
                        *o = o.max(0.0);
                    }
                }
                if x.frobenius_norm() < radius * (1.0 - ACTIVE_TOL) {
                    out
                } else {
                    halfspace_cone(x, &out, Some(&active))
                }
            }
            ConstraintSpec::Box { lo, hi } => {
                let scale = lo.abs().max(hi.abs()).max(1.0);
                let mut out = v.clone();
                for (o, xi) in out.data_mut().iter_mut().zip(x.data()) {
                    let at_lo = *xi <= lo + ACTIVE_TOL * scale;
                    let at_hi = *xi >= hi - ACTIVE_TOL * scale;
                    if at_lo && at_hi {
                        *o = 0.0;
                    } else if at_lo {
                        *o = o.max(0.0);
                    } else if at_hi {
                        *o = o.min(0.0);
                    }
                }
                out
            }
        }
    }
}

fn scale_into_ball(mut m: DenseMatrix, radius: f64) -> DenseMatrix {
    let norm = m.frobenius_norm();
    if norm > radius {
        m.scale_in_place(radius / norm);
    }
    m
}

/// Projects `v` onto `{d : ⟨d, x⟩ <= 0}`, touching only entries not marked active.
fn halfspace_cone(x: &DenseMatrix, v: &DenseMatrix, active: Option<&[bool]>) -> DenseMatrix {
    let xx = x.frobenius_norm_sq();
    if xx == 0.0 {
        return v.clone();
    }
    let t = v.inner(x);
    if t <= 0.0 {
        return v.clone();
    }
    // Active entries of x are zero, so masking does not change ⟨·, x⟩ or ‖x‖.
    let mut out = v.clone();
    for (i, (o, xi)) in out.data_mut().iter_mut().zip(x.data()).enumerate() {
        if active.is_some_and(|a| a[i]) {
            continue;
        }
        *o -= t / xx * xi;
    }
    out
}

/// Free-function form of [`ConstraintSpec::project`].
pub fn project_constraint(m: &DenseMatrix, c: &ConstraintSpec) -> DenseMatrix {
    c.project(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn kinds() -> Vec<ConstraintSpec> {
        vec![
            ConstraintSpec::Unbounded,
            ConstraintSpec::FrobeniusBall { radius: 1.0 },
            ConstraintSpec::NonnegOrthant,
            ConstraintSpec::NonnegFrobeniusBall { radius: 1.0 },
            ConstraintSpec::Box { lo: -0.5, hi: 0.25 },
        ]
    }

    #[test]
    fn ball_interior_and_radial() {
        let c = ConstraintSpec::FrobeniusBall { radius: 1.0 };
        let inside = DenseMatrix::from_rows(&[vec![0.3, 0.4]]).unwrap();
        assert_eq!(c.project(&inside), inside);
        let outside = DenseMatrix::from_rows(&[vec![1.2, 1.6]]).unwrap();
        let p = c.project(&outside);
        assert!((&p - &outside.scale(0.5)).max_abs() < 1e-15);
    }

    #[test]
    fn nonneg_ball_clip_then_scale() {
        let c = ConstraintSpec::NonnegFrobeniusBall { radius: 1.0 };
        let m = DenseMatrix::from_rows(&[vec![-1.0, 2.0], vec![0.0, 0.0]]).unwrap();
        let want = DenseMatrix::from_rows(&[vec![0.0, 1.0], vec![0.0, 0.0]]).unwrap();
        assert_eq!(c.project(&m), want);
    }

    /// Brute-force projection onto the nonneg unit ball for 2×2 matrices:
    /// coarse grid search, then Frank–Wolfe with exact line search. The
    /// linear oracle over the set never calls `project`.
    fn grid_projection(m: &DenseMatrix) -> DenseMatrix {
        let steps = 20;
        let h = 1.0 / steps as f64;
        let mut best = DenseMatrix::zeros(2, 2);
        let mut best_d = f64::INFINITY;
        for idx in 0..(steps + 1usize).pow(4) {
            let mut k = idx;
            let mut v = [0.0; 4];
            for e in v.iter_mut() {
                *e = (k % (steps + 1)) as f64 * h;
                k /= steps + 1;
            }
            let p = DenseMatrix::from_vec(2, 2, v.to_vec()).unwrap();
            if p.frobenius_norm() > 1.0 {
                continue;
            }
            let dist = (&p - m).frobenius_norm();
            if dist < best_d {
                best_d = dist;
                best = p;
            }
        }
        let mut x = best;
        for _ in 0..200_000 {
            let g = &x - m;
            let neg = g.map(|v| (-v).max(0.0));
            let nn = neg.frobenius_norm();
            let s = if nn > 0.0 { neg.scale(1.0 / nn) } else { DenseMatrix::zeros(2, 2) };
            let d = &s - &x;
            let dd = d.frobenius_norm_sq();
            if dd == 0.0 {
                break;
            }
            let gamma = (-g.inner(&d) / dd).clamp(0.0, 1.0);
            if gamma == 0.0 {
                break;
            }
            x.axpy(gamma, &d);
        }
        x
    }

    #[test]
    fn nonneg_ball_matches_grid_oracle() {
        let cases = [
            vec![-1.0, 2.0, 0.0, 0.0],
            vec![0.3, -0.2, 0.1, 0.4],
            vec![1.5, 0.7, -0.9, 2.2],
            vec![-0.5, -0.5, -0.5, 0.2],
        ];
        for v in cases {
            let m = DenseMatrix::from_vec(2, 2, v).unwrap();
            let got = ConstraintSpec::NonnegFrobeniusBall { radius: 1.0 }.project(&m);
            let oracle = grid_projection(&m);
            let dg = (&got - &m).frobenius_norm();
            let doracle = (&oracle - &m).frobenius_norm();
            assert!(dg <= doracle + 1e-4, "clip-then-scale distance {dg} vs oracle {doracle}");
            assert!((&got - &oracle).max_abs() < 1e-4);
        }
    }

    #[test]
    fn validate_rejects_bad_params() {
        assert!(ConstraintSpec::FrobeniusBall { radius: 0.0 }.validate().is_err());
        assert!(ConstraintSpec::NonnegFrobeniusBall { radius: -1.0 }.validate().is_err());
        assert!(ConstraintSpec::Box { lo: 1.0, hi: 0.0 }.validate().is_err());
        assert!(ConstraintSpec::Box { lo: 0.0, hi: 0.0 }.validate().is_ok());
    }

    #[test]
    fn tangent_cone_ball_boundary() {
        let c = ConstraintSpec::FrobeniusBall { radius: 1.0 };
        let x = DenseMatrix::from_rows(&[vec![0.6, 0.8]]).unwrap();
        // -grad points outward: no feasible descent direction.
        let out = c.tangent_project(&x, &x.scale(3.0));
        assert!(out.frobenius_norm() < 1e-15);
        let tangential = DenseMatrix::from_rows(&[vec![-0.8, 0.6]]).unwrap();
        assert_eq!(c.tangent_project(&x, &tangential), tangential);
    }

    fn mat_strategy() -> impl Strategy<Value = DenseMatrix> {
        proptest::collection::vec(-3.0f64..3.0, 6).prop_map(|v| DenseMatrix::from_vec(2, 3, v).unwrap())
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]

        #[test]
        fn projections_idempotent_and_nonexpansive(a in mat_strategy(), b in mat_strategy()) {
            for c in kinds() {
                let pa = c.project(&a);
                let pb = c.project(&b);
                prop_assert!(c.contains(&pa, 1e-12));
                prop_assert!((&c.project(&pa) - &pa).max_abs() <= 1e-15);
                prop_assert!((&pa - &pb).frobenius_norm() <= (&a - &b).frobenius_norm() + 1e-12);
            }
        }

        #[test]
        fn tangent_projection_is_feasible_direction(a in mat_strategy(), v in mat_strategy()) {
            for c in kinds() {
                let x = c.project(&a);
                let d = c.tangent_project(&x, &v);
                // A short step along d stays (nearly) feasible: first-order check.
                let step = &x + &d.scale(1e-10);
                prop_assert!(c.contains(&step, 1e-12), "{:?}", c);
                // Projection onto a cone never increases the norm.
                prop_assert!(d.frobenius_norm() <= v.frobenius_norm() + 1e-12);
            }
        }
    }
}
