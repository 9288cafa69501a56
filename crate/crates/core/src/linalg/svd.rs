//! Dense SVD by Householder bidiagonalization followed by implicit-shift QR
//! on the bidiagonal (Golub–Kahan–Reinsch).

use serde::{Deserialize, Serialize};

use super::matrix::DenseMatrix;
use crate::error::{Result, SdlError};

const MAX_SWEEPS: usize = 75;

/// Thin SVD `M = U diag(sigma) Vᵀ` with `k = min(m, n)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvdResult {
    pub u: DenseMatrix,
    pub sigma: Vec<f64>,
    pub v: DenseMatrix,
}

impl SvdResult {
    /// `U_r diag(sigma_r) V_rᵀ` using the leading `r` triples.
    pub fn reconstruct(&self, r: usize) -> DenseMatrix {
        let r = r.min(self.sigma.len());
        let m = self.u.rows();
        let n = self.v.rows();
        let mut out = DenseMatrix::zeros(m, n);
        for i in 0..m {
            let row = out.row_mut(i);
            for l in 0..r {
                let a = self.u.get(i, l) * self.sigma[l];
                if a == 0.0 {
                    continue;
                }
                for (j, o) in row.iter_mut().enumerate() {
                    *o += a * self.v.get(j, l);
                }
            }
        }
        out
    }
}

/// Full thin SVD of `m`.
///
/// Singular values are sorted nonincreasing. Each left singular vector is
/// signed so that its largest-magnitude entry is positive (lowest index wins
/// ties); the matching right vector is flipped with it.
pub fn svd_full(m: &DenseMatrix) -> Result<SvdResult> {
    let (rows, cols) = m.shape();
    if rows == 0 || cols == 0 {
        return Err(SdlError::argument("svd of an empty matrix"));
    }
    if !m.is_finite() {
        return Err(SdlError::numeric("svd input contains non-finite entries"));
    }
    let (mut res, transposed) = if rows >= cols {
        (golub_kahan(m, true)?, false)
    } else {
        (golub_kahan(&m.transpose(), true)?, true)
    };
    if transposed {
        std::mem::swap(&mut res.u, &mut res.v);
    }
    apply_sign_convention(&mut res);
    Ok(res)
}

/// Singular values only, sorted nonincreasing. Skips vector accumulation.
pub fn singular_values(m: &DenseMatrix) -> Result<Vec<f64>> {
    let (rows, cols) = m.shape();
    if rows == 0 || cols == 0 {
        return Ok(Vec::new());
    }
    if !m.is_finite() {
        return Err(SdlError::numeric("svd input contains non-finite entries"));
    }
    let res = if rows >= cols { golub_kahan(m, false)? } else { golub_kahan(&m.transpose(), false)? };
    Ok(res.sigma)
}

fn apply_sign_convention(res: &mut SvdResult) {
    let k = res.sigma.len();
    for l in 0..k {
        let mut best = 0usize;
        let mut best_abs = -1.0;
        for i in 0..res.u.rows() {
            let a = res.u.get(i, l).abs();
            if a > best_abs {
                best_abs = a;
                best = i;
            }
        }
        if res.u.get(best, l) < 0.0 {
            for i in 0..res.u.rows() {
                res.u.set(i, l, -res.u.get(i, l));
            }
            for j in 0..res.v.rows() {
                res.v.set(j, l, -res.v.get(j, l));
            }
        }
    }
}

#[inline]
fn pythag(a: f64, b: f64) -> f64 {
    a.hypot(b)
}

#[inline]
fn sign(a: f64, b: f64) -> f64 {
    if b >= 0.0 {
        a.abs()
    } else {
        -a.abs()
    }
}

/// Core routine for `m >= n`. Works on a column-major copy.
fn golub_kahan(input: &DenseMatrix, want_vectors: bool) -> Result<SvdResult> {
    let (m, n) = input.shape();
    debug_assert!(m >= n);
    // a[(i, j)] stored at j * m + i
    let mut a = vec![0.0; m * n];
    for i in 0..m {
        for j in 0..n {
            a[j * m + i] = input.get(i, j);
        }
    }
    let mut v = if want_vectors { vec![0.0; n * n] } else { Vec::new() };
    let mut w = vec![0.0; n];
    let mut rv1 = vec![0.0; n];
    macro_rules! a {
        ($i:expr, $j:expr) => {
            a[($j) * m + ($i)]
        };
    }
    macro_rules! v {
        ($i:expr, $j:expr) => {
            v[($j) * n + ($i)]
        };
    }

    let mut g = 0.0f64;
    let mut scale = 0.0f64;
    let mut anorm = 0.0f64;
    let mut l = 0usize;

    // Householder reduction to bidiagonal form.
    for i in 0..n {
        l = i + 1;
        rv1[i] = scale * g;
        g = 0.0;
        let mut s = 0.0;
        scale = 0.0;
        if i < m {
            for k in i..m {
                scale += a!(k, i).abs();
            }
            if scale != 0.0 {
                for k in i..m {
                    a!(k, i) /= scale;
                    s += a!(k, i) * a!(k, i);
                }
                let f = a!(i, i);
                g = -sign(s.sqrt(), f);
                let h = f * g - s;
                a!(i, i) = f - g;
                for j in l..n {
                    let mut s2 = 0.0;
                    for k in i..m {
                        s2 += a!(k, i) * a!(k, j);
                    }
                    let f2 = s2 / h;
                    for k in i..m {
                        let t = a!(k, i);
                        a!(k, j) += f2 * t;
                    }
                }
                for k in i..m {
                    a!(k, i) *= scale;
                }
            }
        }
        w[i] = scale * g;
        g = 0.0;
        s = 0.0;
        scale = 0.0;
        if i < m && i + 1 != n {
            for k in l..n {
                scale += a!(i, k).abs();
            }
            if scale != 0.0 {
                for k in l..n {
                    a!(i, k) /= scale;
                    s += a!(i, k) * a!(i, k);
                }
                let f = a!(i, l);
                g = -sign(s.sqrt(), f);
                let h = f * g - s;
                a!(i, l) = f - g;
                for k in l..n {
                    rv1[k] = a!(i, k) / h;
                }
                for j in l..m {
                    let mut s2 = 0.0;
                    for k in l..n {
                        s2 += a!(j, k) * a!(i, k);
                    }
                    for k in l..n {
                        a!(j, k) += s2 * rv1[k];
                    }
                }
                for k in l..n {
                    a!(i, k) *= scale;
                }
            }
        }
        anorm = anorm.max(w[i].abs() + rv1[i].abs());
    }

    if want_vectors {
        // Accumulate right-hand transformations.
        for i in (0..n).rev() {
            if i + 1 < n {
                if g != 0.0 {
                    for j in l..n {
                        v!(j, i) = (a!(i, j) / a!(i, l)) / g;
                    }
                    for j in l..n {
                        let mut s = 0.0;
                        for k in l..n {
                            s += a!(i, k) * v!(k, j);
                        }
                        for k in l..n {
                            let t = v!(k, i);
                            v!(k, j) += s * t;
                        }
                    }
                }
                for j in l..n {
                    v!(i, j) = 0.0;
                    v!(j, i) = 0.0;
                }
            }
            v!(i, i) = 1.0;
            g = rv1[i];
            l = i;
        }
        // Accumulate left-hand transformations.
        for i in (0..n.min(m)).rev() {
            let l = i + 1;
            let mut g = w[i];
            for j in l..n {
                a!(i, j) = 0.0;
            }
            if g != 0.0 {
                g = 1.0 / g;
                for j in l..n {
                    let mut s = 0.0;
                    for k in l..m {
                        s += a!(k, i) * a!(k, j);
                    }
                    let f = (s / a!(i, i)) * g;
                    for k in i..m {
                        let t = a!(k, i);
                        a!(k, j) += f * t;
                    }
                }
                for j in i..m {
                    a!(j, i) *= g;
                }
            } else {
                for j in i..m {
                    a!(j, i) = 0.0;
                }
            }
            a!(i, i) += 1.0;
        }
    }

    let tol = f64::EPSILON * anorm;
    // Diagonalize the bidiagonal form.
    for k in (0..n).rev() {
        let mut its = 0;
        loop {
            its += 1;
            let mut flag = true;
            let mut l = k;
            let mut nm = 0;
            loop {
                if l == 0 || rv1[l].abs() <= tol {
                    flag = false;
                    break;
                }
                nm = l - 1;
                if w[nm].abs() <= tol {
                    break;
                }
                l -= 1;
            }
            if flag {
                // Cancel rv1[l] when w[l-1] is negligible.
                let mut c = 0.0;
                let mut s = 1.0;
                for i in l..=k {
                    let f = s * rv1[i];
                    rv1[i] *= c;
                    if f.abs() <= tol {
                        break;
                    }
                    let g = w[i];
                    let h = pythag(f, g);
                    w[i] = h;
                    let hinv = 1.0 / h;
                    c = g * hinv;
                    s = -f * hinv;
                    if want_vectors {
                        for j in 0..m {
                            let y = a!(j, nm);
                            let z = a!(j, i);
                            a!(j, nm) = y * c + z * s;
                            a!(j, i) = z * c - y * s;
                        }
                    }
                }
            }
            let z = w[k];
            if l == k {
                if z < 0.0 {
                    w[k] = -z;
                    if want_vectors {
                        for j in 0..n {
                            v!(j, k) = -v!(j, k);
                        }
                    }
                }
                break;
            }
            if its > MAX_SWEEPS {
                return Err(SdlError::numeric(format!(
                    "svd did not converge after {MAX_SWEEPS} iterations"
                )));
            }
            // Shift from the bottom 2x2 minor.
            let mut x = w[l];
            let nm = k - 1;
            let mut y = w[nm];
            let mut g = rv1[nm];
            let mut h = rv1[k];
            let mut f = ((y - z) * (y + z) + (g - h) * (g + h)) / (2.0 * h * y);
            g = pythag(f, 1.0);
            f = ((x - z) * (x + z) + h * ((y / (f + sign(g, f))) - h)) / x;
            let mut c = 1.0;
            let mut s = 1.0;
            for j in l..=nm {
                let i = j + 1;
                g = rv1[i];
                y = w[i];
                h = s * g;
                g *= c;
                let mut z = pythag(f, h);
                rv1[j] = z;
                c = f / z;
                s = h / z;
                f = x * c + g * s;
                g = g * c - x * s;
                h = y * s;
                y *= c;
                if want_vectors {
                    for jj in 0..n {
                        let xv = v!(jj, j);
                        let zv = v!(jj, i);
                        v!(jj, j) = xv * c + zv * s;
                        v!(jj, i) = zv * c - xv * s;
                    }
                }
                z = pythag(f, h);
                w[j] = z;
                if z != 0.0 {
                    let zi = 1.0 / z;
                    c = f * zi;
                    s = h * zi;
                }
                f = c * g + s * y;
                x = c * y - s * g;
                if want_vectors {
                    for jj in 0..m {
                        let ya = a!(jj, j);
                        let za = a!(jj, i);
                        a!(jj, j) = ya * c + za * s;
                        a!(jj, i) = za * c - ya * s;
                    }
                }
            }
            rv1[l] = 0.0;
            rv1[k] = f;
            w[k] = x;
        }
    }

    if w.iter().any(|x| !x.is_finite()) {
        return Err(SdlError::numeric("svd produced non-finite singular values"));
    }

    // Sort descending; stable so equal values keep their order.
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| w[j].partial_cmp(&w[i]).unwrap_or(std::cmp::Ordering::Equal));
    let sigma: Vec<f64> = order.iter().map(|&i| w[i]).collect();
    if !want_vectors {
        return Ok(SvdResult { u: DenseMatrix::zeros(0, 0), sigma, v: DenseMatrix::zeros(0, 0) });
    }
    let u = DenseMatrix::from_fn(m, n, |i, j| a[order[j] * m + i]);
    let vm = DenseMatrix::from_fn(n, n, |i, j| v[order[j] * n + i]);
    Ok(SvdResult { u, sigma, v: vm })
}

/// Best rank-`r` Frobenius approximation (truncated SVD).
pub fn rank_r_project(m: &DenseMatrix, r: usize) -> Result<DenseMatrix> {
    let k = m.rows().min(m.cols());
    if r == 0 || r > k {
        return Err(SdlError::argument(format!("rank {r} outside 1..={k}")));
    }
    if r == k {
        return Ok(m.clone());
    }
    let svd = svd_full(m)?;
    Ok(svd.reconstruct(r))
}

/// Numerical rank: singular values above `tol * sigma_max`.
pub fn numerical_rank(m: &DenseMatrix, tol: f64) -> Result<usize> {
    let s = singular_values(m)?;
    let top = s.first().copied().unwrap_or(0.0);
    if top == 0.0 {
        return Ok(0);
    }
    Ok(s.iter().filter(|&&x| x > tol * top).count())
}
