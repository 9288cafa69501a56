//! Kronecker products and commutation matrices.

use super::matrix::DenseMatrix;

/// Kronecker product `A ⊗ B`.
pub fn kron(a: &DenseMatrix, b: &DenseMatrix) -> DenseMatrix {
    let (ma, na) = a.shape();
    let (mb, nb) = b.shape();
    let mut out = DenseMatrix::zeros(ma * mb, na * nb);
    for i in 0..ma {
        for j in 0..na {
            let aij = a.get(i, j);
            if aij == 0.0 {
                continue;
            }
            for k in 0..mb {
                for l in 0..nb {
                    out.set(i * mb + k, j * nb + l, aij * b.get(k, l));
                }
            }
        }
    }
    out
}

/// Commutation matrix `C^{(a,b)}`: `C vec(M) = vec(Mᵀ)` for every `a×b` matrix `M`.
pub fn commutation_matrix(a: usize, b: usize) -> DenseMatrix {
    let mut c = DenseMatrix::zeros(a * b, a * b);
    // vec(M)[j*a + i] = M[i,j]; vec(Mᵀ)[i*b + j] = M[i,j]
    for i in 0..a {
        for j in 0..b {
            c.set(i * b + j, j * a + i, 1.0);
        }
    }
    c
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(rows: usize, cols: usize, k: f64) -> DenseMatrix {
        DenseMatrix::from_fn(rows, cols, |i, j| ((i * cols + j) as f64 * k + 0.3).sin())
    }

    #[test]
    fn kron_identities() {
        assert_eq!(kron(&DenseMatrix::identity(2), &DenseMatrix::identity(3)), DenseMatrix::identity(6));
        let b = sample(2, 3, 1.1);
        assert_eq!(kron(&DenseMatrix::filled(1, 1, 2.0), &b), b.scale(2.0));
    }

    #[test]
    fn kron_vec_identity() {
        let a = sample(3, 3, 0.7);
        let b = sample(3, 3, 1.3);
        let x = sample(3, 3, 2.9);
        let lhs = kron(&a, &b).matvec(&x.vec());
        let rhs = b.matmul(&x).matmul_t(&a).vec();
        for (l, r) in lhs.iter().zip(&rhs) {
            assert!((l - r).abs() < 1e-10);
        }
    }

    #[test]
    fn commutation_properties() {
        assert_eq!(commutation_matrix(1, 5), DenseMatrix::identity(5));
        let c = commutation_matrix(3, 4);
        assert_eq!(c.t_matmul(&c), DenseMatrix::identity(12));
        let m = sample(3, 4, 0.9);
        assert_eq!(c.matvec(&m.vec()), m.transpose().vec());
        assert!(c.data().iter().all(|&x| x == 0.0 || x == 1.0));
    }
}
