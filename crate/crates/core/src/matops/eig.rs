use super::{MatError, Matrix};

const MAX_SWEEPS: usize = 100;

/// Full symmetric eigendecomposition by cyclic Jacobi rotations.
///
/// Returns eigenvalues in ascending order and the matching orthonormal
/// eigenvectors as columns. The input is used as-is (callers symmetrize
/// first); only the strict upper triangle drives the rotations, applied
/// symmetrically, so an exactly symmetric input stays exactly symmetric.
pub fn sym_eig(s: &Matrix) -> (Vec<f64>, Matrix) {
    let (values, vectors) = jacobi(s, true);
    (values, vectors.expect("vectors requested"))
}

/// Eigenvalues only, ascending; skips the eigenvector accumulation.
pub fn sym_eig_values(s: &Matrix) -> Vec<f64> {
    jacobi(s, false).0
}

fn jacobi(s: &Matrix, want_vectors: bool) -> (Vec<f64>, Option<Matrix>) {
    assert!(s.is_square(), "sym_eig needs a square matrix");
    let n = s.rows();
    let mut a = s.clone();
    let mut v = want_vectors.then(|| Matrix::identity(n));
    if n == 1 {
        return (vec![a[(0, 0)]], v);
    }

    let scale = a.max_abs().max(1e-300);
    for _ in 0..MAX_SWEEPS {
        let mut off = 0.0f64;
        for p in 0..n {
            for q in (p + 1)..n {
                off = off.max(a[(p, q)].abs());
            }
        }
        if off <= 1e-15 * scale {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                if apq.abs() <= 1e-300 {
                    continue;
                }
                let tau = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = if tau >= 0.0 {
                    1.0 / (tau + (1.0 + tau * tau).sqrt())
                } else {
                    -1.0 / (-tau + (1.0 + tau * tau).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let sn = t * c;

                // A <- JᵀAJ for the (p,q) rotation
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - sn * akq;
                    a[(k, q)] = sn * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - sn * aqk;
                    a[(q, k)] = sn * apk + c * aqk;
                }
                if let Some(v) = v.as_mut() {
                    for k in 0..n {
                        let vkp = v[(k, p)];
                        let vkq = v[(k, q)];
                        v[(k, p)] = c * vkp - sn * vkq;
                        v[(k, q)] = sn * vkp + c * vkq;
                    }
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(i, i)].partial_cmp(&a[(j, j)]).unwrap());
    let values: Vec<f64> = order.iter().map(|&i| a[(i, i)]).collect();
    let vectors = v.map(|v| {
        let mut vectors = Matrix::zeros(n, n);
        for (col, &src) in order.iter().enumerate() {
            for r in 0..n {
                vectors[(r, col)] = v[(r, src)];
            }
        }
        vectors
    });
    (values, vectors)
}

/// Minimum eigenvalue of a symmetric matrix. The input is symmetrized to
/// (S+Sᵀ)/2 internally; asymmetry beyond 1e-9 is an error.
pub fn sym_eig_min(s: &Matrix) -> Result<f64, MatError> {
    if !s.is_square() {
        return Err(MatError::NotSquare {
            rows: s.rows(),
            cols: s.cols(),
        });
    }
    for i in 0..s.rows() {
        for j in (i + 1)..s.cols() {
            let asym = (s[(i, j)] - s[(j, i)]).abs();
            if asym > 1e-9 {
                return Err(MatError::Asymmetric {
                    row: i,
                    col: j,
                    asymmetry: asym,
                });
            }
        }
    }
    Ok(sym_eig_min_unchecked(&s.symmetrized()))
}

/// Minimum eigenvalue of an exactly symmetric matrix, no validation.
pub fn sym_eig_min_unchecked(s: &Matrix) -> f64 {
    sym_eig_values(s)[0]
}

/// Cholesky-style positive definiteness probe: factor S = LLᵀ and report
/// whether every pivot exceeds `margin`. Cross-check path for the
/// eigenvalue-based test.
pub fn cholesky_pd(s: &Matrix, margin: f64) -> bool {
    assert!(s.is_square(), "cholesky_pd needs a square matrix");
    let n = s.rows();
    let mut l = Matrix::zeros(n, n);
    for j in 0..n {
        let mut d = s[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if d <= margin {
            return false;
        }
        let dj = d.sqrt();
        l[(j, j)] = dj;
        for i in (j + 1)..n {
            let mut acc = s[(i, j)];
            for k in 0..j {
                acc -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = acc / dj;
        }
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::CounterRng;

    #[test]
    fn identity_min_eigenvalue() {
        assert_eq!(sym_eig_min(&Matrix::identity(4)).unwrap(), 1.0);
    }

    #[test]
    fn diagonal_min_eigenvalue() {
        let s = Matrix::diag(&[3.0, -2.0, 5.0]);
        assert_eq!(sym_eig_min(&s).unwrap(), -2.0);
    }

    #[test]
    fn rejects_asymmetric_input() {
        let mut s = Matrix::identity(3);
        s[(0, 1)] = 0.5;
        let err = sym_eig_min(&s).unwrap_err();
        assert!(matches!(err, MatError::Asymmetric { row: 0, col: 1, .. }));
    }

    #[test]
    fn tolerates_roundoff_asymmetry() {
        let mut s = Matrix::identity(3);
        s[(0, 1)] = 0.25;
        s[(1, 0)] = 0.25 + 1e-12;
        assert!(sym_eig_min(&s).is_ok());
    }

    fn random_symmetric(n: usize, seed: u64) -> Matrix {
        let rng = CounterRng::new(seed, 17);
        let mut ctr = 0;
        let raw = Matrix::from_fn(n, n, |_, _| {
            ctr += 1;
            rng.uniform(ctr, -3.0, 3.0)
        });
        raw.symmetrized()
    }

    // Newton from outside the root hull on the characteristic polynomial
    // (Faddeev-LeVerrier coefficients) converges monotonically to the
    // extreme eigenvalue: an implementation-independent oracle.
    fn charpoly_min_root(s: &Matrix) -> f64 {
        let n = s.rows();
        // p(x) = x^n + c[1] x^(n-1) + ... + c[n]
        let mut c = vec![1.0; n + 1];
        let mut mk = Matrix::zeros(n, n);
        for k in 1..=n {
            // M_k = S M_{k-1} + c_{k-1} I
            mk = s.matmul(&mk);
            for i in 0..n {
                mk[(i, i)] += c[k - 1];
            }
            let prod = s.matmul(&mk);
            let trace: f64 = (0..n).map(|i| prod[(i, i)]).sum();
            c[k] = -trace / k as f64;
        }
        let p = |x: f64| -> f64 {
            let mut acc = 0.0;
            for ck in &c {
                acc = acc * x + ck;
            }
            acc
        };
        let dp = |x: f64| -> f64 {
            let mut acc = 0.0;
            for (i, ck) in c.iter().enumerate().take(n) {
                acc = acc * x + (n - i) as f64 * ck;
            }
            acc
        };
        let mut x = -(1.0 + s.norm_inf());
        for _ in 0..500 {
            let fx = p(x);
            let dfx = dp(x);
            if dfx == 0.0 {
                break;
            }
            let next = x - fx / dfx;
            if (next - x).abs() <= 1e-14 * (1.0 + x.abs()) {
                x = next;
                break;
            }
            x = next;
        }
        x
    }

    #[test]
    fn matches_characteristic_polynomial_oracle() {
        for seed in 0..10 {
            let s = random_symmetric(8, seed);
            let got = sym_eig_min(&s).unwrap();
            let want = charpoly_min_root(&s);
            assert!(
                (got - want).abs() <= 1e-8 * (1.0 + want.abs()),
                "seed {seed}: jacobi {got} vs charpoly {want}"
            );
        }
    }

    #[test]
    fn eigenvectors_reconstruct_matrix() {
        let s = random_symmetric(6, 3);
        let (vals, vecs) = sym_eig(&s);
        let reconstructed = vecs.matmul(&Matrix::diag(&vals)).matmul(&vecs.transpose());
        assert!(reconstructed.sub(&s).max_abs() < 1e-12 * (1.0 + s.max_abs()));
    }

    // sym_eig_min > 0 iff Cholesky succeeds with positive pivots; checked
    // away from the numerical boundary.
    #[test]
    fn agrees_with_cholesky_probe() {
        for seed in 0..30 {
            let s = random_symmetric(5, 100 + seed);
            let min_eig = sym_eig_min(&s).unwrap();
            if min_eig.abs() < 1e-6 {
                continue;
            }
            assert_eq!(min_eig > 0.0, cholesky_pd(&s, 0.0), "seed {seed}");
            // shifted versions keep the equivalence
            let mut shifted = s.clone();
            for i in 0..5 {
                shifted[(i, i)] -= min_eig + 1.0;
            }
            assert!(!cholesky_pd(&shifted, 0.0));
        }
    }
}
