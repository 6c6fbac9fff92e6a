//! Real symmetric eigendecomposition by cyclic Jacobi rotations.
//!
//! Shared numerical kernel: density-matrix validation realifies hermitian
//! matrices into symmetric ones, and the interior-point method needs
//! matrix square roots and extremal eigenvalues of its scaling blocks.
//! Matrices here are small and dense, where Jacobi is simple, accurate,
//! and deterministic.

/// Eigendecomposition of a symmetric matrix given in row-major order.
///
/// Returns eigenvalues in ascending order and eigenvectors as columns of a
/// row-major matrix (`vecs[i * n + k]` is component `i` of eigenvector `k`),
/// so that `a = V diag(w) V^T` and `V^T V = I`.
///
/// Only the symmetric part of `a` is used; the caller is responsible for
/// passing a matrix that is symmetric up to round-off.
pub(crate) fn eigh(n: usize, a: &[f64]) -> (Vec<f64>, Vec<f64>) {
    assert_eq!(a.len(), n * n, "eigh: matrix size mismatch");
    let mut m = a.to_vec();
    // Symmetrize to make the iteration independent of round-off asymmetry.
    for i in 0..n {
        for j in (i + 1)..n {
            let s = 0.5 * (m[i * n + j] + m[j * n + i]);
            m[i * n + j] = s;
            m[j * n + i] = s;
        }
    }
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }
    if n > 1 {
        let scale: f64 = m.iter().map(|x| x * x).sum::<f64>().sqrt().max(1.0);
        let tol = 1e-15 * scale;
        for _sweep in 0..200 {
            let mut off = 0.0f64;
            for p in 0..n {
                for q in (p + 1)..n {
                    off = off.max(m[p * n + q].abs());
                }
            }
            if off <= tol {
                break;
            }
            for p in 0..n {
                for q in (p + 1)..n {
                    let apq = m[p * n + q];
                    if apq.abs() <= tol * 1e-2 {
                        continue;
                    }
                    let app = m[p * n + p];
                    let aqq = m[q * n + q];
                    // Rotation angle zeroing the (p, q) entry.
                    let theta = 0.5 * (aqq - app) / apq;
                    let t = if theta >= 0.0 {
                        1.0 / (theta + (1.0 + theta * theta).sqrt())
                    } else {
                        -1.0 / (-theta + (1.0 + theta * theta).sqrt())
                    };
                    let c = 1.0 / (1.0 + t * t).sqrt();
                    let s = t * c;
                    // Apply the rotation to rows/columns p and q.
                    for k in 0..n {
                        let mkp = m[k * n + p];
                        let mkq = m[k * n + q];
                        m[k * n + p] = c * mkp - s * mkq;
                        m[k * n + q] = s * mkp + c * mkq;
                    }
                    for k in 0..n {
                        let mpk = m[p * n + k];
                        let mqk = m[q * n + k];
                        m[p * n + k] = c * mpk - s * mqk;
                        m[q * n + k] = s * mpk + c * mqk;
                    }
                    for k in 0..n {
                        let vkp = v[k * n + p];
                        let vkq = v[k * n + q];
                        v[k * n + p] = c * vkp - s * vkq;
                        v[k * n + q] = s * vkp + c * vkq;
                    }
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        m[i * n + i]
            .partial_cmp(&m[j * n + j])
            .expect("eigh: NaN eigenvalue")
    });
    let w: Vec<f64> = order.iter().map(|&k| m[k * n + k]).collect();
    let mut vecs = vec![0.0; n * n];
    for (col, &k) in order.iter().enumerate() {
        for i in 0..n {
            vecs[i * n + col] = v[i * n + k];
        }
    }
    (w, vecs)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mat_mul(n: usize, a: &[f64], b: &[f64]) -> Vec<f64> {
        let mut c = vec![0.0; n * n];
        for i in 0..n {
            for k in 0..n {
                let aik = a[i * n + k];
                if aik == 0.0 {
                    continue;
                }
                for j in 0..n {
                    c[i * n + j] += aik * b[k * n + j];
                }
            }
        }
        c
    }

    #[test]
    fn diagonal_matrix_is_its_own_decomposition() {
        let a = [3.0, 0.0, 0.0, 0.0, -1.0, 0.0, 0.0, 0.0, 2.0];
        let (w, _) = eigh(3, &a);
        assert!((w[0] + 1.0).abs() < 1e-14);
        assert!((w[1] - 2.0).abs() < 1e-14);
        assert!((w[2] - 3.0).abs() < 1e-14);
    }

    #[test]
    fn known_2x2() {
        // [[0,1],[1,0]] has eigenvalues ±1.
        let a = [0.0, 1.0, 1.0, 0.0];
        let (w, v) = eigh(2, &a);
        assert!((w[0] + 1.0).abs() < 1e-14);
        assert!((w[1] - 1.0).abs() < 1e-14);
        // Eigenvectors are (1, ∓1)/√2 up to sign.
        assert!((v[0].abs() - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-12);
    }

    #[test]
    fn reconstructs_random_symmetric_matrices() {
        // Deterministic LCG so the test never depends on an external RNG.
        let mut state = 0x2545f4914f6cdd1du64;
        let mut next = move || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((state >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
        };
        for n in [1usize, 2, 5, 13] {
            let mut a = vec![0.0; n * n];
            for i in 0..n {
                for j in 0..=i {
                    let x = next();
                    a[i * n + j] = x;
                    a[j * n + i] = x;
                }
            }
            let (w, v) = eigh(n, &a);
            // V diag(w) V^T == A
            let mut wd = vec![0.0; n * n];
            for k in 0..n {
                wd[k * n + k] = w[k];
            }
            let mut vt = vec![0.0; n * n];
            for i in 0..n {
                for j in 0..n {
                    vt[i * n + j] = v[j * n + i];
                }
            }
            let rec = mat_mul(n, &mat_mul(n, &v, &wd), &vt);
            for (x, y) in rec.iter().zip(a.iter()) {
                assert!((x - y).abs() < 1e-11, "n={n}: {x} vs {y}");
            }
            // Orthonormality
            let g = mat_mul(n, &vt, &v);
            for i in 0..n {
                for j in 0..n {
                    let expect = if i == j { 1.0 } else { 0.0 };
                    assert!((g[i * n + j] - expect).abs() < 1e-12);
                }
            }
        }
    }
}
