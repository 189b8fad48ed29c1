//! Small dense symmetric linear algebra: Cholesky solves and Jacobi
//! eigendecomposition. Sized for desk-scale systems (n <= a few thousand).

use crate::error::{Error, Result};

/// Symmetric matrix stored row-major as n×n.
#[derive(Debug, Clone)]
pub struct SymMatrix {
    pub n: usize,
    pub data: Vec<f64>,
}

impl SymMatrix {
    pub fn zeros(n: usize) -> Self {
        SymMatrix {
            n,
            data: vec![0.0; n * n],
        }
    }

    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] = v;
    }
}

/// Solve `A x = b` for symmetric positive definite `A` via Cholesky.
/// Fails with a rough condition estimate when a pivot collapses.
pub fn cholesky_solve(a: &SymMatrix, b: &[f64]) -> Result<Vec<f64>> {
    let n = a.n;
    if b.len() != n {
        return Err(Error::dimension(format!(
            "cholesky_solve: matrix {n}x{n} vs rhs {}",
            b.len()
        )));
    }
    // Lower factor L with A = L Lᵀ.
    let mut l = vec![0.0; n * n];
    let mut max_pivot = f64::MIN_POSITIVE;
    for i in 0..n {
        for j in 0..=i {
            let mut sum = a.at(i, j);
            for k in 0..j {
                sum -= l[i * n + k] * l[j * n + k];
            }
            if i == j {
                if sum <= 0.0 || !sum.is_finite() {
                    let cond = max_pivot / sum.abs().max(f64::MIN_POSITIVE);
                    return Err(Error::numeric(format!(
                        "Cholesky pivot {sum:.3e} at row {i}; system ill-conditioned \
                         (pivot-ratio estimate {cond:.3e})"
                    )));
                }
                l[i * n + i] = sum.sqrt();
                max_pivot = max_pivot.max(sum);
            } else {
                l[i * n + j] = sum / l[j * n + j];
            }
        }
    }
    // Forward then backward substitution.
    let mut y = vec![0.0; n];
    for i in 0..n {
        let mut sum = b[i];
        for k in 0..i {
            sum -= l[i * n + k] * y[k];
        }
        y[i] = sum / l[i * n + i];
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let mut sum = y[i];
        for k in i + 1..n {
            sum -= l[k * n + i] * x[k];
        }
        x[i] = sum / l[i * n + i];
    }
    Ok(x)
}

/// Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.
/// Returns (eigenvalues, eigenvectors as columns), unsorted.
pub fn jacobi_eigen(a: &SymMatrix) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = a.n;
    let mut m = a.data.clone();
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }
    let max_sweeps = 64;
    for _ in 0..max_sweeps {
        let mut off = 0.0;
        for i in 0..n {
            for j in i + 1..n {
                off += m[i * n + j] * m[i * n + j];
            }
        }
        if off.sqrt() < 1e-14 * (1.0 + frobenius(&m)) {
            let eigenvalues = (0..n).map(|i| m[i * n + i]).collect();
            return Ok((eigenvalues, v));
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[p * n + q];
                if apq.abs() < 1e-300 {
                    continue;
                }
                let app = m[p * n + p];
                let aqq = m[q * n + q];
                let theta = 0.5 * (aqq - app) / apq;
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
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
    Err(Error::numeric(format!(
        "Jacobi eigendecomposition did not converge in {max_sweeps} sweeps (n = {n})"
    )))
}

/// Symmetric square root `A^{1/2}` of a PSD matrix; negative eigenvalues
/// from roundoff are clamped to zero.
pub fn sqrtm_psd(a: &SymMatrix) -> Result<SymMatrix> {
    let n = a.n;
    let (vals, vecs) = jacobi_eigen(a)?;
    let mut out = SymMatrix::zeros(n);
    // V diag(sqrt(max(λ,0))) Vᵀ
    for i in 0..n {
        for j in 0..n {
            let mut acc = 0.0;
            for k in 0..n {
                let s = vals[k].max(0.0).sqrt();
                acc += vecs[i * n + k] * s * vecs[j * n + k];
            }
            out.set(i, j, acc);
        }
    }
    Ok(out)
}

/// `a · b` for square row-major matrices of size n.
pub fn matmul_square(a: &[f64], b: &[f64], n: usize) -> Vec<f64> {
    crate::tensor::kernels::matmul(a, b, n, n, n)
}

fn frobenius(m: &[f64]) -> f64 {
    m.iter().map(|v| v * v).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_spd(n: usize, rng: &mut ChaCha8Rng) -> SymMatrix {
        // B Bᵀ + n·I is comfortably SPD
        let b: Vec<f64> = (0..n * n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let mut m = SymMatrix::zeros(n);
        for i in 0..n {
            for j in 0..n {
                let mut acc = 0.0;
                for k in 0..n {
                    acc += b[i * n + k] * b[j * n + k];
                }
                m.set(i, j, acc + if i == j { n as f64 } else { 0.0 });
            }
        }
        m
    }

    #[test]
    fn cholesky_solves_random_spd_systems() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for &n in &[1, 2, 7, 20] {
            let a = random_spd(n, &mut rng);
            let x_true: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let mut b = vec![0.0; n];
            for i in 0..n {
                for j in 0..n {
                    b[i] += a.at(i, j) * x_true[j];
                }
            }
            let x = cholesky_solve(&a, &b).unwrap();
            for (got, want) in x.iter().zip(&x_true) {
                assert!((got - want).abs() < 1e-9, "n={n}: {got} vs {want}");
            }
        }
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        let mut a = SymMatrix::zeros(2);
        a.set(0, 0, 1.0);
        a.set(1, 1, -1.0);
        let err = cholesky_solve(&a, &[1.0, 1.0]).unwrap_err().to_string();
        assert!(err.contains("ill-conditioned"), "{err}");
    }

    #[test]
    fn jacobi_recovers_known_spectrum() {
        // diag(1, 4, 9) conjugated by a rotation has eigenvalues {1, 4, 9}
        let mut a = SymMatrix::zeros(3);
        let r = [[0.6, -0.8, 0.0], [0.8, 0.6, 0.0], [0.0, 0.0, 1.0f64]];
        let d = [1.0, 4.0, 9.0];
        for i in 0..3 {
            for j in 0..3 {
                let mut acc = 0.0;
                for k in 0..3 {
                    acc += r[i][k] * d[k] * r[j][k];
                }
                a.set(i, j, acc);
            }
        }
        let (mut vals, _) = jacobi_eigen(&a).unwrap();
        vals.sort_by(|x, y| x.partial_cmp(y).unwrap());
        for (got, want) in vals.iter().zip(&[1.0, 4.0, 9.0]) {
            assert!((got - want).abs() < 1e-10);
        }
    }

    #[test]
    fn sqrtm_squares_back() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let a = random_spd(6, &mut rng);
        let s = sqrtm_psd(&a).unwrap();
        let sq = matmul_square(&s.data, &s.data, 6);
        for (got, want) in sq.iter().zip(&a.data) {
            assert!((got - want).abs() < 1e-9);
        }
    }
}
