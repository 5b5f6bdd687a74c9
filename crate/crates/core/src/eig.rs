//! Dense symmetric eigendecomposition by cyclic Jacobi rotations.

use ndarray::Array2;

use crate::graph::SignedMatrix;
use crate::{Error, Result};

pub const MAX_SWEEPS: usize = 100;
/// Off-diagonal Frobenius norm, relative to the full norm, at which sweeping stops.
pub const OFF_DIAGONAL_TOL: f64 = 1e-12;

/// `M = U diag(values) Uᵀ`, eigenvalues ascending, eigenvectors in the columns of `vectors`.
#[derive(Debug, Clone)]
pub struct SymmetricEigen {
    pub values: Vec<f64>,
    pub vectors: Array2<f64>,
    pub sweeps: usize,
}

impl SymmetricEigen {
    pub fn reconstruct(&self) -> Array2<f64> {
        let lambda = Array2::from_diag(&ndarray::Array1::from(self.values.clone()));
        self.vectors.dot(&lambda).dot(&self.vectors.t())
    }

    pub fn negative_count(&self, threshold: f64) -> usize {
        self.values.iter().filter(|&&v| v < threshold).count()
    }

    pub fn max(&self) -> f64 {
        self.values.last().copied().unwrap_or(0.0)
    }
}

pub fn symmetric_eig_sparse(m: &SignedMatrix) -> Result<SymmetricEigen> {
    symmetric_eig(&m.to_dense())
}

/// Cyclic Jacobi eigensolver.
///
/// Rejects input asymmetric beyond `1e-12` (relative to the largest entry).
pub fn symmetric_eig(m: &Array2<f64>) -> Result<SymmetricEigen> {
    let n = m.nrows();
    if m.ncols() != n {
        return Err(Error::DimensionMismatch(format!("{}x{} is not square", n, m.ncols())));
    }
    let scale = m.iter().fold(0.0f64, |acc, x| acc.max(x.abs())).max(1.0);
    for i in 0..n {
        for j in (i + 1)..n {
            if (m[[i, j]] - m[[j, i]]).abs() > 1e-12 * scale {
                return Err(Error::InvalidArgument(format!("matrix not symmetric at ({i}, {j})")));
            }
        }
    }

    // row-major working copies
    let mut a: Vec<f64> = m.iter().copied().collect();
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }

    let total: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let target = OFF_DIAGONAL_TOL * total.max(f64::MIN_POSITIVE);
    let off_norm = |a: &[f64]| -> f64 {
        let mut s = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                s += 2.0 * a[i * n + j] * a[i * n + j];
            }
        }
        s.sqrt()
    };

    let mut sweeps = 0;
    while off_norm(&a) > target {
        if sweeps == MAX_SWEEPS {
            return Err(Error::NoConvergence(MAX_SWEEPS));
        }
        sweeps += 1;
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let app = a[p * n + p];
                let aqq = a[q * n + q];
                // skip rotations that cannot change the diagonal in floating point
                if apq.abs() < 1e-300 || (apq.abs() * 1e18 < app.abs() && apq.abs() * 1e18 < aqq.abs()) {
                    a[p * n + q] = 0.0;
                    a[q * n + p] = 0.0;
                    continue;
                }
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (1.0 + theta * theta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;

                for k in 0..n {
                    if k == p || k == q {
                        continue;
                    }
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    let new_kp = c * akp - s * akq;
                    let new_kq = s * akp + c * akq;
                    a[k * n + p] = new_kp;
                    a[p * n + k] = new_kp;
                    a[k * n + q] = new_kq;
                    a[q * n + k] = new_kq;
                }
                a[p * n + p] = app - t * apq;
                a[q * n + q] = aqq + t * apq;
                a[p * n + q] = 0.0;
                a[q * n + p] = 0.0;

                for k in 0..n {
                    let vkp = v[k * n + p];
                    let vkq = v[k * n + q];
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| a[x * n + x].total_cmp(&a[y * n + y]));
    let values = order.iter().map(|&i| a[i * n + i]).collect();
    let mut vectors = Array2::zeros((n, n));
    for (col, &src) in order.iter().enumerate() {
        for k in 0..n {
            vectors[[k, col]] = v[k * n + src];
        }
    }
    Ok(SymmetricEigen { values, vectors, sweeps })
}

/// Largest singular value, via the eigenvalues of `MᵀM`.
pub fn spectral_norm(m: &Array2<f64>) -> Result<f64> {
    if m.is_empty() {
        return Ok(0.0);
    }
    let gram = if m.nrows() >= m.ncols() { m.t().dot(m) } else { m.dot(&m.t()) };
    Ok(symmetric_eig(&gram)?.max().max(0.0).sqrt())
}
