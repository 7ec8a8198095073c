//! Symmetric positive definite matrices stored through their Cholesky factor.

use serde::{Deserialize, Serialize};

use super::NumericsError;

/// Symmetry tolerance for matrices handed to [`SpdMatrix::cholesky`].
pub const SYMMETRY_TOL: f64 = 1e-9;
/// Pivot floor below which a matrix is treated as degenerate.
pub const PIVOT_FLOOR: f64 = 1e-12;

/// A symmetric positive definite matrix, represented by its lower Cholesky
/// factor `L` with strictly positive diagonal. The matrix itself is `L·Lᵀ`.
///
/// Storage is row-major `dim × dim`; entries above the diagonal are zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpdMatrix {
    dim: usize,
    lower_chol: Vec<f64>,
}

impl SpdMatrix {
    /// Factor a dense symmetric matrix (row-major, `dim × dim`).
    pub fn cholesky(matrix: &[f64], dim: usize) -> Result<Self, NumericsError> {
        if dim == 0 || matrix.len() != dim * dim {
            return Err(NumericsError::DimensionMismatch {
                expected: dim * dim,
                got: matrix.len(),
            });
        }
        for i in 0..dim {
            for j in (i + 1)..dim {
                let a = matrix[i * dim + j];
                let b = matrix[j * dim + i];
                if (a - b).abs() > SYMMETRY_TOL * 1f64.max(a.abs() + b.abs()) {
                    return Err(NumericsError::NotSymmetric);
                }
            }
        }
        let mut l = vec![0.0; dim * dim];
        for j in 0..dim {
            let mut pivot = matrix[j * dim + j];
            for k in 0..j {
                pivot -= l[j * dim + k] * l[j * dim + k];
            }
            if !(pivot > PIVOT_FLOOR) {
                return Err(NumericsError::NotPositiveDefinite);
            }
            let diag = pivot.sqrt();
            l[j * dim + j] = diag;
            for i in (j + 1)..dim {
                let mut s = matrix[i * dim + j];
                for k in 0..j {
                    s -= l[i * dim + k] * l[j * dim + k];
                }
                l[i * dim + j] = s / diag;
            }
        }
        Ok(Self {
            dim,
            lower_chol: l,
        })
    }

    /// Wrap an existing lower-triangular factor. The diagonal must be
    /// strictly positive and entries above the diagonal zero.
    pub fn from_lower_chol(dim: usize, lower_chol: Vec<f64>) -> Result<Self, NumericsError> {
        if dim == 0 || lower_chol.len() != dim * dim {
            return Err(NumericsError::DimensionMismatch {
                expected: dim * dim,
                got: lower_chol.len(),
            });
        }
        for i in 0..dim {
            if !(lower_chol[i * dim + i] > 0.0) {
                return Err(NumericsError::NotPositiveDefinite);
            }
            for j in (i + 1)..dim {
                if lower_chol[i * dim + j] != 0.0 {
                    return Err(NumericsError::NotLowerTriangular);
                }
            }
        }
        Ok(Self { dim, lower_chol })
    }

    pub fn identity(dim: usize) -> Self {
        let mut l = vec![0.0; dim * dim];
        for i in 0..dim {
            l[i * dim + i] = 1.0;
        }
        Self {
            dim,
            lower_chol: l,
        }
    }

    /// Diagonal matrix with the given positive entries.
    pub fn diagonal(entries: &[f64]) -> Result<Self, NumericsError> {
        let dim = entries.len();
        let mut l = vec![0.0; dim * dim];
        for (i, &e) in entries.iter().enumerate() {
            if !(e > 0.0) {
                return Err(NumericsError::NotPositiveDefinite);
            }
            l[i * dim + i] = e.sqrt();
        }
        Ok(Self {
            dim,
            lower_chol: l,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn lower_chol(&self) -> &[f64] {
        &self.lower_chol
    }

    /// Dense `L·Lᵀ`, row-major.
    pub fn reconstruct(&self) -> Vec<f64> {
        let n = self.dim;
        let mut out = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                let mut s = 0.0;
                for k in 0..=i.min(j) {
                    s += self.lower_chol[i * n + k] * self.lower_chol[j * n + k];
                }
                out[i * n + j] = s;
            }
        }
        out
    }

    /// Solve `(L·Lᵀ)·x = v` by forward and backward substitution.
    pub fn solve(&self, v: &[f64]) -> Result<Vec<f64>, NumericsError> {
        let n = self.dim;
        if v.len() != n {
            return Err(NumericsError::DimensionMismatch {
                expected: n,
                got: v.len(),
            });
        }
        let mut y = vec![0.0; n];
        for i in 0..n {
            let mut s = v[i];
            for k in 0..i {
                s -= self.lower_chol[i * n + k] * y[k];
            }
            y[i] = s / self.lower_chol[i * n + i];
        }
        let mut x = vec![0.0; n];
        for i in (0..n).rev() {
            let mut s = y[i];
            for k in (i + 1)..n {
                s -= self.lower_chol[k * n + i] * x[k];
            }
            x[i] = s / self.lower_chol[i * n + i];
        }
        Ok(x)
    }

    /// `ln det(L·Lᵀ) = 2·Σ ln L_ii`.
    pub fn log_det(&self) -> f64 {
        let n = self.dim;
        (0..n)
            .map(|i| self.lower_chol[i * n + i].ln())
            .sum::<f64>()
            * 2.0
    }

    /// Trace of `L·Lᵀ`, i.e. the sum of squares of the factor entries.
    pub fn trace(&self) -> f64 {
        self.lower_chol.iter().map(|v| v * v).sum()
    }

    /// Scale the represented matrix by a positive factor.
    pub fn scale_by(&self, factor: f64) -> Result<Self, NumericsError> {
        if !(factor > 0.0) {
            return Err(NumericsError::NotPositiveDefinite);
        }
        let s = factor.sqrt();
        Ok(Self {
            dim: self.dim,
            lower_chol: self.lower_chol.iter().map(|v| v * s).collect(),
        })
    }

    /// Multiply the Cholesky factor by a vector: `L·z`. Used for sampling.
    pub fn chol_matvec(&self, z: &[f64]) -> Result<Vec<f64>, NumericsError> {
        let n = self.dim;
        if z.len() != n {
            return Err(NumericsError::DimensionMismatch {
                expected: n,
                got: z.len(),
            });
        }
        let mut out = vec![0.0; n];
        for i in 0..n {
            let mut s = 0.0;
            for k in 0..=i {
                s += self.lower_chol[i * n + k] * z[k];
            }
            out[i] = s;
        }
        Ok(out)
    }

    /// Dense inverse of `L·Lᵀ`, row-major.
    pub fn inverse(&self) -> Vec<f64> {
        let n = self.dim;
        let mut out = vec![0.0; n * n];
        let mut unit = vec![0.0; n];
        for j in 0..n {
            unit[j] = 1.0;
            let col = self.solve(&unit).expect("dimensions match by construction");
            unit[j] = 0.0;
            for i in 0..n {
                out[i * n + j] = col[i];
            }
        }
        out
    }
}

/// Solve `m·x = v` for an SPD matrix. Thin alias over [`SpdMatrix::solve`].
pub fn spd_solve(m: &SpdMatrix, v: &[f64]) -> Result<Vec<f64>, NumericsError> {
    m.solve(v)
}
