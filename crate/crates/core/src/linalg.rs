//! Minimal dense symmetric linear algebra: Cholesky factorization,
//! log-determinants and principal submatrix extraction.
//!
//! Everything here is deterministic and allocation-simple. There is no
//! automatic regularization: a failed Cholesky is reported as
//! [`Error::NotPositiveDefinite`] because silently perturbing a covariance
//! would corrupt every information measure computed from it downstream.

use crate::error::{Error, Result};

/// Absolute tolerance for the symmetry check at construction.
pub const SYMMETRY_TOL: f64 = 1e-12;

/// A Cholesky pivot at or below this value fails the factorization.
pub const PIVOT_TOL: f64 = 1e-12;

/// Dense symmetric matrix, row-major storage.
///
/// Inputs are checked against [`SYMMETRY_TOL`] and then symmetrized as
/// `(M + Mᵀ)/2`, so downstream arithmetic always sees exact symmetry.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix {
    dim: usize,
    entries: Vec<f64>,
}

impl SymMatrix {
    /// Build from row-major entries, checking symmetry within 1e-12.
    pub fn from_rows(dim: usize, entries: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::DimMismatch {
                expected: 1,
                actual: 0,
            });
        }
        if entries.len() != dim * dim {
            return Err(Error::DimMismatch {
                expected: dim * dim,
                actual: entries.len(),
            });
        }
        let mut m = SymMatrix { dim, entries };
        for i in 0..dim {
            for j in (i + 1)..dim {
                let a = m.entries[i * dim + j];
                let b = m.entries[j * dim + i];
                let delta = (a - b).abs();
                if delta > SYMMETRY_TOL {
                    return Err(Error::NotSymmetric {
                        row: i,
                        col: j,
                        delta,
                    });
                }
                let avg = 0.5 * (a + b);
                m.entries[i * dim + j] = avg;
                m.entries[j * dim + i] = avg;
            }
        }
        Ok(m)
    }

    /// Build from a function of (row, col); only the lower triangle is
    /// evaluated and mirrored, so the result is exactly symmetric.
    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut entries = vec![0.0; dim * dim];
        for i in 0..dim {
            for j in 0..=i {
                let v = f(i, j);
                entries[i * dim + j] = v;
                entries[j * dim + i] = v;
            }
        }
        SymMatrix { dim, entries }
    }

    pub fn identity(dim: usize) -> Self {
        Self::from_fn(dim, |i, j| if i == j { 1.0 } else { 0.0 })
    }

    pub fn diagonal(values: &[f64]) -> Self {
        Self::from_fn(values.len(), |i, j| if i == j { values[i] } else { 0.0 })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        debug_assert!(row < self.dim && col < self.dim);
        self.entries[row * self.dim + col]
    }

    /// Row-major view of the entries.
    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    /// Lower-triangular Cholesky factor `L` with `M = L·Lᵀ`.
    ///
    /// Fails with [`Error::NotPositiveDefinite`] if any pivot is at or
    /// below [`PIVOT_TOL`].
    pub fn cholesky(&self) -> Result<CholeskyFactor> {
        let n = self.dim;
        let mut lower = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..=i {
                let mut sum = self.entries[i * n + j];
                for k in 0..j {
                    sum -= lower[i * n + k] * lower[j * n + k];
                }
                if i == j {
                    if sum <= PIVOT_TOL {
                        return Err(Error::NotPositiveDefinite {
                            index: i,
                            pivot: sum,
                        });
                    }
                    lower[i * n + i] = sum.sqrt();
                } else {
                    lower[i * n + j] = sum / lower[j * n + j];
                }
            }
        }
        Ok(CholeskyFactor { dim: n, lower })
    }

    /// Natural log of the determinant, computed as `2·Σ log L_ii`.
    pub fn log_det(&self) -> Result<f64> {
        Ok(self.cholesky()?.log_det())
    }

    /// Principal submatrix over the given flat indices, in order.
    pub fn submatrix(&self, indices: &[usize]) -> Result<SymMatrix> {
        for (pos, &idx) in indices.iter().enumerate() {
            if idx >= self.dim {
                return Err(Error::IndexOutOfRange {
                    index: idx,
                    dim: self.dim,
                });
            }
            if indices[..pos].contains(&idx) {
                return Err(Error::DuplicateIndex { index: idx });
            }
        }
        if indices.is_empty() {
            return Err(Error::DimMismatch {
                expected: 1,
                actual: 0,
            });
        }
        let k = indices.len();
        let mut entries = vec![0.0; k * k];
        for (a, &ia) in indices.iter().enumerate() {
            for (b, &ib) in indices.iter().enumerate() {
                entries[a * k + b] = self.get(ia, ib);
            }
        }
        Ok(SymMatrix { dim: k, entries })
    }
}

/// Lower-triangular Cholesky factor of a symmetric positive-definite matrix.
#[derive(Debug, Clone)]
pub struct CholeskyFactor {
    dim: usize,
    lower: Vec<f64>,
}

impl CholeskyFactor {
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        debug_assert!(row < self.dim && col < self.dim);
        self.lower[row * self.dim + col]
    }

    /// `log det M = 2·Σ log L_ii`.
    pub fn log_det(&self) -> f64 {
        let n = self.dim;
        2.0 * (0..n).map(|i| self.lower[i * n + i].ln()).sum::<f64>()
    }

    /// Solve `L y = b` by forward substitution.
    pub fn solve_lower(&self, b: &[f64]) -> Vec<f64> {
        assert_eq!(b.len(), self.dim);
        let n = self.dim;
        let mut y = b.to_vec();
        for i in 0..n {
            for k in 0..i {
                y[i] -= self.lower[i * n + k] * y[k];
            }
            y[i] /= self.lower[i * n + i];
        }
        y
    }

    /// Solve `Lᵀ x = b` by back substitution.
    pub fn solve_upper(&self, b: &[f64]) -> Vec<f64> {
        assert_eq!(b.len(), self.dim);
        let n = self.dim;
        let mut x = b.to_vec();
        for i in (0..n).rev() {
            for k in (i + 1)..n {
                x[i] -= self.lower[k * n + i] * x[k];
            }
            x[i] /= self.lower[i * n + i];
        }
        x
    }

    /// Solve `M x = b` where `M = L·Lᵀ`.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        self.solve_upper(&self.solve_lower(b))
    }
}
