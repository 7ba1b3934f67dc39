use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::op::HermitianOp;

/// Maximum allowed |A - A^dag| element for an operator flagged Hermitian.
pub const HERMITICITY_TOL: f64 = 1e-12;

/// Compressed sparse row matrix over complex amplitudes.
///
/// Rows are sorted by column with duplicate entries merged at build time.
/// The `hermitian` flag is verified against the adjoint on construction,
/// so downstream solvers may rely on it.
#[derive(Clone, Debug)]
pub struct SparseOperator {
    dim: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<C64>,
    hermitian: bool,
}

impl SparseOperator {
    /// Build from (row, col, value) triplets. Duplicates are summed, exact
    /// zeros dropped. With `expect_hermitian` the adjoint residual must stay
    /// below `HERMITICITY_TOL`.
    pub fn from_triplets(
        dim: usize,
        mut triplets: Vec<(usize, usize, C64)>,
        expect_hermitian: bool,
    ) -> Result<Self> {
        for &(r, c, _) in &triplets {
            if r >= dim || c >= dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: r.max(c) + 1,
                });
            }
        }
        triplets.sort_unstable_by_key(|&(r, c, _)| (r, c));

        // Merge consecutive entries sharing a cell, then prefix-sum rows.
        let mut rows = Vec::with_capacity(triplets.len());
        let mut cols = Vec::with_capacity(triplets.len());
        let mut vals: Vec<C64> = Vec::with_capacity(triplets.len());
        for (r, c, v) in triplets {
            if rows.last() == Some(&r) && cols.last() == Some(&c) {
                *vals.last_mut().unwrap() += v;
            } else {
                rows.push(r);
                cols.push(c);
                vals.push(v);
            }
        }
        let mut row_ptr = vec![0usize; dim + 1];
        for &r in &rows {
            row_ptr[r + 1] += 1;
        }
        for i in 0..dim {
            row_ptr[i + 1] += row_ptr[i];
        }

        let mut op = SparseOperator {
            dim,
            row_ptr,
            cols,
            vals,
            hermitian: false,
        };
        op.prune_zeros();
        if expect_hermitian {
            let dev = op.max_abs_adjoint_residual();
            if dev > HERMITICITY_TOL {
                return Err(Error::NotHermitian { max_dev: dev });
            }
            op.hermitian = true;
        }
        Ok(op)
    }

    fn prune_zeros(&mut self) {
        let mut new_cols = Vec::with_capacity(self.cols.len());
        let mut new_vals = Vec::with_capacity(self.vals.len());
        let mut new_ptr = vec![0usize; self.dim + 1];
        for r in 0..self.dim {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                if self.vals[k] != C64::new(0.0, 0.0) {
                    new_cols.push(self.cols[k]);
                    new_vals.push(self.vals[k]);
                }
            }
            new_ptr[r + 1] = new_cols.len();
        }
        self.cols = new_cols;
        self.vals = new_vals;
        self.row_ptr = new_ptr;
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn is_hermitian(&self) -> bool {
        self.hermitian
    }

    /// Entry lookup by binary search within the row.
    pub fn get(&self, row: usize, col: usize) -> C64 {
        let lo = self.row_ptr[row];
        let hi = self.row_ptr[row + 1];
        match self.cols[lo..hi].binary_search(&col) {
            Ok(k) => self.vals[lo + k],
            Err(_) => C64::new(0.0, 0.0),
        }
    }

    /// Largest |A[r][c] - conj(A[c][r])| over the stored pattern.
    pub fn max_abs_adjoint_residual(&self) -> f64 {
        let mut dev: f64 = 0.0;
        for r in 0..self.dim {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                let c = self.cols[k];
                dev = dev.max((self.vals[k] - self.get(c, r).conj()).norm());
            }
        }
        dev
    }

    /// Dense copy, for small-dimension eigensolves and oracle comparisons.
    pub fn to_dense(&self) -> DMatrix<C64> {
        let mut m = DMatrix::zeros(self.dim, self.dim);
        for r in 0..self.dim {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                m[(r, self.cols[k])] += self.vals[k];
            }
        }
        m
    }

    /// Weighted sum of operators on a shared dimension. The result is
    /// verified Hermitian when `expect_hermitian` is set.
    pub fn linear_combination(
        terms: &[(C64, &SparseOperator)],
        expect_hermitian: bool,
    ) -> Result<Self> {
        let dim = terms
            .first()
            .map(|(_, op)| op.dim)
            .ok_or_else(|| Error::numerical("empty operator combination"))?;
        let mut triplets = Vec::new();
        for (w, op) in terms {
            if op.dim != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: op.dim,
                });
            }
            for r in 0..dim {
                for k in op.row_ptr[r]..op.row_ptr[r + 1] {
                    triplets.push((r, op.cols[k], w * op.vals[k]));
                }
            }
        }
        Self::from_triplets(dim, triplets, expect_hermitian)
    }
}

impl HermitianOp for SparseOperator {
    fn dim(&self) -> usize {
        self.dim
    }

    fn apply(&self, x: &[C64], y: &mut [C64]) {
        debug_assert_eq!(x.len(), self.dim);
        debug_assert_eq!(y.len(), self.dim);
        for r in 0..self.dim {
            let mut acc = C64::new(0.0, 0.0);
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += self.vals[k] * x[self.cols[k]];
            }
            y[r] = acc;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn merges_duplicates_and_orders_rows() {
        let t = vec![
            (1, 0, c(1.0, 0.0)),
            (0, 1, c(1.0, 0.0)),
            (0, 1, c(0.5, 0.0)),
            (1, 0, c(0.5, 0.0)),
            (1, 1, c(2.0, 0.0)),
        ];
        let a = SparseOperator::from_triplets(2, t, true).unwrap();
        assert_eq!(a.nnz(), 3);
        assert_eq!(a.get(0, 1), c(1.5, 0.0));
        assert_eq!(a.get(1, 0), c(1.5, 0.0));
        assert_eq!(a.get(0, 0), c(0.0, 0.0));
    }

    #[test]
    fn hermitian_flag_rejects_asymmetry() {
        let t = vec![(0, 1, c(1.0, 0.0)), (1, 0, c(0.5, 0.0))];
        assert!(matches!(
            SparseOperator::from_triplets(2, t, true),
            Err(Error::NotHermitian { .. })
        ));
        let t = vec![(0, 1, c(0.0, 1.0)), (1, 0, c(0.0, -1.0))];
        assert!(SparseOperator::from_triplets(2, t, true).is_ok());
    }

    #[test]
    fn apply_matches_dense() {
        let t = vec![
            (0, 1, c(0.0, -0.5)),
            (1, 0, c(0.0, 0.5)),
            (1, 2, c(1.0, 0.0)),
            (2, 1, c(1.0, 0.0)),
            (2, 2, c(-1.0, 0.0)),
        ];
        let a = SparseOperator::from_triplets(3, t, true).unwrap();
        let x = vec![c(1.0, 0.0), c(0.0, 2.0), c(-1.0, 1.0)];
        let mut y = vec![c(0.0, 0.0); 3];
        a.apply(&x, &mut y);
        let d = a.to_dense();
        for r in 0..3 {
            let mut want = c(0.0, 0.0);
            for cidx in 0..3 {
                want += d[(r, cidx)] * x[cidx];
            }
            assert!((y[r] - want).norm() < 1e-15);
        }
    }

    #[test]
    fn linear_combination_sums_patterns() {
        let a = SparseOperator::from_triplets(2, vec![(0, 0, c(1.0, 0.0))], true).unwrap();
        let b = SparseOperator::from_triplets(2, vec![(0, 0, c(-0.5, 0.0)), (1, 1, c(2.0, 0.0))], true)
            .unwrap();
        let s =
            SparseOperator::linear_combination(&[(c(2.0, 0.0), &a), (c(1.0, 0.0), &b)], true).unwrap();
        assert_eq!(s.get(0, 0), c(1.5, 0.0));
        assert_eq!(s.get(1, 1), c(2.0, 0.0));
    }

    #[test]
    fn out_of_range_triplet_is_rejected() {
        let t = vec![(0, 5, c(1.0, 0.0))];
        assert!(SparseOperator::from_triplets(2, t, false).is_err());
    }
}
