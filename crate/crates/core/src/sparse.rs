//! Assembly buffer and direct solve for sparse square systems.
//!
//! Factorization is delegated to faer's sparse LU, which handles the
//! non-symmetric matrices produced by non-symmetric coefficients.

use faer::prelude::Solve;
use faer::sparse::{SparseColMat, Triplet};
use faer::Mat;

use crate::error::{Error, Result};

/// Triplet accumulator. Duplicate entries are summed in insertion order,
/// so assembly is reproducible bit for bit.
#[derive(Debug, Clone)]
pub struct SparseBuilder {
    n: usize,
    entries: Vec<(usize, usize, f64)>,
}

/// Outcome of a linear solve.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearSolution {
    pub x: Vec<f64>,
    /// `||A x - b||_inf / max(||b||_inf, ||A||_inf ||x||_inf)`.
    pub relative_residual: f64,
}

impl SparseBuilder {
    pub fn new(n: usize) -> Self {
        SparseBuilder {
            n,
            entries: Vec::new(),
        }
    }

    pub fn with_capacity(n: usize, nnz: usize) -> Self {
        SparseBuilder {
            n,
            entries: Vec::with_capacity(nnz),
        }
    }

    pub fn add(&mut self, row: usize, col: usize, value: f64) {
        debug_assert!(row < self.n && col < self.n);
        self.entries.push((row, col, value));
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Compressed rows: `(row_ptr, cols, vals)` with duplicates merged.
    fn compress(&self) -> (Vec<usize>, Vec<usize>, Vec<f64>) {
        let mut order: Vec<usize> = (0..self.entries.len()).collect();
        // stable: equal keys keep insertion order
        order.sort_by_key(|&k| (self.entries[k].0, self.entries[k].1));
        let mut row_ptr = vec![0usize; self.n + 1];
        let mut cols = Vec::with_capacity(order.len());
        let mut vals: Vec<f64> = Vec::with_capacity(order.len());
        let mut last: Option<(usize, usize)> = None;
        for k in order {
            let (r, c, v) = self.entries[k];
            if last == Some((r, c)) {
                *vals.last_mut().expect("merged entry exists") += v;
            } else {
                cols.push(c);
                vals.push(v);
                row_ptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for r in 0..self.n {
            row_ptr[r + 1] += row_ptr[r];
        }
        (row_ptr, cols, vals)
    }

    /// Factorizes the assembled matrix by sparse LU.
    pub fn factorize(&self) -> Result<SparseLu> {
        if self.n == 0 {
            return Err(Error::invalid("empty linear system"));
        }
        let (row_ptr, cols, vals) = self.compress();
        let mut triplets = Vec::with_capacity(vals.len());
        for r in 0..self.n {
            if row_ptr[r] == row_ptr[r + 1] {
                return Err(Error::Singular(format!("row {r} is empty")));
            }
            for k in row_ptr[r]..row_ptr[r + 1] {
                triplets.push(Triplet::new(r, cols[k], vals[k]));
            }
        }
        let a = SparseColMat::<usize, f64>::try_new_from_triplets(self.n, self.n, &triplets)
            .map_err(|e| Error::Numerical(format!("sparse matrix construction failed: {e:?}")))?;
        let lu = a
            .sp_lu()
            .map_err(|e| Error::Singular(format!("LU factorization failed: {e:?}")))?;
        let norm_inf = (0..self.n)
            .map(|r| {
                (row_ptr[r]..row_ptr[r + 1])
                    .map(|k| vals[k].abs())
                    .sum::<f64>()
            })
            .fold(0.0, f64::max);
        Ok(SparseLu {
            n: self.n,
            row_ptr,
            cols,
            vals,
            norm_inf,
            lu,
        })
    }

    pub fn solve(&self, rhs: &[f64]) -> Result<LinearSolution> {
        self.factorize()?.solve(rhs)
    }
}

/// A factorized sparse matrix, reusable across right-hand sides.
pub struct SparseLu {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
    norm_inf: f64,
    lu: faer::sparse::linalg::solvers::Lu<usize, f64>,
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

impl SparseLu {
    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|r| {
                (self.row_ptr[r]..self.row_ptr[r + 1])
                    .map(|k| self.vals[k] * x[self.cols[k]])
                    .sum()
            })
            .collect()
    }

    fn raw_solve(&self, rhs: &[f64]) -> Vec<f64> {
        let b = Mat::<f64>::from_fn(self.n, 1, |i, _| rhs[i]);
        let sol = self.lu.solve(&b);
        (0..self.n).map(|i| sol[(i, 0)]).collect()
    }

    /// Solves `A x = b` with one step of iterative refinement.
    pub fn solve(&self, rhs: &[f64]) -> Result<LinearSolution> {
        if rhs.len() != self.n {
            return Err(Error::invalid(
                "right-hand side length does not match the system",
            ));
        }
        let mut x = self.raw_solve(rhs);
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Singular(
                "LU solve produced non-finite values".into(),
            ));
        }
        let residual = |x: &[f64]| -> Vec<f64> {
            self.matvec(x)
                .iter()
                .zip(rhs)
                .map(|(ax, b)| b - ax)
                .collect()
        };
        let scale = |x: &[f64]| {
            inf_norm(rhs)
                .max(self.norm_inf * inf_norm(x))
                .max(f64::MIN_POSITIVE)
        };
        let r = residual(&x);
        if inf_norm(&r) > 1e-15 * scale(&x) {
            let dx = self.raw_solve(&r);
            for (xi, d) in x.iter_mut().zip(dx) {
                *xi += d;
            }
        }
        let relative_residual = inf_norm(&residual(&x)) / scale(&x);
        if !relative_residual.is_finite() || relative_residual > 1e-8 {
            return Err(Error::Singular(format!(
                "relative residual {relative_residual:e} after refinement"
            )));
        }
        Ok(LinearSolution {
            x,
            relative_residual,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_small_nonsymmetric_system() {
        let mut b = SparseBuilder::new(3);
        b.add(0, 0, 4.0);
        b.add(0, 1, -1.0);
        b.add(1, 0, -2.0);
        b.add(1, 1, 4.0);
        b.add(1, 1, 1.0);
        b.add(1, 2, -1.0);
        b.add(2, 1, -0.5);
        b.add(2, 2, 3.0);
        // x = (1, 2, 3)
        let rhs = [2.0, 5.0 * 2.0 - 2.0 - 3.0, -1.0 + 9.0];
        let sol = b.solve(&rhs).unwrap();
        for (xi, ei) in sol.x.iter().zip([1.0, 2.0, 3.0]) {
            assert!((xi - ei).abs() < 1e-13);
        }
        assert!(sol.relative_residual <= 1e-14);
    }

    #[test]
    fn empty_row_is_singular() {
        let mut b = SparseBuilder::new(2);
        b.add(0, 0, 1.0);
        assert!(matches!(b.solve(&[1.0, 1.0]), Err(Error::Singular(_))));
    }

    #[test]
    fn rank_deficient_is_singular() {
        let mut b = SparseBuilder::new(2);
        b.add(0, 0, 1.0);
        b.add(0, 1, 1.0);
        b.add(1, 0, 1.0);
        b.add(1, 1, 1.0);
        assert!(b.solve(&[1.0, 2.0]).is_err());
    }
}
