//! Sparse Cholesky factorization of symmetric positive definite CSR
//! matrices, keeping the symbolic analysis across numeric refactorizations.

use faer::linalg::solvers::Solve;
use faer::sparse::linalg::solvers::{Llt, SymbolicLlt};
use faer::sparse::{SparseColMatRef, SymbolicSparseColMatRef};
use faer::{Mat, MatMut, Side};

use crate::error::{Error, Result};
use crate::sparse::CsrMatrix;

pub struct SparseCholesky {
    n: usize,
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
    /// Position in the source CSR values of every upper-triangle entry.
    source: Vec<usize>,
    values: Vec<f64>,
    symbolic: SymbolicLlt<usize>,
    numeric: Option<Llt<usize, f64>>,
}

impl std::fmt::Debug for SparseCholesky {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SparseCholesky")
            .field("n", &self.n)
            .field("nnz_upper", &self.row_idx.len())
            .finish()
    }
}

impl SparseCholesky {
    /// Symbolic analysis of the pattern of `a` (assumed symmetric).
    pub fn analyze(a: &CsrMatrix) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n {
            return Err(Error::Dimension {
                expected: n,
                actual: a.ncols(),
            });
        }
        // the upper CSC column j is the lower part of CSR row j
        let mut col_ptr = Vec::with_capacity(n + 1);
        let mut row_idx = Vec::new();
        let mut source = Vec::new();
        col_ptr.push(0);
        for j in 0..n {
            let start = a.row_ptr()[j];
            let (cols, _) = a.row(j);
            for (k, &i) in cols.iter().enumerate() {
                if i <= j {
                    row_idx.push(i);
                    source.push(start + k);
                }
            }
            col_ptr.push(row_idx.len());
        }
        let symbolic = {
            let sym = SymbolicSparseColMatRef::new_checked(n, n, &col_ptr, None, &row_idx);
            SymbolicLlt::try_new(sym, Side::Upper)
                .map_err(|e| Error::Factorization(format!("symbolic analysis failed: {e:?}")))?
        };
        let values = vec![0.0; row_idx.len()];
        Ok(Self {
            n,
            col_ptr,
            row_idx,
            source,
            values,
            symbolic,
            numeric: None,
        })
    }

    /// Numeric factorization of a matrix with the analyzed pattern.
    pub fn factor(&mut self, a: &CsrMatrix) -> Result<()> {
        let src = a.values();
        for (v, &p) in self.values.iter_mut().zip(&self.source) {
            *v = src[p];
        }
        let sym = SymbolicSparseColMatRef::new_checked(self.n, self.n, &self.col_ptr, None, &self.row_idx);
        let llt = Llt::try_new_with_symbolic(self.symbolic.clone(), SparseColMatRef::new(sym, &self.values), Side::Upper)
            .map_err(|e| Error::Factorization(format!("matrix is not positive definite ({e:?})")))?;
        self.numeric = Some(llt);
        Ok(())
    }

    pub fn new(a: &CsrMatrix) -> Result<Self> {
        let mut c = Self::analyze(a)?;
        c.factor(a)?;
        Ok(c)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    fn llt(&self) -> &Llt<usize, f64> {
        self.numeric.as_ref().expect("factor() must be called before solving")
    }

    pub fn solve_in_place(&self, x: &mut [f64]) {
        if self.n == 0 {
            return;
        }
        let m = MatMut::from_column_major_slice_mut(x, self.n, 1);
        self.llt().solve_in_place(m);
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }

    /// Solves for every column of `b` at once.
    pub fn solve_mat_in_place(&self, b: MatMut<'_, f64>) {
        if self.n == 0 || b.ncols() == 0 {
            return;
        }
        self.llt().solve_in_place(b);
    }
}

/// Dense Cholesky used for small coarse and class-sum matrices.
pub struct DenseCholesky {
    factor: faer::linalg::solvers::Llt<f64>,
    n: usize,
}

impl std::fmt::Debug for DenseCholesky {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("DenseCholesky").field("n", &self.n).finish()
    }
}

impl DenseCholesky {
    pub fn new(a: &Mat<f64>) -> Result<Self> {
        let factor = a
            .llt(Side::Lower)
            .map_err(|e| Error::Factorization(format!("dense matrix is not positive definite ({e:?})")))?;
        Ok(Self { factor, n: a.nrows() })
    }

    pub fn solve_in_place(&self, x: &mut [f64]) {
        if self.n == 0 {
            return;
        }
        let m = MatMut::from_column_major_slice_mut(x, self.n, 1);
        self.factor.solve_in_place(m);
    }

    pub fn solve_mat(&self, b: &Mat<f64>) -> Mat<f64> {
        self.factor.solve(b)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn laplace_1d(n: usize, shift: f64) -> CsrMatrix {
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 2.0 + shift));
            if i > 0 {
                t.push((i, i - 1, -1.0));
                t.push((i - 1, i, -1.0));
            }
        }
        CsrMatrix::from_triplets(n, n, &t)
    }

    #[test]
    fn solves_and_refactors() {
        let a = laplace_1d(30, 0.1);
        let mut c = SparseCholesky::new(&a).unwrap();
        let b: Vec<f64> = (0..30).map(|i| (i as f64).sin()).collect();
        let x = c.solve(&b);
        let r = a.mul_vec(&x);
        for i in 0..30 {
            assert!((r[i] - b[i]).abs() < 1e-12);
        }
        let a2 = laplace_1d(30, 3.0);
        c.factor(&a2).unwrap();
        let x = c.solve(&b);
        let r = a2.mul_vec(&x);
        for i in 0..30 {
            assert!((r[i] - b[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn indefinite_is_reported() {
        let a = laplace_1d(5, -3.0);
        assert!(matches!(SparseCholesky::new(&a), Err(Error::Factorization(_))));
    }

    #[test]
    fn dense_solve() {
        let a = Mat::from_fn(3, 3, |i, j| if i == j { 4.0 } else { 1.0 });
        let c = DenseCholesky::new(&a).unwrap();
        let mut x = vec![6.0, 6.0, 6.0];
        c.solve_in_place(&mut x);
        for v in x {
            assert!((v - 1.0).abs() < 1e-14);
        }
    }
}
