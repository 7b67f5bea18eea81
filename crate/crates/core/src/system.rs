//! Two-field (u_i, u_e) matrices in interleaved dof order.
//!
//! Every Jacobian of the time step has the form `τ·diag(A_i, A_e)` plus a
//! nodal 2x2 block `g_l [1 −1; −1 1]`, where `g_l = m_l (χC_m + τ ∂I_ion/∂v)`
//! collects the lumped mass and the linearized reaction at node `l`.

use crate::error::{Error, Result};
use crate::sparse::CsrMatrix;

#[derive(Debug, Clone)]
pub struct TwoFieldMatrix {
    /// `τ·diag(A_i, A_e)`, with the pattern of the nodal blocks included.
    pub base: CsrMatrix,
    /// Positions of (ii, ie, ei, ee) entries of each nodal block.
    pub block_pos: Vec<[usize; 4]>,
}

impl TwoFieldMatrix {
    /// `a_i` and `a_e` must share their sparsity pattern.
    pub fn new(a_i: &CsrMatrix, a_e: &CsrMatrix, tau: f64) -> Result<Self> {
        let n = a_i.nrows();
        if a_e.nrows() != n || a_i.row_ptr() != a_e.row_ptr() || a_i.col_idx() != a_e.col_idx() {
            return Err(Error::Dimension {
                expected: a_i.nnz(),
                actual: a_e.nnz(),
            });
        }
        let mut row_ptr = Vec::with_capacity(2 * n + 1);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        row_ptr.push(0);
        for l in 0..n {
            for (f, a) in [(0usize, a_i), (1, a_e)] {
                let (cols, vals) = a.row(l);
                let mut row: Vec<(usize, f64)> = cols.iter().zip(vals).map(|(&c, &v)| (2 * c + f, tau * v)).collect();
                if cols.binary_search(&l).is_err() {
                    row.push((2 * l + f, 0.0));
                }
                row.push((2 * l + 1 - f, 0.0));
                row.sort_by_key(|e| e.0);
                for (c, v) in row {
                    col_idx.push(c);
                    values.push(v);
                }
                row_ptr.push(col_idx.len());
            }
        }
        let base = CsrMatrix::new(2 * n, 2 * n, row_ptr, col_idx, values)?;
        let block_pos = (0..n)
            .map(|l| {
                [
                    base.position(2 * l, 2 * l).unwrap(),
                    base.position(2 * l, 2 * l + 1).unwrap(),
                    base.position(2 * l + 1, 2 * l).unwrap(),
                    base.position(2 * l + 1, 2 * l + 1).unwrap(),
                ]
            })
            .collect();
        Ok(Self { base, block_pos })
    }

    pub fn num_nodes(&self) -> usize {
        self.block_pos.len()
    }

    pub fn assemble(&self, weights: &[f64]) -> CsrMatrix {
        let mut k = self.base.clone();
        let vals = k.values_mut();
        for (p, &g) in self.block_pos.iter().zip(weights) {
            vals[p[0]] += g;
            vals[p[1]] -= g;
            vals[p[2]] -= g;
            vals[p[3]] += g;
        }
        k
    }
}

/// `Tᵀ K T` for a two-field matrix, refreshed for new nodal weights
/// without recomputing the triple product.
#[derive(Debug, Clone)]
pub struct TransformedMatrix {
    base: CsrMatrix,
    /// Per node: (value position, coefficient) of `(Tᵀb_l)(Tᵀb_l)ᵀ`.
    plan: Vec<Vec<(usize, f64)>>,
}

impl TransformedMatrix {
    pub fn new(k: &TwoFieldMatrix, t: &CsrMatrix) -> Self {
        let tt = t.transpose();
        // pattern from unit nodal weights; the plan needs every slot
        let unit = k.assemble(&vec![1.0; k.num_nodes()]);
        let mut base = tt.mul(&unit.mul(t));
        let stiff = tt.mul(&k.base.mul(t));
        // copy the stiffness-only values into the full pattern
        base.values_mut().iter_mut().for_each(|v| *v = 0.0);
        for r in 0..stiff.nrows() {
            let (cols, vals) = stiff.row(r);
            for (&c, &v) in cols.iter().zip(vals) {
                let pos = base.position(r, c).unwrap();
                base.values_mut()[pos] = v;
            }
        }
        let n = k.num_nodes();
        let mut plan = Vec::with_capacity(n);
        for l in 0..n {
            // Tᵀ b_l = row(2l) − row(2l+1) of T
            let mut b: Vec<(usize, f64)> = Vec::new();
            for (f, s) in [(0usize, 1.0), (1, -1.0)] {
                let (cols, vals) = t.row(2 * l + f);
                for (&c, &v) in cols.iter().zip(vals) {
                    b.push((c, s * v));
                }
            }
            let mut entries = Vec::with_capacity(b.len() * b.len());
            for &(p, bp) in &b {
                for &(q, bq) in &b {
                    entries.push((base.position(p, q).unwrap(), bp * bq));
                }
            }
            plan.push(entries);
        }
        Self { base, plan }
    }

    pub fn assemble(&self, weights: &[f64]) -> CsrMatrix {
        let mut k = self.base.clone();
        let vals = k.values_mut();
        for (entries, &g) in self.plan.iter().zip(weights) {
            for &(pos, c) in entries {
                vals[pos] += g * c;
            }
        }
        k
    }
}

/// Leading principal block `A[0..n, 0..n]` kept in sync with its parent.
#[derive(Debug, Clone)]
pub struct PrincipalBlock {
    pub matrix: CsrMatrix,
    source: Vec<usize>,
}

impl PrincipalBlock {
    pub fn new(parent: &CsrMatrix, n: usize) -> Self {
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        let mut source = Vec::new();
        row_ptr.push(0);
        for r in 0..n {
            let start = parent.row_ptr()[r];
            let (cols, vals) = parent.row(r);
            for (k, (&c, &v)) in cols.iter().zip(vals).enumerate() {
                if c < n {
                    col_idx.push(c);
                    values.push(v);
                    source.push(start + k);
                }
            }
            row_ptr.push(col_idx.len());
        }
        let matrix = CsrMatrix::new(n, n, row_ptr, col_idx, values).expect("prefix of a valid CSR matrix");
        Self { matrix, source }
    }

    pub fn refresh(&mut self, parent: &CsrMatrix) {
        let src = parent.values();
        for (v, &p) in self.matrix.values_mut().iter_mut().zip(&self.source) {
            *v = src[p];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lap(n: usize) -> CsrMatrix {
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 2.0));
            if i + 1 < n {
                t.push((i, i + 1, -1.0));
                t.push((i + 1, i, -1.0));
            }
        }
        CsrMatrix::from_triplets(n, n, &t)
    }

    #[test]
    fn nodal_blocks_land_in_place() {
        let a = lap(3);
        let k = TwoFieldMatrix::new(&a, &a, 0.5).unwrap();
        let m = k.assemble(&[1.0, 2.0, 3.0]).to_dense();
        assert_eq!(m[(2, 3)], -2.0);
        assert_eq!(m[(2, 2)], 0.5 * 2.0 + 2.0);
        assert_eq!(m[(0, 2)], -0.5);
        assert_eq!(m[(0, 3)], 0.0);
    }

    #[test]
    fn transformed_matches_triple_product() {
        let a = lap(4);
        let k = TwoFieldMatrix::new(&a, &a.add_scaled(1.0, &a), 0.3).unwrap();
        let mut trip = Vec::new();
        for i in 0..8 {
            trip.push((i, i, 1.0));
            if i > 0 && i % 2 == 0 {
                trip.push((i, i - 2, -1.0));
            }
        }
        let t = CsrMatrix::from_triplets(8, 8, &trip);
        let w = [0.4, 1.0, 2.5, 0.1];
        let tr = TransformedMatrix::new(&k, &t).assemble(&w).to_dense();
        let direct = t.transpose().mul(&k.assemble(&w).mul(&t)).to_dense();
        for i in 0..8 {
            for j in 0..8 {
                assert!((tr[(i, j)] - direct[(i, j)]).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn principal_block_tracks_parent() {
        let mut a = lap(5);
        let mut b = PrincipalBlock::new(&a, 3);
        assert_eq!(b.matrix.to_dense()[(2, 2)], 2.0);
        a.scale(3.0);
        b.refresh(&a);
        assert_eq!(b.matrix.to_dense()[(1, 2)], -3.0);
        assert_eq!(b.matrix.nrows(), 3);
    }
}
