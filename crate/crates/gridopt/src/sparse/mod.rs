//! Sparse matrix storage and the regularized LDL^T factorization behind the
//! KKT solves, plus a small right-hand LU for the unsymmetric power-flow
//! Jacobian.

mod ldlt;
mod lu;
mod ordering;

pub use ldlt::{PivotOrder, Symbolic};

/// Marker for debug probes.
pub struct PivotOrderDebug;
pub use lu::SparseLu;
pub use ordering::min_degree;

use std::ops::AddAssign;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum SparseError {
    #[error("pivot breakdown at column {0}: no acceptable 1x1 or 2x2 pivot")]
    BreakdownPivot(usize),
    #[error("matrix has not been factorized")]
    NotFactorized,
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("entry ({0}, {1}) is outside the analyzed pattern")]
    PatternMismatch(usize, usize),
    #[error("matrix is numerically singular at column {0}")]
    Singular(usize),
}

/// Inertia of the block-diagonal factor `D`: counts of positive, negative
/// and (near-)zero eigenvalues. Components always sum to the dimension.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Inertia {
    pub pos: usize,
    pub neg: usize,
    pub zero: usize,
}

/// Compressed sparse row matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Csr<T> {
    nrows: usize,
    ncols: usize,
    rowptr: Vec<usize>,
    colidx: Vec<usize>,
    values: Vec<T>,
}

impl<T: Copy + Default + AddAssign> Csr<T> {
    /// Builds from (row, col, value) triplets; duplicates are summed.
    pub fn from_triplets(nrows: usize, ncols: usize, mut triplets: Vec<(usize, usize, T)>) -> Self {
        triplets.sort_unstable_by_key(|&(r, c, _)| (r, c));
        let mut rowptr = vec![0usize; nrows + 1];
        let mut colidx = Vec::with_capacity(triplets.len());
        let mut values: Vec<T> = Vec::with_capacity(triplets.len());
        for &(r, c, v) in &triplets {
            assert!(r < nrows && c < ncols, "triplet ({r}, {c}) out of bounds");
            if rowptr[r + 1] > rowptr[r] && colidx.len() == rowptr[r + 1] && *colidx.last().unwrap() == c {
                let last = values.len() - 1;
                values[last] += v;
            } else {
                colidx.push(c);
                values.push(v);
                rowptr[r + 1] = colidx.len();
            }
        }
        // rows with no entries inherit the running offset
        for r in 0..nrows {
            if rowptr[r + 1] < rowptr[r] {
                rowptr[r + 1] = rowptr[r];
            }
        }
        Csr { nrows, ncols, rowptr, colidx, values }
    }

    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Csr { nrows, ncols, rowptr: vec![0; nrows + 1], colidx: Vec::new(), values: Vec::new() }
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.colidx.len()
    }

    /// (column, value) pairs of one row, ascending by column.
    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, T)> + '_ {
        let span = self.rowptr[r]..self.rowptr[r + 1];
        self.colidx[span.clone()]
            .iter()
            .zip(&self.values[span])
            .map(|(&c, &v)| (c, v))
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, T)> + '_ {
        (0..self.nrows).flat_map(move |r| self.row(r).map(move |(c, v)| (r, c, v)))
    }

    pub fn transpose(&self) -> Self {
        let mut t = Vec::with_capacity(self.nnz());
        for (r, c, v) in self.iter() {
            t.push((c, r, v));
        }
        Csr::from_triplets(self.ncols, self.nrows, t)
    }
}

impl<T> Csr<T>
where
    T: Copy + Default + AddAssign + std::ops::Mul<Output = T>,
{
    pub fn matvec(&self, x: &[T]) -> Vec<T> {
        assert_eq!(x.len(), self.ncols);
        let mut y = vec![T::default(); self.nrows];
        for r in 0..self.nrows {
            let mut acc = T::default();
            for i in self.rowptr[r]..self.rowptr[r + 1] {
                acc += self.values[i] * x[self.colidx[i]];
            }
            y[r] = acc;
        }
        y
    }

    /// y = A^T x without forming the transpose.
    pub fn matvec_transposed(&self, x: &[T]) -> Vec<T> {
        assert_eq!(x.len(), self.nrows);
        let mut y = vec![T::default(); self.ncols];
        for r in 0..self.nrows {
            for i in self.rowptr[r]..self.rowptr[r + 1] {
                y[self.colidx[i]] += self.values[i] * x[r];
            }
        }
        y
    }
}

/// Narrow linear-solver interface the interior-point loop is written
/// against, so an external factorization engine can be slotted in behind
/// the same four operations.
pub trait SymIndefSolver {
    /// Fixes the sparsity pattern (lower triangle) and computes the
    /// fill-reducing ordering and symbolic factorization.
    fn prepare(&mut self, dim: usize, lower_pattern: &[(usize, usize)]);
    /// Replaces the numeric values; positions must lie inside the prepared
    /// pattern. The diagonal is always structurally present.
    fn set_values(&mut self, lower_triplets: &[(usize, usize, f64)]) -> Result<(), SparseError>;
    fn factorize(&mut self) -> Result<Inertia, SparseError>;
    fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>, SparseError>;
    fn inertia(&self) -> Option<Inertia>;
    /// Bytes held by the numeric factor, for memory accounting.
    fn factor_bytes(&self) -> usize;
}

/// Compressed sparse symmetric matrix: lower triangle stored column-wise
/// with the diagonal structurally present, plus the fill-reducing ordering,
/// the LDL^T factor and its inertia once computed.
#[derive(Debug, Default)]
pub struct SparseSym {
    dim: usize,
    colptr: Vec<usize>,
    rowidx: Vec<usize>,
    values: Vec<f64>,
    symbolic: Option<Symbolic>,
    /// Pivot-aware elimination order, established by the first
    /// factorization and reused afterwards.
    order: Option<PivotOrder>,
    factor: Option<ldlt::LdltFactor>,
    /// Relative pivot threshold for the 1x1/2x2 selection.
    pub pivot_threshold: f64,
}

impl SparseSym {
    /// Assembles the lower triangle from triplets. Upper-triangle triplets
    /// are mirrored; duplicates are summed; all diagonal positions are made
    /// structurally present.
    pub fn from_lower_triplets(
        dim: usize,
        triplets: impl IntoIterator<Item = (usize, usize, f64)>,
    ) -> Self {
        let mut entries: Vec<(usize, usize, f64)> = triplets
            .into_iter()
            .map(|(r, c, v)| if r >= c { (r, c, v) } else { (c, r, v) })
            .collect();
        entries.extend((0..dim).map(|i| (i, i, 0.0)));
        // column-major order for the lower triangle
        entries.sort_unstable_by_key(|&(r, c, _)| (c, r));
        let mut colptr = vec![0usize; dim + 1];
        let mut rowidx = Vec::with_capacity(entries.len());
        let mut values = Vec::with_capacity(entries.len());
        for &(r, c, v) in &entries {
            assert!(r < dim, "triplet row {r} out of bounds for dim {dim}");
            if colptr[c + 1] > colptr[c]
                && rowidx.len() == colptr[c + 1]
                && *rowidx.last().unwrap() == r
            {
                let last = values.len() - 1;
                values[last] += v;
            } else {
                rowidx.push(r);
                values.push(v);
                colptr[c + 1] = rowidx.len();
            }
        }
        for c in 0..dim {
            if colptr[c + 1] < colptr[c] {
                colptr[c + 1] = colptr[c];
            }
        }
        SparseSym {
            dim,
            colptr,
            rowidx,
            values,
            symbolic: None,
            order: None,
            factor: None,
            pivot_threshold: ldlt::DEFAULT_PIVOT_THRESHOLD,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.rowidx.len()
    }

    /// Fill-reducing ordering plus elimination tree and factor nonzero
    /// counts. Computed once; refactorizations reuse it.
    pub fn analyze(&mut self) -> &Symbolic {
        if self.symbolic.is_none() {
            self.symbolic = Some(ldlt::analyze(self.dim, &self.colptr, &self.rowidx));
        }
        self.symbolic.as_ref().unwrap()
    }

    /// LDL^T with 1x1 and 2x2 pivots restricted to adjacent columns of the
    /// fill-reducing order. Returns the inertia of D.
    pub fn factorize(&mut self) -> Result<Inertia, SparseError> {
        self.analyze();
        if self.order.is_none() {
            self.order = Some(self.fresh_order(self.pivot_threshold));
        }
        let mut factor = ldlt::factorize(
            self.dim,
            &self.colptr,
            &self.rowidx,
            &self.values,
            self.order.as_ref().unwrap(),
            self.pivot_threshold,
        );
        if factor.is_err() {
            // the cached order was matched to older values; rebuild the
            // pairing from the current ones, escalating the weak-column
            // margin so marginal diagonals that degrade during elimination
            // get a 2x2 partner as well
            for boost in [1.0, 10.0, 100.0] {
                let order = self.fresh_order(self.pivot_threshold * boost);
                factor = ldlt::factorize(
                    self.dim,
                    &self.colptr,
                    &self.rowidx,
                    &self.values,
                    &order,
                    self.pivot_threshold,
                );
                let ok = factor.is_ok();
                self.order = Some(order);
                if ok {
                    break;
                }
            }
        }
        let factor = factor?;
        let inertia = factor.inertia;
        self.factor = Some(factor);
        Ok(inertia)
    }

    fn fresh_order(&self, pair_margin: f64) -> PivotOrder {
        ldlt::pivot_order(
            self.dim,
            &self.colptr,
            &self.rowidx,
            &self.values,
            pair_margin,
        )
    }

    /// Solves `M x = rhs` using the current factor, with one step of
    /// iterative refinement against the stored matrix values.
    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>, SparseError> {
        let factor = self.factor.as_ref().ok_or(SparseError::NotFactorized)?;
        if rhs.len() != self.dim {
            return Err(SparseError::Dimension(format!(
                "rhs length {} does not match dim {}",
                rhs.len(),
                self.dim
            )));
        }
        let mut x = factor.solve(rhs);
        // one refinement step; a second only if the first did not reach
        // the residual contract
        for _ in 0..2 {
            let r = self.residual(&x, rhs);
            if self.scaled_residual_norm(&r, &x, rhs) <= 1e-10 {
                break;
            }
            let dx = factor.solve(&r);
            for (xi, di) in x.iter_mut().zip(&dx) {
                *xi += di;
            }
        }
        Ok(x)
    }

    pub fn inertia(&self) -> Option<Inertia> {
        self.factor.as_ref().map(|f| f.inertia)
    }

    /// `M x` from the lower-triangle storage.
    pub fn mul(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.dim];
        for c in 0..self.dim {
            for i in self.colptr[c]..self.colptr[c + 1] {
                let r = self.rowidx[i];
                let v = self.values[i];
                y[r] += v * x[c];
                if r != c {
                    y[c] += v * x[r];
                }
            }
        }
        y
    }

    fn residual(&self, x: &[f64], rhs: &[f64]) -> Vec<f64> {
        let mx = self.mul(x);
        rhs.iter().zip(&mx).map(|(b, m)| b - m).collect()
    }

    fn scaled_residual_norm(&self, r: &[f64], x: &[f64], rhs: &[f64]) -> f64 {
        let norm_m = self.norm_inf();
        let denom = norm_m * norm_inf(x) + norm_inf(rhs);
        if denom == 0.0 {
            norm_inf(r)
        } else {
            norm_inf(r) / denom
        }
    }

    /// Infinity norm (max absolute row sum) of the symmetric matrix.
    pub fn norm_inf(&self) -> f64 {
        let mut row_sums = vec![0.0f64; self.dim];
        for c in 0..self.dim {
            for i in self.colptr[c]..self.colptr[c + 1] {
                let r = self.rowidx[i];
                let a = self.values[i].abs();
                row_sums[r] += a;
                if r != c {
                    row_sums[c] += a;
                }
            }
        }
        row_sums.into_iter().fold(0.0, f64::max)
    }

    pub fn factor_nnz(&self) -> Option<usize> {
        self.factor.as_ref().map(|f| f.nnz())
    }
}

impl SymIndefSolver for SparseSym {
    fn prepare(&mut self, dim: usize, lower_pattern: &[(usize, usize)]) {
        *self = SparseSym::from_lower_triplets(dim, lower_pattern.iter().map(|&(r, c)| (r, c, 0.0)));
        self.analyze();
    }

    fn set_values(&mut self, lower_triplets: &[(usize, usize, f64)]) -> Result<(), SparseError> {
        self.values.iter_mut().for_each(|v| *v = 0.0);
        for &(r, c, v) in lower_triplets {
            let (r, c) = if r >= c { (r, c) } else { (c, r) };
            if c >= self.dim {
                return Err(SparseError::PatternMismatch(r, c));
            }
            let span = &self.rowidx[self.colptr[c]..self.colptr[c + 1]];
            match span.binary_search(&r) {
                Ok(off) => self.values[self.colptr[c] + off] += v,
                Err(_) => return Err(SparseError::PatternMismatch(r, c)),
            }
        }
        self.factor = None;
        Ok(())
    }

    fn factorize(&mut self) -> Result<Inertia, SparseError> {
        SparseSym::factorize(self)
    }

    fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>, SparseError> {
        SparseSym::solve(self, rhs)
    }

    fn inertia(&self) -> Option<Inertia> {
        SparseSym::inertia(self)
    }

    fn factor_bytes(&self) -> usize {
        self.factor.as_ref().map_or(0, |f| f.bytes())
    }
}

pub fn norm_inf(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |acc, x| acc.max(x.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csr_from_triplets_sums_duplicates() {
        let m = Csr::from_triplets(2, 3, vec![(0, 1, 2.0), (0, 1, 3.0), (1, 2, 1.0)]);
        assert_eq!(m.nnz(), 2);
        assert_eq!(m.row(0).collect::<Vec<_>>(), vec![(1, 5.0)]);
    }

    #[test]
    fn csr_matvec_and_transpose() {
        let m = Csr::from_triplets(2, 3, vec![(0, 0, 1.0), (0, 2, 2.0), (1, 1, 3.0)]);
        assert_eq!(m.matvec(&[1.0, 1.0, 1.0]), vec![3.0, 3.0]);
        assert_eq!(m.matvec_transposed(&[1.0, 2.0]), vec![1.0, 6.0, 2.0]);
        let t = m.transpose();
        assert_eq!(t.nrows(), 3);
        assert_eq!(t.row(2).collect::<Vec<_>>(), vec![(0, 2.0)]);
    }

    #[test]
    fn sym_mul_mirrors_lower() {
        // [[2, 1], [1, 3]]
        let m = SparseSym::from_lower_triplets(2, vec![(0, 0, 2.0), (1, 0, 1.0), (1, 1, 3.0)]);
        assert_eq!(m.mul(&[1.0, 1.0]), vec![3.0, 4.0]);
        assert_eq!(m.norm_inf(), 4.0);
    }
}
