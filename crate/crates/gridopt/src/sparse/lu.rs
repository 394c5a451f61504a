//! Sparse LU with partial pivoting (Gilbert-Peierls), used for the
//! unsymmetric power-flow Jacobian. Columns are eliminated in a caller
//! supplied fill-reducing order; rows pivot by magnitude with a mild
//! preference for the diagonal.

use super::{Csr, SparseError};

const DIAG_PREFERENCE: f64 = 0.1;

#[derive(Debug)]
pub struct SparseLu {
    n: usize,
    /// L columns, unit diagonal implicit, rows in original index space.
    l_cols: Vec<Vec<(usize, f64)>>,
    /// U columns, strictly above the diagonal in pivot order.
    u_cols: Vec<Vec<(usize, f64)>>,
    u_diag: Vec<f64>,
    /// Original row chosen as pivot at each step.
    pivot_row: Vec<usize>,
    /// Column eliminated at each step (new-to-old).
    col_order: Vec<usize>,
}

impl SparseLu {
    /// Factors a square matrix given in CSR form. `col_order` is the column
    /// elimination order; pass `(0..n).collect()` for natural order.
    pub fn factor(a: &Csr<f64>, col_order: &[usize]) -> Result<SparseLu, SparseError> {
        let n = a.nrows();
        if a.ncols() != n || col_order.len() != n {
            return Err(SparseError::Dimension(format!(
                "matrix {}x{} with order of length {}",
                a.nrows(),
                a.ncols(),
                col_order.len()
            )));
        }
        let at = a.transpose(); // row r of `at` = column r of `a`

        let mut lu = SparseLu {
            n,
            l_cols: Vec::with_capacity(n),
            u_cols: Vec::with_capacity(n),
            u_diag: vec![0.0; n],
            pivot_row: Vec::with_capacity(n),
            col_order: col_order.to_vec(),
        };
        // position of each original row in pivot order; MAX = not yet pivotal
        let mut row_pos = vec![usize::MAX; n];
        let mut x = vec![0.0; n];
        let mut visited = vec![usize::MAX; n];
        let mut cand_mark = vec![usize::MAX; n];
        let mut reach: Vec<usize> = Vec::new();
        let mut dfs_stack: Vec<(usize, usize)> = Vec::new();

        for (k, &col) in col_order.iter().enumerate() {
            // pattern of the triangular solve via DFS over L's structure;
            // reach comes out in post-order
            reach.clear();
            for (r, _) in at.row(col) {
                let p = row_pos[r];
                if p != usize::MAX && visited[p] != k {
                    Self::dfs(p, k, &lu.l_cols, &row_pos, &mut visited, &mut reach, &mut dfs_stack);
                }
            }

            let mut candidates: Vec<usize> = Vec::new();
            for (r, v) in at.row(col) {
                x[r] = v;
                if row_pos[r] == usize::MAX && cand_mark[r] != k {
                    cand_mark[r] = k;
                    candidates.push(r);
                }
            }
            // reverse post-order = parents before children
            for &p in reach.iter().rev() {
                let xp = x[lu.pivot_row[p]];
                if xp != 0.0 {
                    for &(r, l) in &lu.l_cols[p] {
                        if row_pos[r] == usize::MAX && cand_mark[r] != k {
                            cand_mark[r] = k;
                            candidates.push(r);
                        }
                        x[r] -= l * xp;
                    }
                }
            }

            let mut u_col: Vec<(usize, f64)> = reach
                .iter()
                .map(|&p| (p, x[lu.pivot_row[p]]))
                .filter(|&(_, v)| v != 0.0)
                .collect();
            u_col.sort_unstable_by_key(|&(p, _)| p);

            candidates.sort_unstable();
            let mut pivot = usize::MAX;
            let mut max_abs = 0.0;
            for &r in &candidates {
                let v = x[r].abs();
                if v > max_abs {
                    max_abs = v;
                    pivot = r;
                }
            }
            if max_abs == 0.0 {
                return Err(SparseError::Singular(col));
            }
            // keep the structural diagonal when it is large enough
            if row_pos[col] == usize::MAX && x[col] != 0.0 && x[col].abs() >= DIAG_PREFERENCE * max_abs {
                pivot = col;
            }

            let pv = x[pivot];
            let l_col: Vec<(usize, f64)> = candidates
                .iter()
                .filter(|&&r| r != pivot && x[r] != 0.0)
                .map(|&r| (r, x[r] / pv))
                .collect();

            for &r in &candidates {
                x[r] = 0.0;
            }
            for &p in &reach {
                x[lu.pivot_row[p]] = 0.0;
            }

            lu.u_diag[k] = pv;
            lu.u_cols.push(u_col);
            lu.l_cols.push(l_col);
            lu.pivot_row.push(pivot);
            row_pos[pivot] = k;
        }
        Ok(lu)
    }

    fn dfs(
        start: usize,
        stamp: usize,
        l_cols: &[Vec<(usize, f64)>],
        row_pos: &[usize],
        visited: &mut [usize],
        reach: &mut Vec<usize>,
        stack: &mut Vec<(usize, usize)>,
    ) {
        stack.clear();
        stack.push((start, 0));
        visited[start] = stamp;
        while let Some(frame) = stack.last_mut() {
            let (p, next) = (frame.0, &mut frame.1);
            let col = &l_cols[p];
            let mut descended = false;
            while *next < col.len() {
                let child_row = col[*next].0;
                *next += 1;
                let cp = row_pos[child_row];
                if cp != usize::MAX && visited[cp] != stamp {
                    visited[cp] = stamp;
                    stack.push((cp, 0));
                    descended = true;
                    break;
                }
            }
            if !descended {
                stack.pop();
                reach.push(p);
            }
        }
    }

    /// Solves `A x = b` in place.
    pub fn solve(&self, b: &mut [f64]) -> Result<(), SparseError> {
        if b.len() != self.n {
            return Err(SparseError::Dimension(format!(
                "rhs length {} does not match dim {}",
                b.len(),
                self.n
            )));
        }
        // forward: L z = P b, z indexed by pivot step
        let mut z = vec![0.0; self.n];
        for k in 0..self.n {
            let t = b[self.pivot_row[k]];
            z[k] = t;
            if t != 0.0 {
                for &(r, l) in &self.l_cols[k] {
                    b[r] -= l * t;
                }
            }
        }
        // backward: U x = z with column access
        for k in (0..self.n).rev() {
            let xk = z[k] / self.u_diag[k];
            z[k] = xk;
            if xk != 0.0 {
                for &(p, u) in &self.u_cols[k] {
                    z[p] -= u * xk;
                }
            }
        }
        for (k, &col) in self.col_order.iter().enumerate() {
            b[col] = z[k];
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dense_to_csr(rows: &[&[f64]]) -> Csr<f64> {
        let mut t = Vec::new();
        for (r, row) in rows.iter().enumerate() {
            for (c, &v) in row.iter().enumerate() {
                if v != 0.0 {
                    t.push((r, c, v));
                }
            }
        }
        Csr::from_triplets(rows.len(), rows[0].len(), t)
    }

    #[test]
    fn solves_small_system() {
        let a = dense_to_csr(&[&[2.0, 1.0, 0.0], &[1.0, 3.0, 1.0], &[0.0, 1.0, 4.0]]);
        let lu = SparseLu::factor(&a, &[0, 1, 2]).unwrap();
        let mut b = vec![3.0, 5.0, 5.0];
        lu.solve(&mut b).unwrap();
        let r = a.matvec(&b);
        for (ri, bi) in r.iter().zip([3.0, 5.0, 5.0]) {
            assert!((ri - bi).abs() < 1e-12);
        }
    }

    #[test]
    fn pivots_off_zero_diagonal() {
        let a = dense_to_csr(&[&[0.0, 1.0], &[1.0, 0.0]]);
        let lu = SparseLu::factor(&a, &[0, 1]).unwrap();
        let mut b = vec![2.0, 3.0];
        lu.solve(&mut b).unwrap();
        assert!((b[0] - 3.0).abs() < 1e-14);
        assert!((b[1] - 2.0).abs() < 1e-14);
    }

    #[test]
    fn singular_reported() {
        let a = dense_to_csr(&[&[1.0, 2.0], &[2.0, 4.0]]);
        assert!(matches!(
            SparseLu::factor(&a, &[0, 1]),
            Err(SparseError::Singular(_))
        ));
    }

    #[test]
    fn random_orderings_agree() {
        let a = dense_to_csr(&[
            &[4.0, 0.0, 1.0, 0.0],
            &[0.0, 3.0, 0.0, 2.0],
            &[1.0, 0.0, 5.0, 1.0],
            &[0.0, 2.0, 1.0, 6.0],
        ]);
        let b0 = vec![1.0, 2.0, 3.0, 4.0];
        let lu1 = SparseLu::factor(&a, &[0, 1, 2, 3]).unwrap();
        let lu2 = SparseLu::factor(&a, &[3, 1, 0, 2]).unwrap();
        let mut b1 = b0.clone();
        let mut b2 = b0.clone();
        lu1.solve(&mut b1).unwrap();
        lu2.solve(&mut b2).unwrap();
        for (x1, x2) in b1.iter().zip(&b2) {
            assert!((x1 - x2).abs() < 1e-12);
        }
    }
}
