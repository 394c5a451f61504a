//! Rewrites an NLP with box bounds into pure (g, h) form: every finite
//! bound becomes an appended inequality row, pinned variables (lb = ub)
//! become appended equality rows, leaving only free variables.

use crate::opf::{NlpProblem, OpfError};
use crate::sparse::Csr;

/// One appended inequality row: `x_i - bound <= 0` (upper) or
/// `bound - x_i <= 0` (lower).
#[derive(Debug, Clone, Copy)]
pub struct BoundRow {
    pub var: usize,
    pub bound: f64,
    pub upper: bool,
}

pub struct BarrierProblem<'a> {
    inner: &'a dyn NlpProblem,
    bound_rows: Vec<BoundRow>,
    /// Pinned variables appended as equality rows `x_i - value = 0`.
    pinned: Vec<(usize, f64)>,
}

impl<'a> BarrierProblem<'a> {
    pub fn new(inner: &'a dyn NlpProblem) -> Self {
        let (lb, ub) = (inner.x_min(), inner.x_max());
        let mut bound_rows = Vec::new();
        let mut pinned = Vec::new();
        for i in 0..inner.n_vars() {
            if lb[i] == ub[i] {
                pinned.push((i, lb[i]));
                continue;
            }
            if ub[i].is_finite() {
                bound_rows.push(BoundRow { var: i, bound: ub[i], upper: true });
            }
            if lb[i].is_finite() {
                bound_rows.push(BoundRow { var: i, bound: lb[i], upper: false });
            }
        }
        BarrierProblem { inner, bound_rows, pinned }
    }

    pub fn inner(&self) -> &dyn NlpProblem {
        self.inner
    }

    pub fn n_vars(&self) -> usize {
        self.inner.n_vars()
    }

    pub fn n_eq(&self) -> usize {
        self.inner.n_eq() + self.pinned.len()
    }

    pub fn n_ineq(&self) -> usize {
        self.inner.n_ineq() + self.bound_rows.len()
    }

    pub fn bound_rows(&self) -> &[BoundRow] {
        &self.bound_rows
    }

    pub fn pinned(&self) -> &[(usize, f64)] {
        &self.pinned
    }

    pub fn eval_f(&self, x: &[f64]) -> Result<f64, OpfError> {
        self.inner.eval_f(x)
    }

    pub fn eval_grad_f(&self, x: &[f64]) -> Result<Vec<f64>, OpfError> {
        self.inner.eval_grad_f(x)
    }

    pub fn eval_g(&self, x: &[f64]) -> Result<Vec<f64>, OpfError> {
        let mut g = self.inner.eval_g(x)?;
        g.extend(self.pinned.iter().map(|&(i, v)| x[i] - v));
        Ok(g)
    }

    pub fn eval_h(&self, x: &[f64]) -> Result<Vec<f64>, OpfError> {
        let mut h = self.inner.eval_h(x)?;
        h.extend(self.bound_rows.iter().map(|row| {
            if row.upper {
                x[row.var] - row.bound
            } else {
                row.bound - x[row.var]
            }
        }));
        Ok(h)
    }

    pub fn eval_jg(&self, x: &[f64]) -> Result<Csr<f64>, OpfError> {
        let jg = self.inner.eval_jg(x)?;
        let m0 = self.inner.n_eq();
        let mut t: Vec<(usize, usize, f64)> = jg.iter().collect();
        for (k, &(i, _)) in self.pinned.iter().enumerate() {
            t.push((m0 + k, i, 1.0));
        }
        Ok(Csr::from_triplets(self.n_eq(), self.n_vars(), t))
    }

    pub fn eval_jh(&self, x: &[f64]) -> Result<Csr<f64>, OpfError> {
        let jh = self.inner.eval_jh(x)?;
        let m0 = self.inner.n_ineq();
        let mut t: Vec<(usize, usize, f64)> = jh.iter().collect();
        for (k, row) in self.bound_rows.iter().enumerate() {
            t.push((m0 + k, row.var, if row.upper { 1.0 } else { -1.0 }));
        }
        Ok(Csr::from_triplets(self.n_ineq(), self.n_vars(), t))
    }

    /// Lagrangian Hessian; appended rows are linear so only the inner
    /// multiplier slices participate.
    pub fn eval_hess(
        &self,
        x: &[f64],
        obj_w: f64,
        lam_g: &[f64],
        lam_h: &[f64],
    ) -> Result<Vec<(usize, usize, f64)>, OpfError> {
        self.inner
            .eval_hess(x, obj_w, &lam_g[..self.inner.n_eq()], &lam_h[..self.inner.n_ineq()])
    }

    /// Clips x so every box has at least `margin` slack on each finite
    /// side, shrinking the margin on narrow boxes. Pinned variables are
    /// set exactly.
    pub fn interior_clip(&self, x: &mut [f64], margin: f64) {
        let (lb, ub) = (self.inner.x_min(), self.inner.x_max());
        for i in 0..x.len() {
            if lb[i] == ub[i] {
                x[i] = lb[i];
                continue;
            }
            let m = if lb[i].is_finite() && ub[i].is_finite() {
                margin.min(0.4999 * (ub[i] - lb[i]))
            } else {
                margin
            };
            if lb[i].is_finite() {
                x[i] = x[i].max(lb[i] + m);
            }
            if ub[i].is_finite() {
                x[i] = x[i].min(ub[i] - m);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ipm::test_problems::BoxedProblem;

    #[test]
    fn bounds_become_rows() {
        // n = 1, lb = 0, ub = 2, no g/h
        let p = BoxedProblem::new(vec![0.0], vec![2.0]);
        let bar = BarrierProblem::new(&p);
        assert_eq!(bar.n_ineq(), 2);
        assert_eq!(bar.n_eq(), 0);
        let h = bar.eval_h(&[0.5]).unwrap();
        assert_eq!(h, vec![0.5 - 2.0, 0.0 - 0.5]);
    }

    #[test]
    fn pinned_becomes_equality() {
        let p = BoxedProblem::new(vec![0.0, 1.5], vec![2.0, 1.5]);
        let bar = BarrierProblem::new(&p);
        assert_eq!(bar.n_eq(), 1);
        assert_eq!(bar.n_ineq(), 2);
        let g = bar.eval_g(&[0.5, 2.0]).unwrap();
        assert_eq!(g, vec![0.5]);
    }

    #[test]
    fn interior_clip_narrow_box() {
        let p = BoxedProblem::new(vec![0.0, 0.0], vec![2.0, 0.002]);
        let bar = BarrierProblem::new(&p);
        let mut x = vec![-5.0, 0.002];
        bar.interior_clip(&mut x, 1e-2);
        assert_eq!(x[0], 0.01);
        assert!(x[1] < 0.002 && x[1] > 0.001);
    }
}
