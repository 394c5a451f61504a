//! Small hand-written problems for exercising the interior-point loop
//! without a grid attached.

use crate::opf::{NlpProblem, OpfError, VarLayout, Voltage};
use crate::sparse::Csr;

fn dummy_layout(n: usize) -> VarLayout {
    VarLayout { voltage: Voltage::Polar, n_bus: 0, n_gen: n / 2 }
}

/// Pure box problem: min sum x_i^2 within [lb, ub].
pub struct BoxedProblem {
    lb: Vec<f64>,
    ub: Vec<f64>,
    layout: VarLayout,
}

impl BoxedProblem {
    pub fn new(lb: Vec<f64>, ub: Vec<f64>) -> Self {
        let n = lb.len();
        BoxedProblem { lb, ub, layout: dummy_layout(n) }
    }
}

impl NlpProblem for BoxedProblem {
    fn n_vars(&self) -> usize {
        self.lb.len()
    }
    fn n_eq(&self) -> usize {
        0
    }
    fn n_ineq(&self) -> usize {
        0
    }
    fn x_min(&self) -> &[f64] {
        &self.lb
    }
    fn x_max(&self) -> &[f64] {
        &self.ub
    }
    fn layout(&self) -> &VarLayout {
        &self.layout
    }
    fn eval_f(&self, x: &[f64]) -> Result<f64, OpfError> {
        Ok(x.iter().map(|v| v * v).sum())
    }
    fn eval_grad_f(&self, x: &[f64]) -> Result<Vec<f64>, OpfError> {
        Ok(x.iter().map(|v| 2.0 * v).collect())
    }
    fn eval_g(&self, _x: &[f64]) -> Result<Vec<f64>, OpfError> {
        Ok(vec![])
    }
    fn eval_h(&self, _x: &[f64]) -> Result<Vec<f64>, OpfError> {
        Ok(vec![])
    }
    fn eval_jg(&self, _x: &[f64]) -> Result<Csr<f64>, OpfError> {
        Ok(Csr::zeros(0, self.n_vars()))
    }
    fn eval_jh(&self, _x: &[f64]) -> Result<Csr<f64>, OpfError> {
        Ok(Csr::zeros(0, self.n_vars()))
    }
    fn eval_hess(
        &self,
        _x: &[f64],
        obj_w: f64,
        _lam_g: &[f64],
        _lam_h: &[f64],
    ) -> Result<Vec<(usize, usize, f64)>, OpfError> {
        Ok((0..self.n_vars()).map(|i| (i, i, 2.0 * obj_w)).collect())
    }
}

/// min x1 + x2 subject to x1^2 + x2^2 = 1; optimum at (-r2/2, -r2/2),
/// f* = -sqrt(2), lam_g* = 1/sqrt(2) in the `L = f + lam' g` convention.
pub struct CircleProblem {
    lb: Vec<f64>,
    ub: Vec<f64>,
    layout: VarLayout,
}

impl CircleProblem {
    pub fn new() -> Self {
        CircleProblem {
            lb: vec![f64::NEG_INFINITY; 2],
            ub: vec![f64::INFINITY; 2],
            layout: dummy_layout(2),
        }
    }
}

impl NlpProblem for CircleProblem {
    fn n_vars(&self) -> usize {
        2
    }
    fn n_eq(&self) -> usize {
        1
    }
    fn n_ineq(&self) -> usize {
        0
    }
    fn x_min(&self) -> &[f64] {
        &self.lb
    }
    fn x_max(&self) -> &[f64] {
        &self.ub
    }
    fn layout(&self) -> &VarLayout {
        &self.layout
    }
    fn eval_f(&self, x: &[f64]) -> Result<f64, OpfError> {
        Ok(x[0] + x[1])
    }
    fn eval_grad_f(&self, _x: &[f64]) -> Result<Vec<f64>, OpfError> {
        Ok(vec![1.0, 1.0])
    }
    fn eval_g(&self, x: &[f64]) -> Result<Vec<f64>, OpfError> {
        Ok(vec![x[0] * x[0] + x[1] * x[1] - 1.0])
    }
    fn eval_h(&self, _x: &[f64]) -> Result<Vec<f64>, OpfError> {
        Ok(vec![])
    }
    fn eval_jg(&self, x: &[f64]) -> Result<Csr<f64>, OpfError> {
        Ok(Csr::from_triplets(1, 2, vec![(0, 0, 2.0 * x[0]), (0, 1, 2.0 * x[1])]))
    }
    fn eval_jh(&self, _x: &[f64]) -> Result<Csr<f64>, OpfError> {
        Ok(Csr::zeros(0, 2))
    }
    fn eval_hess(
        &self,
        _x: &[f64],
        _obj_w: f64,
        lam_g: &[f64],
        _lam_h: &[f64],
    ) -> Result<Vec<(usize, usize, f64)>, OpfError> {
        Ok(vec![(0, 0, 2.0 * lam_g[0]), (1, 1, 2.0 * lam_g[0])])
    }
}

/// min x^2 subject to x >= 1 expressed through the variable box;
/// optimum x* = 1, f* = 1, bound multiplier 2.
pub struct QuadAboveOne {
    lb: Vec<f64>,
    ub: Vec<f64>,
    layout: VarLayout,
}

impl QuadAboveOne {
    pub fn new() -> Self {
        QuadAboveOne {
            lb: vec![1.0],
            ub: vec![f64::INFINITY],
            layout: dummy_layout(1),
        }
    }
}

impl NlpProblem for QuadAboveOne {
    fn n_vars(&self) -> usize {
        1
    }
    fn n_eq(&self) -> usize {
        0
    }
    fn n_ineq(&self) -> usize {
        0
    }
    fn x_min(&self) -> &[f64] {
        &self.lb
    }
    fn x_max(&self) -> &[f64] {
        &self.ub
    }
    fn layout(&self) -> &VarLayout {
        &self.layout
    }
    fn eval_f(&self, x: &[f64]) -> Result<f64, OpfError> {
        Ok(x[0] * x[0])
    }
    fn eval_grad_f(&self, x: &[f64]) -> Result<Vec<f64>, OpfError> {
        Ok(vec![2.0 * x[0]])
    }
    fn eval_g(&self, _x: &[f64]) -> Result<Vec<f64>, OpfError> {
        Ok(vec![])
    }
    fn eval_h(&self, _x: &[f64]) -> Result<Vec<f64>, OpfError> {
        Ok(vec![])
    }
    fn eval_jg(&self, _x: &[f64]) -> Result<Csr<f64>, OpfError> {
        Ok(Csr::zeros(0, 1))
    }
    fn eval_jh(&self, _x: &[f64]) -> Result<Csr<f64>, OpfError> {
        Ok(Csr::zeros(0, 1))
    }
    fn eval_hess(
        &self,
        _x: &[f64],
        obj_w: f64,
        _lam_g: &[f64],
        _lam_h: &[f64],
    ) -> Result<Vec<(usize, usize, f64)>, OpfError> {
        Ok(vec![(0, 0, 2.0 * obj_w)])
    }
}

/// Two variables, one general inequality active near the boundary:
/// min (x1-2)^2 + (x2-1)^2 subject to x1^2 + x2^2 <= 1.
pub struct DiskProblem {
    lb: Vec<f64>,
    ub: Vec<f64>,
    layout: VarLayout,
}

impl DiskProblem {
    pub fn new() -> Self {
        DiskProblem {
            lb: vec![f64::NEG_INFINITY; 2],
            ub: vec![f64::INFINITY; 2],
            layout: dummy_layout(2),
        }
    }
}

impl NlpProblem for DiskProblem {
    fn n_vars(&self) -> usize {
        2
    }
    fn n_eq(&self) -> usize {
        0
    }
    fn n_ineq(&self) -> usize {
        1
    }
    fn x_min(&self) -> &[f64] {
        &self.lb
    }
    fn x_max(&self) -> &[f64] {
        &self.ub
    }
    fn layout(&self) -> &VarLayout {
        &self.layout
    }
    fn eval_f(&self, x: &[f64]) -> Result<f64, OpfError> {
        Ok((x[0] - 2.0).powi(2) + (x[1] - 1.0).powi(2))
    }
    fn eval_grad_f(&self, x: &[f64]) -> Result<Vec<f64>, OpfError> {
        Ok(vec![2.0 * (x[0] - 2.0), 2.0 * (x[1] - 1.0)])
    }
    fn eval_g(&self, _x: &[f64]) -> Result<Vec<f64>, OpfError> {
        Ok(vec![])
    }
    fn eval_h(&self, x: &[f64]) -> Result<Vec<f64>, OpfError> {
        Ok(vec![x[0] * x[0] + x[1] * x[1] - 1.0])
    }
    fn eval_jg(&self, _x: &[f64]) -> Result<Csr<f64>, OpfError> {
        Ok(Csr::zeros(0, 2))
    }
    fn eval_jh(&self, x: &[f64]) -> Result<Csr<f64>, OpfError> {
        Ok(Csr::from_triplets(1, 2, vec![(0, 0, 2.0 * x[0]), (0, 1, 2.0 * x[1])]))
    }
    fn eval_hess(
        &self,
        _x: &[f64],
        obj_w: f64,
        _lam_g: &[f64],
        lam_h: &[f64],
    ) -> Result<Vec<(usize, usize, f64)>, OpfError> {
        let d = 2.0 * obj_w + 2.0 * lam_h[0];
        Ok(vec![(0, 0, d), (1, 1, d)])
    }
}

/// Equality-constrained with a duplicated (rank-deficient) constraint row:
/// min x1^2 + x2^2 subject to x1 + x2 = 1 stated twice.
pub struct DuplicatedRowProblem {
    lb: Vec<f64>,
    ub: Vec<f64>,
    layout: VarLayout,
}

impl DuplicatedRowProblem {
    pub fn new() -> Self {
        DuplicatedRowProblem {
            lb: vec![f64::NEG_INFINITY; 2],
            ub: vec![f64::INFINITY; 2],
            layout: dummy_layout(2),
        }
    }
}

impl NlpProblem for DuplicatedRowProblem {
    fn n_vars(&self) -> usize {
        2
    }
    fn n_eq(&self) -> usize {
        2
    }
    fn n_ineq(&self) -> usize {
        0
    }
    fn x_min(&self) -> &[f64] {
        &self.lb
    }
    fn x_max(&self) -> &[f64] {
        &self.ub
    }
    fn layout(&self) -> &VarLayout {
        &self.layout
    }
    fn eval_f(&self, x: &[f64]) -> Result<f64, OpfError> {
        Ok(x[0] * x[0] + x[1] * x[1])
    }
    fn eval_grad_f(&self, x: &[f64]) -> Result<Vec<f64>, OpfError> {
        Ok(vec![2.0 * x[0], 2.0 * x[1]])
    }
    fn eval_g(&self, x: &[f64]) -> Result<Vec<f64>, OpfError> {
        let r = x[0] + x[1] - 1.0;
        Ok(vec![r, r])
    }
    fn eval_h(&self, _x: &[f64]) -> Result<Vec<f64>, OpfError> {
        Ok(vec![])
    }
    fn eval_jg(&self, _x: &[f64]) -> Result<Csr<f64>, OpfError> {
        Ok(Csr::from_triplets(
            2,
            2,
            vec![(0, 0, 1.0), (0, 1, 1.0), (1, 0, 1.0), (1, 1, 1.0)],
        ))
    }
    fn eval_jh(&self, _x: &[f64]) -> Result<Csr<f64>, OpfError> {
        Ok(Csr::zeros(0, 2))
    }
    fn eval_hess(
        &self,
        _x: &[f64],
        obj_w: f64,
        _lam_g: &[f64],
        _lam_h: &[f64],
    ) -> Result<Vec<(usize, usize, f64)>, OpfError> {
        Ok(vec![(0, 0, 2.0 * obj_w), (1, 1, 2.0 * obj_w)])
    }
}
