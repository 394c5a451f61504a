//! Polar-voltage OPF: x = [Va; Vm; Pg; Qg], power or current nodal balance.

use num_complex::Complex64;

use crate::grid::Network;
use crate::sparse::Csr;

use super::flows::PolarEnd;
use super::{limited_branches, Balance, NlpProblem, OpfError, PolyCosts, VarLayout, Voltage};

pub struct PolarOpf {
    net: Network,
    balance: Balance,
    costs: PolyCosts,
    layout: VarLayout,
    limited: Vec<usize>,
    x_min: Vec<f64>,
    x_max: Vec<f64>,
    gens_at: Vec<Vec<usize>>,
}

struct State {
    va: Vec<f64>,
    vm: Vec<f64>,
    /// Complex voltages.
    v: Vec<Complex64>,
    /// Unit phasors e^{j va}.
    e: Vec<Complex64>,
    /// Bus currents Ybus * V.
    i_bus: Vec<Complex64>,
    /// Complex net injections Cg (Pg + jQg) - S_load.
    s_inj: Vec<Complex64>,
}

impl PolarOpf {
    pub fn new(net: Network, balance: Balance, costs: PolyCosts) -> Self {
        let nb = net.n_bus();
        let ng = net.n_gen();
        let layout = VarLayout { voltage: Voltage::Polar, n_bus: nb, n_gen: ng };
        let n = layout.n_vars();
        let mut x_min = vec![f64::NEG_INFINITY; n];
        let mut x_max = vec![f64::INFINITY; n];
        // the reference angle is pinned through its box
        x_min[net.ref_bus] = net.bus[net.ref_bus].va0;
        x_max[net.ref_bus] = net.bus[net.ref_bus].va0;
        for b in 0..nb {
            x_min[nb + b] = net.bus[b].vmin;
            x_max[nb + b] = net.bus[b].vmax;
        }
        for (g, gen) in net.gen.iter().enumerate() {
            x_min[2 * nb + g] = gen.pmin;
            x_max[2 * nb + g] = gen.pmax;
            x_min[2 * nb + ng + g] = gen.qmin;
            x_max[2 * nb + ng + g] = gen.qmax;
        }
        let limited = limited_branches(&net);
        let gens_at = net.gens_at_bus();
        PolarOpf { net, balance, costs, layout, limited, x_min, x_max, gens_at }
    }

    fn state(&self, x: &[f64]) -> Result<State, OpfError> {
        let nb = self.net.n_bus();
        let va = x[..nb].to_vec();
        let vm = x[nb..2 * nb].to_vec();
        let e: Vec<Complex64> = va.iter().map(|&a| Complex64::from_polar(1.0, a)).collect();
        let v: Vec<Complex64> = vm.iter().zip(&e).map(|(&m, &u)| m * u).collect();
        if self.balance == Balance::Current {
            if let Some(b) = vm.iter().position(|&m| m == 0.0) {
                return Err(OpfError::ZeroVoltageDomain(self.net.bus[b].id));
            }
        }
        let i_bus = self.net.y_bus.matvec(&v);
        let pg = &x[self.layout.pg()];
        let qg = &x[self.layout.qg()];
        let s_inj = self.net.injections(pg, qg);
        Ok(State { va, vm, v, e, i_bus, s_inj })
    }

    /// Complex balance residual per bus plus its sign convention:
    /// power: S(V) + S_load - S_gen; current: Ybus V - conj(S_inj / V).
    fn balance_residual(&self, st: &State) -> Vec<Complex64> {
        let nb = self.net.n_bus();
        match self.balance {
            Balance::Power => (0..nb)
                .map(|b| st.v[b] * st.i_bus[b].conj() - st.s_inj[b])
                .collect(),
            Balance::Current => (0..nb)
                .map(|b| st.i_bus[b] - (st.s_inj[b] / st.v[b]).conj())
                .collect(),
        }
    }
}

impl NlpProblem for PolarOpf {
    fn n_vars(&self) -> usize {
        self.layout.n_vars()
    }

    fn n_eq(&self) -> usize {
        2 * self.net.n_bus()
    }

    fn n_ineq(&self) -> usize {
        2 * self.limited.len()
    }

    fn x_min(&self) -> &[f64] {
        &self.x_min
    }

    fn x_max(&self) -> &[f64] {
        &self.x_max
    }

    fn layout(&self) -> &VarLayout {
        &self.layout
    }

    fn eval_f(&self, x: &[f64]) -> Result<f64, OpfError> {
        Ok(self.costs.eval(&x[self.layout.pg()]))
    }

    fn eval_grad_f(&self, x: &[f64]) -> Result<Vec<f64>, OpfError> {
        let mut grad = vec![0.0; self.n_vars()];
        let gpg = self.costs.grad(&x[self.layout.pg()]);
        grad[self.layout.pg()].copy_from_slice(&gpg);
        Ok(grad)
    }

    fn eval_g(&self, x: &[f64]) -> Result<Vec<f64>, OpfError> {
        let st = self.state(x)?;
        let res = self.balance_residual(&st);
        let nb = self.net.n_bus();
        let mut g = Vec::with_capacity(2 * nb);
        g.extend(res.iter().map(|m| m.re));
        g.extend(res.iter().map(|m| m.im));
        Ok(g)
    }

    fn eval_h(&self, x: &[f64]) -> Result<Vec<f64>, OpfError> {
        let st = self.state(x)?;
        let nl = self.limited.len();
        let mut h = vec![0.0; 2 * nl];
        for (k, &l) in self.limited.iter().enumerate() {
            let br = &self.net.branch[l];
            let (f, t) = (br.from, br.to);
            let from = PolarEnd::new(br.yff, br.yft, st.vm[f], st.vm[t], st.va[f] - st.va[t]);
            let to = PolarEnd::new(br.ytt, br.ytf, st.vm[t], st.vm[f], st.va[t] - st.va[f]);
            let r2 = br.rate * br.rate;
            h[k] = from.value() - r2;
            h[nl + k] = to.value() - r2;
        }
        Ok(h)
    }

    fn eval_jg(&self, x: &[f64]) -> Result<Csr<f64>, OpfError> {
        let st = self.state(x)?;
        let nb = self.net.n_bus();
        let mut t: Vec<(usize, usize, f64)> = Vec::with_capacity(8 * self.net.y_bus.nnz() + 4 * self.net.n_gen());

        match self.balance {
            Balance::Power => {
                for a in 0..nb {
                    for (b, y_ab) in self.net.y_bus.row(a) {
                        let mut ds_dva = -Complex64::I * st.v[a] * (y_ab * st.v[b]).conj();
                        let mut ds_dvm = st.v[a] * (y_ab * st.e[b]).conj();
                        if a == b {
                            ds_dva += Complex64::I * st.v[a] * st.i_bus[a].conj();
                            ds_dvm += st.e[a] * st.i_bus[a].conj();
                        }
                        t.push((a, b, ds_dva.re));
                        t.push((a, nb + b, ds_dvm.re));
                        t.push((nb + a, b, ds_dva.im));
                        t.push((nb + a, nb + b, ds_dvm.im));
                    }
                }
                for (g, gen) in self.net.gen.iter().enumerate() {
                    t.push((gen.bus, 2 * nb + g, -1.0));
                    t.push((nb + gen.bus, 2 * nb + self.net.n_gen() + g, -1.0));
                }
            }
            Balance::Current => {
                // W = conj(S_inj) / conj(V)
                let w: Vec<Complex64> = (0..nb).map(|b| (st.s_inj[b] / st.v[b]).conj()).collect();
                for a in 0..nb {
                    for (b, y_ab) in self.net.y_bus.row(a) {
                        let mut dm_dva = Complex64::I * y_ab * st.v[b];
                        let mut dm_dvm = y_ab * st.e[b];
                        if a == b {
                            dm_dva -= Complex64::I * w[a];
                            dm_dvm += w[a] / st.vm[a];
                        }
                        t.push((a, b, dm_dva.re));
                        t.push((a, nb + b, dm_dvm.re));
                        t.push((nb + a, b, dm_dva.im));
                        t.push((nb + a, nb + b, dm_dvm.im));
                    }
                }
                let ng = self.net.n_gen();
                for (g, gen) in self.net.gen.iter().enumerate() {
                    let b = gen.bus;
                    let dp = -st.v[b].conj().inv();
                    let dq = Complex64::I * st.v[b].conj().inv();
                    t.push((b, 2 * nb + g, dp.re));
                    t.push((nb + b, 2 * nb + g, dp.im));
                    t.push((b, 2 * nb + ng + g, dq.re));
                    t.push((nb + b, 2 * nb + ng + g, dq.im));
                }
            }
        }
        Ok(Csr::from_triplets(self.n_eq(), self.n_vars(), t))
    }

    fn eval_jh(&self, x: &[f64]) -> Result<Csr<f64>, OpfError> {
        let st = self.state(x)?;
        let nb = self.net.n_bus();
        let nl = self.limited.len();
        let mut t: Vec<(usize, usize, f64)> = Vec::with_capacity(8 * nl);
        for (k, &l) in self.limited.iter().enumerate() {
            let br = &self.net.branch[l];
            let (f, tt) = (br.from, br.to);
            let from = PolarEnd::new(br.yff, br.yft, st.vm[f], st.vm[tt], st.va[f] - st.va[tt]);
            let (dv1, dv2, dphi) = from.grad();
            t.push((k, f, dphi));
            t.push((k, tt, -dphi));
            t.push((k, nb + f, dv1));
            t.push((k, nb + tt, dv2));
            let to = PolarEnd::new(br.ytt, br.ytf, st.vm[tt], st.vm[f], st.va[tt] - st.va[f]);
            let (dv1, dv2, dphi) = to.grad();
            t.push((nl + k, tt, dphi));
            t.push((nl + k, f, -dphi));
            t.push((nl + k, nb + tt, dv1));
            t.push((nl + k, nb + f, dv2));
        }
        Ok(Csr::from_triplets(self.n_ineq(), self.n_vars(), t))
    }

    fn eval_hess(
        &self,
        x: &[f64],
        obj_w: f64,
        lam_g: &[f64],
        lam_h: &[f64],
    ) -> Result<Vec<(usize, usize, f64)>, OpfError> {
        let st = self.state(x)?;
        let nb = self.net.n_bus();
        let ng = self.net.n_gen();
        let mut t: Vec<(usize, usize, f64)> = Vec::new();

        // objective block
        if obj_w != 0.0 {
            for (g, d2) in self.costs.hess_diag(&x[self.layout.pg()]).into_iter().enumerate() {
                t.push((2 * nb + g, 2 * nb + g, obj_w * d2));
            }
        } else {
            for g in 0..ng {
                t.push((2 * nb + g, 2 * nb + g, 0.0));
            }
        }

        // complex multiplier weights: Re(w S) = lamP Re(S) + lamQ Im(S)
        let w: Vec<Complex64> = (0..nb)
            .map(|b| Complex64::new(lam_g[b], -lam_g[nb + b]))
            .collect();

        match self.balance {
            Balance::Power => {
                // u_a = sum_i w_i V_i conj(Y_ia)
                let mut u = vec![Complex64::ZERO; nb];
                for a in 0..nb {
                    for (b, y_ab) in self.net.y_bus.row(a) {
                        u[b] += w[a] * st.v[a] * y_ab.conj();
                    }
                }
                for a in 0..nb {
                    for (b, y_ab) in self.net.y_bus.row(a) {
                        let yc = y_ab.conj();
                        // theta-theta
                        let t1 = w[a] * st.v[a] * yc * st.v[b].conj();
                        let scale = if a == b { 2.0 } else { 1.0 };
                        push_sym(&mut t, a, b, scale * t1.re);
                        // vm-vm
                        let q1 = w[a] * st.e[a] * yc * st.e[b].conj();
                        push_sym(&mut t, nb + a, nb + b, scale * q1.re);
                        // theta-vm, both orientations
                        let p1 = Complex64::I * w[a] * st.v[a] * yc * st.e[b].conj();
                        t.push((nb + b, a, p1.re));
                        let p2 = -Complex64::I * st.v[b].conj() * yc * w[a] * st.e[a];
                        t.push((nb + a, b, p2.re));
                    }
                    let d_tt = -w[a] * st.v[a] * st.i_bus[a].conj() - st.v[a].conj() * u[a];
                    t.push((a, a, d_tt.re));
                    let d_tv = Complex64::I * (w[a] * st.e[a] * st.i_bus[a].conj() - st.e[a].conj() * u[a]);
                    t.push((nb + a, a, d_tv.re));
                }
            }
            Balance::Current => {
                // z_b = sum_a w_a Y_ab
                let mut z = vec![Complex64::ZERO; nb];
                for a in 0..nb {
                    for (b, y_ab) in self.net.y_bus.row(a) {
                        z[b] += w[a] * y_ab;
                    }
                }
                for b in 0..nb {
                    let c = st.v[b].conj().inv();
                    let tb = w[b] * st.s_inj[b].conj();
                    let h_tt = -z[b] * st.v[b] + tb * c;
                    let h_tv = Complex64::I * (z[b] * st.e[b] + tb * c / st.vm[b]);
                    let h_vv = -2.0 * tb * c / (st.vm[b] * st.vm[b]);
                    t.push((b, b, h_tt.re));
                    t.push((nb + b, b, h_tv.re));
                    t.push((nb + b, nb + b, h_vv.re));
                    for &g in &self.gens_at[b] {
                        let pg_i = 2 * nb + g;
                        let qg_i = 2 * nb + ng + g;
                        let d_pt = -Complex64::I * w[b] * c;
                        let d_pv = w[b] * c / st.vm[b];
                        let d_qt = -w[b] * c;
                        let d_qv = -Complex64::I * w[b] * c / st.vm[b];
                        t.push((pg_i, b, d_pt.re));
                        t.push((pg_i, nb + b, d_pv.re));
                        t.push((qg_i, b, d_qt.re));
                        t.push((qg_i, nb + b, d_qv.re));
                    }
                }
            }
        }

        // flow constraint blocks
        let nl = self.limited.len();
        for (k, &l) in self.limited.iter().enumerate() {
            let br = &self.net.branch[l];
            let (f, tt) = (br.from, br.to);
            for (end_idx, mu) in [(0usize, lam_h[k]), (1, lam_h[nl + k])] {
                let (end, v1_i, v2_i, th1, th2) = if end_idx == 0 {
                    (
                        PolarEnd::new(br.yff, br.yft, st.vm[f], st.vm[tt], st.va[f] - st.va[tt]),
                        nb + f,
                        nb + tt,
                        f,
                        tt,
                    )
                } else {
                    (
                        PolarEnd::new(br.ytt, br.ytf, st.vm[tt], st.vm[f], st.va[tt] - st.va[f]),
                        nb + tt,
                        nb + f,
                        tt,
                        f,
                    )
                };
                let h = end.hess();
                // locals: 0 = v1, 1 = v2, 2 = phi with phi = th1 - th2
                push_sym(&mut t, v1_i, v1_i, mu * h[0][0]);
                push_sym(&mut t, v1_i, v2_i, mu * h[0][1]);
                push_sym(&mut t, v2_i, v2_i, mu * h[1][1]);
                push_sym(&mut t, th1, th1, mu * h[2][2]);
                push_sym(&mut t, th1, th2, -mu * h[2][2]);
                push_sym(&mut t, th2, th2, mu * h[2][2]);
                push_sym(&mut t, v1_i, th1, mu * h[0][2]);
                push_sym(&mut t, v1_i, th2, -mu * h[0][2]);
                push_sym(&mut t, v2_i, th1, mu * h[1][2]);
                push_sym(&mut t, v2_i, th2, -mu * h[1][2]);
            }
        }

        Ok(t)
    }
}

fn push_sym(t: &mut Vec<(usize, usize, f64)>, i: usize, j: usize, v: f64) {
    if i >= j {
        t.push((i, j, v));
    } else {
        t.push((j, i, v));
    }
}
