//! Cartesian-voltage OPF: x = [Vre; Vim; Pg; Qg]. Voltage magnitude limits
//! become the nonlinear corridor rows Vmin^2 <= Vre^2 + Vim^2 <= Vmax^2,
//! and the rotational null space is removed by pinning Vim[ref] = 0 with
//! the bound Vre[ref] >= 0.

use num_complex::Complex64;

use crate::grid::Network;
use crate::sparse::Csr;

use super::flows::CartEnd;
use super::{limited_branches, Balance, NlpProblem, OpfError, PolyCosts, VarLayout, Voltage};

pub struct CartesianOpf {
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
    v: Vec<Complex64>,
    i_bus: Vec<Complex64>,
    s_inj: Vec<Complex64>,
}

impl CartesianOpf {
    pub fn new(net: Network, balance: Balance, costs: PolyCosts) -> Self {
        let nb = net.n_bus();
        let ng = net.n_gen();
        let layout = VarLayout { voltage: Voltage::Cartesian, n_bus: nb, n_gen: ng };
        let n = layout.n_vars();
        let mut x_min = vec![f64::NEG_INFINITY; n];
        let mut x_max = vec![f64::INFINITY; n];
        for b in 0..nb {
            let vmax = net.bus[b].vmax;
            x_min[b] = -vmax;
            x_max[b] = vmax;
            x_min[nb + b] = -vmax;
            x_max[nb + b] = vmax;
        }
        x_min[net.ref_bus] = 0.0;
        for (g, gen) in net.gen.iter().enumerate() {
            x_min[2 * nb + g] = gen.pmin;
            x_max[2 * nb + g] = gen.pmax;
            x_min[2 * nb + ng + g] = gen.qmin;
            x_max[2 * nb + ng + g] = gen.qmax;
        }
        let limited = limited_branches(&net);
        let gens_at = net.gens_at_bus();
        CartesianOpf { net, balance, costs, layout, limited, x_min, x_max, gens_at }
    }

    fn state(&self, x: &[f64]) -> Result<State, OpfError> {
        let nb = self.net.n_bus();
        let v: Vec<Complex64> = (0..nb).map(|b| Complex64::new(x[b], x[nb + b])).collect();
        if self.balance == Balance::Current {
            if let Some(b) = v.iter().position(|c| c.norm_sqr() == 0.0) {
                return Err(OpfError::ZeroVoltageDomain(self.net.bus[b].id));
            }
        }
        let i_bus = self.net.y_bus.matvec(&v);
        let s_inj = self.net.injections(&x[self.layout.pg()], &x[self.layout.qg()]);
        Ok(State { v, i_bus, s_inj })
    }
}

impl NlpProblem for CartesianOpf {
    fn n_vars(&self) -> usize {
        self.layout.n_vars()
    }

    fn n_eq(&self) -> usize {
        2 * self.net.n_bus() + 1
    }

    fn n_ineq(&self) -> usize {
        2 * self.limited.len() + 2 * self.net.n_bus()
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
        let nb = self.net.n_bus();
        let res: Vec<Complex64> = match self.balance {
            Balance::Power => (0..nb)
                .map(|b| st.v[b] * st.i_bus[b].conj() - st.s_inj[b])
                .collect(),
            Balance::Current => (0..nb)
                .map(|b| st.i_bus[b] - (st.s_inj[b] / st.v[b]).conj())
                .collect(),
        };
        let mut g = Vec::with_capacity(2 * nb + 1);
        g.extend(res.iter().map(|m| m.re));
        g.extend(res.iter().map(|m| m.im));
        g.push(x[nb + self.net.ref_bus]);
        Ok(g)
    }

    fn eval_h(&self, x: &[f64]) -> Result<Vec<f64>, OpfError> {
        let st = self.state(x)?;
        let nb = self.net.n_bus();
        let nl = self.limited.len();
        let mut h = vec![0.0; 2 * nl + 2 * nb];
        for (k, &l) in self.limited.iter().enumerate() {
            let br = &self.net.branch[l];
            let r2 = br.rate * br.rate;
            let from = CartEnd::new(br.yff, br.yft, st.v[br.from], st.v[br.to]);
            let to = CartEnd::new(br.ytt, br.ytf, st.v[br.to], st.v[br.from]);
            h[k] = from.value() - r2;
            h[nl + k] = to.value() - r2;
        }
        for b in 0..nb {
            let m2 = st.v[b].norm_sqr();
            h[2 * nl + b] = m2 - self.net.bus[b].vmax * self.net.bus[b].vmax;
            h[2 * nl + nb + b] = self.net.bus[b].vmin * self.net.bus[b].vmin - m2;
        }
        Ok(h)
    }

    fn eval_jg(&self, x: &[f64]) -> Result<Csr<f64>, OpfError> {
        let st = self.state(x)?;
        let nb = self.net.n_bus();
        let ng = self.net.n_gen();
        let mut t: Vec<(usize, usize, f64)> = Vec::with_capacity(8 * self.net.y_bus.nnz() + 4 * ng + 1);

        match self.balance {
            Balance::Power => {
                for a in 0..nb {
                    for (b, y_ab) in self.net.y_bus.row(a) {
                        let mut ds_dre = st.v[a] * y_ab.conj();
                        let mut ds_dim = -Complex64::I * st.v[a] * y_ab.conj();
                        if a == b {
                            ds_dre += st.i_bus[a].conj();
                            ds_dim += Complex64::I * st.i_bus[a].conj();
                        }
                        t.push((a, b, ds_dre.re));
                        t.push((a, nb + b, ds_dim.re));
                        t.push((nb + a, b, ds_dre.im));
                        t.push((nb + a, nb + b, ds_dim.im));
                    }
                }
                for (g, gen) in self.net.gen.iter().enumerate() {
                    t.push((gen.bus, 2 * nb + g, -1.0));
                    t.push((nb + gen.bus, 2 * nb + ng + g, -1.0));
                }
            }
            Balance::Current => {
                let w: Vec<Complex64> = (0..nb).map(|b| (st.s_inj[b] / st.v[b]).conj()).collect();
                for a in 0..nb {
                    let c = st.v[a].conj().inv();
                    for (b, y_ab) in self.net.y_bus.row(a) {
                        let mut dm_dre = y_ab;
                        let mut dm_dim = Complex64::I * y_ab;
                        if a == b {
                            dm_dre += w[a] * c;
                            dm_dim -= Complex64::I * w[a] * c;
                        }
                        t.push((a, b, dm_dre.re));
                        t.push((a, nb + b, dm_dim.re));
                        t.push((nb + a, b, dm_dre.im));
                        t.push((nb + a, nb + b, dm_dim.im));
                    }
                }
                for (g, gen) in self.net.gen.iter().enumerate() {
                    let b = gen.bus;
                    let c = st.v[b].conj().inv();
                    let dp = -c;
                    let dq = Complex64::I * c;
                    t.push((b, 2 * nb + g, dp.re));
                    t.push((nb + b, 2 * nb + g, dp.im));
                    t.push((b, 2 * nb + ng + g, dq.re));
                    t.push((nb + b, 2 * nb + ng + g, dq.im));
                }
            }
        }
        // reference-angle pin: Vim[ref] = 0
        t.push((2 * nb, nb + self.net.ref_bus, 1.0));
        Ok(Csr::from_triplets(self.n_eq(), self.n_vars(), t))
    }

    fn eval_jh(&self, x: &[f64]) -> Result<Csr<f64>, OpfError> {
        let st = self.state(x)?;
        let nb = self.net.n_bus();
        let nl = self.limited.len();
        let mut t: Vec<(usize, usize, f64)> = Vec::with_capacity(8 * nl + 4 * nb);
        for (k, &l) in self.limited.iter().enumerate() {
            let br = &self.net.branch[l];
            let (f, tt) = (br.from, br.to);
            let from = CartEnd::new(br.yff, br.yft, st.v[f], st.v[tt]);
            let g = from.grad();
            t.push((k, f, g[0]));
            t.push((k, nb + f, g[1]));
            t.push((k, tt, g[2]));
            t.push((k, nb + tt, g[3]));
            let to = CartEnd::new(br.ytt, br.ytf, st.v[tt], st.v[f]);
            let g = to.grad();
            t.push((nl + k, tt, g[0]));
            t.push((nl + k, nb + tt, g[1]));
            t.push((nl + k, f, g[2]));
            t.push((nl + k, nb + f, g[3]));
        }
        for b in 0..nb {
            t.push((2 * nl + b, b, 2.0 * st.v[b].re));
            t.push((2 * nl + b, nb + b, 2.0 * st.v[b].im));
            t.push((2 * nl + nb + b, b, -2.0 * st.v[b].re));
            t.push((2 * nl + nb + b, nb + b, -2.0 * st.v[b].im));
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

        if obj_w != 0.0 {
            for (g, d2) in self.costs.hess_diag(&x[self.layout.pg()]).into_iter().enumerate() {
                t.push((2 * nb + g, 2 * nb + g, obj_w * d2));
            }
        } else {
            for g in 0..ng {
                t.push((2 * nb + g, 2 * nb + g, 0.0));
            }
        }

        let w: Vec<Complex64> = (0..nb)
            .map(|b| Complex64::new(lam_g[b], -lam_g[nb + b]))
            .collect();

        match self.balance {
            Balance::Power => {
                for a in 0..nb {
                    for (b, y_ab) in self.net.y_bus.row(a) {
                        let m = w[a] * y_ab.conj();
                        let scale = if a == b { 2.0 } else { 1.0 };
                        push_sym(&mut t, a, b, scale * m.re);
                        push_sym(&mut t, nb + a, nb + b, scale * m.re);
                        // K block: H(vre_a, vim_b) and H(vre_b, vim_a)
                        let k1 = -Complex64::I * m;
                        let k2 = Complex64::I * m;
                        t.push((nb + b, a, k1.re));
                        t.push((nb + a, b, k2.re));
                    }
                }
            }
            Balance::Current => {
                for b in 0..nb {
                    let c = st.v[b].conj().inv();
                    let c2 = c * c;
                    let c3 = c2 * c;
                    let tb = w[b] * st.s_inj[b].conj();
                    push_sym(&mut t, b, b, (-2.0 * tb * c3).re);
                    t.push((nb + b, b, (2.0 * Complex64::I * tb * c3).re));
                    push_sym(&mut t, nb + b, nb + b, (2.0 * tb * c3).re);
                    for &g in &self.gens_at[b] {
                        let pg_i = 2 * nb + g;
                        let qg_i = 2 * nb + ng + g;
                        t.push((pg_i, b, (w[b] * c2).re));
                        t.push((pg_i, nb + b, (-Complex64::I * w[b] * c2).re));
                        t.push((qg_i, b, (-Complex64::I * w[b] * c2).re));
                        t.push((qg_i, nb + b, (-w[b] * c2).re));
                    }
                }
            }
        }

        // flow blocks: locals (x1, y1, x2, y2) scattered per end
        let nl = self.limited.len();
        for (k, &l) in self.limited.iter().enumerate() {
            let br = &self.net.branch[l];
            let (f, tt) = (br.from, br.to);
            for (end_idx, mu) in [(0usize, lam_h[k]), (1, lam_h[nl + k])] {
                let (end, idx) = if end_idx == 0 {
                    (
                        CartEnd::new(br.yff, br.yft, st.v[f], st.v[tt]),
                        [f, nb + f, tt, nb + tt],
                    )
                } else {
                    (
                        CartEnd::new(br.ytt, br.ytf, st.v[tt], st.v[f]),
                        [tt, nb + tt, f, nb + f],
                    )
                };
                let h = end.hess();
                for u in 0..4 {
                    for v in u..4 {
                        push_sym(&mut t, idx[u], idx[v], mu * h[u][v]);
                    }
                }
            }
        }

        // magnitude corridor: +-2 diagonal per bus
        for b in 0..nb {
            let mu = 2.0 * (lam_h[2 * nl + b] - lam_h[2 * nl + nb + b]);
            t.push((b, b, mu));
            t.push((nb + b, nb + b, mu));
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
