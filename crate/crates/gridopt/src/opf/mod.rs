//! Construction of the OPF nonlinear program in four formulations:
//! {polar, Cartesian} voltage coordinates x {power, current} nodal balance,
//! all with analytic gradients, Jacobians and Lagrangian Hessians.

mod cartesian;
mod flows;
mod polar;

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::grid::{GenCost, Network};
use crate::pf::{newton_pf, PfError, DEFAULT_PF_MAX_ITER, DEFAULT_PF_TOL};
use crate::sparse::Csr;

pub use cartesian::CartesianOpf;
pub use polar::PolarOpf;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Voltage {
    Polar,
    Cartesian,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Balance {
    Power,
    Current,
}

/// One of the four OPF formulations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Formulation {
    pub voltage: Voltage,
    pub balance: Balance,
}

impl Formulation {
    pub const ALL: [Formulation; 4] = [
        Formulation { voltage: Voltage::Polar, balance: Balance::Power },
        Formulation { voltage: Voltage::Polar, balance: Balance::Current },
        Formulation { voltage: Voltage::Cartesian, balance: Balance::Power },
        Formulation { voltage: Voltage::Cartesian, balance: Balance::Current },
    ];
}

impl fmt::Display for Formulation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let v = match self.voltage {
            Voltage::Polar => "polar",
            Voltage::Cartesian => "cart",
        };
        let b = match self.balance {
            Balance::Power => "power",
            Balance::Current => "current",
        };
        write!(f, "{v}-{b}")
    }
}

impl FromStr for Formulation {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let voltage = if s.starts_with("polar-") {
            Voltage::Polar
        } else if s.starts_with("cart-") {
            Voltage::Cartesian
        } else {
            return Err(format!("unknown formulation `{s}`"));
        };
        let balance = match s.split('-').nth(1) {
            Some("power") => Balance::Power,
            Some("current") => Balance::Current,
            _ => return Err(format!("unknown formulation `{s}`")),
        };
        Ok(Formulation { voltage, balance })
    }
}

/// Initial-guess strategy.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Start {
    Flat,
    CaseData,
    PfSolve,
}

impl fmt::Display for Start {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Start::Flat => "flat",
            Start::CaseData => "mpc",
            Start::PfSolve => "pf",
        })
    }
}

impl FromStr for Start {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "flat" => Ok(Start::Flat),
            "mpc" | "case" => Ok(Start::CaseData),
            "pf" => Ok(Start::PfSolve),
            _ => Err(format!("unknown start mode `{s}`")),
        }
    }
}

/// Named slices of the optimization vector.
#[derive(Debug, Clone)]
pub struct VarLayout {
    pub voltage: Voltage,
    pub n_bus: usize,
    pub n_gen: usize,
}

impl VarLayout {
    pub fn n_vars(&self) -> usize {
        2 * self.n_bus + 2 * self.n_gen
    }

    /// First voltage block: Va (polar) or Vre (Cartesian).
    pub fn v1(&self) -> std::ops::Range<usize> {
        0..self.n_bus
    }

    /// Second voltage block: Vm (polar) or Vim (Cartesian).
    pub fn v2(&self) -> std::ops::Range<usize> {
        self.n_bus..2 * self.n_bus
    }

    pub fn pg(&self) -> std::ops::Range<usize> {
        2 * self.n_bus..2 * self.n_bus + self.n_gen
    }

    pub fn qg(&self) -> std::ops::Range<usize> {
        2 * self.n_bus + self.n_gen..2 * self.n_bus + 2 * self.n_gen
    }
}

#[derive(Debug, Error)]
pub enum OpfError {
    #[error("unsupported cost for generator {gen}: {why}")]
    UnsupportedCost { gen: usize, why: String },
    #[error("current balance undefined: zero voltage magnitude at bus {0}")]
    ZeroVoltageDomain(usize),
    #[error("power-flow start failed: {0}")]
    PfDiverged(#[from] PfError),
}

/// Evaluation callbacks of one OPF formulation. Sparsity patterns are
/// fixed across x: every returned matrix has the same structure at every
/// evaluation point.
pub trait NlpProblem: Send + Sync {
    fn n_vars(&self) -> usize;
    fn n_eq(&self) -> usize;
    fn n_ineq(&self) -> usize;
    fn x_min(&self) -> &[f64];
    fn x_max(&self) -> &[f64];
    fn layout(&self) -> &VarLayout;

    /// Objective, $/h.
    fn eval_f(&self, x: &[f64]) -> Result<f64, OpfError>;
    fn eval_grad_f(&self, x: &[f64]) -> Result<Vec<f64>, OpfError>;
    fn eval_g(&self, x: &[f64]) -> Result<Vec<f64>, OpfError>;
    fn eval_h(&self, x: &[f64]) -> Result<Vec<f64>, OpfError>;
    fn eval_jg(&self, x: &[f64]) -> Result<Csr<f64>, OpfError>;
    fn eval_jh(&self, x: &[f64]) -> Result<Csr<f64>, OpfError>;
    /// Lower-triangle triplets of the Lagrangian Hessian
    /// `obj_w f'' + sum lam_g[i] g_i'' + sum lam_h[i] h_i''`.
    /// Positions depend only on the problem structure, never on x.
    fn eval_hess(
        &self,
        x: &[f64],
        obj_w: f64,
        lam_g: &[f64],
        lam_h: &[f64],
    ) -> Result<Vec<(usize, usize, f64)>, OpfError>;
}

/// Builds the NLP for a network in the requested formulation.
pub fn build_nlp(net: &Network, form: Formulation) -> Result<Box<dyn NlpProblem>, OpfError> {
    let costs = PolyCosts::from_network(net)?;
    Ok(match form.voltage {
        Voltage::Polar => Box::new(PolarOpf::new(net.clone(), form.balance, costs)),
        Voltage::Cartesian => Box::new(CartesianOpf::new(net.clone(), form.balance, costs)),
    })
}

/// Polynomial generator costs with degree <= 3, $/h over MW.
#[derive(Debug, Clone)]
pub struct PolyCosts {
    /// Ascending coefficients per generator.
    coeffs: Vec<Vec<f64>>,
    base_mva: f64,
}

impl PolyCosts {
    pub fn from_network(net: &Network) -> Result<PolyCosts, OpfError> {
        let mut coeffs = Vec::with_capacity(net.n_gen());
        for (g, gen) in net.gen.iter().enumerate() {
            match &gen.cost {
                GenCost::Polynomial(c) => {
                    if c.len() > 4 {
                        return Err(OpfError::UnsupportedCost {
                            gen: g,
                            why: format!("polynomial degree {} exceeds 3", c.len() - 1),
                        });
                    }
                    coeffs.push(c.clone());
                }
                GenCost::PiecewiseLinear(_) => {
                    return Err(OpfError::UnsupportedCost {
                        gen: g,
                        why: "piecewise-linear cost".into(),
                    })
                }
            }
        }
        Ok(PolyCosts { coeffs, base_mva: net.base_mva })
    }

    pub fn eval(&self, pg: &[f64]) -> f64 {
        let mut total = 0.0;
        for (c, &p) in self.coeffs.iter().zip(pg) {
            let mw = p * self.base_mva;
            let mut pow = 1.0;
            for &ck in c {
                total += ck * pow;
                pow *= mw;
            }
        }
        total
    }

    /// d f / d Pg (per-unit argument).
    pub fn grad(&self, pg: &[f64]) -> Vec<f64> {
        self.coeffs
            .iter()
            .zip(pg)
            .map(|(c, &p)| {
                let mw = p * self.base_mva;
                let mut acc = 0.0;
                let mut pow = self.base_mva;
                for (k, &ck) in c.iter().enumerate().skip(1) {
                    acc += k as f64 * ck * pow;
                    pow *= mw;
                }
                acc
            })
            .collect()
    }

    /// d^2 f / d Pg^2 (per-unit argument).
    pub fn hess_diag(&self, pg: &[f64]) -> Vec<f64> {
        self.coeffs
            .iter()
            .zip(pg)
            .map(|(c, &p)| {
                let mw = p * self.base_mva;
                let mut acc = 0.0;
                let mut pow = self.base_mva * self.base_mva;
                for (k, &ck) in c.iter().enumerate().skip(2) {
                    acc += (k * (k - 1)) as f64 * ck * pow;
                    pow *= mw;
                }
                acc
            })
            .collect()
    }
}

/// Builds the starting point for a problem, per the selected strategy.
/// Warm starts are clipped into the variable box.
pub fn initial_guess(
    net: &Network,
    prob: &dyn NlpProblem,
    mode: Start,
) -> Result<Vec<f64>, OpfError> {
    let layout = prob.layout();
    let (lb, ub) = (prob.x_min(), prob.x_max());
    let nb = layout.n_bus;

    let x = match mode {
        Start::Flat => {
            // bound-midpoint rule applied in polar voltage space, then
            // mapped to the formulation's coordinates; Pg/Qg use the
            // one-sided rules directly
            let mut x = vec![0.0; prob.n_vars()];
            for b in 0..nb {
                let vm = flat_value(net.bus[b].vmin, net.bus[b].vmax);
                match layout.voltage {
                    Voltage::Polar => {
                        x[b] = if b == net.ref_bus { net.bus[b].va0 } else { 0.0 };
                        x[nb + b] = vm;
                    }
                    Voltage::Cartesian => {
                        x[b] = vm;
                        x[nb + b] = 0.0;
                    }
                }
            }
            for (g, i) in layout.pg().enumerate() {
                x[i] = flat_value(net.gen[g].pmin, net.gen[g].pmax);
            }
            for (g, i) in layout.qg().enumerate() {
                x[i] = flat_value(net.gen[g].qmin, net.gen[g].qmax);
            }
            x
        }
        Start::CaseData => {
            let vm: Vec<f64> = net.bus.iter().map(|b| b.vm0).collect();
            let va: Vec<f64> = net.bus.iter().map(|b| b.va0).collect();
            let pg: Vec<f64> = net.gen.iter().map(|g| g.pg0).collect();
            let qg: Vec<f64> = net.gen.iter().map(|g| g.qg0).collect();
            pack_state(layout, &vm, &va, &pg, &qg)
        }
        Start::PfSolve => {
            let sol = newton_pf(net, DEFAULT_PF_TOL, DEFAULT_PF_MAX_ITER)?;
            pack_state(layout, &sol.vm, &sol.va, &sol.pg, &sol.qg)
        }
    };

    // clip warm values into the box; flat values satisfy it by construction
    Ok(x
        .into_iter()
        .enumerate()
        .map(|(i, v)| v.clamp(lb[i], ub[i]))
        .collect())
}

fn flat_value(lb: f64, ub: f64) -> f64 {
    match (lb.is_finite(), ub.is_finite()) {
        (true, true) => 0.5 * (lb + ub),
        (true, false) => lb + 1.0,
        (false, true) => ub - 1.0,
        (false, false) => 0.0,
    }
}

fn pack_state(layout: &VarLayout, vm: &[f64], va: &[f64], pg: &[f64], qg: &[f64]) -> Vec<f64> {
    let nb = layout.n_bus;
    let mut x = vec![0.0; layout.n_vars()];
    for b in 0..nb {
        match layout.voltage {
            Voltage::Polar => {
                x[b] = va[b];
                x[nb + b] = vm[b];
            }
            Voltage::Cartesian => {
                x[b] = vm[b] * va[b].cos();
                x[nb + b] = vm[b] * va[b].sin();
            }
        }
    }
    for (g, i) in layout.pg().enumerate() {
        x[i] = pg[g];
    }
    for (g, i) in layout.qg().enumerate() {
        x[i] = qg[g];
    }
    x
}

/// Indices of branches carrying a flow limit (rate > 0), in branch order.
pub(crate) fn limited_branches(net: &Network) -> Vec<usize> {
    net.branch
        .iter()
        .enumerate()
        .filter_map(|(l, br)| (br.rate > 0.0).then_some(l))
        .collect()
}

#[cfg(test)]
mod tests;
