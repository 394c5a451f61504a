//! Newton-Raphson AC power flow in polar coordinates, used to produce the
//! warm OPF starting point.

use num_complex::Complex64;
use thiserror::Error;

use crate::grid::{BusType, Network};
use crate::sparse::{min_degree, norm_inf, Csr, SparseLu};

pub const DEFAULT_PF_TOL: f64 = 1e-8;
pub const DEFAULT_PF_MAX_ITER: usize = 30;

#[derive(Debug, Clone)]
pub struct PfSolution {
    pub vm: Vec<f64>,
    pub va: Vec<f64>,
    pub pg: Vec<f64>,
    pub qg: Vec<f64>,
    pub iterations: usize,
    pub max_mismatch: f64,
    pub converged: bool,
}

#[derive(Debug, Error)]
pub enum PfError {
    #[error("power flow diverged: mismatch {mismatch:.3e} after {iterations} iterations")]
    Diverged { iterations: usize, mismatch: f64 },
    #[error("singular power-flow Jacobian at iteration {0}")]
    SingularJacobian(usize),
}

/// Classic polar Newton power flow on the PV/PQ mismatch equations.
/// Unknowns are Va at non-reference buses and Vm at PQ buses; the seed is
/// the case-data voltage profile. Q limits are not enforced.
pub fn newton_pf(net: &Network, tol: f64, max_iter: usize) -> Result<PfSolution, PfError> {
    let nb = net.n_bus();
    let mut vm: Vec<f64> = net.bus.iter().map(|b| b.vm0).collect();
    let mut va: Vec<f64> = net.bus.iter().map(|b| b.va0).collect();

    let pv: Vec<usize> = (0..nb).filter(|&b| net.bus[b].bus_type == BusType::Pv).collect();
    let pq: Vec<usize> = (0..nb).filter(|&b| net.bus[b].bus_type == BusType::Pq).collect();
    let pv_pq: Vec<usize> = pv.iter().chain(pq.iter()).copied().collect();
    let npv = pv.len();
    let npq = pq.len();
    let n_unknown = npv + 2 * npq;

    // positions of each bus's angle/magnitude unknowns, MAX = fixed
    let mut va_pos = vec![usize::MAX; nb];
    let mut vm_pos = vec![usize::MAX; nb];
    for (i, &b) in pv_pq.iter().enumerate() {
        va_pos[b] = i;
    }
    for (i, &b) in pq.iter().enumerate() {
        vm_pos[b] = npv + npq + i;
    }

    let pg0: Vec<f64> = net.gen.iter().map(|g| g.pg0).collect();
    let qg0: Vec<f64> = net.gen.iter().map(|g| g.qg0).collect();
    let s_inj = net.injections(&pg0, &qg0);

    let mismatch = |vm: &[f64], va: &[f64]| -> (Vec<f64>, Vec<Complex64>, Vec<Complex64>) {
        let v: Vec<Complex64> = vm.iter().zip(va).map(|(&m, &a)| Complex64::from_polar(m, a)).collect();
        let i_bus = net.y_bus.matvec(&v);
        let ds: Vec<Complex64> = (0..nb).map(|b| v[b] * i_bus[b].conj() - s_inj[b]).collect();
        let mut f = Vec::with_capacity(n_unknown);
        f.extend(pv_pq.iter().map(|&b| ds[b].re));
        f.extend(pq.iter().map(|&b| ds[b].im));
        (f, v, i_bus)
    };

    let (mut f, mut v, mut i_bus) = mismatch(&vm, &va);
    let mut max_mis = norm_inf(&f);
    let mut iterations = 0;
    let mut order: Option<Vec<usize>> = None;

    while max_mis > tol && iterations < max_iter {
        iterations += 1;

        // dS/dVa and dS/dVm restricted to unknown columns
        let mut triplets: Vec<(usize, usize, f64)> = Vec::with_capacity(8 * net.y_bus.nnz());
        for a in 0..nb {
            let fp_row = va_pos[a]; // P-mismatch row of bus a (MAX at the slack)
            let q_row = vm_pos[a]; // Q-mismatch rows and Vm columns share indexing
            for (b, y_ab) in net.y_bus.row(a) {
                // dS_a/dVa_b and dS_a/dVm_b
                let mut ds_dva = -Complex64::I * v[a] * (y_ab * v[b]).conj();
                let mut ds_dvm = v[a] * (y_ab * v[b] / vm[b]).conj();
                if a == b {
                    ds_dva += Complex64::I * v[a] * i_bus[a].conj();
                    ds_dvm += (v[a] / vm[a]) * i_bus[a].conj();
                }
                if va_pos[b] != usize::MAX {
                    if fp_row != usize::MAX {
                        triplets.push((fp_row, va_pos[b], ds_dva.re));
                    }
                    if q_row != usize::MAX {
                        triplets.push((q_row, va_pos[b], ds_dva.im));
                    }
                }
                if vm_pos[b] != usize::MAX {
                    if fp_row != usize::MAX {
                        triplets.push((fp_row, vm_pos[b], ds_dvm.re));
                    }
                    if q_row != usize::MAX {
                        triplets.push((q_row, vm_pos[b], ds_dvm.im));
                    }
                }
            }
        }
        let jac = Csr::from_triplets(n_unknown, n_unknown, triplets);

        let order_ref = order.get_or_insert_with(|| {
            let sym = jac
                .iter()
                .filter(|&(r, c, _)| r > c)
                .map(|(r, c, _)| (r, c))
                .chain(jac.iter().filter(|&(r, c, _)| c > r).map(|(r, c, _)| (c, r)));
            min_degree(n_unknown, sym)
        });
        let lu = SparseLu::factor(&jac, order_ref)
            .map_err(|_| PfError::SingularJacobian(iterations))?;
        let mut dx: Vec<f64> = f.iter().map(|x| -x).collect();
        lu.solve(&mut dx).map_err(|_| PfError::SingularJacobian(iterations))?;

        for (i, &b) in pv_pq.iter().enumerate() {
            va[b] += dx[i];
        }
        for (i, &b) in pq.iter().enumerate() {
            vm[b] += dx[npv + npq + i];
        }

        (f, v, i_bus) = mismatch(&vm, &va);
        max_mis = norm_inf(&f);
        if !max_mis.is_finite() {
            return Err(PfError::Diverged { iterations, mismatch: max_mis });
        }
    }

    if max_mis > tol {
        return Err(PfError::Diverged { iterations, mismatch: max_mis });
    }

    // slack absorption: the reference bus takes P and Q, PV buses take Q,
    // split equally among co-located generators
    let gens_at = net.gens_at_bus();
    let mut pg = pg0.clone();
    let mut qg = qg0.clone();
    for b in 0..nb {
        let gens = &gens_at[b];
        if gens.is_empty() {
            continue;
        }
        let s_calc = v[b] * i_bus[b].conj();
        match net.bus[b].bus_type {
            BusType::Ref => {
                let p_total = s_calc.re + net.bus[b].pd;
                let q_total = s_calc.im + net.bus[b].qd;
                let share = gens.len() as f64;
                for &g in gens {
                    pg[g] = p_total / share;
                    qg[g] = q_total / share;
                }
            }
            BusType::Pv => {
                let q_total = s_calc.im + net.bus[b].qd;
                let share = gens.len() as f64;
                for &g in gens {
                    qg[g] = q_total / share;
                }
            }
            BusType::Pq => {}
        }
    }

    Ok(PfSolution {
        vm,
        va,
        pg,
        qg,
        iterations,
        max_mismatch: max_mis,
        converged: true,
    })
}

/// Total system losses at a voltage profile: sum of Re(S_f + S_t), pu.
pub fn losses(net: &Network, vm: &[f64], va: &[f64]) -> f64 {
    let v: Vec<Complex64> = vm.iter().zip(va).map(|(&m, &a)| Complex64::from_polar(m, a)).collect();
    let i_f = net.y_from.matvec(&v);
    let i_t = net.y_to.matvec(&v);
    net.branch
        .iter()
        .enumerate()
        .map(|(l, br)| {
            let s_f = v[br.from] * i_f[l].conj();
            let s_t = v[br.to] * i_t[l].conj();
            s_f.re + s_t.re
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::build_network;
    use crate::mpc::parse_case;

    fn single_bus_case() -> Network {
        let text = "function mpc = one\n\
                    mpc.baseMVA = 100;\n\
                    mpc.bus = [1 3 80 20 0 0 1 1 0 345 1 1.1 0.9];\n\
                    mpc.gen = [1 80 20 300 -300 1 100 1 250 10];\n\
                    mpc.branch = [1 1 0 0.1 0 0 0 0 0 0 0 -360 360];\n";
        build_network(&parse_case(text).unwrap()).unwrap()
    }

    #[test]
    fn already_solved_single_bus() {
        let net = single_bus_case();
        let sol = newton_pf(&net, 1e-8, 30).unwrap();
        assert!(sol.converged);
        assert_eq!(sol.iterations, 0);
        assert_eq!(sol.max_mismatch, 0.0);
        // slack absorbs the load exactly
        assert!((sol.pg[0] - 0.8).abs() < 1e-12);
        assert!((sol.qg[0] - 0.2).abs() < 1e-12);
    }

    #[test]
    fn two_bus_matches_closed_form() {
        // slack 1<0 deg feeding Pd = 0.5 pu across x = 0.1 pu: the PQ bus
        // voltage solves V^4 - V^2(1 - 2xP... derived from
        // P = -Vm sin(th)/x, Q = 0 = (Vm cos(th) - Vm^2)/x
        let text = "function mpc = two\n\
                    mpc.baseMVA = 100;\n\
                    mpc.bus = [\n\
                    1 3 0 0 0 0 1 1 0 345 1 1.1 0.9;\n\
                    2 1 50 0 0 0 1 1 0 345 1 1.1 0.9;\n\
                    ];\n\
                    mpc.gen = [1 50 0 300 -300 1 100 1 250 10];\n\
                    mpc.branch = [1 2 0 0.1 0 0 0 0 0 0 1 -360 360];\n";
        let net = build_network(&parse_case(text).unwrap()).unwrap();
        let sol = newton_pf(&net, 1e-12, 50).unwrap();

        // closed form: with Q2 = 0, Vm2 cos(th) = Vm2^2, and
        // P2 = -Vm2 sin(th)/x => sin(th) = -P x / Vm2.
        // cos^2 + sin^2 = 1 => Vm2^2 + (P x / Vm2)^2 = 1
        // => Vm2^4 - Vm2^2 + (P x)^2 = 0
        let px: f64 = 0.5 * 0.1;
        let vm2: f64 = ((1.0 + (1.0 - 4.0 * px * px).sqrt()) / 2.0).sqrt();
        let th2: f64 = (-px / vm2).asin();
        assert!((sol.vm[1] - vm2).abs() < 1e-10, "vm {} vs {}", sol.vm[1], vm2);
        assert!((sol.va[1] - th2).abs() < 1e-10);
        assert!(sol.iterations <= 5);
    }

    #[test]
    fn generation_balances_load_plus_losses() {
        let text = "function mpc = three\n\
                    mpc.baseMVA = 100;\n\
                    mpc.bus = [\n\
                    1 3 0 0 0 0 1 1.0 0 345 1 1.1 0.9;\n\
                    2 2 30 10 0 0 1 1.0 0 345 1 1.1 0.9;\n\
                    3 1 90 30 0 5 1 1.0 0 345 1 1.1 0.9;\n\
                    ];\n\
                    mpc.gen = [\n\
                    1 0 0 300 -300 1.0 100 1 250 10;\n\
                    2 40 0 300 -300 1.0 100 1 250 10;\n\
                    ];\n\
                    mpc.branch = [\n\
                    1 2 0.02 0.2 0.02 0 0 0 0 0 1 -360 360;\n\
                    2 3 0.02 0.2 0.02 0 0 0 0 0 1 -360 360;\n\
                    1 3 0.02 0.2 0.02 0 0 0 0 0 1 -360 360;\n\
                    ];\n";
        let net = build_network(&parse_case(text).unwrap()).unwrap();
        let sol = newton_pf(&net, 1e-10, 30).unwrap();
        assert!(sol.converged);
        let total_gen: f64 = sol.pg.iter().sum();
        let total_load: f64 = net.bus.iter().map(|b| b.pd).sum();
        let loss = losses(&net, &sol.vm, &sol.va);
        assert!(
            (total_gen - total_load - loss).abs() < 1e-8,
            "gen {total_gen} load {total_load} loss {loss}"
        );
    }

    #[test]
    fn divergence_reported() {
        // absurd loading that no voltage profile can serve
        let text = "function mpc = sick\n\
                    mpc.baseMVA = 100;\n\
                    mpc.bus = [\n\
                    1 3 0 0 0 0 1 1 0 345 1 1.1 0.9;\n\
                    2 1 5000 0 0 0 1 1 0 345 1 1.1 0.9;\n\
                    ];\n\
                    mpc.gen = [1 50 0 300 -300 1 100 1 250 10];\n\
                    mpc.branch = [1 2 0 0.1 0 0 0 0 0 0 1 -360 360];\n";
        let net = build_network(&parse_case(text).unwrap()).unwrap();
        assert!(newton_pf(&net, 1e-8, 10).is_err());
    }
}
