//! Validated per-unit grid model and admittance matrix construction.

use num_complex::Complex64;
use thiserror::Error;

use crate::mpc::{branch_col, bus_col, cost_col, gen_col, CaseData};
use crate::sparse::Csr;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BusType {
    Pq,
    Pv,
    Ref,
}

#[derive(Debug, Clone)]
pub struct Bus {
    pub bus_type: BusType,
    /// Original bus number from the case file.
    pub id: usize,
    pub pd: f64,
    pub qd: f64,
    pub gs: f64,
    pub bs: f64,
    pub vm0: f64,
    /// Initial angle, radians.
    pub va0: f64,
    pub vmax: f64,
    pub vmin: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum GenCost {
    /// Coefficients in ascending power order, $/h over MW.
    Polynomial(Vec<f64>),
    /// Raw breakpoint data (x1, y1, x2, y2, ...); storage only.
    PiecewiseLinear(Vec<f64>),
}

impl GenCost {
    pub fn zero() -> Self {
        GenCost::Polynomial(vec![])
    }
}

#[derive(Debug, Clone)]
pub struct Gen {
    /// Internal bus index.
    pub bus: usize,
    pub pg0: f64,
    pub qg0: f64,
    pub pmin: f64,
    pub pmax: f64,
    pub qmin: f64,
    pub qmax: f64,
    pub vg: f64,
    pub cost: GenCost,
}

#[derive(Debug, Clone)]
pub struct Branch {
    /// Internal from/to bus indices.
    pub from: usize,
    pub to: usize,
    /// Series admittance, pu.
    pub y_series: Complex64,
    /// Total line charging susceptance, pu.
    pub b_charging: f64,
    /// Off-nominal tap ratio; 1.0 for lines.
    pub tap: f64,
    /// Phase shift, radians.
    pub shift: f64,
    /// Apparent-power rating, pu; 0 = unlimited.
    pub rate: f64,
    /// Two-port admittances in pu.
    pub yff: Complex64,
    pub yft: Complex64,
    pub ytf: Complex64,
    pub ytt: Complex64,
}

/// Immutable per-unit network with admittance matrices. Out-of-service
/// generators and branches are dropped entirely, so downstream variable
/// and constraint counts see only in-service equipment.
#[derive(Debug, Clone)]
pub struct Network {
    pub name: String,
    pub base_mva: f64,
    pub bus: Vec<Bus>,
    pub gen: Vec<Gen>,
    pub branch: Vec<Branch>,
    /// Index of the reference bus.
    pub ref_bus: usize,
    pub y_bus: Csr<Complex64>,
    /// Branch from-end / to-end admittance rows (n_branch x n_bus, two
    /// structural nonzeros per row).
    pub y_from: Csr<Complex64>,
    pub y_to: Csr<Complex64>,
}

#[derive(Debug, Error)]
pub enum GridError {
    #[error("no reference bus in case")]
    NoRefBus,
    #[error("multiple reference buses: bus {0} and bus {1}")]
    MultipleRefBus(usize, usize),
    #[error("generator {0} attached to unknown bus {1}")]
    DanglingGen(usize, usize),
    #[error("branch {0} ({1} -> {2}) has zero impedance")]
    ZeroImpedanceBranch(usize, usize, usize),
    #[error("bus {0} is isolated (type 4)")]
    IsolatedBus(usize),
    #[error("bus {0} has invalid type {1}")]
    BadBusType(usize, f64),
    #[error("branch {0} references unknown bus {1}")]
    DanglingBranch(usize, usize),
}

impl Network {
    pub fn n_bus(&self) -> usize {
        self.bus.len()
    }

    pub fn n_gen(&self) -> usize {
        self.gen.len()
    }

    pub fn n_branch(&self) -> usize {
        self.branch.len()
    }

    /// Gens attached to each bus, by internal index.
    pub fn gens_at_bus(&self) -> Vec<Vec<usize>> {
        let mut at = vec![Vec::new(); self.n_bus()];
        for (g, gen) in self.gen.iter().enumerate() {
            at[gen.bus].push(g);
        }
        at
    }

    /// Complex bus injections from a generator dispatch minus load, pu.
    pub fn injections(&self, pg: &[f64], qg: &[f64]) -> Vec<Complex64> {
        let mut s = vec![Complex64::ZERO; self.n_bus()];
        for (b, bus) in self.bus.iter().enumerate() {
            s[b] -= Complex64::new(bus.pd, bus.qd);
        }
        for (g, gen) in self.gen.iter().enumerate() {
            s[gen.bus] += Complex64::new(pg[g], qg[g]);
        }
        s
    }
}

/// Validates raw case tables, converts to per-unit and assembles the
/// admittance matrices.
pub fn build_network(case: &CaseData) -> Result<Network, GridError> {
    let base = case.base_mva;
    let deg = std::f64::consts::PI / 180.0;

    let mut bus = Vec::with_capacity(case.bus.len());
    let mut ref_bus = None;
    for row in &case.bus {
        let id = row[bus_col::BUS_I] as usize;
        let bus_type = match row[bus_col::BUS_TYPE] as i64 {
            1 => BusType::Pq,
            2 => BusType::Pv,
            3 => {
                if let Some(prev) = ref_bus {
                    let prev_id = case.bus[prev as usize][bus_col::BUS_I] as usize;
                    return Err(GridError::MultipleRefBus(prev_id, id));
                }
                ref_bus = Some(bus.len() as u32);
                BusType::Ref
            }
            4 => return Err(GridError::IsolatedBus(id)),
            _ => return Err(GridError::BadBusType(id, row[bus_col::BUS_TYPE])),
        };
        bus.push(Bus {
            bus_type,
            id,
            pd: row[bus_col::PD] / base,
            qd: row[bus_col::QD] / base,
            gs: row[bus_col::GS] / base,
            bs: row[bus_col::BS] / base,
            vm0: row[bus_col::VM],
            va0: row[bus_col::VA] * deg,
            vmax: row[bus_col::VMAX],
            vmin: row[bus_col::VMIN],
        });
    }
    let ref_bus = ref_bus.ok_or(GridError::NoRefBus)? as usize;

    let index_of = |bus_id: usize| bus.iter().position(|b| b.id == bus_id);
    // id -> internal index map; ids are validated unique by the parser
    let max_id = bus.iter().map(|b| b.id).max().unwrap_or(0);
    let mut id_map = vec![usize::MAX; max_id + 1];
    for (i, b) in bus.iter().enumerate() {
        id_map[b.id] = i;
    }
    let lookup = |bus_id: usize| -> Option<usize> {
        if bus_id <= max_id && id_map[bus_id] != usize::MAX {
            Some(id_map[bus_id])
        } else {
            index_of(bus_id)
        }
    };

    let mut gen = Vec::new();
    for (g, row) in case.gen.iter().enumerate() {
        if row[gen_col::GEN_STATUS] <= 0.0 {
            continue;
        }
        let bus_id = row[gen_col::GEN_BUS] as usize;
        let b = lookup(bus_id).ok_or(GridError::DanglingGen(g, bus_id))?;
        let cost = cost_for_gen(case, g);
        gen.push(Gen {
            bus: b,
            pg0: row[gen_col::PG] / base,
            qg0: row[gen_col::QG] / base,
            pmin: row[gen_col::PMIN] / base,
            pmax: row[gen_col::PMAX] / base,
            qmin: row[gen_col::QMIN] / base,
            qmax: row[gen_col::QMAX] / base,
            vg: row[gen_col::VG],
            cost,
        });
    }

    let mut branch = Vec::new();
    for (l, row) in case.branch.iter().enumerate() {
        if row[branch_col::BR_STATUS] == 0.0 {
            continue;
        }
        let f_id = row[branch_col::F_BUS] as usize;
        let t_id = row[branch_col::T_BUS] as usize;
        let from = lookup(f_id).ok_or(GridError::DanglingBranch(l, f_id))?;
        let to = lookup(t_id).ok_or(GridError::DanglingBranch(l, t_id))?;
        let r = row[branch_col::BR_R];
        let x = row[branch_col::BR_X];
        if r == 0.0 && x == 0.0 {
            return Err(GridError::ZeroImpedanceBranch(l, f_id, t_id));
        }
        let y_series = Complex64::new(1.0, 0.0) / Complex64::new(r, x);
        let b_charging = row[branch_col::BR_B];
        let tap = if row[branch_col::TAP] == 0.0 { 1.0 } else { row[branch_col::TAP] };
        let shift = row[branch_col::SHIFT] * deg;
        let rate = row[branch_col::RATE_A] / base;

        let y_shunt_half = Complex64::new(0.0, b_charging / 2.0);
        let ytt = y_series + y_shunt_half;
        let yff = ytt / (tap * tap);
        let tap_c = Complex64::from_polar(tap, shift);
        let yft = -y_series / tap_c.conj();
        let ytf = -y_series / tap_c;

        branch.push(Branch {
            from,
            to,
            y_series,
            b_charging,
            tap,
            shift,
            rate,
            yff,
            yft,
            ytf,
            ytt,
        });
    }

    let n_bus = bus.len();
    let n_branch = branch.len();
    let mut yf_t = Vec::with_capacity(2 * n_branch);
    let mut yt_t = Vec::with_capacity(2 * n_branch);
    let mut ybus_t = Vec::with_capacity(4 * n_branch + n_bus);
    for (l, br) in branch.iter().enumerate() {
        yf_t.push((l, br.from, br.yff));
        yf_t.push((l, br.to, br.yft));
        yt_t.push((l, br.from, br.ytf));
        yt_t.push((l, br.to, br.ytt));
        ybus_t.push((br.from, br.from, br.yff));
        ybus_t.push((br.from, br.to, br.yft));
        ybus_t.push((br.to, br.from, br.ytf));
        ybus_t.push((br.to, br.to, br.ytt));
    }
    for (b, bb) in bus.iter().enumerate() {
        ybus_t.push((b, b, Complex64::new(bb.gs, bb.bs)));
    }

    Ok(Network {
        name: case.name.clone(),
        base_mva: base,
        ref_bus,
        y_bus: Csr::from_triplets(n_bus, n_bus, ybus_t),
        y_from: Csr::from_triplets(n_branch, n_bus, yf_t),
        y_to: Csr::from_triplets(n_branch, n_bus, yt_t),
        bus,
        gen,
        branch,
    })
}

fn cost_for_gen(case: &CaseData, g: usize) -> GenCost {
    // rows beyond one per generator (reactive-power costs) are ignored
    let Some(row) = case.gencost.get(g) else {
        return GenCost::zero();
    };
    let ncost = row[cost_col::NCOST] as usize;
    let data = &row[cost_col::COST.min(row.len())..];
    if row[cost_col::MODEL] == cost_col::PW_LINEAR {
        GenCost::PiecewiseLinear(data.iter().copied().take(2 * ncost).collect())
    } else {
        // file stores highest order first; flip to ascending
        let mut c: Vec<f64> = data.iter().copied().take(ncost).collect();
        c.reverse();
        GenCost::Polynomial(c)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mpc::parse_case;

    pub(crate) fn two_bus_case(tap: f64) -> CaseData {
        let text = format!(
            "function mpc = twobus\n\
             mpc.baseMVA = 100;\n\
             mpc.bus = [\n\
             1 3 0 0 0 0 1 1 0 345 1 1.1 0.9;\n\
             2 1 50 0 0 0 1 1 0 345 1 1.1 0.9;\n\
             ];\n\
             mpc.gen = [1 50 0 300 -300 1 100 1 250 10];\n\
             mpc.branch = [1 2 0 0.1 0 250 250 250 {tap} 0 1 -360 360];\n"
        );
        parse_case(&text).unwrap()
    }

    #[test]
    fn two_port_no_tap() {
        let net = build_network(&two_bus_case(0.0)).unwrap();
        let br = &net.branch[0];
        let j10 = Complex64::new(0.0, 10.0);
        assert!((br.yff + j10).norm() < 1e-12);
        assert!((br.yft - j10).norm() < 1e-12);
        assert!((br.ytf - j10).norm() < 1e-12);
        assert!((br.ytt + j10).norm() < 1e-12);
        // Ybus = [[-10j, 10j], [10j, -10j]]
        let y = &net.y_bus;
        let row0: Vec<_> = y.row(0).collect();
        assert!((row0[0].1 + j10).norm() < 1e-12);
        assert!((row0[1].1 - j10).norm() < 1e-12);
    }

    #[test]
    fn two_port_with_tap() {
        let net = build_network(&two_bus_case(2.0)).unwrap();
        let br = &net.branch[0];
        assert!((br.yff - Complex64::new(0.0, -2.5)).norm() < 1e-12);
        assert!((br.yft - Complex64::new(0.0, 5.0)).norm() < 1e-12);
        assert!((br.ytf - Complex64::new(0.0, 5.0)).norm() < 1e-12);
        assert!((br.ytt - Complex64::new(0.0, -10.0)).norm() < 1e-12);
    }

    #[test]
    fn rejects_zero_impedance() {
        let mut case = two_bus_case(0.0);
        case.branch[0][branch_col::BR_R] = 0.0;
        case.branch[0][branch_col::BR_X] = 0.0;
        assert!(matches!(
            build_network(&case),
            Err(GridError::ZeroImpedanceBranch(0, 1, 2))
        ));
    }

    #[test]
    fn rejects_no_ref() {
        let mut case = two_bus_case(0.0);
        case.bus[0][bus_col::BUS_TYPE] = 2.0;
        assert!(matches!(build_network(&case), Err(GridError::NoRefBus)));
    }

    #[test]
    fn rejects_multiple_ref() {
        let mut case = two_bus_case(0.0);
        case.bus[1][bus_col::BUS_TYPE] = 3.0;
        assert!(matches!(build_network(&case), Err(GridError::MultipleRefBus(1, 2))));
    }

    #[test]
    fn rejects_dangling_gen() {
        let mut case = two_bus_case(0.0);
        case.gen[0][gen_col::GEN_BUS] = 7.0;
        assert!(matches!(build_network(&case), Err(GridError::DanglingGen(0, 7))));
    }

    #[test]
    fn rejects_isolated_bus() {
        let mut case = two_bus_case(0.0);
        case.bus[1][bus_col::BUS_TYPE] = 4.0;
        assert!(matches!(build_network(&case), Err(GridError::IsolatedBus(2))));
    }

    #[test]
    fn out_of_service_dropped() {
        let mut case = two_bus_case(0.0);
        case.gen.push(case.gen[0].clone());
        case.gen[1][gen_col::GEN_STATUS] = 0.0;
        case.branch.push(case.branch[0].clone());
        case.branch[1][branch_col::BR_STATUS] = 0.0;
        let net = build_network(&case).unwrap();
        assert_eq!(net.n_gen(), 1);
        assert_eq!(net.n_branch(), 1);
    }

    #[test]
    fn ybus_row_sums_zero_without_shunts() {
        let net = build_network(&two_bus_case(0.0)).unwrap();
        let ones = vec![Complex64::new(1.0, 0.0); net.n_bus()];
        for s in net.y_bus.matvec(&ones) {
            assert!(s.norm() < 1e-12);
        }
    }
}
