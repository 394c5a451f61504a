use gridopt::grid::build_network;
use gridopt::ipm::{BarrierProblem, IterateState, kkt_residuals};
use gridopt::mpc::parse_case;
use gridopt::opf::{build_nlp, initial_guess, Start};
use gridopt::sparse::{SparseSym, SymIndefSolver};

fn main() {
    let text = std::fs::read_to_string("/tmp/t4.m").unwrap();
    let net = build_network(&parse_case(&text).unwrap()).unwrap();
    let prob = build_nlp(&net, "polar-power".parse().unwrap()).unwrap();
    let x0 = initial_guess(&net, prob.as_ref(), Start::CaseData).unwrap();
    let bar = BarrierProblem::new(prob.as_ref());
    let n = bar.n_vars();
    let m_eq = bar.n_eq();
    println!("n = {n}, m_eq = {m_eq}, m_ineq = {}", bar.n_ineq());

    // build the same reduced KKT by hand
    let mut st = IterateState { x: x0.clone(), s: vec![], lam_g: vec![0.0; m_eq], lam_h: vec![], mu: 1e-2, k: 0 };
    let h0 = bar.eval_h(&x0).unwrap();
    st.s = h0.iter().map(|&h| (-h).max(1e-2)).collect();
    st.lam_h = st.s.iter().map(|&s| 1e-2 / s).collect();
    let _ = kkt_residuals(&bar, &st).unwrap();

    let h_tr = bar.eval_hess(&st.x, 1.0, &st.lam_g, &st.lam_h).unwrap();
    let jh = bar.eval_jh(&st.x).unwrap();
    let jg = bar.eval_jg(&st.x).unwrap();
    let mut base = h_tr.clone();
    for r in 0..bar.n_ineq() {
        let row: Vec<(usize, f64)> = jh.row(r).collect();
        let sig = st.lam_h[r] / st.s[r];
        for (i, &(ci, vi)) in row.iter().enumerate() {
            for &(cj, vj) in &row[i..] {
                let (hi, lo) = if ci >= cj { (ci, cj) } else { (cj, ci) };
                base.push((hi, lo, vi * sig * vj));
            }
        }
    }
    for (r, c, v) in jg.iter() {
        base.push((n + r, c, v));
    }
    let dim = n + m_eq;
    for delta in [0.0, 1e-6, 1e-2, 1.0, 100.0] {
        let mut tr = base.clone();
        if delta > 0.0 {
            tr.extend((0..n).map(|i| (i, i, delta)));
            tr.extend((0..m_eq).map(|r| (n + r, n + r, -1e-10)));
        }
        let mut m = SparseSym::from_lower_triplets(dim, tr);
        match m.factorize() {
            Ok(inertia) => println!("delta {delta:e}: inertia ({}, {}, {}) want ({n}, {m_eq}, 0)", inertia.pos, inertia.neg, inertia.zero),
            Err(e) => println!("delta {delta:e}: ERROR {e}"),
        }
    }
}
