use gridopt::grid::build_network;
use gridopt::ipm::{newton_step, BarrierProblem, IterateState};
use gridopt::mpc::parse_case;
use gridopt::opf::{build_nlp, initial_guess, Start};
use gridopt::sparse::SparseSym;

fn main() {
    let text = std::fs::read_to_string("/tmp/t4.m").unwrap();
    let net = build_network(&parse_case(&text).unwrap()).unwrap();
    let form = std::env::args().nth(1).unwrap_or("cart-power".into());
    let prob = build_nlp(&net, form.parse().unwrap()).unwrap();
    let x0 = initial_guess(&net, prob.as_ref(), Start::CaseData).unwrap();
    let bar = BarrierProblem::new(prob.as_ref());
    let mu = 1e-2;
    let h0 = bar.eval_h(&x0).unwrap();
    let s: Vec<f64> = h0.iter().map(|&h| (-h).max(1e-2)).collect();
    let lam_h: Vec<f64> = s.iter().map(|&si| mu / si).collect();
    let st = IterateState {
        x: x0.clone(),
        s: s.clone(),
        lam_g: vec![0.0; bar.n_eq()],
        lam_h,
        mu,
        k: 0,
    };
    let mut solver = SparseSym::default();
    let mut prepared = false;
    let step = newton_step(&bar, &st, &mut solver, &mut prepared).unwrap();
    let m_inner = prob.n_ineq();
    println!("inner ineq rows: {m_inner}, bound rows: {}", bar.bound_rows().len());
    for (i, (&si, &dsi)) in s.iter().zip(&step.ds).enumerate() {
        let ratio = if dsi < 0.0 { -si / dsi } else { f64::INFINITY };
        if ratio < 0.05 {
            let kind = if i < m_inner {
                format!("inner h row {i}")
            } else {
                let row = bar.bound_rows()[i - m_inner];
                format!("bound var {} {} {}", row.var, if row.upper { "ub" } else { "lb" }, row.bound)
            };
            println!("blocking: row {i} ({kind}) s={si:.4e} ds={dsi:.4e} ratio={ratio:.3e} h0={:.4e}", h0[i]);
        }
    }
    println!("delta_x = {:.3e}", step.delta_x);

    // verify the reduced solve against the four block equations
    let ev_grad = bar.eval_grad_f(&st.x).unwrap();
    let jg = bar.eval_jg(&st.x).unwrap();
    let jh = bar.eval_jh(&st.x).unwrap();
    let g = bar.eval_g(&st.x).unwrap();
    let h = bar.eval_h(&st.x).unwrap();
    let h_tr = bar.eval_hess(&st.x, 1.0, &st.lam_g, &st.lam_h).unwrap();
    let n = bar.n_vars();
    let mut r_x = ev_grad.clone();
    let jg_l = jg.matvec_transposed(&st.lam_g);
    let jh_l = jh.matvec_transposed(&st.lam_h);
    for i in 0..n { r_x[i] += jg_l[i] + jh_l[i]; }
    let mut h_dx = vec![0.0; n];
    for &(r, c, v) in &h_tr {
        h_dx[r] += v * step.dx[c];
        if r != c { h_dx[c] += v * step.dx[r]; }
    }
    let jg_dlg = jg.matvec_transposed(&step.dlam_g);
    let jh_dlh = jh.matvec_transposed(&step.dlam_h);
    let r1 = (0..n).map(|i| (h_dx[i] + jg_dlg[i] + jh_dlh[i] + r_x[i]).abs()).fold(0.0f64, f64::max);
    let jg_dx = jg.matvec(&step.dx);
    let r3 = (0..g.len()).map(|r| (jg_dx[r] + g[r]).abs()).fold(0.0f64, f64::max);
    let jh_dx = jh.matvec(&step.dx);
    let r4 = (0..h.len()).map(|r| (jh_dx[r] + step.ds[r] + h[r] + st.s[r]).abs()).fold(0.0f64, f64::max);
    println!("block residuals: r1={r1:.3e} r3={r3:.3e} r4={r4:.3e}");
    println!("max |dx| = {:.3e}", step.dx.iter().fold(0.0f64, |a, v| a.max(v.abs())));
}
