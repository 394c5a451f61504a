use super::*;
use crate::grid::build_network;
use crate::mpc::parse_case;
use crate::pf::newton_pf;

/// Asymmetric 4-bus fixture: off-nominal tap, phase shift, line charging,
/// bus shunts, two flow-limited branches, co-located generators and a
/// cubic cost, so every derivative term is exercised.
fn test_case() -> Network {
    let text = "function mpc = t4\n\
        mpc.baseMVA = 100;\n\
        mpc.bus = [\n\
        1 3 0  0  0 0  1 1.00 0 345 1 1.10 0.90;\n\
        2 2 20 5  0 0  1 1.01 0 345 1 1.10 0.90;\n\
        3 1 60 15 0 8  1 1.00 0 345 1 1.10 0.90;\n\
        4 1 40 12 2 0  1 1.00 0 345 1 1.10 0.90;\n\
        ];\n\
        mpc.gen = [\n\
        1 40 5 150 -150 1.00 100 1 200 5;\n\
        2 50 5 120 -120 1.01 100 1 150 8;\n\
        2 15 2  60  -60 1.01 100 1  80 4;\n\
        ];\n\
        mpc.branch = [\n\
        1 2 0.020 0.12 0.04 120 0 0 0    0   1 -360 360;\n\
        1 3 0.045 0.19 0.03 0   0 0 1.05 1.2 1 -360 360;\n\
        2 4 0.030 0.16 0.02 90  0 0 0    0   1 -360 360;\n\
        3 4 0.050 0.22 0.05 0   0 0 0    0   1 -360 360;\n\
        ];\n\
        mpc.gencost = [\n\
        2 0 0 3 0.04   18 90;\n\
        2 0 0 4 0.0003 0.05 22 60;\n\
        2 0 0 2 35     0;\n\
        ];\n";
    build_network(&parse_case(text).unwrap()).unwrap()
}

fn interior_point_for(prob: &dyn NlpProblem, seed: u64) -> Vec<f64> {
    // deterministic interior sample: blend of box midpoint and a hash jitter
    let (lb, ub) = (prob.x_min(), prob.x_max());
    let mut state = seed.wrapping_mul(0x9e3779b97f4a7c15).wrapping_add(1);
    let mut next = || {
        state ^= state << 13;
        state ^= state >> 7;
        state ^= state << 17;
        (state >> 11) as f64 / (1u64 << 53) as f64
    };
    (0..prob.n_vars())
        .map(|i| {
            let u = 0.2 + 0.6 * next();
            match (lb[i].is_finite(), ub[i].is_finite()) {
                (true, true) => lb[i] + u * (ub[i] - lb[i]),
                (true, false) => lb[i] + 0.5 + u,
                (false, true) => ub[i] - 0.5 - u,
                (false, false) => 0.25 * (u - 0.5),
            }
        })
        .collect()
}

fn dense_fd_jacobian(
    eval: &dyn Fn(&[f64]) -> Vec<f64>,
    x: &[f64],
    m: usize,
    h: f64,
) -> Vec<Vec<f64>> {
    let mut jac = vec![vec![0.0; x.len()]; m];
    let mut xp = x.to_vec();
    for c in 0..x.len() {
        let step = h * (1.0 + x[c].abs());
        xp[c] = x[c] + step;
        let fp = eval(&xp);
        xp[c] = x[c] - step;
        let fm = eval(&xp);
        xp[c] = x[c];
        for r in 0..m {
            jac[r][c] = (fp[r] - fm[r]) / (2.0 * step);
        }
    }
    jac
}

fn csr_to_dense(m: &crate::sparse::Csr<f64>) -> Vec<Vec<f64>> {
    let mut d = vec![vec![0.0; m.ncols()]; m.nrows()];
    for (r, c, v) in m.iter() {
        d[r][c] += v;
    }
    d
}

fn sym_triplets_to_dense(t: &[(usize, usize, f64)], n: usize) -> Vec<Vec<f64>> {
    let mut d = vec![vec![0.0; n]; n];
    for &(r, c, v) in t {
        d[r][c] += v;
        if r != c {
            d[c][r] += v;
        }
    }
    d
}

fn max_abs(m: &[Vec<f64>]) -> f64 {
    m.iter().flatten().fold(0.0f64, |a, v| a.max(v.abs()))
}

fn assert_close(analytic: &[Vec<f64>], fd: &[Vec<f64>], tol: f64, what: &str) {
    let scale = 1.0 + max_abs(analytic);
    let mut worst = 0.0f64;
    let mut at = (0, 0);
    for (r, (ra, rf)) in analytic.iter().zip(fd).enumerate() {
        for (c, (a, f)) in ra.iter().zip(rf).enumerate() {
            let err = (a - f).abs() / scale;
            if err > worst {
                worst = err;
                at = (r, c);
            }
        }
    }
    assert!(
        worst <= tol,
        "{what}: rel error {worst:.3e} at {at:?} (analytic {}, fd {})",
        analytic[at.0][at.1],
        fd[at.0][at.1]
    );
}

fn check_derivatives(form: Formulation, seed: u64) {
    let net = test_case();
    let prob = build_nlp(&net, form).unwrap();
    let x = interior_point_for(prob.as_ref(), seed);
    let n = prob.n_vars();

    // gradient of f
    let grad = prob.eval_grad_f(&x).unwrap();
    let fd_grad = dense_fd_jacobian(&|y| vec![prob.eval_f(y).unwrap()], &x, 1, 1e-7);
    assert_close(&[grad], &fd_grad, 1e-6, &format!("{form} grad_f"));

    // constraint Jacobians
    let jg = csr_to_dense(&prob.eval_jg(&x).unwrap());
    let fd_jg = dense_fd_jacobian(&|y| prob.eval_g(y).unwrap(), &x, prob.n_eq(), 1e-7);
    assert_close(&jg, &fd_jg, 1e-6, &format!("{form} J_g"));

    if prob.n_ineq() > 0 {
        let jh = csr_to_dense(&prob.eval_jh(&x).unwrap());
        let fd_jh = dense_fd_jacobian(&|y| prob.eval_h(y).unwrap(), &x, prob.n_ineq(), 1e-7);
        assert_close(&jh, &fd_jh, 1e-6, &format!("{form} J_h"));
    }

    // Lagrangian Hessian against FD of the Lagrangian gradient
    let obj_w = 1.0;
    let lam_g: Vec<f64> = (0..prob.n_eq()).map(|i| 0.3 + 0.1 * (i as f64).sin()).collect();
    let lam_h: Vec<f64> = (0..prob.n_ineq()).map(|i| 0.2 + 0.05 * (i as f64).cos()).collect();
    let grad_l = |y: &[f64]| -> Vec<f64> {
        let mut gl = prob.eval_grad_f(y).unwrap();
        gl.iter_mut().for_each(|v| *v *= obj_w);
        let jg = prob.eval_jg(y).unwrap();
        let jh = prob.eval_jh(y).unwrap();
        let jg_l = jg.matvec_transposed(&lam_g);
        let jh_l = jh.matvec_transposed(&lam_h);
        for i in 0..gl.len() {
            gl[i] += jg_l[i] + jh_l[i];
        }
        gl
    };
    let hess = sym_triplets_to_dense(&prob.eval_hess(&x, obj_w, &lam_g, &lam_h).unwrap(), n);
    let fd_hess = dense_fd_jacobian(&grad_l, &x, n, 1e-6);
    assert_close(&hess, &fd_hess, 1e-5, &format!("{form} Hessian"));
}

#[test]
fn derivatives_polar_power() {
    check_derivatives("polar-power".parse().unwrap(), 7);
}

#[test]
fn derivatives_polar_current() {
    check_derivatives("polar-current".parse().unwrap(), 11);
}

#[test]
fn derivatives_cart_power() {
    check_derivatives("cart-power".parse().unwrap(), 13);
}

#[test]
fn derivatives_cart_current() {
    check_derivatives("cart-current".parse().unwrap(), 17);
}

#[test]
fn dimension_formulas() {
    let net = test_case();
    let nb = net.n_bus();
    let ng = net.n_gen();
    let nl_limited = 2; // branches with rate > 0 in the fixture

    let polar = build_nlp(&net, "polar-power".parse().unwrap()).unwrap();
    assert_eq!(polar.n_vars(), 2 * nb + 2 * ng);
    assert_eq!(polar.n_eq(), 2 * nb);
    assert_eq!(polar.n_ineq(), 2 * nl_limited);

    let cart = build_nlp(&net, "cart-current".parse().unwrap()).unwrap();
    assert_eq!(cart.n_eq(), 2 * nb + 1);
    assert_eq!(cart.n_ineq(), 2 * nl_limited + 2 * nb);
}

#[test]
fn bounds_are_ordered() {
    let net = test_case();
    for form in Formulation::ALL {
        let prob = build_nlp(&net, form).unwrap();
        for (lo, hi) in prob.x_min().iter().zip(prob.x_max()) {
            assert!(lo <= hi);
        }
    }
}

#[test]
fn pf_solution_satisfies_power_balance() {
    let net = test_case();
    let sol = newton_pf(&net, 1e-10, 30).unwrap();
    for form in ["polar-power", "cart-power"] {
        let prob = build_nlp(&net, form.parse().unwrap()).unwrap();
        let x = pack_state(prob.layout(), &sol.vm, &sol.va, &sol.pg, &sol.qg);
        let g = prob.eval_g(&x).unwrap();
        let worst = g.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        assert!(worst <= 1e-8, "{form}: residual {worst:.3e}");
    }
}

#[test]
fn balance_equivalence_at_feasibility() {
    // power residual ~0 and |V| > 0 implies current residual ~0
    let net = test_case();
    let sol = newton_pf(&net, 1e-12, 30).unwrap();
    for form in ["polar-current", "cart-current"] {
        let prob = build_nlp(&net, form.parse().unwrap()).unwrap();
        let x = pack_state(prob.layout(), &sol.vm, &sol.va, &sol.pg, &sol.qg);
        let g = prob.eval_g(&x).unwrap();
        let worst = g
            .iter()
            .take(2 * net.n_bus())
            .fold(0.0f64, |a, v| a.max(v.abs()));
        assert!(worst <= 1e-10, "{form}: residual {worst:.3e}");
    }
}

#[test]
fn coordinate_equivalence_power_balance() {
    let net = test_case();
    let polar = build_nlp(&net, "polar-power".parse().unwrap()).unwrap();
    let cart = build_nlp(&net, "cart-power".parse().unwrap()).unwrap();
    let xp = interior_point_for(polar.as_ref(), 23);
    let nb = net.n_bus();
    // map the polar point to Cartesian coordinates
    let mut xc = xp.clone();
    for b in 0..nb {
        xc[b] = xp[nb + b] * xp[b].cos();
        xc[nb + b] = xp[nb + b] * xp[b].sin();
    }
    let gp = polar.eval_g(&xp).unwrap();
    let gc = cart.eval_g(&xc).unwrap();
    for i in 0..2 * nb {
        assert!(
            (gp[i] - gc[i]).abs() <= 1e-12 * (1.0 + gp[i].abs()),
            "row {i}: {} vs {}",
            gp[i],
            gc[i]
        );
    }
}

#[test]
fn flat_start_examples() {
    let net = test_case();
    let prob = build_nlp(&net, "polar-power".parse().unwrap()).unwrap();
    let x = initial_guess(&net, prob.as_ref(), Start::Flat).unwrap();
    let nb = net.n_bus();
    // Vm bounds [0.90, 1.10] -> 1.00
    assert!((x[nb] - 1.0).abs() < 1e-14);
    // ref angle pinned
    assert_eq!(x[net.ref_bus], net.bus[net.ref_bus].va0);
}

#[test]
fn flat_one_sided_bound_rule() {
    let mut net = test_case();
    net.gen[0].pmax = f64::INFINITY;
    net.gen[0].pmin = 0.1;
    let prob = build_nlp(&net, "polar-power".parse().unwrap()).unwrap();
    let x = initial_guess(&net, prob.as_ref(), Start::Flat).unwrap();
    let pg0 = prob.layout().pg().start;
    assert!((x[pg0] - 1.1).abs() < 1e-14);
}

#[test]
fn warm_starts_respect_bounds() {
    let net = test_case();
    for form in Formulation::ALL {
        let prob = build_nlp(&net, form).unwrap();
        for mode in [Start::CaseData, Start::PfSolve] {
            let x = initial_guess(&net, prob.as_ref(), mode).unwrap();
            for ((xi, lo), hi) in x.iter().zip(prob.x_min()).zip(prob.x_max()) {
                assert!(lo <= xi && xi <= hi);
            }
        }
    }
}

#[test]
fn piecewise_cost_rejected() {
    let mut net = test_case();
    net.gen[0].cost = crate::grid::GenCost::PiecewiseLinear(vec![0.0, 0.0, 10.0, 300.0]);
    assert!(matches!(
        build_nlp(&net, "polar-power".parse().unwrap()),
        Err(OpfError::UnsupportedCost { gen: 0, .. })
    ));
}

#[test]
fn quartic_cost_rejected() {
    let mut net = test_case();
    net.gen[1].cost = crate::grid::GenCost::Polynomial(vec![0.0, 1.0, 2.0, 3.0, 4.0]);
    assert!(matches!(
        build_nlp(&net, "polar-power".parse().unwrap()),
        Err(OpfError::UnsupportedCost { gen: 1, .. })
    ));
}

#[test]
fn zero_voltage_domain_reported() {
    let net = test_case();
    let prob = build_nlp(&net, "cart-current".parse().unwrap()).unwrap();
    let mut x = initial_guess(&net, prob.as_ref(), Start::CaseData).unwrap();
    x[0] = 0.0;
    x[net.n_bus()] = 0.0;
    assert!(matches!(prob.eval_g(&x), Err(OpfError::ZeroVoltageDomain(1))));
}

#[test]
fn formulation_labels_round_trip() {
    for form in Formulation::ALL {
        let s = form.to_string();
        let back: Formulation = s.parse().unwrap();
        assert_eq!(form, back);
    }
}
