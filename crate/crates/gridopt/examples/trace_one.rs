use gridopt::grid::build_network;
use gridopt::ipm::{ipm_solve_with, SolveOptions};
use gridopt::mpc::parse_case;
use gridopt::opf::{build_nlp, initial_guess, Start};
use gridopt::sparse::SparseSym;

fn main() {
    let text = std::fs::read_to_string("/tmp/t4.m").unwrap();
    let net = build_network(&parse_case(&text).unwrap()).unwrap();
    let form = std::env::args().nth(1).unwrap_or("cart-power".into());
    let prob = build_nlp(&net, form.parse().unwrap()).unwrap();
    let x0 = initial_guess(&net, prob.as_ref(), Start::CaseData).unwrap();
    let mu0: f64 = std::env::args().nth(2).map(|s| s.parse().unwrap()).unwrap_or(1e-2);
    let opts = SolveOptions { mu0: Some(mu0), ..SolveOptions::default() };
    let mut solver = SparseSym::default();
    let mut err = std::io::stderr();
    let res = ipm_solve_with(prob.as_ref(), &x0, &opts, &mut solver, Some(&mut err));
    println!("status {:?} f {} iters {} failure {:?}", res.status, res.f, res.iterations, res.failure);
    println!("min_slack {:.3e} min_dual {:.3e}", res.min_slack, res.min_dual);
}
