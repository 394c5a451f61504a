use gridopt::grid::build_network;
use gridopt::ipm::{ipm_solve_with, SolveOptions};
use gridopt::mpc::CaseData;
use gridopt::opf::{build_nlp, initial_guess};
use gridopt::sparse::SparseSym;

fn main() {
    let case_name = std::env::args().nth(1).unwrap_or("case30".into());
    let form: gridopt::opf::Formulation = std::env::args().nth(2).unwrap_or("polar-power".into()).parse().unwrap();
    let start: gridopt::opf::Start = std::env::args().nth(3).unwrap_or("flat".into()).parse().unwrap();
    let case = CaseData::read(format!("crates/gridopt/cases/{case_name}.m")).unwrap();
    let net = build_network(&case).unwrap();
    let prob = build_nlp(&net, form).unwrap();
    let x0 = initial_guess(&net, prob.as_ref(), start).unwrap();
    let opts = SolveOptions { mu0: Some(match start { gridopt::opf::Start::Flat => 1.0, _ => 1e-2 }), ..SolveOptions::default() };
    let mut solver = SparseSym::default();
    let mut err = std::io::stderr();
    let res = ipm_solve_with(prob.as_ref(), &x0, &opts, &mut solver, Some(&mut err));
    println!("status {:?} f {} iters {} failure {:?}", res.status, res.f, res.iterations, res.failure);
}
