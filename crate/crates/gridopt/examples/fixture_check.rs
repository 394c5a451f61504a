use gridopt::grid::build_network;
use gridopt::ipm::{solve_opf, SolveOptions, SolveStatus};
use gridopt::mpc::CaseData;
use gridopt::opf::{Formulation, Start};
use gridopt::pf::newton_pf;

fn main() {
    for name in ["case9", "case14", "case30", "case118"] {
        let case = CaseData::read(format!("crates/gridopt/cases/{name}.m")).unwrap();
        let net = build_network(&case).unwrap();
        let pf = newton_pf(&net, 1e-8, 30).unwrap();
        println!("{name}: pf {} iters mismatch {:.2e}", pf.iterations, pf.max_mismatch);
        let mut objs = Vec::new();
        for form in Formulation::ALL {
            for start in [Start::Flat, Start::CaseData, Start::PfSolve] {
                let t = std::time::Instant::now();
                let r = solve_opf(&net, form, start, &SolveOptions::default()).unwrap();
                let ok = r.status == SolveStatus::Optimal;
                println!("  {form:14} {start:5} {:9?} f={:.4} iters={} ({:.0?})", r.status, r.f, r.iterations, t.elapsed());
                if ok { objs.push(r.f); }
            }
        }
        let fmin = objs.iter().cloned().fold(f64::INFINITY, f64::min);
        let fmax = objs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        println!("  {} of 12 optimal, spread {:.3e}", objs.len(), (fmax - fmin) / fmin.abs());
    }
}
