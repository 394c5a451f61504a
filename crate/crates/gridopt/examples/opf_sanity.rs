use gridopt::grid::build_network;
use gridopt::ipm::{solve_opf, SolveOptions};
use gridopt::mpc::parse_case;
use gridopt::opf::{Formulation, Start};

fn main() {
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
    let net = build_network(&parse_case(text).unwrap()).unwrap();
    for form in Formulation::ALL {
        for start in [Start::Flat, Start::CaseData, Start::PfSolve] {
            let t0 = std::time::Instant::now();
            match solve_opf(&net, form, start, &SolveOptions::default()) {
                Ok(r) => {
                    println!(
                        "{form:14} {start:5} status {:?} f {:.6} iters {} feas {:.2e} grad {:.2e} comp {:.2e} in {:.0?}",
                        r.status, r.f, r.iterations, r.kkt.feas, r.kkt.grad, r.kkt.comp, t0.elapsed()
                    );
                    if let Some(msg) = &r.failure {
                        println!("   failure: {msg}");
                    }
                }
                Err(e) => println!("{form:?} {start:?} ERROR {e}"),
            }
        }
    }
}
