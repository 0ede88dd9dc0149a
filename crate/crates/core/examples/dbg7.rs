use xxz_corrlen::dressed::dressed_quantities;
use xxz_corrlen::model::ModelParams;
use xxz_corrlen::nlie::{solve_dominant, solve_excited, ExcitationConfig, SolverOptions};

fn main() {
    for (delta, h, t) in [(0.3, 0.5, 0.1), (0.8, 2.0, 0.2), (0.5, 1.0, 0.05)] {
        let p = ModelParams::new(1.0, delta, h, t).unwrap();
        let d = dressed_quantities(&p, 64).unwrap();
        print!("delta={delta} h={h} T={t}: ");
        match solve_dominant(&p, &d, SolverOptions::for_params(&p)) {
            Ok(s) => print!("dom ok ({} it, res {:.1e}) ", s.iterations, s.residual),
            Err(e) => print!("dom ERR [{e}] "),
        }
        match solve_excited(&p, &d, &ExcitationConfig::single_hole_plus(), SolverOptions::for_params(&p)) {
            Ok(s) => print!("exc+ ok ({} it) ", s.iterations),
            Err(e) => print!("exc+ ERR [{e}] "),
        }
        match solve_excited(&p, &d, &ExcitationConfig::single_hole_minus(), SolverOptions::for_params(&p)) {
            Ok(s) => println!("exc- ok ({} it)", s.iterations),
            Err(e) => println!("exc- ERR [{e}]"),
        }
    }
}
