use std::time::Instant;
use xxz_corrlen::dressed::dressed_quantities;
use xxz_corrlen::model::ModelParams;
use xxz_corrlen::nlie::{solve_excited, ExcitationConfig, SolverOptions};

fn main() {
    let p = ModelParams::new(1.0, 0.3, 0.5, 0.1).unwrap();
    let tick = Instant::now();
    let d = dressed_quantities(&p, 64).unwrap();
    println!("dressed {:.1}s", tick.elapsed().as_secs_f64());
    let mut opts = SolverOptions::for_params(&p);
    opts.max_sweeps = 60;
    let tick = Instant::now();
    match solve_excited(&p, &d, &ExcitationConfig::single_hole_plus(), opts) {
        Ok(s) => println!("ok ({} it, res {:.1e}, mono {:.1e}) {:.1}s",
            s.iterations, s.residual, s.monodromy.norm(), tick.elapsed().as_secs_f64()),
        Err(e) => println!("ERR {e} after {:.1}s", tick.elapsed().as_secs_f64()),
    }
}
