use pdsp_cli::corpus;
use pdsp_cli::problem::parse_problem;

fn main() {
    let built = parse_problem(corpus::ICOSAHEDRON).unwrap().build().unwrap();
    let mut cfg = built.config.clone();
    cfg.max_iterations = 3_000_000;
    let t0 = std::time::Instant::now();
    match pdsp_core::tracker::solve(&built.pdsp, &built.rcp, &built.sketch, &built.interp, &cfg) {
        Ok(out) => println!(
            "reduced: {} sols, {} iters, closure {:.1e}, {} changes, avg_d {:.2}, max_d {}, min_delta {:.1e}, {:.0}s",
            out.solutions.len(),
            out.iterations,
            out.closure_error,
            out.rcp_change_count(),
            out.average_d(),
            out.max_d(),
            out.smallest_delta,
            t0.elapsed().as_secs_f64()
        ),
        Err(e) => println!("reduced err: {e} ({:.0}s)", t0.elapsed().as_secs_f64()),
    }
}
