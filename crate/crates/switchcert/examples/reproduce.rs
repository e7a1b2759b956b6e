//! Run both built-in reference problems end to end (design, certification,
//! simulation, trace checks) and print a compact summary of each.
//!
//! The second problem's grid synthesis takes about a minute.
//!
//! Run with: cargo run --example reproduce

use switchcert::config::{example1, example2, ProblemConfig};
use switchcert::pipeline::{run_certify, run_design, run_simulate, summarize};

fn run(label: &str, cfg: &ProblemConfig) {
    let start = std::time::Instant::now();
    let design = run_design(cfg).unwrap();
    let cert = run_certify(cfg, &design, None, 10).unwrap();
    let simu = run_simulate(cfg, &design, Some(&cert.certificate), None).unwrap();
    let s = summarize(&design, &cert, &simu);

    println!("=== {label} ({:.1}s) ===", start.elapsed().as_secs_f64());
    println!("  observer margin         {:>14.6e}", s.observer_margin);
    println!("  dwell margin            {:>14.6e}", s.lm_margin);
    println!("  worst grid eigenvalue   {:>14.6e}", s.worst_grid_eig);
    println!("  x10 refined eigenvalue  {:>14.6e}", s.finer_worst_eig);
    println!("  switch count            {:>14}", s.switch_count);
    match s.min_dwell_gap {
        Some(g) => println!("  min dwell gap           {g:>14.6}"),
        None => println!("  min dwell gap           {:>14}", "n/a"),
    }
    println!("  terminal |x|            {:>14.6e}", s.terminal_state_norm);
    println!("  trace checks            {:>14}", if s.checks_passed { "pass" } else { "FAIL" });
    assert!(s.checks_passed);
}

fn main() {
    run("two unstable modes, n = 2", &example1());
    run("no Hurwitz convex combination, n = 3", &example2());
}
