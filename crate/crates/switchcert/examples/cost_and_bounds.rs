//! Cost bookkeeping and asymptotic bounds: the running average cost J, its
//! observer-based estimate J_hat, the horizon after which they provably agree
//! to a given tolerance, and the ultimate bound for the constant-disturbance
//! variant.
//!
//! Run with: cargo run --example cost_and_bounds

use switchcert::certify::{cost_error_horizon, ultimate_bound};
use switchcert::config::{example1, example1_affine};
use switchcert::pipeline::{run_certify, run_design, run_simulate};

fn main() {
    // Vanishing nonlinearity: J and J_hat converge to each other.
    let cfg = example1();
    let design = run_design(&cfg).unwrap();
    let cert = run_certify(&cfg, &design, None, 10).unwrap();
    let out = run_simulate(&cfg, &design, Some(&cert.certificate), None).unwrap();
    let trace = &out.trace;

    println!("running average cost along the trace:");
    for &t_probe in &[1.0, 5.0, 10.0, 20.0] {
        let k = trace
            .times
            .iter()
            .position(|&t| t >= t_probe - 1e-9)
            .unwrap_or(trace.times.len() - 1);
        println!(
            "  t = {:>5.1}: J = {:.6e}, J_hat = {:.6e}, |diff| = {:.2e}",
            trace.times[k],
            trace.j[k],
            trace.j_hat[k],
            (trace.j[k] - trace.j_hat[k]).abs()
        );
    }

    let r = cfg.sim.x0.iter().map(|v| v * v).sum::<f64>().sqrt();
    let plant = cfg.plant().unwrap();
    let horizon = cost_error_horizon(&cert.certificate, &plant.c, r, 1e-6).unwrap();
    println!("horizon for |J - J_hat| <= 1e-6: t >= {horizon:.3e}");

    // Constant-disturbance variant: the state no longer converges to zero but
    // stays inside a certified ball.
    println!("\nconstant-disturbance variant:");
    let cfg_a = example1_affine();
    let design_a = run_design(&cfg_a).unwrap();
    let cert_a = run_certify(&cfg_a, &design_a, None, 10).unwrap();
    let out_a = run_simulate(&cfg_a, &design_a, None, None).unwrap();

    let b_bar = 0.1;
    let (_, bound_sq) = ultimate_bound(&cert_a.certificate, b_bar).unwrap();
    let t_end = *out_a.trace.times.last().unwrap();
    let max_sq_tail = out_a
        .trace
        .times
        .iter()
        .zip(&out_a.trace.x)
        .filter(|(&t, _)| t >= t_end - 40.0)
        .map(|(_, x)| x.iter().map(|v| v * v).sum::<f64>())
        .fold(0.0f64, f64::max);
    println!("  certified asymptotic ceiling on |x|^2: {bound_sq:.4e}");
    println!("  observed max |x|^2 over the final 40 s: {max_sq_tail:.4e}");
    assert!(max_sq_tail <= bound_sq);
}
