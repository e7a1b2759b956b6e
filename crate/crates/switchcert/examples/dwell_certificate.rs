//! Solve the coupled per-mode inequalities that certify min-type switching
//! under a dwell time, then inspect the induced matrix flow P_i(t).
//!
//! Run with: cargo run --example dwell_certificate

use switchcert::config::example1;
use switchcert::dwell::{grid_stencil, p_bound, p_modulus, solve_lyapunov_metzler, MetzlerMatrix, PFlow};
use switchcert::matnum::spectral_norm;
use switchcert::observer::design_gains_partial;

fn main() {
    let cfg = example1();
    let plant = cfg.plant().unwrap();
    let pi = MetzlerMatrix::new(cfg.metzler_mat().unwrap()).unwrap();

    let cert = solve_lyapunov_metzler(&plant, &pi, cfg.zeta, cfg.t_dwell).unwrap();
    println!("dwell time T = {}, decay shift zeta = {}", cert.t_dwell, cert.zeta);
    println!("certified margin: {:.3e}", cert.lm_margin);
    for i in 0..plant.num_modes() {
        println!(
            "mode {}: lambda(X) in [{:.4}, {:.4}], |Y1 + Y2| = {:.4}",
            i + 1,
            cert.x[i].lambda_min(),
            cert.x[i].lambda_max(),
            spectral_norm(cert.y_sum(i).as_mat())
        );
    }

    // The flow interpolates between the switching-trigger matrix at t = 0 and
    // the mode's Lyapunov matrix at t = T.
    let flow = PFlow::new(&plant, &cert).unwrap();
    for i in 0..plant.num_modes() {
        let p0 = flow.eval_p(i, 0.0).unwrap();
        let pt = flow.eval_p(i, cert.t_dwell).unwrap();
        println!(
            "mode {}: |P(0) - (Y1+Y2)| = {:.2e}, |P(T) - X| = {:.2e}",
            i + 1,
            p0.sub(&cert.y_sum(i)).norm_fro(),
            pt.sub(&cert.x[i]).norm_fro()
        );
        println!(
            "  norm bound sup|P| <= {:.4}, modulus theta(0.01) = {:.3e}",
            p_bound(&flow, i),
            p_modulus(&flow, i, 0.01)
        );
    }

    // Rigorous grid stencil admitted by the continuity modulus for a given
    // slack budget (often conservative compared to what refinement confirms).
    let design = design_gains_partial(&plant, cfg.eta, &cfg.gains().unwrap()).unwrap();
    let mu = grid_stencil(
        &flow,
        0,
        cfg.eps,
        cfg.alpha,
        cfg.zeta,
        &design.gains[0],
        &plant.d[0],
    )
    .unwrap();
    println!("rigorous stencil for mode 1 at slack {}: {mu:.3e}", cfg.eps);
}
