//! Synthesise observer gains via the common-quadratic LMI, mixing fixed and
//! free gains: two modes come with known-good gains to verify, the third is
//! designed from scratch.
//!
//! Run with: cargo run --example observer_design

use switchcert::config::example2;
use switchcert::matnum::{is_hurwitz, Mat};
use switchcert::observer::{design_gains_partial, max_eta, verify_gains};

fn main() {
    let cfg = example2();
    let plant = cfg.plant().unwrap();
    let gains = cfg.gains().unwrap();

    println!(
        "three-mode plant, n = {}, supplied gains for modes {:?}",
        plant.state_dim(),
        gains
            .iter()
            .enumerate()
            .filter_map(|(i, g)| g.as_ref().map(|_| i + 1))
            .collect::<Vec<_>>()
    );

    let design = design_gains_partial(&plant, cfg.eta, &gains).unwrap();
    for (i, l) in design.gains.iter().enumerate() {
        let fixed = gains[i].is_some();
        println!(
            "L_{} = {:?} ({})",
            i + 1,
            l.data(),
            if fixed { "verified" } else { "synthesised" }
        );
        let u = &design.u[i];
        println!(
            "  U_{} = A - L D Hurwitz: {}",
            i + 1,
            is_hurwitz(u).unwrap()
        );
    }
    println!("common-quadratic margin: {:.3e}", design.margin);
    println!("cond flag (ill conditioned): {}", design.ill_conditioned);

    // Verification alone, given the full gain set just designed:
    let (_omega, margin) = verify_gains(&plant, &design.gains, cfg.eta).unwrap();
    println!("re-verified margin at eta = {}: {margin:.3e}", cfg.eta);

    // How fast can the error decay rate be pushed for this plant and gain
    // structure? Bisect the largest feasible eta.
    let eta_star = max_eta(&plant, 1e-3, 10.0, 1e-3).unwrap();
    println!("largest feasible common decay rate eta ~ {eta_star:.3}");

    // A destabilising gain must be rejected.
    let mut bad = design.gains.clone();
    // U_1 = A_1 - L_1 D_1 picks up +10 on every entry: clearly unstable.
    bad[0] = Mat::from_rows(&[vec![-10.0], vec![-10.0], vec![-10.0]]).unwrap();
    let rejected = verify_gains(&plant, &bad, cfg.eta).is_err();
    println!("deliberately destabilising L_1 rejected: {rejected}");
    assert!(rejected);
}
