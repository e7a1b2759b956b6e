//! Solve a small Lyapunov feasibility problem with the built-in LMI solver
//! and re-certify the result with plain eigenvalue checks.
//!
//! Run with: cargo run --example lmi_feasibility

use switchcert::lmi::{self, LmiConstraint, LmiVar, SolveOptions};
use switchcert::matnum::{Mat, SymMat};

fn main() {
    // A Hurwitz matrix: find P >= I with A^T P + P A < 0.
    let a = Mat::from_rows(&[vec![-1.0, 2.0], vec![0.0, -3.0]]).unwrap();
    let at = a.transpose();
    let a_cl = a.clone();

    let system = lmi::build_system(
        vec![LmiVar::sym("p", 2).bounded_below(1.0)],
        vec![LmiConstraint::new("lyapunov", 2, 1e-3, move |asg| {
            let p = asg.sym("p")?;
            SymMat::from_mat(&(&(&at * p.as_mat()) + &(p.as_mat() * &a_cl)))
        })],
    )
    .unwrap();

    let res = lmi::solve(&system, &SolveOptions::default()).unwrap();
    println!("status:            {:?}", res.status);
    println!("iterations:        {}", res.iterations);
    println!("worst violation:   {:.3e}", res.worst_violation);

    let p = res.assignment.sym("p").unwrap();
    println!("P = {:?}", p.as_mat().data());
    println!("lambda_min(P) = {:.6}", p.lambda_min());

    // Independent re-certification: evaluate every constraint at the returned
    // point and confirm strict negativity by eigenvalue computation alone.
    let margin = lmi::certify(&system, &res.assignment).unwrap();
    println!("re-certified margin (min -lambda_max): {margin:.6e}");
    assert!(margin > 0.0, "solution must re-certify");

    // The same instance with the sign flipped (anti-Hurwitz) must be rejected.
    let b = Mat::from_rows(&[vec![1.0, 2.0], vec![0.0, 3.0]]).unwrap();
    let bt = b.transpose();
    let bad = lmi::build_system(
        vec![LmiVar::sym("p", 2).bounded_below(1.0)],
        vec![LmiConstraint::new("lyapunov", 2, 1e-3, move |asg| {
            let p = asg.sym("p")?;
            SymMat::from_mat(&(&(&bt * p.as_mat()) + &(p.as_mat() * &b)))
        })],
    )
    .unwrap();
    let res_bad = lmi::solve(&bad, &SolveOptions::default()).unwrap();
    println!("unstable instance: {:?}", res_bad.status);
    assert_eq!(res_bad.status, lmi::FeasStatus::InfeasibleOrUndecided);
}
