//! Observer gain synthesis and verification.
//!
//! Gains L_i must render the error matrices U_i = A_i - L_i D_i
//! simultaneously Lyapunov stable with rate eta: a common Omega > 0 with
//! Phi_i(eta, Omega) = U_i^T Omega + Omega U_i + 2 eta Omega < 0 for all
//! modes. Synthesis solves the equivalent LMIs in (Omega, Y_i) with
//! L_i = Omega^{-1} Y_i.

use crate::error::{Error, Result};
use crate::lmi::{self, Assignment, FeasStatus, LmiConstraint, LmiVar, SolveOptions};
use crate::matnum::{observability_rank, sym_eig, Mat, SymMat};
use crate::plant::Plant;
use serde::{Deserialize, Serialize};

/// Condition-number threshold above which a design carries a warning.
const COND_WARN: f64 = 1e12;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ObserverDesign {
    /// Gains L_i, n x m per mode.
    pub gains: Vec<Mat>,
    pub omega: SymMat,
    pub eta: f64,
    /// Error matrices U_i = A_i - L_i D_i.
    pub u: Vec<Mat>,
    /// Certified min over modes of -lambda_max(Phi_i(eta, Omega)).
    pub margin: f64,
    /// Set when cond(Omega) exceeds 1e12: gain quality may be poor.
    pub ill_conditioned: bool,
    ld: Vec<Mat>,
}

impl ObserverDesign {
    /// Innovation-injection product L_i D_i.
    pub fn ld(&self, i: usize) -> &Mat {
        &self.ld[i]
    }
}

/// Phi_i(rate, S) = U^T S + S U + 2 rate S.
pub fn phi(u: &Mat, rate: f64, s: &SymMat) -> SymMat {
    let us = &(&u.transpose() * s.as_mat()) + &(s.as_mat() * u);
    SymMat::from_mat(&(&us + &s.as_mat().scale(2.0 * rate))).expect("square")
}

fn certified_margin(u: &[Mat], eta: f64, omega: &SymMat) -> f64 {
    u.iter().map(|ui| -phi(ui, eta, omega).lambda_max()).fold(f64::INFINITY, f64::min)
}

fn build_design(plant: &Plant, eta: f64, omega: SymMat, gains: Vec<Mat>) -> Result<ObserverDesign> {
    let ld: Vec<Mat> = gains.iter().zip(&plant.d).map(|(l, d)| l * d).collect();
    let u: Vec<Mat> = plant.a.iter().zip(&ld).map(|(a, ld)| a - ld).collect();
    let margin = certified_margin(&u, eta, &omega);
    if margin <= 0.0 {
        return Err(Error::Design(format!(
            "re-certification failed: worst Phi_i eigenvalue {:.3e}",
            -margin
        )));
    }
    let eig = sym_eig(&omega);
    let cond = eig.eigenvalues[eig.dim - 1] / eig.eigenvalues[0].max(f64::MIN_POSITIVE);
    Ok(ObserverDesign { gains, omega, eta, u, margin, ill_conditioned: cond >= COND_WARN, ld })
}

/// Core solve with a mix of fixed and free gains. `fixed[i] = Some(L_i)`
/// pins mode i's gain; `None` leaves it as a decision variable Y_i with
/// L_i = Omega^{-1} Y_i afterwards.
fn design_mixed(plant: &Plant, eta: f64, fixed: &[Option<Mat>]) -> Result<ObserverDesign> {
    if !(eta > 0.0) {
        return Err(Error::Invalid("eta must be positive".into()));
    }
    let n = plant.state_dim();
    let m = plant.output_dim();
    if fixed.len() != plant.num_modes() {
        return Err(Error::Dim("one gain slot per mode".into()));
    }
    for (i, l) in fixed.iter().enumerate() {
        if let Some(l) = l {
            if l.rows() != n || l.cols() != m {
                return Err(Error::Dim(format!("L_{} must be {n}x{m}", i + 1)));
            }
        }
    }
    for (i, (a, d)) in plant.a.iter().zip(&plant.d).enumerate() {
        // only synthesised modes need observability; fixed gains are verified as-is
        if fixed[i].is_none() {
            let rank = observability_rank(a, d)?;
            if rank < n {
                return Err(Error::Unobservable(i + 1, rank, n));
            }
        }
    }

    let mut vars = vec![LmiVar::sym("Omega", n).bounded_below(1.0)];
    for (i, slot) in fixed.iter().enumerate() {
        if slot.is_none() {
            vars.push(LmiVar::rect(format!("Y{}", i + 1), n, m));
        }
    }
    let mut constraints = Vec::new();
    for (i, ((a, d), slot)) in plant.a.iter().zip(&plant.d).zip(fixed).enumerate() {
        let a = a.clone();
        let d = d.clone();
        let slot = slot.clone();
        let yname = format!("Y{}", i + 1);
        constraints.push(LmiConstraint::new(
            format!("phi{}", i + 1),
            n,
            0.0,
            move |asg: &Assignment| {
                let omega = asg.sym("Omega")?;
                // Y = Omega L for fixed gains, else the free variable
                let y = match &slot {
                    Some(l) => omega.as_mat() * l,
                    None => asg.rect(&yname)?.clone(),
                };
                let oa = omega.as_mat() * &a;
                let yd = &y * &d;
                let sym_part = &(&oa - &yd) + &(&oa - &yd).transpose();
                SymMat::from_mat(&(&sym_part + &omega.as_mat().scale(2.0 * eta)))
            },
        ));
    }
    let system = lmi::build_system(vars, constraints)?;
    let res = lmi::solve(&system, &SolveOptions::default())?;
    if res.status != FeasStatus::Feasible {
        return Err(Error::Infeasible(format!(
            "observer LMIs undecided after {} iterations (worst violation {:.3e}); \
             try a smaller eta",
            res.iterations, res.worst_violation
        )));
    }
    let omega = res.assignment.sym("Omega")?.clone();
    let gains: Vec<Mat> = fixed
        .iter()
        .enumerate()
        .map(|(i, slot)| match slot {
            Some(l) => Ok(l.clone()),
            None => omega.spd_solve(res.assignment.rect(&format!("Y{}", i + 1))?),
        })
        .collect::<Result<Vec<_>>>()?;
    build_design(plant, eta, omega, gains)
}

/// Synthesise gains for every mode from scratch.
pub fn design_gains(plant: &Plant, eta: f64) -> Result<ObserverDesign> {
    design_mixed(plant, eta, &vec![None; plant.num_modes()])
}

/// Synthesise only the modes without a supplied gain; supplied gains are
/// kept verbatim and verified jointly.
pub fn design_gains_partial(
    plant: &Plant,
    eta: f64,
    fixed: &[Option<Mat>],
) -> Result<ObserverDesign> {
    design_mixed(plant, eta, fixed)
}

/// Verify user-supplied gains: solve for a common Omega alone.
pub fn verify_gains(plant: &Plant, gains: &[Mat], eta: f64) -> Result<(SymMat, f64)> {
    let fixed: Vec<Option<Mat>> = gains.iter().cloned().map(Some).collect();
    let design = design_mixed(plant, eta, &fixed)?;
    Ok((design.omega, design.margin))
}

/// Largest eta (within `tol`) for which gain synthesis stays feasible,
/// found by bisection on [eta_lo, eta_hi].
pub fn max_eta(plant: &Plant, eta_lo: f64, eta_hi: f64, tol: f64) -> Result<f64> {
    if !(0.0 < eta_lo && eta_lo < eta_hi && tol > 0.0) {
        return Err(Error::Invalid("need 0 < eta_lo < eta_hi and tol > 0".into()));
    }
    if design_gains(plant, eta_lo).is_err() {
        return Err(Error::Infeasible(format!("infeasible already at eta = {eta_lo}")));
    }
    let (mut lo, mut hi) = (eta_lo, eta_hi);
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if design_gains(plant, mid).is_ok() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matnum::is_hurwitz;

    fn simple_plant() -> Plant {
        Plant::new(
            vec![Mat::identity(2).scale(-1.0)],
            vec![Mat::identity(2)],
            Mat::identity(2),
        )
        .unwrap()
    }

    fn example1_plant() -> Plant {
        let a1 = Mat::from_rows(&[vec![-2.0, 0.3], vec![-2.0, 1.0]]).unwrap();
        let a2 = Mat::from_rows(&[vec![1.0, 2.0], vec![-0.3, -4.0]]).unwrap();
        let d = Mat::from_rows(&[vec![1.0, 1.0], vec![1.0, -1.0]]).unwrap();
        let c = Mat::identity(2).scale(1e-5);
        Plant::new(vec![a1, a2], vec![d.clone(), d], c).unwrap()
    }

    fn example1_gains() -> Vec<Mat> {
        vec![
            Mat::from_rows(&[vec![1.5, 0.85], vec![0.85, -1.5]]).unwrap(),
            Mat::from_rows(&[vec![1.5, 0.85], vec![0.85, -3.5]]).unwrap(),
        ]
    }

    #[test]
    fn single_stable_mode_designs() {
        // A = -I already decays at rate 1 > eta = 0.5, so L = 0 would do
        let design = design_gains(&simple_plant(), 0.5).unwrap();
        assert!(design.margin > 0.0);
        assert_eq!(design.u.len(), 1);
    }

    #[test]
    fn example1_design_feasible() {
        let design = design_gains(&example1_plant(), 0.1).unwrap();
        assert!(design.margin > 0.0);
        // simultaneous stability implies each U_i + eta I is Hurwitz
        for u in &design.u {
            let shifted = u + &Mat::identity(2).scale(0.1 - 1e-9);
            assert!(is_hurwitz(&shifted).unwrap());
        }
    }

    #[test]
    fn example1_printed_gains_verify() {
        let (omega, margin) = verify_gains(&example1_plant(), &example1_gains(), 0.1).unwrap();
        assert!(margin > 0.0);
        assert!(omega.lambda_min() > 0.0);
    }

    #[test]
    fn design_then_verify_margin_consistent() {
        let plant = example1_plant();
        let design = design_gains(&plant, 0.1).unwrap();
        let (_, margin) = verify_gains(&plant, &design.gains, 0.1).unwrap();
        assert!(margin > design.margin / 10.0);
    }

    #[test]
    fn unobservable_mode_rejected() {
        let plant = Plant::new(
            vec![Mat::from_rows(&[vec![0.0, 1.0], vec![0.0, 0.0]]).unwrap()],
            vec![Mat::from_rows(&[vec![0.0, 1.0]]).unwrap()],
            Mat::identity(2),
        )
        .unwrap();
        assert!(matches!(design_gains(&plant, 0.1), Err(Error::Unobservable(1, 1, 2))));
    }

    #[test]
    fn destabilising_gains_fail_verification() {
        // L = -A D^{-1} ... pick gains making U_1 = A_1 + I (unstable)
        let plant = simple_plant();
        let bad = vec![Mat::identity(2).scale(-2.0)]; // U = -I + 2I = I
        assert!(verify_gains(&plant, &bad, 0.1).is_err());
    }

    #[test]
    fn verification_scaling_invariant() {
        let plant = example1_plant();
        let (omega, _) = verify_gains(&plant, &example1_gains(), 0.1).unwrap();
        let design = design_gains_partial(
            &plant,
            0.1,
            &example1_gains().into_iter().map(Some).collect::<Vec<_>>(),
        )
        .unwrap();
        // scaling Omega by c > 0 preserves the verdict
        for c in [0.5, 4.0] {
            let scaled = omega.scale(c);
            assert!(certified_margin(&design.u, 0.1, &scaled) > 0.0);
        }
    }

    #[test]
    fn max_eta_bracket() {
        let plant = simple_plant();
        // U can be made arbitrarily fast here via L, so cap the search window
        let eta = max_eta(&plant, 0.1, 5.0, 0.05).unwrap();
        assert!(eta >= 0.1);
    }
}
