//! End-to-end glue: config -> observer + dwell design -> stability
//! certification -> closed-loop simulation, with JSON artifact documents that
//! embed independently re-checkable margins.

use crate::certify::{self, StabilityCertificate, TuningParams};
use crate::config::ProblemConfig;
use crate::dwell::{solve_lyapunov_metzler, DwellCertificate, MetzlerMatrix, PFlow};
use crate::error::{Error, Result};
use crate::observer::{design_gains_partial, ObserverDesign};
use crate::sim::{self, CheckReport, SimConfig, SwitchedPlant, Trace};
use serde::{Deserialize, Serialize};

/// Output of the design stage, serialised as one JSON document.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DesignArtifacts {
    pub observer: ObserverDesign,
    pub dwell: DwellCertificate,
}

/// Stability certificate plus the refined-grid audit result.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CertifyArtifacts {
    pub certificate: StabilityCertificate,
    /// Worst eigenvalue over the r-times refined grid.
    pub finer_worst_eig: f64,
    pub finer_refinement: usize,
}

/// Simulation outputs with the post-hoc check report.
#[derive(Debug, Clone)]
pub struct SimulateArtifacts {
    pub trace: Trace,
    pub report: Option<CheckReport>,
}

/// Run observer gain design/verification and the coupled dwell-time
/// inequalities for a validated config.
pub fn run_design(cfg: &ProblemConfig) -> Result<DesignArtifacts> {
    cfg.validate()?;
    let plant = cfg.plant()?;
    let observer = design_gains_partial(&plant, cfg.eta, &cfg.gains()?)?;
    let pi = MetzlerMatrix::new(cfg.metzler_mat()?)?;
    let dwell = solve_lyapunov_metzler(&plant, &pi, cfg.zeta, cfg.t_dwell)?;
    Ok(DesignArtifacts { observer, dwell })
}

/// Synthesise (Q, W, gamma) on the config's uniform grid and audit on a
/// refined grid.
pub fn run_certify(
    cfg: &ProblemConfig,
    design: &DesignArtifacts,
    stencil_override: Option<f64>,
    finer: usize,
) -> Result<CertifyArtifacts> {
    cfg.validate()?;
    let plant = cfg.plant()?;
    let flow = PFlow::new(&plant, &design.dwell)?;
    let tuning = TuningParams::uniform(
        cfg.h,
        cfg.alpha,
        cfg.kappas(),
        cfg.eps,
        stencil_override.unwrap_or(cfg.grid_stencil),
        &design.observer,
        &flow,
    )?;
    let certificate = certify::synthesize(&design.observer, &flow, &tuning)?;
    let finer = finer.max(1);
    let finer_worst_eig = certify::verify_finer(&certificate, &design.observer, &flow, finer)?;
    if finer_worst_eig >= 0.0 {
        return Err(Error::Check(format!(
            "refined-grid audit found a non-negative eigenvalue {finer_worst_eig:e}"
        )));
    }
    Ok(CertifyArtifacts { certificate, finer_worst_eig, finer_refinement: finer })
}

/// Simulate the closed loop; when a stability certificate is supplied the
/// trace is checked against it (dwell gaps, jump signs, envelope, sampling).
pub fn run_simulate(
    cfg: &ProblemConfig,
    design: &DesignArtifacts,
    cert: Option<&StabilityCertificate>,
    seed_override: Option<u64>,
) -> Result<SimulateArtifacts> {
    cfg.validate()?;
    let plant = cfg.plant()?;
    let sp = SwitchedPlant::new(plant, cfg.nonlinearities())?;
    let mut schedule = cfg.sim.schedule.clone();
    if let (Some(seed), sim::Schedule::Jittered { seed: s }) = (seed_override, &mut schedule) {
        *s = seed;
    }
    let sim_cfg = SimConfig {
        duration: cfg.sim.duration,
        h_s: cfg.h,
        step: cfg.sim.step,
        schedule,
        x0: cfg.sim.x0.clone(),
        initial_mode: cfg.sim.initial_mode - 1,
        h_max: Some(cfg.h),
    };
    let trace = sim::simulate(&sp, &design.observer, &design.dwell, &sim_cfg)?;
    let report = match cert {
        Some(c) => {
            let r = cfg.sim.x0.iter().map(|v| v * v).sum::<f64>().sqrt();
            Some(sim::check_trace(&trace, c, r)?)
        }
        None => None,
    };
    Ok(SimulateArtifacts { trace, report })
}

/// Summary row printed by the reproduction command.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReproduceSummary {
    pub observer_margin: f64,
    pub lm_margin: f64,
    pub worst_grid_eig: f64,
    pub finer_worst_eig: f64,
    pub switch_count: usize,
    pub min_dwell_gap: Option<f64>,
    pub terminal_state_norm: f64,
    pub checks_passed: bool,
}

pub fn summarize(
    design: &DesignArtifacts,
    cert: &CertifyArtifacts,
    simu: &SimulateArtifacts,
) -> ReproduceSummary {
    let trace = &simu.trace;
    let min_gap = if trace.switch_times.is_empty() {
        None
    } else {
        let mut prev = 0.0;
        let mut min = f64::INFINITY;
        for &t in &trace.switch_times {
            min = min.min(t - prev);
            prev = t;
        }
        Some(min)
    };
    let terminal = trace
        .x
        .last()
        .map(|x| x.iter().map(|v| v * v).sum::<f64>().sqrt())
        .unwrap_or(f64::NAN);
    ReproduceSummary {
        observer_margin: design.observer.margin,
        lm_margin: design.dwell.lm_margin,
        worst_grid_eig: cert.certificate.worst_eig,
        finer_worst_eig: cert.finer_worst_eig,
        switch_count: trace.switch_times.len(),
        min_dwell_gap: min_gap,
        terminal_state_norm: terminal,
        checks_passed: simu.report.as_ref().map_or(false, |r| r.all_ok()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::example1;

    #[test]
    fn example1_design_round_trips_as_json() {
        let design = run_design(&example1()).unwrap();
        let text = serde_json::to_string(&design).unwrap();
        let back: DesignArtifacts = serde_json::from_str(&text).unwrap();
        assert_eq!(
            design.observer.gains[0].data(),
            back.observer.gains[0].data()
        );
        assert!(back.dwell.lm_margin > 0.0);
    }

    #[test]
    fn example1_simulation_without_certificate() {
        let cfg = example1();
        let design = run_design(&cfg).unwrap();
        let out = run_simulate(&cfg, &design, None, None).unwrap();
        assert!(out.report.is_none());
        assert!(!out.trace.switch_times.is_empty());
    }
}
