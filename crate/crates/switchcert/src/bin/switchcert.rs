//! Command-line front end: design -> certify -> simulate -> reproduce.
//!
//! Exit codes: 0 success, 1 input error, 2 infeasible, 3 runtime-check
//! violation. No output files are written when the exit code is 1.

use clap::{Args, Parser, Subcommand};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use switchcert::config::ProblemConfig;
use switchcert::pipeline::{
    self, CertifyArtifacts, DesignArtifacts, SimulateArtifacts,
};
use switchcert::plot::{line_chart, Series};
use switchcert::{Error, Result};

#[derive(Parser)]
#[command(
    name = "switchcert",
    about = "Design, certify and simulate observer-based sampled-data \
             switching laws under dwell-time constraints",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// Problem configuration (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Output directory for artifacts (created if absent).
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Design/verify observer gains and solve the dwell-time inequalities.
    Design(CommonArgs),
    /// Synthesise the stability certificate from an existing design.
    Certify {
        #[command(flatten)]
        common: CommonArgs,
        /// Override the grid stencil from the config.
        #[arg(long)]
        grid_stencil: Option<f64>,
        /// Refinement factor for the finer-grid audit.
        #[arg(long, default_value_t = 10)]
        finer: usize,
    },
    /// Simulate the closed loop and check the trace against the certificate.
    Simulate {
        #[command(flatten)]
        common: CommonArgs,
        /// Write an SVG plot of the state and mode time series.
        #[arg(long)]
        plot: bool,
        /// Override the jitter seed from the config.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run a built-in example end to end (design, certify, simulate).
    Reproduce {
        /// Example id: 1 or 2.
        id: u32,
        /// Output directory for artifacts (created if absent).
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Write SVG plots of the state and mode time series.
        #[arg(long)]
        plot: bool,
        /// Override the jitter seed from the config.
        #[arg(long)]
        seed: Option<u64>,
        /// Override the grid stencil from the config.
        #[arg(long)]
        grid_stencil: Option<f64>,
        /// Refinement factor for the finer-grid audit.
        #[arg(long, default_value_t = 10)]
        finer: usize,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Design(c) => cmd_design(&c),
        Command::Certify { common, grid_stencil, finer } => {
            cmd_certify(&common, grid_stencil, finer)
        }
        Command::Simulate { common, plot, seed } => cmd_simulate(&common, plot, seed),
        Command::Reproduce { id, out, plot, seed, grid_stencil, finer } => {
            cmd_reproduce(id, &out, plot, seed, grid_stencil, finer)
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Infeasible(_) => 2,
        Error::Check(_) => 3,
        _ => 1,
    }
}

fn load_config(path: &Path) -> Result<ProblemConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    let cfg = ProblemConfig::from_json(&text)?;
    cfg.validate()?;
    Ok(cfg)
}

fn write_json<T: serde::Serialize>(dir: &Path, name: &str, value: &T) -> Result<PathBuf> {
    std::fs::create_dir_all(dir)?;
    let path = dir.join(name);
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(&path, text)?;
    Ok(path)
}

fn read_design(dir: &Path) -> Result<DesignArtifacts> {
    let path = dir.join("design.cert.json");
    let text = std::fs::read_to_string(&path).map_err(|e| {
        Error::Config(format!(
            "missing design artifacts {}: {e} (run `switchcert design` first)",
            path.display()
        ))
    })?;
    Ok(serde_json::from_str(&text)?)
}

fn read_certificate(dir: &Path) -> Result<CertifyArtifacts> {
    let path = dir.join("stability.cert.json");
    let text = std::fs::read_to_string(&path).map_err(|e| {
        Error::Config(format!(
            "missing stability certificate {}: {e} (run `switchcert certify` first)",
            path.display()
        ))
    })?;
    Ok(serde_json::from_str(&text)?)
}

fn cmd_design(common: &CommonArgs) -> Result<()> {
    let cfg = load_config(&common.config)?;
    let design = pipeline::run_design(&cfg)?;
    let path = write_json(&common.out, "design.cert.json", &design)?;
    println!(
        "design ok: observer margin {:.3e}, dwell margin {:.3e} -> {}",
        design.observer.margin,
        design.dwell.lm_margin,
        path.display()
    );
    Ok(())
}

fn cmd_certify(common: &CommonArgs, grid_stencil: Option<f64>, finer: usize) -> Result<()> {
    let cfg = load_config(&common.config)?;
    let design = read_design(&common.out)?;
    let cert = pipeline::run_certify(&cfg, &design, grid_stencil, finer).map_err(|e| {
        match e {
            Error::Infeasible(msg) => Error::Infeasible(format!(
                "{msg}; the feasible region shrinks as the sampling period h or the \
                 Lipschitz constants grow and as alpha approaches zeta - try reducing \
                 h, kappa, or alpha"
            )),
            other => other,
        }
    })?;
    let path = write_json(&common.out, "stability.cert.json", &cert)?;
    println!(
        "certify ok: worst grid eigenvalue {:.6e}, x{} refined audit {:.6e} -> {}",
        cert.certificate.worst_eig,
        cert.finer_refinement,
        cert.finer_worst_eig,
        path.display()
    );
    Ok(())
}

fn write_trace_outputs(
    dir: &Path,
    cfg: &ProblemConfig,
    simu: &SimulateArtifacts,
    plot: bool,
) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("trace.csv"), simu.trace.to_csv())?;
    std::fs::write(dir.join("events.csv"), simu.trace.events_csv())?;
    if plot {
        let trace = &simu.trace;
        let n = cfg.sim.x0.len();
        let mut labels: Vec<String> = (1..=n).map(|i| format!("x{i}")).collect();
        labels.push("sigma".into());
        let mut series_pts: Vec<Vec<(f64, f64)>> = (0..n)
            .map(|i| {
                trace
                    .times
                    .iter()
                    .zip(&trace.x)
                    .map(|(&t, x)| (t, x[i]))
                    .collect()
            })
            .collect();
        // Mode signal compressed to its change points for a clean step plot.
        let mut modes: Vec<(f64, f64)> = Vec::new();
        for (k, (&t, &s)) in trace.times.iter().zip(&trace.sigma).enumerate() {
            if k == 0 || s != trace.sigma[k - 1] || k + 1 == trace.times.len() {
                modes.push((t, (s + 1) as f64));
            }
        }
        series_pts.push(modes);
        let series: Vec<Series> = series_pts
            .iter()
            .zip(&labels)
            .map(|(pts, label)| Series {
                label,
                points: pts,
                step: label == "sigma",
            })
            .collect();
        let svg = line_chart("closed-loop state and active mode", "time", "value", &series);
        std::fs::write(dir.join("trace.svg"), svg)?;
    }
    Ok(())
}

fn cmd_simulate(common: &CommonArgs, plot: bool, seed: Option<u64>) -> Result<()> {
    let cfg = load_config(&common.config)?;
    let design = read_design(&common.out)?;
    let cert = read_certificate(&common.out)?;
    let simu = pipeline::run_simulate(&cfg, &design, Some(&cert.certificate), seed)?;
    write_trace_outputs(&common.out, &cfg, &simu, plot)?;
    let report = simu.report.as_ref().expect("certificate was supplied");
    println!(
        "simulate: {} switches, min dwell gap {:.4}, terminal |x| {:.4e}",
        simu.trace.switch_times.len(),
        report.min_gap,
        simu.trace
            .x
            .last()
            .map(|x| x.iter().map(|v| v * v).sum::<f64>().sqrt())
            .unwrap_or(f64::NAN)
    );
    if let Some(name) = report.first_failure() {
        return Err(Error::Check(format!("trace check `{name}` failed")));
    }
    println!("all trace checks passed");
    Ok(())
}

fn cmd_reproduce(
    id: u32,
    out: &Path,
    plot: bool,
    seed: Option<u64>,
    grid_stencil: Option<f64>,
    finer: usize,
) -> Result<()> {
    let cfg = match id {
        1 => switchcert::config::example1(),
        2 => switchcert::config::example2(),
        _ => return Err(Error::Config(format!("unknown example id {id} (expected 1 or 2)"))),
    };
    let dir = out.join(format!("ex{id}"));

    eprintln!("[1/3] design");
    let design = pipeline::run_design(&cfg)?;
    eprintln!("[2/3] certify (grid synthesis + refined audit)");
    let cert = pipeline::run_certify(&cfg, &design, grid_stencil, finer)?;
    eprintln!("[3/3] simulate");
    let simu = pipeline::run_simulate(&cfg, &design, Some(&cert.certificate), seed)?;

    write_json(&dir, &format!("ex{id}.config.json"), &cfg)?;
    write_json(&dir, "design.cert.json", &design)?;
    write_json(&dir, "stability.cert.json", &cert)?;
    write_trace_outputs(&dir, &cfg, &simu, plot)?;
    let summary = pipeline::summarize(&design, &cert, &simu);
    write_json(&dir, "summary.json", &summary)?;

    println!("example {id} reproduction summary");
    println!("  {:<28} {:>14.6e}", "observer margin", summary.observer_margin);
    println!("  {:<28} {:>14.6e}", "dwell (LM) margin", summary.lm_margin);
    println!("  {:<28} {:>14.6e}", "worst grid eigenvalue", summary.worst_grid_eig);
    println!(
        "  {:<28} {:>14.6e}",
        format!("x{} refined eigenvalue", cert.finer_refinement),
        summary.finer_worst_eig
    );
    println!("  {:<28} {:>14}", "switch count", summary.switch_count);
    match summary.min_dwell_gap {
        Some(g) => println!("  {:<28} {:>14.6}", "min dwell gap", g),
        None => println!("  {:<28} {:>14}", "min dwell gap", "n/a (no switches)"),
    }
    println!("  {:<28} {:>14.6e}", "terminal |x|", summary.terminal_state_norm);
    println!("  {:<28} {:>14}", "trace checks", if summary.checks_passed { "pass" } else { "FAIL" });
    println!("artifacts in {}", dir.display());
    if !summary.checks_passed {
        let name = simu
            .report
            .as_ref()
            .and_then(|r| r.first_failure())
            .unwrap_or("unknown");
        return Err(Error::Check(format!("trace check `{name}` failed")));
    }
    Ok(())
}
