//! JSON problem configuration: plant data, tuning scalars, grid settings and the
//! simulation block, with built-in configurations reproducing the two
//! benchmark examples and the affine variant.

use crate::error::{Error, Result};
use crate::matnum::Mat;
use crate::plant::Plant;
use crate::sim::{Nonlinearity, Schedule};
use serde::{Deserialize, Serialize};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModeConfig {
    /// State matrix A_i, row-major.
    pub a: Vec<Vec<f64>>,
    /// Output matrix D_i, row-major.
    pub d: Vec<Vec<f64>>,
    /// Observer gain L_i; omitted gains are synthesised.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gain: Option<Vec<Vec<f64>>>,
    pub nonlinearity: Nonlinearity,
    /// Lipschitz constant used in certification; must dominate the
    /// nonlinearity's own constant.
    pub kappa: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimBlock {
    pub x0: Vec<f64>,
    pub duration: f64,
    /// RK4 step; defaults to h/20.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step: Option<f64>,
    pub schedule: Schedule,
    /// One-based initial mode.
    pub initial_mode: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProblemConfig {
    pub schema_version: u32,
    pub modes: Vec<ModeConfig>,
    /// Cost output matrix C, row-major.
    pub c: Vec<Vec<f64>>,
    /// Metzler matrix Pi, row-major.
    pub metzler: Vec<Vec<f64>>,
    pub zeta: f64,
    pub t_dwell: f64,
    /// Maximum inter-sample time (also the default sampling period).
    pub h: f64,
    pub alpha: f64,
    /// Required strict margin for the grid synthesis.
    pub eps: f64,
    /// Simultaneous observer decay rate.
    pub eta: f64,
    /// Uniform verification-grid stencil.
    pub grid_stencil: f64,
    pub sim: SimBlock,
}

fn mat(rows: &[Vec<f64>]) -> Result<Mat> {
    Mat::from_rows(rows).map_err(|e| Error::Config(format!("bad matrix: {e}")))
}

impl Nonlinearity {
    /// Global Lipschitz constant of the nonlinearity itself.
    pub fn lipschitz(&self) -> f64 {
        match self {
            Nonlinearity::Zero | Nonlinearity::Constant { .. } => 0.0,
            Nonlinearity::NormSaturation { kappa } | Nonlinearity::Sine { kappa } => kappa.abs(),
        }
    }
}

impl ProblemConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ProblemConfig =
            serde_json::from_str(text).map_err(|e| Error::Config(format!("JSON parse: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serialises")
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "unsupported schema version {} (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        if self.modes.is_empty() {
            return Err(Error::Config("at least one mode required".into()));
        }
        let plant = self.plant()?; // checks dimensional consistency
        let n = plant.state_dim();
        let m = plant.output_dim();
        for (i, mc) in self.modes.iter().enumerate() {
            if let Some(g) = &mc.gain {
                let g = mat(g)?;
                if g.rows() != n || g.cols() != m {
                    return Err(Error::Config(format!("gain {} must be {n}x{m}", i + 1)));
                }
            }
            if !(mc.kappa >= 0.0) {
                return Err(Error::Config("kappa must be non-negative".into()));
            }
            if mc.kappa + 1e-15 < mc.nonlinearity.lipschitz() {
                return Err(Error::Config(format!(
                    "mode {} kappa {} below the nonlinearity's Lipschitz constant {}",
                    i + 1,
                    mc.kappa,
                    mc.nonlinearity.lipschitz()
                )));
            }
            if let Nonlinearity::Constant { b } = &mc.nonlinearity {
                if b.len() != n {
                    return Err(Error::Config("constant offset dimension mismatch".into()));
                }
            }
        }
        let pi = mat(&self.metzler)?;
        if pi.rows() != self.modes.len() || pi.cols() != self.modes.len() {
            return Err(Error::Config("metzler matrix must be l x l".into()));
        }
        if !(self.zeta > 0.0 && self.t_dwell > 0.0 && self.h > 0.0 && self.eps > 0.0) {
            return Err(Error::Config("zeta, T, h, eps must be positive".into()));
        }
        if !(0.0 < self.alpha && self.alpha < self.zeta) {
            return Err(Error::Config("need 0 < alpha < zeta".into()));
        }
        if !(self.eta > 0.0) {
            return Err(Error::Config("eta must be positive".into()));
        }
        if !(self.grid_stencil > 0.0) {
            return Err(Error::Config("grid stencil must be positive".into()));
        }
        if self.sim.x0.len() != n {
            return Err(Error::Config(format!("x0 must have dimension {n}")));
        }
        if self.sim.initial_mode == 0 || self.sim.initial_mode > self.modes.len() {
            return Err(Error::Config(format!(
                "initial mode must be in 1..={}",
                self.modes.len()
            )));
        }
        if !(self.sim.duration > 0.0) {
            return Err(Error::Config("simulation duration must be positive".into()));
        }
        Ok(())
    }

    pub fn plant(&self) -> Result<Plant> {
        let a = self.modes.iter().map(|mc| mat(&mc.a)).collect::<Result<Vec<_>>>()?;
        let d = self.modes.iter().map(|mc| mat(&mc.d)).collect::<Result<Vec<_>>>()?;
        Plant::new(a, d, mat(&self.c)?)
    }

    pub fn gains(&self) -> Result<Vec<Option<Mat>>> {
        self.modes
            .iter()
            .map(|mc| mc.gain.as_ref().map(|g| mat(g)).transpose())
            .collect()
    }

    pub fn nonlinearities(&self) -> Vec<Nonlinearity> {
        self.modes.iter().map(|mc| mc.nonlinearity.clone()).collect()
    }

    pub fn kappas(&self) -> Vec<f64> {
        self.modes.iter().map(|mc| mc.kappa).collect()
    }

    pub fn metzler_mat(&self) -> Result<Mat> {
        mat(&self.metzler)
    }
}

fn rows(m: &Mat) -> Vec<Vec<f64>> {
    (0..m.rows()).map(|r| (0..m.cols()).map(|c| m[(r, c)]).collect()).collect()
}

/// Two unstable planar modes whose pairwise mixture is stabilisable;
/// norm-saturated nonlinearity, gains supplied for both modes.
pub fn example1() -> ProblemConfig {
    let sat = Nonlinearity::NormSaturation { kappa: 0.002 };
    ProblemConfig {
        schema_version: SCHEMA_VERSION,
        modes: vec![
            ModeConfig {
                a: vec![vec![-2.0, 0.3], vec![-2.0, 1.0]],
                d: vec![vec![1.0, 1.0], vec![1.0, -1.0]],
                gain: Some(vec![vec![1.5, 0.85], vec![0.85, -1.5]]),
                nonlinearity: sat.clone(),
                kappa: 0.002,
            },
            ModeConfig {
                a: vec![vec![1.0, 2.0], vec![-0.3, -4.0]],
                d: vec![vec![1.0, 1.0], vec![1.0, -1.0]],
                gain: Some(vec![vec![1.5, 0.85], vec![0.85, -3.5]]),
                nonlinearity: sat,
                kappa: 0.002,
            },
        ],
        c: rows(&Mat::identity(2).scale(1e-5)),
        metzler: vec![vec![-21.21, 21.21], vec![21.21, -21.21]],
        zeta: 0.1,
        t_dwell: 0.1,
        h: 0.05,
        alpha: 1e-6,
        eps: 1e-4,
        eta: 0.1,
        grid_stencil: 0.01,
        sim: SimBlock {
            x0: vec![1.0, 1.0],
            duration: 20.0,
            step: None,
            schedule: Schedule::Uniform,
            initial_mode: 1,
        },
    }
}

/// Three-mode congestion-style system with no Hurwitz convex combination;
/// sine nonlinearity, third gain synthesised.
pub fn example2() -> ProblemConfig {
    let (eta, beta) = (1.0, 1.1);
    let sine = Nonlinearity::Sine { kappa: 0.002 };
    let d = vec![vec![1.0, 1.0, 1.0]];
    ProblemConfig {
        schema_version: SCHEMA_VERSION,
        modes: vec![
            ModeConfig {
                a: vec![vec![-eta, 0.0, 0.0], vec![0.0, 0.0, 0.0], vec![0.0, beta, 0.0]],
                d: d.clone(),
                gain: Some(vec![vec![-0.51], vec![0.53], vec![0.53]]),
                nonlinearity: sine.clone(),
                kappa: 0.002,
            },
            ModeConfig {
                a: vec![vec![0.0, 0.0, beta], vec![0.0, -eta, 0.0], vec![0.0, 0.0, 0.0]],
                d: d.clone(),
                gain: Some(vec![vec![0.53], vec![-0.51], vec![0.53]]),
                nonlinearity: sine.clone(),
                kappa: 0.002,
            },
            ModeConfig {
                a: vec![vec![0.0, 0.0, 0.0], vec![beta, 0.0, 0.0], vec![0.0, 0.0, -eta]],
                d,
                gain: None,
                nonlinearity: sine,
                kappa: 0.002,
            },
        ],
        c: rows(&Mat::identity(3)),
        metzler: vec![
            vec![-10.0, 0.0, 10.0],
            vec![10.0, -10.0, 0.0],
            vec![0.0, 10.0, -10.0],
        ],
        zeta: 0.1,
        t_dwell: 2.1,
        h: 0.2,
        alpha: 1e-6,
        eps: 1e-4,
        eta: 0.1,
        grid_stencil: 0.05,
        sim: SimBlock {
            x0: vec![1.0, 1.0, 1.0],
            duration: 60.0,
            step: None,
            schedule: Schedule::Uniform,
            initial_mode: 1,
        },
    }
}

/// Affine variant of the first example: nonlinearities replaced by unknown
/// constant offsets, certified with kappa = 0 for ultimate-bound analysis.
pub fn example1_affine() -> ProblemConfig {
    let mut cfg = example1();
    for mc in &mut cfg.modes {
        mc.nonlinearity = Nonlinearity::Constant { b: vec![0.05, 0.05] };
        mc.kappa = 0.0;
    }
    cfg.sim.duration = 200.0;
    cfg
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtins_validate() {
        example1().validate().unwrap();
        example2().validate().unwrap();
        example1_affine().validate().unwrap();
    }

    #[test]
    fn json_round_trip_identical() {
        for cfg in [example1(), example2(), example1_affine()] {
            let text = cfg.to_json();
            let back = ProblemConfig::from_json(&text).unwrap();
            assert_eq!(text, back.to_json());
        }
    }

    #[test]
    fn validation_failures() {
        let mut cfg = example1();
        cfg.schema_version = 99;
        assert!(cfg.validate().is_err());

        let mut cfg = example1();
        cfg.metzler = vec![vec![-1.0]]; // wrong size
        assert!(cfg.validate().is_err());

        let mut cfg = example1();
        cfg.alpha = 0.2; // >= zeta
        assert!(cfg.validate().is_err());

        let mut cfg = example1();
        cfg.modes[0].kappa = 1e-5; // below the nonlinearity's constant
        assert!(cfg.validate().is_err());

        let mut cfg = example1();
        cfg.sim.initial_mode = 0;
        assert!(cfg.validate().is_err());

        let mut cfg = example1();
        cfg.sim.x0 = vec![1.0];
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn parse_rejects_malformed_json() {
        assert!(ProblemConfig::from_json("{not json").is_err());
        assert!(ProblemConfig::from_json("{}").is_err());
    }
}
