//! Switched plant data: per-mode state and output matrices plus the shared
//! performance output.

use crate::error::{Error, Result};
use crate::matnum::Mat;
use serde::{Deserialize, Serialize};

/// Mode matrices `A_i` (n x n), output maps `D_i` (m x n) and the common
/// performance output `C` (p x n).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Plant {
    pub a: Vec<Mat>,
    pub d: Vec<Mat>,
    pub c: Mat,
}

impl Plant {
    pub fn new(a: Vec<Mat>, d: Vec<Mat>, c: Mat) -> Result<Self> {
        if a.is_empty() || a.len() != d.len() {
            return Err(Error::Dim("need one (A_i, D_i) pair per mode".into()));
        }
        let n = a[0].rows();
        let m = d[0].rows();
        for (i, (ai, di)) in a.iter().zip(&d).enumerate() {
            if !ai.is_square() || ai.rows() != n {
                return Err(Error::Dim(format!("A_{} must be {n}x{n}", i + 1)));
            }
            if di.rows() != m || di.cols() != n {
                return Err(Error::Dim(format!("D_{} must be {m}x{n}", i + 1)));
            }
        }
        if c.cols() != n {
            return Err(Error::Dim(format!("C must have {n} columns")));
        }
        Ok(Self { a, d, c })
    }

    pub fn num_modes(&self) -> usize {
        self.a.len()
    }

    pub fn state_dim(&self) -> usize {
        self.a[0].rows()
    }

    pub fn output_dim(&self) -> usize {
        self.d[0].rows()
    }

    /// C^T C, the performance-output weight.
    pub fn ctc(&self) -> crate::matnum::SymMat {
        crate::matnum::SymMat::from_mat(&(&self.c.transpose() * &self.c))
            .expect("square by construction")
    }
}
