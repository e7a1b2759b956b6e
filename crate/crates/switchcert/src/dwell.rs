//! Dwell-time certificates: the coupled Lyapunov-Metzler inequalities, the
//! matrices Y_{1,j}/Y_{2,j} they involve, the time-varying flow P_i(t) on the
//! dwell window, and the continuity-modulus bounds that justify checking
//! time-dependent LMIs on a finite grid.

use crate::error::{Error, Result};
use crate::lmi::{self, FeasStatus, LmiConstraint, LmiVar, SolveOptions};
use crate::matnum::{expm, gram_integral, spectral_norm, Mat, SymMat};
use crate::plant::Plant;
use serde::{Deserialize, Serialize};

/// Metzler matrix with zero row sums and an irreducible positivity pattern.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "Mat", into = "Mat")]
pub struct MetzlerMatrix {
    mat: Mat,
}

impl TryFrom<Mat> for MetzlerMatrix {
    type Error = Error;
    fn try_from(mat: Mat) -> Result<Self> {
        MetzlerMatrix::new(mat)
    }
}

impl From<MetzlerMatrix> for Mat {
    fn from(m: MetzlerMatrix) -> Mat {
        m.mat
    }
}

impl MetzlerMatrix {
    pub fn new(mat: Mat) -> Result<Self> {
        if !mat.is_square() || mat.rows() == 0 {
            return Err(Error::Dim("Metzler matrix must be square and non-empty".into()));
        }
        let l = mat.rows();
        let scale = mat.norm_max().max(1.0);
        for i in 0..l {
            let mut row_sum = 0.0;
            for j in 0..l {
                if i != j && mat[(i, j)] < 0.0 {
                    return Err(Error::Invalid(format!(
                        "negative off-diagonal entry Pi[{},{}] = {}",
                        i + 1,
                        j + 1,
                        mat[(i, j)]
                    )));
                }
                row_sum += mat[(i, j)];
            }
            if row_sum.abs() > 1e-12 * scale {
                return Err(Error::Invalid(format!(
                    "row {} of Pi sums to {row_sum:e}, not zero",
                    i + 1
                )));
            }
        }
        if !strongly_connected(&mat) {
            return Err(Error::Invalid("Pi positivity pattern is reducible".into()));
        }
        Ok(Self { mat })
    }

    pub fn dim(&self) -> usize {
        self.mat.rows()
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.mat[(i, j)]
    }

    pub fn as_mat(&self) -> &Mat {
        &self.mat
    }
}

/// Strong connectivity of the directed graph with an edge i -> j whenever
/// the off-diagonal entry is positive: reachability from node 0 in the graph
/// and in its transpose.
fn strongly_connected(mat: &Mat) -> bool {
    let l = mat.rows();
    if l == 1 {
        return true;
    }
    let reach = |transpose: bool| -> bool {
        let mut seen = vec![false; l];
        let mut stack = vec![0usize];
        seen[0] = true;
        while let Some(i) = stack.pop() {
            for j in 0..l {
                let w = if transpose { mat[(j, i)] } else { mat[(i, j)] };
                if i != j && w > 0.0 && !seen[j] {
                    seen[j] = true;
                    stack.push(j);
                }
            }
        }
        seen.iter().all(|&s| s)
    };
    reach(false) && reach(true)
}

/// Y_{1,j} = e^{(A_j + zeta I)^T T} X_j e^{(A_j + zeta I) T} and
/// Y_{2,j} = int_0^T e^{(A_j + zeta I)^T tau} C^T C e^{(A_j + zeta I) tau} dtau.
pub fn compute_y(a_j: &Mat, x_j: &SymMat, c: &Mat, zeta: f64, t: f64) -> Result<(SymMat, SymMat)> {
    if !(t > 0.0) {
        return Err(Error::Invalid("dwell time must be positive".into()));
    }
    if a_j.rows() != x_j.dim() {
        return Err(Error::Dim("A/X dimension mismatch".into()));
    }
    let n = a_j.rows();
    let a_zeta = a_j + &Mat::identity(n).scale(zeta);
    let e_at = expm(&a_zeta.scale(t))?;
    let y1 = SymMat::from_mat(&(&(&e_at.transpose() * x_j.as_mat()) * &e_at))?;
    let ctc = SymMat::from_mat(&(&c.transpose() * c))?;
    let y2 = gram_integral(&a_zeta, &ctc, t)?;
    Ok((y1, y2))
}

/// Dwell-time certificate: per-mode X_i > 0 satisfying the coupled
/// Lyapunov-Metzler inequalities for the given Metzler matrix, decay shift
/// zeta and dwell time T.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DwellCertificate {
    pub pi: MetzlerMatrix,
    pub zeta: f64,
    pub t_dwell: f64,
    pub x: Vec<SymMat>,
    pub y1: Vec<SymMat>,
    pub y2: Vec<SymMat>,
    /// Certified margin: min over modes of -lambda_max of the inequality.
    pub lm_margin: f64,
}

impl DwellCertificate {
    /// Switching-trigger matrix Y_{1,j} + Y_{2,j}.
    pub fn y_sum(&self, j: usize) -> SymMat {
        self.y1[j].add(&self.y2[j])
    }
}

fn lm_constraint_value(
    plant: &Plant,
    pi: &MetzlerMatrix,
    zeta: f64,
    i: usize,
    x: &[SymMat],
    y2: &[SymMat],
    e_at: &[Mat],
) -> SymMat {
    let a = &plant.a[i];
    let xi = &x[i];
    let mut acc = &(&a.transpose() * xi.as_mat()) + &(xi.as_mat() * a);
    acc = &acc + &xi.as_mat().scale(2.0 * zeta);
    acc = &acc + plant.ctc().as_mat();
    for j in 0..plant.num_modes() {
        if j == i {
            continue;
        }
        let pij = pi.entry(i, j);
        if pij == 0.0 {
            continue;
        }
        let y1j = &(&e_at[j].transpose() * x[j].as_mat()) * &e_at[j];
        let coupling = &(&y1j + y2[j].as_mat()) - xi.as_mat();
        acc = &acc + &coupling.scale(pij);
    }
    SymMat::from_mat(&acc).expect("square")
}

/// Solve the coupled Lyapunov-Metzler LMIs for {X_i}. The system is affine
/// in the X_j because Y_{1,j} is linear in X_j and Y_{2,j} is constant.
pub fn solve_lyapunov_metzler(
    plant: &Plant,
    pi: &MetzlerMatrix,
    zeta: f64,
    t_dwell: f64,
) -> Result<DwellCertificate> {
    if pi.dim() != plant.num_modes() {
        return Err(Error::Dim("Pi dimension must equal the mode count".into()));
    }
    if !(zeta > 0.0 && t_dwell > 0.0) {
        return Err(Error::Invalid("zeta and T must be positive".into()));
    }
    let n = plant.state_dim();
    let l = plant.num_modes();
    let ctc = plant.ctc();

    let e_at: Vec<Mat> = plant
        .a
        .iter()
        .map(|a| expm(&(a + &Mat::identity(n).scale(zeta)).scale(t_dwell)))
        .collect::<Result<Vec<_>>>()?;
    let y2: Vec<SymMat> = plant
        .a
        .iter()
        .map(|a| gram_integral(&(a + &Mat::identity(n).scale(zeta)), &ctc, t_dwell))
        .collect::<Result<Vec<_>>>()?;

    // X_i >= I is without loss of generality: the inhomogeneous part
    // (coupled Y_2 terms plus C^T C) is PSD, so scaling a feasible set of
    // X_i up keeps the inequality satisfied.
    let vars: Vec<LmiVar> =
        (0..l).map(|i| LmiVar::sym(format!("X{}", i + 1), n).bounded_below(1.0)).collect();
    let constraints: Vec<LmiConstraint> = (0..l)
        .map(|i| {
            let plant = plant.clone();
            let pi = pi.clone();
            let e_at = e_at.clone();
            let y2 = y2.clone();
            LmiConstraint::new(format!("lm{}", i + 1), n, 0.0, move |asg| {
                let x: Vec<SymMat> = (1..=plant.num_modes())
                    .map(|k| asg.sym(&format!("X{k}")).cloned())
                    .collect::<Result<Vec<_>>>()?;
                Ok(lm_constraint_value(&plant, &pi, zeta, i, &x, &y2, &e_at))
            })
        })
        .collect();
    let system = lmi::build_system(vars, constraints)?;
    let res = lmi::solve(&system, &SolveOptions::default())?;
    let mut x: Vec<SymMat> = (1..=l)
        .map(|k| res.assignment.sym(&format!("X{k}")).cloned())
        .collect::<Result<Vec<_>>>()?;
    if res.status != FeasStatus::Feasible {
        // The inhomogeneous part (coupled Y_2 terms plus C^T C) is PSD, so a
        // strictly feasible point stays feasible under upscaling and its
        // margin grows linearly once the homogeneous part dominates. When the
        // solver stalls below its scale-relative margin target but the point
        // is strictly inside, pick the best upscaling by direct eigenvalue
        // certification.
        // margin and constraint scale (largest Frobenius norm) at a candidate
        let assess = |x: &[SymMat]| -> (f64, f64) {
            (0..l).fold((f64::INFINITY, 0.0f64), |(m, s), i| {
                let g = lm_constraint_value(plant, pi, zeta, i, x, &y2, &e_at);
                (m.min(-g.lambda_max()), s.max(g.norm_fro()))
            })
        };
        let mut accepted = false;
        // the best point comes from an affine projection, so X > 0 must be
        // re-checked independently alongside the inequality margins
        let x_min = x.iter().map(|xi| xi.lambda_min()).fold(f64::INFINITY, f64::min);
        for k in 0..=9 {
            if !(x_min > 0.0) {
                break;
            }
            let c = 10f64.powi(k);
            let scaled: Vec<SymMat> = x.iter().map(|xi| xi.scale(c)).collect();
            let (margin, scale) = assess(&scaled);
            // well clear of eigenvalue round-off at this scale
            if margin > 1e-8 * (1.0 + scale) {
                x = scaled;
                accepted = true;
                break;
            }
        }
        if !accepted {
            let diag: Vec<String> = (0..l)
                .map(|i| {
                    let v = system
                        .eval_constraint(i, &res.assignment)
                        .map(|s| s.lambda_max())
                        .unwrap_or(f64::NAN);
                    format!("mode {}: lambda_max {v:.6e}", i + 1)
                })
                .collect();
            return Err(Error::Infeasible(format!(
                "Lyapunov-Metzler LMIs undecided ({})",
                diag.join("; ")
            )));
        }
    }
    let mut y1 = Vec::with_capacity(l);
    for j in 0..l {
        y1.push(SymMat::from_mat(&(&(&e_at[j].transpose() * x[j].as_mat()) * &e_at[j]))?);
    }
    let lm_margin = (0..l)
        .map(|i| -lm_constraint_value(plant, pi, zeta, i, &x, &y2, &e_at).lambda_max())
        .fold(f64::INFINITY, f64::min);
    if lm_margin <= 0.0 {
        return Err(Error::Infeasible(
            "re-certification of the dwell inequality margin failed".into(),
        ));
    }
    Ok(DwellCertificate {
        pi: pi.clone(),
        zeta,
        t_dwell,
        x,
        y1,
        y2,
        lm_margin,
    })
}

/// The flow P_i(t) on the dwell window: the backward Lyapunov differential
/// equation with terminal value X_i at t = T, evaluated in closed form as
/// P_i(t) = e^{A_z^T (T-t)} X_i e^{A_z (T-t)} + int_0^{T-t} e^{A_z^T s} C^T C e^{A_z s} ds.
#[derive(Debug, Clone)]
pub struct PFlow {
    a_zeta: Vec<Mat>,
    a_norm: Vec<f64>,
    x: Vec<SymMat>,
    ctc: SymMat,
    pub t_dwell: f64,
    pub zeta: f64,
}

impl PFlow {
    pub fn new(plant: &Plant, cert: &DwellCertificate) -> Result<Self> {
        if plant.num_modes() != cert.x.len() {
            return Err(Error::Dim("plant/certificate mode count mismatch".into()));
        }
        let n = plant.state_dim();
        let a_zeta: Vec<Mat> =
            plant.a.iter().map(|a| a + &Mat::identity(n).scale(cert.zeta)).collect();
        let a_norm = a_zeta.iter().map(spectral_norm).collect();
        Ok(Self {
            a_zeta,
            a_norm,
            x: cert.x.clone(),
            ctc: plant.ctc(),
            t_dwell: cert.t_dwell,
            zeta: cert.zeta,
        })
    }

    pub fn num_modes(&self) -> usize {
        self.x.len()
    }

    pub fn dim(&self) -> usize {
        self.x[0].dim()
    }

    pub fn x_i(&self, i: usize) -> &SymMat {
        &self.x[i]
    }

    pub fn ctc(&self) -> &SymMat {
        &self.ctc
    }

    pub fn a_zeta_norm(&self, i: usize) -> f64 {
        self.a_norm[i]
    }

    pub fn eval_p(&self, i: usize, t: f64) -> Result<SymMat> {
        if !(0.0 <= t && t <= self.t_dwell) {
            return Err(Error::Invalid(format!(
                "t = {t} outside the dwell window [0, {}]",
                self.t_dwell
            )));
        }
        let rem = self.t_dwell - t;
        if rem <= 0.0 {
            return Ok(self.x[i].clone());
        }
        let e = expm(&self.a_zeta[i].scale(rem))?;
        let head = SymMat::from_mat(&(&(&e.transpose() * self.x[i].as_mat()) * &e))?;
        let tail = gram_integral(&self.a_zeta[i], &self.ctc, rem)?;
        Ok(head.add(&tail))
    }
}

/// Uniform bound max_{t in [0,T]} ||P_i(t)|| <= (||X_i|| + T ||C^T C||) e^{2 T ||A_{i,zeta}||}.
pub fn p_bound(flow: &PFlow, i: usize) -> f64 {
    let x_norm = spectral_norm(flow.x[i].as_mat());
    let ctc_norm = spectral_norm(flow.ctc.as_mat());
    (x_norm + flow.t_dwell * ctc_norm) * (2.0 * flow.t_dwell * flow.a_norm[i]).exp()
}

/// Continuity modulus of P_i on the dwell window:
/// theta_i(mu) = mu e^{2 a mu} ||C^T C|| + [2(e^{a mu} - 1) + (e^{a mu} - 1)^2] P_bar_i
/// with a = ||A_{i,zeta}||, so |t1 - t0| < mu implies ||P_i(t1) - P_i(t0)|| < theta_i(mu).
pub fn p_modulus(flow: &PFlow, i: usize, mu: f64) -> f64 {
    p_modulus_with_bound(flow, i, mu, p_bound(flow, i))
}

/// Same modulus formula with a caller-supplied uniform bound on ||P_i||.
pub fn p_modulus_with_bound(flow: &PFlow, i: usize, mu: f64, bound: f64) -> f64 {
    let a = flow.a_norm[i];
    let ctc_norm = spectral_norm(flow.ctc.as_mat());
    let g = (a * mu).exp() - 1.0;
    mu * (2.0 * a * mu).exp() * ctc_norm + (2.0 * g + g * g) * bound
}

/// Largest grid stencil mu such that theta_i(mu) stays 1% below the
/// threshold eps / (2 (zeta - alpha + ||L_i D_i||)) required for grid
/// discretisation to be conclusive.
pub fn grid_stencil(
    flow: &PFlow,
    i: usize,
    eps: f64,
    alpha: f64,
    zeta: f64,
    l_i: &Mat,
    d_i: &Mat,
) -> Result<f64> {
    if !(eps > 0.0) {
        return Err(Error::Invalid("eps must be positive".into()));
    }
    if !(0.0 < alpha && alpha < zeta) {
        return Err(Error::Invalid("need 0 < alpha < zeta".into()));
    }
    let ld_norm = spectral_norm(&(l_i * d_i));
    let target = 0.99 * eps / (2.0 * (zeta - alpha + ld_norm));
    if !(target > 0.0) || !target.is_finite() {
        return Err(Error::Invalid("stencil threshold is not attainable".into()));
    }
    if p_modulus(flow, i, f64::MIN_POSITIVE) >= target {
        return Err(Error::Invalid(
            "stencil threshold unattainable within floating range".into(),
        ));
    }
    // bracket: theta is strictly increasing and unbounded
    let mut hi = flow.t_dwell;
    while p_modulus(flow, i, hi) < target {
        hi *= 2.0;
        if !hi.is_finite() {
            return Ok(f64::MAX);
        }
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if p_modulus(flow, i, mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-12 * hi {
            break;
        }
    }
    Ok(lo)
}
