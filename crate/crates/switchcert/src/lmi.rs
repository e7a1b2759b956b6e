//! Strict affine linear matrix inequality feasibility.
//!
//! A system consists of declared variables (symmetric matrices, rectangular
//! matrices, scalars) and constraints, each an affine map from a variable
//! assignment to a symmetric matrix required to be `< -eps I`. Solving uses
//! alternating projections between the affine slack subspace and a product of
//! shifted PSD cones with Dykstra correction. Every feasible result is
//! re-certified by independent eigenvalue checks; solver internals are never
//! trusted.

use crate::error::{Error, Result};
use crate::matnum::{sym_eig, Mat, SymMat};
use rayon::prelude::*;
use std::collections::BTreeMap;

const SQRT2: f64 = std::f64::consts::SQRT_2;

/// Variable shape.
#[derive(Debug, Clone, PartialEq)]
pub enum VarKind {
    /// Symmetric matrix of the given dimension.
    Sym(usize),
    /// General rectangular matrix (rows, cols).
    Rect(usize, usize),
    Scalar,
}

/// Declared decision variable with an optional lower-definiteness bound
/// (`Var >= mu I` for matrices, `Var >= mu` for scalars).
#[derive(Debug, Clone)]
pub struct LmiVar {
    pub name: String,
    pub kind: VarKind,
    pub lower: Option<f64>,
}

impl LmiVar {
    pub fn sym(name: impl Into<String>, dim: usize) -> Self {
        Self { name: name.into(), kind: VarKind::Sym(dim), lower: None }
    }

    pub fn rect(name: impl Into<String>, rows: usize, cols: usize) -> Self {
        Self { name: name.into(), kind: VarKind::Rect(rows, cols), lower: None }
    }

    pub fn scalar(name: impl Into<String>) -> Self {
        Self { name: name.into(), kind: VarKind::Scalar, lower: None }
    }

    /// Require `Var >= mu I` (or `>= mu` for scalars).
    pub fn bounded_below(mut self, mu: f64) -> Self {
        self.lower = Some(mu);
        self
    }

    fn dof(&self) -> usize {
        match self.kind {
            VarKind::Sym(d) => d * (d + 1) / 2,
            VarKind::Rect(r, c) => r * c,
            VarKind::Scalar => 1,
        }
    }
}

/// Variable value in an assignment.
#[derive(Debug, Clone)]
pub enum VarValue {
    Sym(SymMat),
    Rect(Mat),
    Scalar(f64),
}

/// Map from variable names to values.
#[derive(Debug, Clone, Default)]
pub struct Assignment {
    map: BTreeMap<String, VarValue>,
}

impl Assignment {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: impl Into<String>, value: VarValue) {
        self.map.insert(name.into(), value);
    }

    pub fn sym(&self, name: &str) -> Result<&SymMat> {
        match self.map.get(name) {
            Some(VarValue::Sym(s)) => Ok(s),
            Some(_) => Err(Error::Invalid(format!("variable `{name}` is not symmetric"))),
            None => Err(Error::UndeclaredVar(name.into())),
        }
    }

    pub fn rect(&self, name: &str) -> Result<&Mat> {
        match self.map.get(name) {
            Some(VarValue::Rect(m)) => Ok(m),
            Some(_) => Err(Error::Invalid(format!("variable `{name}` is not a matrix"))),
            None => Err(Error::UndeclaredVar(name.into())),
        }
    }

    pub fn scalar(&self, name: &str) -> Result<f64> {
        match self.map.get(name) {
            Some(VarValue::Scalar(x)) => Ok(*x),
            Some(_) => Err(Error::Invalid(format!("variable `{name}` is not a scalar"))),
            None => Err(Error::UndeclaredVar(name.into())),
        }
    }
}

type ConstraintFn = dyn Fn(&Assignment) -> Result<SymMat> + Send + Sync;

/// One affine constraint `F(vars) < -eps I`.
pub struct LmiConstraint {
    pub name: String,
    pub dim: usize,
    /// Required absolute margin: the constraint is `F < -eps I` with `eps >= 0`.
    pub eps: f64,
    map: Box<ConstraintFn>,
}

impl LmiConstraint {
    pub fn new(
        name: impl Into<String>,
        dim: usize,
        eps: f64,
        map: impl Fn(&Assignment) -> Result<SymMat> + Send + Sync + 'static,
    ) -> Self {
        Self { name: name.into(), dim, eps, map: Box::new(map) }
    }
}

/// Validated system ready for solving.
pub struct LmiSystem {
    vars: Vec<LmiVar>,
    constraints: Vec<LmiConstraint>,
    offsets: Vec<usize>,
    total_dof: usize,
}

/// Solver outcome. `InfeasibleOrUndecided` carries the best achieved margin
/// for diagnostics; no infeasibility certificate is produced.
#[derive(Debug, Clone, PartialEq)]
pub enum FeasStatus {
    Feasible,
    InfeasibleOrUndecided,
}

#[derive(Debug, Clone)]
pub struct FeasibilityResult {
    pub status: FeasStatus,
    pub assignment: Assignment,
    /// Min over constraints of `-lambda_max` at the assignment, re-verified by
    /// `sym_eig` rather than solver internals.
    pub certified_margin: f64,
    pub iterations: usize,
    /// Worst normalised constraint violation seen at the returned point
    /// (negative means all requirements met).
    pub worst_violation: f64,
}

#[derive(Debug, Clone)]
pub struct SolveOptions {
    /// Required margin relative to each constraint's Frobenius scale, used
    /// when the constraint's own `eps` is smaller.
    pub target_margin: f64,
    /// Iteration budget; exhausting it yields `InfeasibleOrUndecided`.
    pub budget: usize,
    pub warm_start: Option<Assignment>,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self { target_margin: 1e-6, budget: 20_000, warm_start: None }
    }
}

/// Validate variables and constraints into a solvable system.
pub fn build_system(vars: Vec<LmiVar>, constraints: Vec<LmiConstraint>) -> Result<LmiSystem> {
    let mut seen = std::collections::BTreeSet::new();
    for v in &vars {
        if !seen.insert(v.name.clone()) {
            return Err(Error::Invalid(format!("duplicate variable `{}`", v.name)));
        }
        match v.kind {
            VarKind::Sym(d) if d == 0 => return Err(Error::Dim("zero-dim variable".into())),
            VarKind::Rect(r, c) if r == 0 || c == 0 => {
                return Err(Error::Dim("zero-dim variable".into()))
            }
            VarKind::Rect(_, _) if v.lower.is_some() => {
                return Err(Error::Invalid(format!(
                    "rectangular variable `{}` cannot carry a definiteness bound",
                    v.name
                )))
            }
            _ => {}
        }
        if let Some(mu) = v.lower {
            if mu < 0.0 {
                return Err(Error::Invalid(format!("negative lower bound on `{}`", v.name)));
            }
        }
    }
    let mut offsets = Vec::with_capacity(vars.len());
    let mut total = 0usize;
    for v in &vars {
        offsets.push(total);
        total += v.dof();
    }
    let sys = LmiSystem { vars, constraints, offsets, total_dof: total };

    // Probe every constraint at the zero assignment and along a few basis
    // directions: catches undeclared variables, dimension mismatches and
    // non-affine maps before any solving.
    let zero = sys.assignment_from_vec(&vec![0.0; sys.total_dof]);
    for (ci, c) in sys.constraints.iter().enumerate() {
        let f0 = (c.map)(&zero)?;
        if f0.dim() != c.dim {
            return Err(Error::Dim(format!(
                "constraint `{}` declared dim {} but evaluates to {}",
                c.name,
                c.dim,
                f0.dim()
            )));
        }
        if c.eps < 0.0 {
            return Err(Error::Invalid(format!("constraint `{}` has eps < 0", c.name)));
        }
        if sys.total_dof >= 2 && ci == 0 {
            // affinity spot check on the first constraint
            let mut e0 = vec![0.0; sys.total_dof];
            e0[0] = 1.0;
            let mut e1 = vec![0.0; sys.total_dof];
            e1[1] = 1.0;
            let mut e01 = vec![0.0; sys.total_dof];
            e01[0] = 1.0;
            e01[1] = 1.0;
            let f_a = (c.map)(&sys.assignment_from_vec(&e0))?;
            let f_b = (c.map)(&sys.assignment_from_vec(&e1))?;
            let f_ab = (c.map)(&sys.assignment_from_vec(&e01))?;
            let lhs = f_ab.add(&f0);
            let rhs = f_a.add(&f_b);
            let scale = 1.0 + lhs.norm_fro().max(rhs.norm_fro());
            if lhs.sub(&rhs).norm_fro() > 1e-8 * scale {
                return Err(Error::Invalid(format!("constraint `{}` is not affine", c.name)));
            }
        }
    }
    Ok(sys)
}

struct Linearized {
    dim: usize,
    /// d*d rows by N cols, row-major.
    a: Vec<f64>,
    b: Vec<f64>,
    req: f64,
    aim: f64,
}

impl LmiSystem {
    pub fn num_vars(&self) -> usize {
        self.vars.len()
    }

    pub fn num_constraints(&self) -> usize {
        self.constraints.len()
    }

    pub fn constraint_names(&self) -> Vec<&str> {
        self.constraints.iter().map(|c| c.name.as_str()).collect()
    }

    fn assignment_from_vec(&self, v: &[f64]) -> Assignment {
        let mut asg = Assignment::new();
        for (var, &off) in self.vars.iter().zip(&self.offsets) {
            let value = match var.kind {
                VarKind::Sym(d) => VarValue::Sym(unpack_sym(d, &v[off..off + d * (d + 1) / 2])),
                VarKind::Rect(r, c) => VarValue::Rect(
                    Mat::new(r, c, v[off..off + r * c].to_vec()).expect("finite packed entries"),
                ),
                VarKind::Scalar => VarValue::Scalar(v[off]),
            };
            asg.insert(var.name.clone(), value);
        }
        asg
    }

    fn vec_from_assignment(&self, asg: &Assignment) -> Result<Vec<f64>> {
        let mut v = vec![0.0; self.total_dof];
        for (var, &off) in self.vars.iter().zip(&self.offsets) {
            match var.kind {
                VarKind::Sym(d) => {
                    let s = asg.sym(&var.name)?;
                    if s.dim() != d {
                        return Err(Error::Dim(format!("variable `{}` dim mismatch", var.name)));
                    }
                    pack_sym_into(s, &mut v[off..off + d * (d + 1) / 2]);
                }
                VarKind::Rect(r, c) => {
                    let m = asg.rect(&var.name)?;
                    if m.rows() != r || m.cols() != c {
                        return Err(Error::Dim(format!("variable `{}` dim mismatch", var.name)));
                    }
                    v[off..off + r * c].copy_from_slice(m.data());
                }
                VarKind::Scalar => v[off] = asg.scalar(&var.name)?,
            }
        }
        Ok(v)
    }

    /// Evaluate a constraint at an assignment.
    pub fn eval_constraint(&self, idx: usize, asg: &Assignment) -> Result<SymMat> {
        (self.constraints[idx].map)(asg)
    }
}

fn pack_sym_into(s: &SymMat, out: &mut [f64]) {
    let d = s.dim();
    let m = s.as_mat();
    let mut k = 0;
    for i in 0..d {
        for j in i..d {
            out[k] = if i == j { m[(i, i)] } else { SQRT2 * m[(i, j)] };
            k += 1;
        }
    }
}

fn unpack_sym(d: usize, v: &[f64]) -> SymMat {
    let mut m = Mat::zeros(d, d);
    let mut k = 0;
    for i in 0..d {
        for j in i..d {
            if i == j {
                m[(i, i)] = v[k];
            } else {
                m[(i, j)] = v[k] / SQRT2;
                m[(j, i)] = v[k] / SQRT2;
            }
            k += 1;
        }
    }
    SymMat::from_mat(&m).expect("square by construction")
}

fn vec_full(s: &SymMat) -> Vec<f64> {
    s.as_mat().data().to_vec()
}

fn sym_from_full(d: usize, v: &[f64]) -> SymMat {
    SymMat::from_mat(&Mat::new(d, d, v.to_vec()).expect("finite")).expect("square")
}

/// Alternating-projection feasibility solve. Deterministic given
/// `(system, options)`.
pub fn solve(system: &LmiSystem, opts: &SolveOptions) -> Result<FeasibilityResult> {
    let n = system.total_dof;
    let zero_asg = system.assignment_from_vec(&vec![0.0; n]);

    // Linearise each constraint numerically: b = F(0), columns = F(e_k) - b.
    let lins: Vec<Linearized> = system
        .constraints
        .iter()
        .map(|c| -> Result<Linearized> {
            let d = c.dim;
            let b = vec_full(&(c.map)(&zero_asg)?);
            let mut a = vec![0.0; d * d * n];
            let mut col_norm_max: f64 = 0.0;
            for k in 0..n {
                let mut e = vec![0.0; n];
                e[k] = 1.0;
                let fe = vec_full(&(c.map)(&system.assignment_from_vec(&e))?);
                let mut nrm = 0.0;
                for (r, (fv, bv)) in fe.iter().zip(&b).enumerate() {
                    let val = fv - bv;
                    a[r * n + k] = val;
                    nrm += val * val;
                }
                col_norm_max = col_norm_max.max(nrm.sqrt());
            }
            let b_norm = b.iter().map(|x| x * x).sum::<f64>().sqrt();
            let scale = b_norm.max(col_norm_max).max(1e-12);
            let req = c.eps.max(opts.target_margin * scale);
            Ok(Linearized { dim: d, a, b, req, aim: 1.5 * req })
        })
        .collect::<Result<Vec<_>>>()?;

    // Normal matrix G = I + sum A_c^T A_c, factored once.
    let mut g = Mat::identity(n);
    for lin in &lins {
        let rows = lin.dim * lin.dim;
        for r in 0..rows {
            let row = &lin.a[r * n..(r + 1) * n];
            for i in 0..n {
                if row[i] == 0.0 {
                    continue;
                }
                for j in 0..n {
                    g[(i, j)] += row[i] * row[j];
                }
            }
        }
    }
    let g = SymMat::from_mat(&g)?;
    let g_chol_ok = g.cholesky().is_some();
    if !g_chol_ok {
        return Err(Error::Singular);
    }

    // Bounded variable blocks (index, offset, kind, mu).
    let bounded: Vec<(usize, usize, VarKind, f64)> = system
        .vars
        .iter()
        .zip(&system.offsets)
        .filter_map(|(v, &off)| v.lower.map(|mu| (off, off, v.kind.clone(), mu)))
        .map(|(a, b, k, mu)| (a, b, k, mu))
        .collect();

    // State: variable vector and slack matrices (full vectorisation).
    let mut v_cur: Vec<f64> = match &opts.warm_start {
        Some(asg) => system.vec_from_assignment(asg)?,
        None => vec![0.0; n],
    };
    project_var_bounds(&mut v_cur, &bounded);
    let mut s_cur: Vec<Vec<f64>> = lins
        .iter()
        .map(|lin| {
            let mut s = apply_affine_neg(lin, &v_cur, n);
            clip_psd(&mut s, lin.dim, lin.aim);
            s
        })
        .collect();

    // Dykstra corrections for the cone step.
    let mut q_v = vec![0.0; n];
    let mut q_s: Vec<Vec<f64>> = lins.iter().map(|l| vec![0.0; l.dim * l.dim]).collect();

    let mut best_violation = f64::INFINITY;
    let mut best_vec = v_cur.clone();
    let mut last_improve = 0usize;
    let mut stalls = 0usize;

    for iter in 1..=opts.budget {
        // --- Projection onto the affine subspace S_c = -(A_c v + b_c). ---
        let contribs: Vec<Vec<f64>> = lins
            .par_iter()
            .zip(&s_cur)
            .map(|(lin, s)| {
                // A_c^T (b_c + s_c)
                let rows = lin.dim * lin.dim;
                let mut out = vec![0.0; n];
                for r in 0..rows {
                    let w = lin.b[r] + s[r];
                    if w == 0.0 {
                        continue;
                    }
                    let row = &lin.a[r * n..(r + 1) * n];
                    for k in 0..n {
                        out[k] += row[k] * w;
                    }
                }
                out
            })
            .collect();
        let mut rhs = v_cur.clone();
        for c in &contribs {
            for k in 0..n {
                rhs[k] -= c[k];
            }
        }
        let v_aff_mat = g.spd_solve(&Mat::col_vec(&rhs))?;
        let v_aff: Vec<f64> = v_aff_mat.data().to_vec();
        let s_aff: Vec<Vec<f64>> =
            lins.par_iter().map(|lin| apply_affine_neg(lin, &v_aff, n)).collect();

        // --- Feasibility check at the affine point. ---
        let cone_viols: Vec<f64> = lins
            .par_iter()
            .zip(&s_aff)
            .map(|(lin, s)| {
                let lam_min = sym_from_full(lin.dim, s).lambda_min();
                (lin.req - lam_min) / lin.req.max(1e-300)
            })
            .collect();
        let mut violation = cone_viols.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        for (off, _, kind, mu) in &bounded {
            let bv = match kind {
                VarKind::Sym(d) => {
                    unpack_sym(*d, &v_aff[*off..*off + d * (d + 1) / 2]).lambda_min()
                }
                VarKind::Scalar => v_aff[*off],
                VarKind::Rect(_, _) => unreachable!(),
            };
            violation = violation.max((mu - bv) / mu.max(1e-300));
        }
        if violation < best_violation - 1e-12 {
            // count only meaningful progress (1% relative) against stalling
            if violation < 0.99 * best_violation || best_violation - violation > 1e-3 {
                last_improve = iter;
            }
            best_violation = violation;
            best_vec = v_aff.clone();
        }
        // small relative slack: acceptance is gated by re-certification below
        if violation <= 1e-6 {
            let assignment = system.assignment_from_vec(&v_aff);
            let certified_margin = certify(system, &assignment)?;
            // independent re-certification before declaring feasibility
            let ok = system
                .constraints
                .iter()
                .enumerate()
                .all(|(i, _)| {
                    let val = system.eval_constraint(i, &assignment).unwrap();
                    -val.lambda_max() > lins[i].req * 0.999
                });
            if ok && certified_margin > 0.0 {
                return Ok(FeasibilityResult {
                    status: FeasStatus::Feasible,
                    assignment,
                    certified_margin,
                    iterations: iter,
                    worst_violation: violation,
                });
            }
        }

        // Stall detection: no meaningful progress for a long stretch. Try a
        // subgradient rescue burst; adopt its point if better, give up after
        // repeated failures.
        if iter > 400 && iter - last_improve > 400 {
            let (resc_vec, resc_f) =
                subgradient_rescue(&lins, &bounded, best_vec.clone(), n, 3_000);
            if resc_f < 0.0 {
                let assignment = system.assignment_from_vec(&resc_vec);
                let certified_margin = certify(system, &assignment)?;
                let ok = (0..system.constraints.len()).all(|i| {
                    let val = system.eval_constraint(i, &assignment).unwrap();
                    -val.lambda_max() > lins[i].req * 0.999
                });
                if ok && certified_margin > 0.0 {
                    let violation = normalized_violation(&lins, &bounded, &resc_vec, n);
                    return Ok(FeasibilityResult {
                        status: FeasStatus::Feasible,
                        assignment,
                        certified_margin,
                        iterations: iter,
                        worst_violation: violation,
                    });
                }
            }
            let resc_violation = normalized_violation(&lins, &bounded, &resc_vec, n);
            if resc_violation < best_violation {
                best_violation = resc_violation;
                best_vec = resc_vec.clone();
                // restart the projections from the rescued point
                v_cur = resc_vec;
                project_var_bounds(&mut v_cur, &bounded);
                s_cur = lins
                    .iter()
                    .map(|lin| {
                        let mut s = apply_affine_neg(lin, &v_cur, n);
                        clip_psd(&mut s, lin.dim, lin.aim);
                        s
                    })
                    .collect();
                q_v.fill(0.0);
                for q in q_s.iter_mut() {
                    q.fill(0.0);
                }
            }
            stalls += 1;
            last_improve = iter;
            if stalls >= 3 {
                break;
            }
            continue;
        }

        // --- Dykstra-corrected projection onto the cone product. ---
        let mut v_next = v_aff.clone();
        for k in 0..n {
            v_next[k] += q_v[k];
        }
        let v_pre = v_next.clone();
        project_var_bounds(&mut v_next, &bounded);
        for k in 0..n {
            q_v[k] = v_pre[k] - v_next[k];
        }
        let s_next: Vec<Vec<f64>> = lins
            .par_iter()
            .zip(&s_aff)
            .zip(&q_s)
            .map(|((lin, s), q)| {
                let mut t: Vec<f64> = s.iter().zip(q).map(|(a, b)| a + b).collect();
                clip_psd(&mut t, lin.dim, lin.aim);
                t
            })
            .collect();
        for ((q, s_a), s_n) in q_s.iter_mut().zip(&s_aff).zip(&s_next) {
            for k in 0..q.len() {
                q[k] = s_a[k] + q[k] - s_n[k];
            }
        }
        v_cur = v_next;
        s_cur = s_next;
    }

    // Rescue phase: alternating projections converge linearly and can stall
    // a small distance outside the cone. The pointwise max of
    // lambda_max(F_c) + 1.2 req_c over constraints is convex in the decision
    // vector, so Polyak subgradient steps towards 0 either reach strict
    // feasibility with cushion or plateau above it.
    let (resc_vec, resc_f) = subgradient_rescue(&lins, &bounded, best_vec.clone(), n, 5_000);
    if resc_f < 0.0 {
        let assignment = system.assignment_from_vec(&resc_vec);
        let certified_margin = certify(system, &assignment)?;
        let ok = (0..system.constraints.len()).all(|i| {
            let val = system.eval_constraint(i, &assignment).unwrap();
            -val.lambda_max() > lins[i].req * 0.999
        });
        if ok && certified_margin > 0.0 {
            let violation = lins
                .iter()
                .enumerate()
                .map(|(i, lin)| {
                    let val = system.eval_constraint(i, &assignment).unwrap();
                    (lin.req + val.lambda_max()) / lin.req.max(1e-300)
                })
                .fold(f64::NEG_INFINITY, f64::max);
            return Ok(FeasibilityResult {
                status: FeasStatus::Feasible,
                assignment,
                certified_margin,
                iterations: opts.budget,
                worst_violation: violation,
            });
        }
    }
    // keep whichever point violates least (normalised)
    let resc_violation = normalized_violation(&lins, &bounded, &resc_vec, n);
    if resc_violation < best_violation {
        best_violation = resc_violation;
        best_vec = resc_vec;
    }

    let assignment = system.assignment_from_vec(&best_vec);
    let certified_margin = certify(system, &assignment).unwrap_or(f64::NEG_INFINITY);
    Ok(FeasibilityResult {
        status: FeasStatus::InfeasibleOrUndecided,
        assignment,
        certified_margin,
        iterations: opts.budget,
        worst_violation: best_violation,
    })
}

fn normalized_violation(
    lins: &[Linearized],
    bounded: &[(usize, usize, VarKind, f64)],
    v: &[f64],
    n: usize,
) -> f64 {
    let mut violation = lins
        .par_iter()
        .map(|lin| {
            let s = apply_affine_neg(lin, v, n);
            let lam_min = sym_from_full(lin.dim, &s).lambda_min();
            (lin.req - lam_min) / lin.req.max(1e-300)
        })
        .reduce(|| f64::NEG_INFINITY, f64::max);
    for (off, _, kind, mu) in bounded {
        let bv = match kind {
            VarKind::Sym(d) => unpack_sym(*d, &v[*off..*off + d * (d + 1) / 2]).lambda_min(),
            VarKind::Scalar => v[*off],
            VarKind::Rect(_, _) => unreachable!(),
        };
        violation = violation.max((mu - bv) / mu.max(1e-300));
    }
    violation
}

/// Polyak subgradient descent on f(v) = max_c [lambda_max(F_c(v)) + 1.2 req_c]
/// with variable bounds enforced by projection. Returns the best point and
/// its f value; f < 0 means strictly feasible with cushion.
fn subgradient_rescue(
    lins: &[Linearized],
    bounded: &[(usize, usize, VarKind, f64)],
    v0: Vec<f64>,
    n: usize,
    budget: usize,
) -> (Vec<f64>, f64) {
    let mut v = v0;
    project_var_bounds(&mut v, bounded);
    let eval_worst = |v: &[f64]| -> (f64, usize, Vec<f64>) {
        let per: Vec<(f64, Vec<f64>)> = lins
            .par_iter()
            .map(|lin| {
                let rows = lin.dim * lin.dim;
                let mut s = vec![0.0; rows];
                for r in 0..rows {
                    let row = &lin.a[r * n..(r + 1) * n];
                    let mut acc = lin.b[r];
                    for k in 0..n {
                        acc += row[k] * v[k];
                    }
                    s[r] = acc;
                }
                let m = sym_from_full(lin.dim, &s);
                let eig = sym_eig(&m);
                let top: Vec<f64> =
                    (0..lin.dim).map(|r| eig.eigenvectors[(r, lin.dim - 1)]).collect();
                (eig.eigenvalues[lin.dim - 1] + 1.2 * lin.req, top)
            })
            .collect();
        let (ci, (f, u)) = per
            .into_iter()
            .enumerate()
            .max_by(|a, b| a.1 .0.total_cmp(&b.1 .0))
            .expect("nonempty");
        (f, ci, u)
    };
    let (mut best_f, _, _) = eval_worst(&v);
    let mut best_v = v.clone();
    if best_f < 0.0 {
        return (best_v, best_f);
    }
    for _ in 0..budget {
        let (f, ci, u) = eval_worst(&v);
        if f < best_f {
            best_f = f;
            best_v = v.clone();
        }
        if f < 0.0 {
            return (best_v, best_f);
        }
        let lin = &lins[ci];
        let d = lin.dim;
        // gradient of lambda_max through the affine map: A^T vec(u u^T)
        let mut g = vec![0.0; n];
        for r in 0..d * d {
            let w = u[r / d] * u[r % d];
            if w == 0.0 {
                continue;
            }
            let row = &lin.a[r * n..(r + 1) * n];
            for k in 0..n {
                g[k] += row[k] * w;
            }
        }
        let gn2: f64 = g.iter().map(|x| x * x).sum();
        if gn2 <= 0.0 {
            break;
        }
        let step = f / gn2;
        for k in 0..n {
            v[k] -= step * g[k];
        }
        project_var_bounds(&mut v, bounded);
    }
    (best_v, best_f)
}

fn apply_affine_neg(lin: &Linearized, v: &[f64], n: usize) -> Vec<f64> {
    let rows = lin.dim * lin.dim;
    let mut out = vec![0.0; rows];
    for r in 0..rows {
        let row = &lin.a[r * n..(r + 1) * n];
        let mut acc = lin.b[r];
        for k in 0..n {
            acc += row[k] * v[k];
        }
        out[r] = -acc;
    }
    out
}

fn project_var_bounds(v: &mut [f64], bounded: &[(usize, usize, VarKind, f64)]) {
    for (off, _, kind, mu) in bounded {
        match kind {
            VarKind::Sym(d) => {
                let dof = d * (d + 1) / 2;
                let s = unpack_sym(*d, &v[*off..*off + dof]);
                let eig = sym_eig(&s);
                if eig.eigenvalues[0] >= *mu {
                    continue;
                }
                let clipped = reassemble_clipped(&eig, *mu);
                pack_sym_into(&clipped, &mut v[*off..*off + dof]);
            }
            VarKind::Scalar => v[*off] = v[*off].max(*mu),
            VarKind::Rect(_, _) => unreachable!(),
        }
    }
}

fn clip_psd(s_full: &mut [f64], dim: usize, floor: f64) {
    let s = sym_from_full(dim, s_full);
    let eig = sym_eig(&s);
    if eig.eigenvalues[0] >= floor {
        return;
    }
    let clipped = reassemble_clipped(&eig, floor);
    s_full.copy_from_slice(clipped.as_mat().data());
}

fn reassemble_clipped(eig: &crate::matnum::EigResult, floor: f64) -> SymMat {
    let v = &eig.eigenvectors;
    let lam = Mat::diag(&eig.eigenvalues.iter().map(|l| l.max(floor)).collect::<Vec<_>>());
    SymMat::from_mat(&(&(v * &lam) * &v.transpose())).expect("square")
}

/// Certified margin at an assignment: min over constraints of
/// `-lambda_max(F_c)`, independent of the solve path.
pub fn certify(system: &LmiSystem, assignment: &Assignment) -> Result<f64> {
    let mut margin = f64::INFINITY;
    for c in &system.constraints {
        let val = (c.map)(assignment)?;
        margin = margin.min(-val.lambda_max());
    }
    Ok(margin)
}
