//! Dense real matrix numerics: matrix exponentials, exponential-Gramian
//! integrals, symmetric eigendecomposition, spectral norms and observability
//! rank tests.
//!
//! Everything here operates on small dense matrices (the systems of interest
//! have state dimension `n <= 3` and the largest stacked blocks are `4n`).
//! All operations are pure functions of their inputs.

use crate::error::{Error, Result};
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use std::ops::{Add, Mul, Sub};

/// Dense real matrix, row-major storage.
#[derive(Debug, Clone, PartialEq)]
pub struct Mat {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Mat {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 || data.len() != rows * cols {
            return Err(Error::Dim(format!(
                "{}x{} matrix needs {} entries, got {}",
                rows,
                cols,
                rows * cols,
                data.len()
            )));
        }
        if !data.iter().all(|x| x.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        if rows.is_empty() || rows[0].is_empty() {
            return Err(Error::Dim("empty matrix".into()));
        }
        let cols = rows[0].len();
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::Dim("ragged rows".into()));
        }
        Mat::new(rows.len(), cols, rows.iter().flatten().copied().collect())
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn diag(entries: &[f64]) -> Self {
        let mut m = Self::zeros(entries.len(), entries.len());
        for (i, &v) in entries.iter().enumerate() {
            m[(i, i)] = v;
        }
        m
    }

    /// Column vector from a slice.
    pub fn col_vec(v: &[f64]) -> Self {
        Self { rows: v.len(), cols: 1, data: v.to_vec() }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn transpose(&self) -> Mat {
        let mut t = Mat::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn scale(&self, c: f64) -> Mat {
        Mat { rows: self.rows, cols: self.cols, data: self.data.iter().map(|x| x * c).collect() }
    }

    pub fn norm_fro(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    /// Induced 1-norm (maximum absolute column sum).
    pub fn norm_one(&self) -> f64 {
        (0..self.cols)
            .map(|j| (0..self.rows).map(|i| self[(i, j)].abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn norm_max(&self) -> f64 {
        self.data.iter().fold(0.0, |a, x| a.max(x.abs()))
    }

    /// Solve `self * X = B` with partial-pivot LU.
    pub fn lu_solve(&self, b: &Mat) -> Result<Mat> {
        if !self.is_square() {
            return Err(Error::Dim("lu_solve needs a square matrix".into()));
        }
        if b.rows != self.rows {
            return Err(Error::Dim("lu_solve rhs row mismatch".into()));
        }
        let n = self.rows;
        let mut lu = self.clone();
        let mut x = b.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        for k in 0..n {
            let mut p = k;
            let mut best = lu[(k, k)].abs();
            for i in k + 1..n {
                if lu[(i, k)].abs() > best {
                    best = lu[(i, k)].abs();
                    p = i;
                }
            }
            if best == 0.0 {
                return Err(Error::Singular);
            }
            if p != k {
                for j in 0..n {
                    lu.data.swap(k * n + j, p * n + j);
                }
                for j in 0..x.cols {
                    x.data.swap(k * x.cols + j, p * x.cols + j);
                }
                perm.swap(k, p);
            }
            for i in k + 1..n {
                let f = lu[(i, k)] / lu[(k, k)];
                lu[(i, k)] = f;
                for j in k + 1..n {
                    lu[(i, j)] -= f * lu[(k, j)];
                }
                for j in 0..x.cols {
                    x[(i, j)] -= f * x[(k, j)];
                }
            }
        }
        for j in 0..x.cols {
            for i in (0..n).rev() {
                let mut s = x[(i, j)];
                for k in i + 1..n {
                    s -= lu[(i, k)] * x[(k, j)];
                }
                x[(i, j)] = s / lu[(i, i)];
            }
        }
        Ok(x)
    }

    /// Matrix-vector product.
    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(self.cols, v.len());
        (0..self.rows)
            .map(|i| (0..self.cols).map(|j| self[(i, j)] * v[j]).sum())
            .collect()
    }
}

impl std::ops::Index<(usize, usize)> for Mat {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for Mat {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

impl Mul for &Mat {
    type Output = Mat;
    fn mul(self, rhs: &Mat) -> Mat {
        assert_eq!(self.cols, rhs.rows, "matmul dimension mismatch");
        let mut out = Mat::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                for j in 0..rhs.cols {
                    out[(i, j)] += a * rhs[(k, j)];
                }
            }
        }
        out
    }
}

impl Add for &Mat {
    type Output = Mat;
    fn add(self, rhs: &Mat) -> Mat {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        Mat {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect(),
        }
    }
}

impl Sub for &Mat {
    type Output = Mat;
    fn sub(self, rhs: &Mat) -> Mat {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        Mat {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect(),
        }
    }
}

// Matrices serialise as row-major nested arrays.
impl Serialize for Mat {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let rows: Vec<&[f64]> = self.data.chunks(self.cols).collect();
        rows.serialize(s)
    }
}

impl<'de> Deserialize<'de> for Mat {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let rows: Vec<Vec<f64>> = Vec::deserialize(d)?;
        Mat::from_rows(&rows).map_err(D::Error::custom)
    }
}

/// Symmetric real matrix. The constructor symmetrises via `(S + S^T)/2`, so
/// symmetry holds exactly by construction.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMat {
    mat: Mat,
}

impl SymMat {
    /// Symmetrise a square matrix.
    pub fn from_mat(m: &Mat) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::Dim("SymMat needs a square matrix".into()));
        }
        let n = m.rows();
        let mut s = Mat::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                s[(i, j)] = 0.5 * (m[(i, j)] + m[(j, i)]);
            }
        }
        Ok(Self { mat: s })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        Self::from_mat(&Mat::from_rows(rows)?)
    }

    pub fn zeros(n: usize) -> Self {
        Self { mat: Mat::zeros(n, n) }
    }

    pub fn identity(n: usize) -> Self {
        Self { mat: Mat::identity(n) }
    }

    pub fn scaled_identity(n: usize, c: f64) -> Self {
        Self { mat: Mat::identity(n).scale(c) }
    }

    pub fn dim(&self) -> usize {
        self.mat.rows()
    }

    pub fn as_mat(&self) -> &Mat {
        &self.mat
    }

    pub fn scale(&self, c: f64) -> SymMat {
        Self { mat: self.mat.scale(c) }
    }

    pub fn add(&self, rhs: &SymMat) -> SymMat {
        Self { mat: &self.mat + &rhs.mat }
    }

    pub fn sub(&self, rhs: &SymMat) -> SymMat {
        Self { mat: &self.mat - &rhs.mat }
    }

    pub fn norm_fro(&self) -> f64 {
        self.mat.norm_fro()
    }

    /// Quadratic form `v^T S v`.
    pub fn quad_form(&self, v: &[f64]) -> f64 {
        assert_eq!(v.len(), self.dim());
        let mut acc = 0.0;
        for i in 0..self.dim() {
            for j in 0..self.dim() {
                acc += v[i] * self.mat[(i, j)] * v[j];
            }
        }
        acc
    }

    pub fn lambda_max(&self) -> f64 {
        *sym_eig(self).eigenvalues.last().unwrap()
    }

    pub fn lambda_min(&self) -> f64 {
        sym_eig(self).eigenvalues[0]
    }

    /// Lower Cholesky factor; `None` when not positive definite.
    pub fn cholesky(&self) -> Option<Mat> {
        let n = self.dim();
        let mut l = Mat::zeros(n, n);
        for i in 0..n {
            for j in 0..=i {
                let mut s = self.mat[(i, j)];
                for k in 0..j {
                    s -= l[(i, k)] * l[(j, k)];
                }
                if i == j {
                    if s <= 0.0 {
                        return None;
                    }
                    l[(i, j)] = s.sqrt();
                } else {
                    l[(i, j)] = s / l[(j, j)];
                }
            }
        }
        Some(l)
    }

    /// Solve `S X = B` for symmetric positive-definite `S`.
    pub fn spd_solve(&self, b: &Mat) -> Result<Mat> {
        let l = self.cholesky().ok_or(Error::NotPositiveDefinite)?;
        let n = self.dim();
        if b.rows() != n {
            return Err(Error::Dim("spd_solve rhs row mismatch".into()));
        }
        let mut x = b.clone();
        // forward then backward substitution
        for j in 0..x.cols() {
            for i in 0..n {
                let mut s = x[(i, j)];
                for k in 0..i {
                    s -= l[(i, k)] * x[(k, j)];
                }
                x[(i, j)] = s / l[(i, i)];
            }
            for i in (0..n).rev() {
                let mut s = x[(i, j)];
                for k in i + 1..n {
                    s -= l[(k, i)] * x[(k, j)];
                }
                x[(i, j)] = s / l[(i, i)];
            }
        }
        Ok(x)
    }
}

impl Serialize for SymMat {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.mat.serialize(s)
    }
}

impl<'de> Deserialize<'de> for SymMat {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let m = Mat::deserialize(d)?;
        SymMat::from_mat(&m).map_err(D::Error::custom)
    }
}

/// Full spectrum of a symmetric matrix: eigenvalues ascending with an
/// orthonormal set of eigenvectors (columns of `eigenvectors`).
#[derive(Debug, Clone)]
pub struct EigResult {
    pub dim: usize,
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: Mat,
}

const JACOBI_TOL: f64 = 1e-12;
const JACOBI_MAX_SWEEPS: usize = 64;

/// Symmetric eigendecomposition by cyclic Jacobi rotations.
pub fn sym_eig(s: &SymMat) -> EigResult {
    let n = s.dim();
    let mut a = s.as_mat().clone();
    let mut v = Mat::identity(n);
    let scale = a.norm_fro().max(f64::MIN_POSITIVE);
    for _ in 0..JACOBI_MAX_SWEEPS {
        let mut off = 0.0;
        for i in 0..n {
            for j in i + 1..n {
                off += a[(i, j)] * a[(i, j)];
            }
        }
        if (2.0 * off).sqrt() <= JACOBI_TOL * scale {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[(p, q)];
                if apq.abs() <= JACOBI_TOL * scale * 1e-4 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = if theta >= 0.0 {
                    1.0 / (theta + (1.0 + theta * theta).sqrt())
                } else {
                    -1.0 / (-theta + (1.0 + theta * theta).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let sn = t * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - sn * akq;
                    a[(k, q)] = sn * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - sn * aqk;
                    a[(q, k)] = sn * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - sn * vkq;
                    v[(k, q)] = sn * vkp + c * vkq;
                }
            }
        }
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&i, &j| a[(i, i)].partial_cmp(&a[(j, j)]).unwrap());
    let eigenvalues: Vec<f64> = idx.iter().map(|&i| a[(i, i)]).collect();
    let mut vectors = Mat::zeros(n, n);
    for (col, &i) in idx.iter().enumerate() {
        for k in 0..n {
            vectors[(k, col)] = v[(k, i)];
        }
    }
    EigResult { dim: n, eigenvalues, eigenvectors: vectors }
}

/// Matrix exponential by scaling-and-squaring with a [6/6] Pade approximant.
/// The squaring count comes from the 1-norm of `A`.
pub fn expm(a: &Mat) -> Result<Mat> {
    if !a.is_square() {
        return Err(Error::Dim("expm needs a square matrix".into()));
    }
    let n = a.rows();
    let norm = a.norm_one();
    // scale so that ||A/2^s||_1 <= 0.25
    let s = if norm > 0.25 { (norm / 0.25).log2().ceil() as u32 } else { 0 };
    let a_scaled = a.scale(1.0 / f64::powi(2.0, s as i32));

    // [6/6] Pade coefficients: c_k = (12-k)! 6! / (12! k! (6-k)!)
    let c = [
        1.0,
        0.5,
        5.0 / 44.0,
        1.0 / 66.0,
        1.0 / 792.0,
        1.0 / 15840.0,
        1.0 / 665280.0,
    ];
    let a2 = &a_scaled * &a_scaled;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;
    // even part V = c0 I + c2 A^2 + c4 A^4 + c6 A^6, odd part U = A (c1 I + c3 A^2 + c5 A^4)
    let ident = Mat::identity(n);
    let v = &(&ident.scale(c[0]) + &a2.scale(c[2])) + &(&a4.scale(c[4]) + &a6.scale(c[6]));
    let u_inner = &(&ident.scale(c[1]) + &a2.scale(c[3])) + &a4.scale(c[5]);
    let u = &a_scaled * &u_inner;
    // r = (V - U)^{-1} (V + U)
    let mut r = (&v - &u).lu_solve(&(&v + &u))?;
    for _ in 0..s {
        r = &r * &r;
    }
    Ok(r)
}

/// Exponential Gramian integral `\int_0^T e^{A^T tau} M e^{A tau} dtau`,
/// computed from a single block matrix exponential: exponentiate
/// `[[-A^T, M], [0, A]]` over `T` and recover the integral as
/// `e^{A T}^T * (top-right block)`.
pub fn gram_integral(a: &Mat, m: &SymMat, t: f64) -> Result<SymMat> {
    if !a.is_square() {
        return Err(Error::Dim("gram_integral needs a square matrix".into()));
    }
    if a.rows() != m.dim() {
        return Err(Error::Dim("gram_integral A/M dimension mismatch".into()));
    }
    if !(t > 0.0) {
        return Err(Error::Invalid("gram_integral needs T > 0".into()));
    }
    let n = a.rows();
    let at = a.transpose();
    let mut block = Mat::zeros(2 * n, 2 * n);
    for i in 0..n {
        for j in 0..n {
            block[(i, j)] = -at[(i, j)];
            block[(i, n + j)] = m.as_mat()[(i, j)];
            block[(n + i, n + j)] = a[(i, j)];
        }
    }
    let e = expm(&block.scale(t))?;
    let mut top_right = Mat::zeros(n, n);
    let mut f3 = Mat::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            top_right[(i, j)] = e[(i, n + j)];
            f3[(i, j)] = e[(n + i, n + j)];
        }
    }
    SymMat::from_mat(&(&f3.transpose() * &top_right))
}

/// Induced 2-norm, as the square root of the largest eigenvalue of `A^T A`.
pub fn spectral_norm(a: &Mat) -> f64 {
    let ata = SymMat::from_mat(&(&a.transpose() * a)).expect("A^T A is square");
    sym_eig(&ata).eigenvalues.last().unwrap().max(0.0).sqrt()
}

/// Strict negative-definiteness test with margin: true iff
/// `lambda_max(S) < -margin`. The worst (largest) eigenvalue is always
/// returned for reporting.
pub fn is_negative_definite(s: &SymMat, margin: f64) -> (bool, f64) {
    let lmax = s.lambda_max();
    (lmax < -margin, lmax)
}

/// Numerical rank of the observability matrix `col{D, DA, ..., DA^{n-1}}`.
/// The pair `(A, D)` is observable iff the rank equals `n`.
pub fn observability_rank(a: &Mat, d: &Mat) -> Result<usize> {
    if !a.is_square() {
        return Err(Error::Dim("observability_rank needs square A".into()));
    }
    if d.cols() != a.rows() {
        return Err(Error::Dim("observability_rank D column mismatch".into()));
    }
    let n = a.rows();
    let m = d.rows();
    let mut stacked = Mat::zeros(m * n, n);
    let mut block = d.clone();
    for k in 0..n {
        for i in 0..m {
            for j in 0..n {
                stacked[(k * m + i, j)] = block[(i, j)];
            }
        }
        block = &block * a;
    }
    // singular values from the spectrum of O^T O
    let gram = SymMat::from_mat(&(&stacked.transpose() * &stacked))?;
    let eig = sym_eig(&gram);
    let sigma: Vec<f64> = eig.eigenvalues.iter().map(|l| l.max(0.0).sqrt()).collect();
    let sigma_max = sigma.last().copied().unwrap_or(0.0);
    let tol = (m * n).max(n) as f64 * f64::EPSILON * sigma_max;
    Ok(sigma.iter().filter(|&&s| s > tol).count())
}

/// Hurwitz test for matrices up to 3x3 via the Routh-Hurwitz criterion on the
/// characteristic polynomial. Exact in the coefficients, no eigensolver.
pub fn is_hurwitz(a: &Mat) -> Result<bool> {
    if !a.is_square() {
        return Err(Error::Dim("is_hurwitz needs a square matrix".into()));
    }
    match a.rows() {
        1 => Ok(a[(0, 0)] < 0.0),
        2 => {
            let tr = a[(0, 0)] + a[(1, 1)];
            let det = a[(0, 0)] * a[(1, 1)] - a[(0, 1)] * a[(1, 0)];
            Ok(tr < 0.0 && det > 0.0)
        }
        3 => {
            // lambda^3 + a2 lambda^2 + a1 lambda + a0
            let tr = a[(0, 0)] + a[(1, 1)] + a[(2, 2)];
            let m01 = a[(0, 0)] * a[(1, 1)] - a[(0, 1)] * a[(1, 0)];
            let m02 = a[(0, 0)] * a[(2, 2)] - a[(0, 2)] * a[(2, 0)];
            let m12 = a[(1, 1)] * a[(2, 2)] - a[(1, 2)] * a[(2, 1)];
            let det = a[(0, 0)] * (a[(1, 1)] * a[(2, 2)] - a[(1, 2)] * a[(2, 1)])
                - a[(0, 1)] * (a[(1, 0)] * a[(2, 2)] - a[(1, 2)] * a[(2, 0)])
                + a[(0, 2)] * (a[(1, 0)] * a[(2, 1)] - a[(1, 1)] * a[(2, 0)]);
            let a2 = -tr;
            let a1 = m01 + m02 + m12;
            let a0 = -det;
            Ok(a2 > 0.0 && a0 > 0.0 && a2 * a1 > a0)
        }
        n => Err(Error::Invalid(format!("is_hurwitz supports n <= 3, got {n}"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn assert_mat_close(a: &Mat, b: &Mat, tol: f64) {
        assert_eq!((a.rows(), a.cols()), (b.rows(), b.cols()));
        let diff = (a - b).norm_max();
        assert!(diff <= tol, "matrices differ by {diff} > {tol}\n{a:?}\n{b:?}");
    }

    /// Independent expm oracle: fixed-step RK4 on X' = A X from X(0) = I.
    fn rk4_expm_oracle(a: &Mat, steps: usize) -> Mat {
        let n = a.rows();
        let h = 1.0 / steps as f64;
        let mut x = Mat::identity(n);
        for _ in 0..steps {
            let k1 = a * &x;
            let k2 = a * &(&x + &k1.scale(h / 2.0));
            let k3 = a * &(&x + &k2.scale(h / 2.0));
            let k4 = a * &(&x + &k3.scale(h));
            x = &x + &(&(&k1 + &k4) + &(&k2 + &k3).scale(2.0)).scale(h / 6.0);
        }
        x
    }

    #[test]
    fn expm_zero_is_identity() {
        let e = expm(&Mat::zeros(2, 2)).unwrap();
        assert_mat_close(&e, &Mat::identity(2), 1e-15);
    }

    #[test]
    fn expm_diagonal() {
        let e = expm(&Mat::diag(&[1.0, -2.0])).unwrap();
        assert!((e[(0, 0)] - 1f64.exp()).abs() < 1e-12);
        assert!((e[(1, 1)] - (-2f64).exp()).abs() < 1e-12);
        assert!(e[(0, 1)].abs() < 1e-15 && e[(1, 0)].abs() < 1e-15);
    }

    #[test]
    fn expm_nilpotent_truncates() {
        // series truncates after the linear term
        let a = Mat::from_rows(&[vec![0.0, 1.0], vec![0.0, 0.0]]).unwrap();
        let e = expm(&a).unwrap();
        let expect = Mat::from_rows(&[vec![1.0, 1.0], vec![0.0, 1.0]]).unwrap();
        assert_mat_close(&e, &expect, 1e-14);
    }

    #[test]
    fn expm_matches_rk4_oracle() {
        let a = Mat::from_rows(&[vec![-2.0, 0.3, 0.1], vec![-2.0, 1.0, 0.5], vec![0.2, -0.4, -1.0]])
            .unwrap();
        let e = expm(&a).unwrap();
        let oracle = rk4_expm_oracle(&a, 20_000);
        let bound = 1e-9 * (1.0 + spectral_norm(&e));
        assert!((&e - &oracle).norm_fro() <= bound);
    }

    #[test]
    fn expm_rejects_non_square() {
        assert!(expm(&Mat::zeros(2, 3)).is_err());
    }

    #[test]
    fn gram_integral_constant_integrand() {
        let g = gram_integral(&Mat::zeros(2, 2), &SymMat::identity(2), 2.0).unwrap();
        assert_mat_close(g.as_mat(), &Mat::identity(2).scale(2.0), 1e-12);
    }

    #[test]
    fn gram_integral_scalar_closed_form() {
        // \int_0^1 e^{-2 tau} dtau = (1 - e^{-2}) / 2
        let g = gram_integral(
            &Mat::new(1, 1, vec![-1.0]).unwrap(),
            &SymMat::from_rows(&[vec![1.0]]).unwrap(),
            1.0,
        )
        .unwrap();
        let expect = (1.0 - (-2.0f64).exp()) / 2.0;
        assert!((g.as_mat()[(0, 0)] - expect).abs() < 1e-12);
        assert!((expect - 0.432332).abs() < 1e-6);
    }

    #[test]
    fn gram_integral_rejects_bad_inputs() {
        assert!(gram_integral(&Mat::zeros(2, 2), &SymMat::identity(3), 1.0).is_err());
        assert!(gram_integral(&Mat::zeros(2, 2), &SymMat::identity(2), 0.0).is_err());
        assert!(gram_integral(&Mat::zeros(2, 2), &SymMat::identity(2), -1.0).is_err());
    }

    #[test]
    fn sym_eig_identity() {
        let eig = sym_eig(&SymMat::identity(3));
        for l in &eig.eigenvalues {
            assert!((l - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn sym_eig_diagonal_sorted_ascending() {
        let eig = sym_eig(&SymMat::from_rows(&[vec![-2.0, 0.0], vec![0.0, 5.0]]).unwrap());
        assert!((eig.eigenvalues[0] + 2.0).abs() < 1e-12);
        assert!((eig.eigenvalues[1] - 5.0).abs() < 1e-12);
    }

    #[test]
    fn sym_eig_offdiagonal_pair() {
        // characteristic polynomial lambda^2 - 1
        let eig = sym_eig(&SymMat::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap());
        assert!((eig.eigenvalues[0] + 1.0).abs() < 1e-12);
        assert!((eig.eigenvalues[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn sym_eig_residual_and_orthonormality() {
        let s = SymMat::from_rows(&[
            vec![2.0, -0.5, 0.3],
            vec![-0.5, 1.0, 0.7],
            vec![0.3, 0.7, -3.0],
        ])
        .unwrap();
        let eig = sym_eig(&s);
        let v = &eig.eigenvectors;
        let vtv = &v.transpose() * v;
        assert_mat_close(&vtv, &Mat::identity(3), 1e-10);
        let norm = spectral_norm(s.as_mat());
        for k in 0..3 {
            let col: Vec<f64> = (0..3).map(|i| v[(i, k)]).collect();
            let sv = s.as_mat().mul_vec(&col);
            let resid: f64 = sv
                .iter()
                .zip(&col)
                .map(|(a, b)| (a - eig.eigenvalues[k] * b).powi(2))
                .sum::<f64>()
                .sqrt();
            assert!(resid <= 1e-10 * norm.max(1.0));
        }
    }

    #[test]
    fn spectral_norm_cases() {
        assert!((spectral_norm(&Mat::identity(4)) - 1.0).abs() < 1e-12);
        assert!((spectral_norm(&Mat::diag(&[3.0, -4.0])) - 4.0).abs() < 1e-12);
        let a = Mat::from_rows(&[vec![0.0, 2.0], vec![0.0, 0.0]]).unwrap();
        assert!((spectral_norm(&a) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn spectral_norm_matches_power_iteration() {
        let a = Mat::from_rows(&[vec![1.2, -0.7, 0.4], vec![0.0, 2.5, -1.1], vec![0.3, 0.3, 0.9]])
            .unwrap();
        // power-iteration oracle on A^T A
        let ata = &a.transpose() * &a;
        let mut v = vec![1.0, 1.0, 1.0];
        let mut lam = 0.0;
        for _ in 0..20_000 {
            let w = ata.mul_vec(&v);
            lam = w.iter().map(|x| x * x).sum::<f64>().sqrt();
            v = w.iter().map(|x| x / lam).collect();
        }
        let oracle = lam.sqrt();
        assert!((spectral_norm(&a) - oracle).abs() <= 1e-10 * oracle);
    }

    #[test]
    fn negative_definite_margins() {
        let neg_i = SymMat::identity(2).scale(-1.0);
        let (ok, lmax) = is_negative_definite(&neg_i, 0.5);
        assert!(ok && (lmax + 1.0).abs() < 1e-12);
        let (ok, lmax) = is_negative_definite(
            &SymMat::from_rows(&[vec![-1.0, 0.0], vec![0.0, 0.1]]).unwrap(),
            0.0,
        );
        assert!(!ok && (lmax - 0.1).abs() < 1e-12);
        // boundary is strict
        let (ok, _) = is_negative_definite(&neg_i, 1.0);
        assert!(!ok);
    }

    #[test]
    fn observability_rank_cases() {
        let full = observability_rank(&Mat::identity(2), &Mat::identity(2)).unwrap();
        assert_eq!(full, 2);
        // observes x2 only: DA = [0, 0]
        let a = Mat::from_rows(&[vec![0.0, 1.0], vec![0.0, 0.0]]).unwrap();
        let d = Mat::from_rows(&[vec![0.0, 1.0]]).unwrap();
        assert_eq!(observability_rank(&a, &d).unwrap(), 1);
    }

    #[test]
    fn hurwitz_routh() {
        assert!(is_hurwitz(&Mat::from_rows(&[vec![-0.5, 1.15], vec![-1.15, -1.5]]).unwrap())
            .unwrap());
        assert!(!is_hurwitz(&Mat::from_rows(&[vec![-2.0, 0.3], vec![-2.0, 1.0]]).unwrap())
            .unwrap());
        assert!(is_hurwitz(&Mat::diag(&[-1.0, -2.0, -0.1])).unwrap());
        assert!(!is_hurwitz(&Mat::diag(&[-1.0, -2.0, 0.1])).unwrap());
    }

    #[test]
    fn lu_solve_roundtrip() {
        let a = Mat::from_rows(&[vec![2.0, 1.0], vec![1.0, 3.0]]).unwrap();
        let b = Mat::from_rows(&[vec![3.0], vec![5.0]]).unwrap();
        let x = a.lu_solve(&b).unwrap();
        assert_mat_close(&(&a * &x), &b, 1e-12);
    }

    #[test]
    fn spd_solve_matches_lu() {
        let s = SymMat::from_rows(&[vec![4.0, 1.0], vec![1.0, 3.0]]).unwrap();
        let b = Mat::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let x = s.spd_solve(&b).unwrap();
        let y = s.as_mat().lu_solve(&b).unwrap();
        assert_mat_close(&x, &y, 1e-12);
    }
}
