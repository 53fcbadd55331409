//! Small dense linear algebra and normal-distribution helpers.
//!
//! Everything here targets the dimensions that show up in the learners
//! (d up to a few dozen): matrices are stored densely in row-major order and
//! refactored from scratch whenever a solve is needed.

use std::fmt;
use std::ops::{Deref, Index, IndexMut};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const SYMMETRY_TOL: f64 = 1e-12;

/// Dense real vector of fixed length.
#[derive(Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Vector(Vec<f64>);

impl Vector {
    pub fn zeros(dim: usize) -> Self {
        Vector(vec![0.0; dim])
    }

    pub fn from_vec(entries: Vec<f64>) -> Self {
        Vector(entries)
    }

    pub fn basis(dim: usize, axis: usize, scale: f64) -> Self {
        let mut v = Self::zeros(dim);
        v.0[axis] = scale;
        v
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|x| x.is_finite())
    }

    pub fn dot(&self, other: &[f64]) -> f64 {
        dot(&self.0, other)
    }

    pub fn norm_sq(&self) -> f64 {
        dot(&self.0, &self.0)
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    /// `self + alpha * other`
    pub fn add_scaled(&self, alpha: f64, other: &[f64]) -> Vector {
        debug_assert_eq!(self.dim(), other.len());
        Vector(self.0.iter().zip(other).map(|(a, b)| a + alpha * b).collect())
    }

    pub fn sub(&self, other: &[f64]) -> Vector {
        self.add_scaled(-1.0, other)
    }

    pub fn scaled(&self, alpha: f64) -> Vector {
        Vector(self.0.iter().map(|a| alpha * a).collect())
    }

    pub fn distance_sq(&self, other: &[f64]) -> f64 {
        self.0.iter().zip(other).map(|(a, b)| (a - b) * (a - b)).sum()
    }

    pub(crate) fn check_dim(&self, expected: usize) -> Result<()> {
        if self.dim() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                found: self.dim(),
            });
        }
        Ok(())
    }
}

impl fmt::Debug for Vector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.0.iter()).finish()
    }
}

impl Deref for Vector {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl Index<usize> for Vector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl IndexMut<usize> for Vector {
    fn index_mut(&mut self, i: usize) -> &mut f64 {
        &mut self.0[i]
    }
}

impl From<Vec<f64>> for Vector {
    fn from(v: Vec<f64>) -> Self {
        Vector(v)
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Square symmetric matrix, row-major. The learners keep their information
/// matrices in this type; positive definiteness is checked lazily by
/// [`Cholesky::factor`].
#[derive(Clone, PartialEq, Serialize, Deserialize)]
pub struct SymMatrix {
    dim: usize,
    data: Vec<f64>,
}

impl SymMatrix {
    pub fn zeros(dim: usize) -> Self {
        SymMatrix {
            dim,
            data: vec![0.0; dim * dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m.data[i * dim + i] = 1.0;
        }
        m
    }

    pub fn diagonal(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m.data[i * diag.len() + i] = d;
        }
        m
    }

    /// Builds from rows. Rejects ragged input and asymmetry beyond `1e-12`
    /// relative to the largest entry.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.len();
        let mut data = Vec::with_capacity(dim * dim);
        for row in rows {
            if row.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: row.len(),
                });
            }
            data.extend_from_slice(row);
        }
        let m = SymMatrix { dim, data };
        m.check_symmetric()?;
        Ok(m)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.dim + j]
    }

    #[inline]
    pub fn set_sym(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.dim + j] = v;
        self.data[j * self.dim + i] = v;
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.data.chunks(self.dim.max(1)).map(|r| r.to_vec()).collect()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    /// `self + alpha * other`
    pub fn add_scaled(&self, alpha: f64, other: &SymMatrix) -> Result<SymMatrix> {
        if other.dim != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: other.dim,
            });
        }
        Ok(SymMatrix {
            dim: self.dim,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a + alpha * b)
                .collect(),
        })
    }

    pub fn add_diagonal(&self, shift: f64) -> SymMatrix {
        let mut out = self.clone();
        for i in 0..self.dim {
            out.data[i * self.dim + i] += shift;
        }
        out
    }

    /// Rank-one update `self += alpha * x xᵀ`, writing both triangles with the
    /// same product so the result stays exactly symmetric.
    pub fn add_outer(&mut self, alpha: f64, x: &[f64]) {
        debug_assert_eq!(x.len(), self.dim);
        for i in 0..self.dim {
            for j in 0..=i {
                let v = self.get(i, j) + alpha * (x[i] * x[j]);
                self.set_sym(i, j, v);
            }
        }
    }

    pub fn mul_vec(&self, v: &[f64]) -> Vector {
        debug_assert_eq!(v.len(), self.dim);
        Vector(
            self.data
                .chunks(self.dim.max(1))
                .map(|row| dot(row, v))
                .collect(),
        )
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
    }

    pub fn check_symmetric(&self) -> Result<()> {
        if !self.is_finite() {
            return Err(Error::NonFinite("matrix"));
        }
        let scale = self.max_abs();
        let mut worst = 0.0_f64;
        for i in 0..self.dim {
            for j in 0..i {
                worst = worst.max((self.get(i, j) - self.get(j, i)).abs());
            }
        }
        if worst > SYMMETRY_TOL * scale {
            return Err(Error::NotSymmetric(worst));
        }
        Ok(())
    }
}

impl fmt::Debug for SymMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.rows()).finish()
    }
}

/// Lower-triangular Cholesky factor `A = L Lᵀ`.
#[derive(Debug, Clone)]
pub struct Cholesky {
    dim: usize,
    lower: Vec<f64>,
}

impl Cholesky {
    pub fn factor(a: &SymMatrix) -> Result<Self> {
        if !a.is_finite() {
            return Err(Error::NonFinite("matrix"));
        }
        let n = a.dim;
        let mut l = vec![0.0; n * n];
        for j in 0..n {
            let mut diag = a.get(j, j);
            for k in 0..j {
                diag -= l[j * n + k] * l[j * n + k];
            }
            if !(diag > 0.0) || !diag.is_finite() {
                return Err(Error::Degenerate(format!(
                    "non-positive pivot {diag:e} at column {j} during Cholesky"
                )));
            }
            let ljj = diag.sqrt();
            l[j * n + j] = ljj;
            for i in (j + 1)..n {
                let mut s = a.get(i, j);
                for k in 0..j {
                    s -= l[i * n + k] * l[j * n + k];
                }
                l[i * n + j] = s / ljj;
            }
        }
        Ok(Cholesky { dim: n, lower: l })
    }

    /// `L z`
    pub fn mul_lower(&self, z: &[f64]) -> Vector {
        let n = self.dim;
        Vector(
            (0..n)
                .map(|i| (0..=i).map(|k| self.lower[i * n + k] * z[k]).sum())
                .collect(),
        )
    }

    pub fn solve(&self, b: &[f64]) -> Result<Vector> {
        let n = self.dim;
        if b.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: b.len(),
            });
        }
        if b.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("right-hand side"));
        }
        let l = &self.lower;
        let mut y = b.to_vec();
        for i in 0..n {
            let mut s = y[i];
            for k in 0..i {
                s -= l[i * n + k] * y[k];
            }
            y[i] = s / l[i * n + i];
        }
        for i in (0..n).rev() {
            let mut s = y[i];
            for k in (i + 1)..n {
                s -= l[k * n + i] * y[k];
            }
            y[i] = s / l[i * n + i];
        }
        Ok(Vector(y))
    }
}

/// Solves `A x = b` for symmetric positive definite `A`.
pub fn solve_spd(a: &SymMatrix, b: &[f64]) -> Result<Vector> {
    if b.len() != a.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            found: b.len(),
        });
    }
    Cholesky::factor(a)?.solve(b)
}

/// All eigenvalues of a symmetric matrix, ascending, by cyclic Jacobi
/// rotations.
pub fn symmetric_eigenvalues(a: &SymMatrix) -> Result<Vec<f64>> {
    a.check_symmetric()?;
    let n = a.dim;
    let mut m = a.data.clone();
    let fro_sq: f64 = m.iter().map(|x| x * x).sum();
    if fro_sq == 0.0 {
        return Ok(vec![0.0; n]);
    }
    for _sweep in 0..100 {
        let mut off = 0.0;
        for p in 0..n {
            for q in (p + 1)..n {
                off += m[p * n + q] * m[p * n + q];
            }
        }
        if off <= 1e-34 * fro_sq {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let app = m[p * n + p];
                let aqq = m[q * n + q];
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                m[p * n + p] = app - t * apq;
                m[q * n + q] = aqq + t * apq;
                m[p * n + q] = 0.0;
                m[q * n + p] = 0.0;
                for k in 0..n {
                    if k == p || k == q {
                        continue;
                    }
                    let akp = m[k * n + p];
                    let akq = m[k * n + q];
                    let new_kp = c * akp - s * akq;
                    let new_kq = s * akp + c * akq;
                    m[k * n + p] = new_kp;
                    m[p * n + k] = new_kp;
                    m[k * n + q] = new_kq;
                    m[q * n + k] = new_kq;
                }
            }
        }
    }
    let mut eig: Vec<f64> = (0..n).map(|i| m[i * n + i]).collect();
    eig.sort_by(|a, b| a.total_cmp(b));
    Ok(eig)
}

pub fn min_eigenvalue(a: &SymMatrix) -> Result<f64> {
    if a.dim() == 0 {
        return Err(Error::Empty("matrix"));
    }
    Ok(symmetric_eigenvalues(a)?[0])
}

/// `vᵀ Q v`.
pub fn q_norm_sq(v: &[f64], q: &SymMatrix) -> Result<f64> {
    if v.len() != q.dim() {
        return Err(Error::DimensionMismatch {
            expected: q.dim(),
            found: v.len(),
        });
    }
    let n = q.dim();
    let mut acc = CompensatedSum::default();
    for i in 0..n {
        // diagonal once, off-diagonal pairs twice
        acc.add(q.get(i, i) * v[i] * v[i]);
        for j in 0..i {
            acc.add(2.0 * q.get(i, j) * v[i] * v[j]);
        }
    }
    Ok(acc.value().max(0.0))
}

const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

pub fn normal_pdf(x: f64) -> f64 {
    INV_SQRT_2PI * (-0.5 * x * x).exp()
}

pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

/// Standard normal `(pdf, cdf)` at `x`.
pub fn std_normal(x: f64) -> (f64, f64) {
    (normal_pdf(x), normal_cdf(x))
}

// Below this the lower tail is evaluated through its asymptotic series
// instead of erfc, which underflows near -38.
const LOWER_TAIL_SWITCH: f64 = -35.0;

/// Inverse Mills ratio `f(x) / F(x)`, finite for every finite `x`.
pub fn mills_ratio(x: f64) -> f64 {
    if x < LOWER_TAIL_SWITCH {
        // F(x) ~ f(x)/|x| * (1 - 1/x² + 3/x⁴ - 15/x⁶)
        let z = 1.0 / (x * x);
        -x / (1.0 - z + 3.0 * z * z - 15.0 * z * z * z)
    } else {
        normal_pdf(x) / normal_cdf(x)
    }
}

/// `log F(x)`.
pub fn log_normal_cdf(x: f64) -> f64 {
    if x < LOWER_TAIL_SWITCH {
        log_normal_pdf(x) - mills_ratio(x).ln()
    } else {
        normal_cdf(x).ln()
    }
}

pub fn log_normal_pdf(x: f64) -> f64 {
    -0.5 * x * x - 0.5 * (2.0 * std::f64::consts::PI).ln()
}

/// Neumaier-compensated running sum.
#[derive(Debug, Default, Clone, Copy)]
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Compensated accumulator for sums of vectors.
#[derive(Debug, Clone)]
pub struct VectorSum {
    parts: Vec<CompensatedSum>,
}

impl VectorSum {
    pub fn new(dim: usize) -> Self {
        VectorSum {
            parts: vec![CompensatedSum::default(); dim],
        }
    }

    pub fn add_scaled(&mut self, alpha: f64, x: &[f64]) {
        for (p, xi) in self.parts.iter_mut().zip(x) {
            p.add(alpha * xi);
        }
    }

    pub fn value(&self) -> Vector {
        Vector(self.parts.iter().map(CompensatedSum::value).collect())
    }
}

/// Compensated accumulator for `Σ x xᵀ` (lower triangle tracked).
#[derive(Debug, Clone)]
pub struct GramSum {
    dim: usize,
    parts: Vec<CompensatedSum>,
}

impl GramSum {
    pub fn new(dim: usize) -> Self {
        GramSum {
            dim,
            parts: vec![CompensatedSum::default(); dim * (dim + 1) / 2],
        }
    }

    pub fn add(&mut self, x: &[f64]) {
        let mut k = 0;
        for i in 0..self.dim {
            for j in 0..=i {
                self.parts[k].add(x[i] * x[j]);
                k += 1;
            }
        }
    }

    pub fn value(&self) -> SymMatrix {
        let mut m = SymMatrix::zeros(self.dim);
        let mut k = 0;
        for i in 0..self.dim {
            for j in 0..=i {
                m.set_sym(i, j, self.parts[k].value());
                k += 1;
            }
        }
        m
    }
}
