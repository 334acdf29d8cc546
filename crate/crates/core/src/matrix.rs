//! Dense complex linear algebra.
//!
//! Everything downstream works with small (2n×2n) blocks or with the
//! compressed resolvent matrix, which stays below a few hundred rows, so a
//! plain row-major store with LU and cyclic Jacobi is all that is needed.

use std::fmt;
use std::ops::{Add, AddAssign, Index, IndexMut, Mul, Neg, Sub};

use num_complex::Complex64;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

pub type C64 = Complex64;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

/// Default relative pivot threshold: pivots below `PIVOT_FACTOR·eps·‖A‖` are singular.
pub const PIVOT_FACTOR: f64 = 1e3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("matrix is not square ({rows}×{cols})")]
    NotSquare { rows: usize, cols: usize },
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("matrix is not Hermitian (‖A − A*‖ = {residual:.3e}, ‖A‖ = {norm:.3e})")]
    NotHermitian { residual: f64, norm: f64 },
    #[error("matrix is not skew-Hermitian (‖S + S*‖ = {residual:.3e}, ‖S‖ = {norm:.3e})")]
    NotSkewHermitian { residual: f64, norm: f64 },
    #[error("singular matrix: pivot {index} has magnitude {magnitude:.3e}")]
    SingularMatrix { index: usize, magnitude: f64 },
    #[error("Jacobi iteration did not converge after {sweeps} sweeps (off-diagonal mass {off:.3e})")]
    NoConvergence { sweeps: usize, off: f64 },
}

/// Row-major complex matrix.
#[derive(Clone, PartialEq)]
pub struct CMat {
    rows: usize,
    cols: usize,
    data: Vec<C64>,
}

impl fmt::Debug for CMat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "CMat {}×{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            write!(f, "  ")?;
            for j in 0..self.cols {
                let z = self[(i, j)];
                write!(f, "{:+.6e}{:+.6e}i  ", z.re, z.im)?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

impl CMat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        CMat { rows, cols, data: vec![ZERO; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = CMat::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = ONE;
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        CMat { rows, cols, data }
    }

    /// Builds from row-major data; panics if the length does not match.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<C64>) -> Self {
        assert_eq!(rows * cols, data.len(), "CMat::from_vec: length mismatch");
        CMat { rows, cols, data }
    }

    pub fn from_rows(rows: &[Vec<C64>]) -> Result<Self, LinalgError> {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        if rows.iter().any(|row| row.len() != c) {
            return Err(LinalgError::Shape("ragged rows".into()));
        }
        Ok(CMat { rows: r, cols: c, data: rows.concat() })
    }

    pub fn from_real(rows: &[&[f64]]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        CMat::from_fn(r, c, |i, j| C64::new(rows[i][j], 0.0))
    }

    pub fn scalar(z: C64) -> Self {
        CMat { rows: 1, cols: 1, data: vec![z] }
    }

    pub fn diag(d: &[C64]) -> Self {
        let mut m = CMat::zeros(d.len(), d.len());
        for (i, &z) in d.iter().enumerate() {
            m[(i, i)] = z;
        }
        m
    }

    /// Column vector.
    pub fn column_vec(v: &[C64]) -> Self {
        CMat { rows: v.len(), cols: 1, data: v.to_vec() }
    }

    /// The canonical symplectic matrix [[0, −Iₙ], [Iₙ, 0]].
    pub fn j(n: usize) -> Self {
        let mut m = CMat::zeros(2 * n, 2 * n);
        for i in 0..n {
            m[(i, n + i)] = -ONE;
            m[(n + i, i)] = ONE;
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn data(&self) -> &[C64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[C64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<C64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn set_column(&mut self, j: usize, v: &[C64]) {
        assert_eq!(v.len(), self.rows);
        for (i, &z) in v.iter().enumerate() {
            self[(i, j)] = z;
        }
    }

    pub fn adjoint(&self) -> CMat {
        CMat::from_fn(self.cols, self.rows, |i, j| self[(j, i)].conj())
    }

    pub fn transpose(&self) -> CMat {
        CMat::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn conj(&self) -> CMat {
        CMat { rows: self.rows, cols: self.cols, data: self.data.iter().map(|z| z.conj()).collect() }
    }

    pub fn scale(&self, s: C64) -> CMat {
        CMat { rows: self.rows, cols: self.cols, data: self.data.iter().map(|z| z * s).collect() }
    }

    pub fn scale_real(&self, s: f64) -> CMat {
        CMat { rows: self.rows, cols: self.cols, data: self.data.iter().map(|z| z * s).collect() }
    }

    pub fn matmul(&self, other: &CMat) -> CMat {
        assert_eq!(self.cols, other.rows, "matmul: inner dimensions differ");
        let mut out = CMat::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            let out_row = &mut out.data[i * other.cols..(i + 1) * other.cols];
            for k in 0..self.cols {
                let a = self.data[i * self.cols + k];
                if a == ZERO {
                    continue;
                }
                let b_row = &other.data[k * other.cols..(k + 1) * other.cols];
                for (o, b) in out_row.iter_mut().zip(b_row) {
                    *o += a * b;
                }
            }
        }
        out
    }

    /// `self* · other` without forming the adjoint.
    pub fn adjoint_mul(&self, other: &CMat) -> CMat {
        assert_eq!(self.rows, other.rows, "adjoint_mul: row counts differ");
        let mut out = CMat::zeros(self.cols, other.cols);
        for k in 0..self.rows {
            let a_row = self.row(k);
            let b_row = other.row(k);
            for (i, a) in a_row.iter().enumerate() {
                let a = a.conj();
                if a == ZERO {
                    continue;
                }
                let out_row = &mut out.data[i * other.cols..(i + 1) * other.cols];
                for (o, b) in out_row.iter_mut().zip(b_row) {
                    *o += a * b;
                }
            }
        }
        out
    }

    pub fn mat_vec(&self, v: &[C64]) -> Vec<C64> {
        assert_eq!(self.cols, v.len(), "mat_vec: dimension mismatch");
        (0..self.rows).map(|i| self.row(i).iter().zip(v).map(|(a, b)| a * b).sum()).collect()
    }

    /// Sub-block copy.
    pub fn block(&self, r0: usize, c0: usize, rows: usize, cols: usize) -> CMat {
        CMat::from_fn(rows, cols, |i, j| self[(r0 + i, c0 + j)])
    }

    pub fn set_block(&mut self, r0: usize, c0: usize, b: &CMat) {
        for i in 0..b.rows {
            for j in 0..b.cols {
                self[(r0 + i, c0 + j)] = b[(i, j)];
            }
        }
    }

    pub fn hstack(parts: &[&CMat]) -> CMat {
        let rows = parts.first().map_or(0, |p| p.rows);
        assert!(parts.iter().all(|p| p.rows == rows), "hstack: row counts differ");
        let cols = parts.iter().map(|p| p.cols).sum();
        let mut out = CMat::zeros(rows, cols);
        let mut c0 = 0;
        for p in parts {
            out.set_block(0, c0, p);
            c0 += p.cols;
        }
        out
    }

    pub fn vstack(parts: &[&CMat]) -> CMat {
        let cols = parts.first().map_or(0, |p| p.cols);
        assert!(parts.iter().all(|p| p.cols == cols), "vstack: column counts differ");
        let rows = parts.iter().map(|p| p.rows).sum();
        let mut out = CMat::zeros(rows, cols);
        let mut r0 = 0;
        for p in parts {
            out.set_block(r0, 0, p);
            r0 += p.rows;
        }
        out
    }

    /// Block-diagonal [[a, 0], [0, b]].
    pub fn block_diag(a: &CMat, b: &CMat) -> CMat {
        let mut out = CMat::zeros(a.rows + b.rows, a.cols + b.cols);
        out.set_block(0, 0, a);
        out.set_block(a.rows, a.cols, b);
        out
    }

    pub fn fro_norm(&self) -> f64 {
        fro_norm(self)
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    pub fn trace(&self) -> C64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    /// (A + A*)/2.
    pub fn hermitian_part(&self) -> CMat {
        CMat::from_fn(self.rows, self.cols, |i, j| (self[(i, j)] + self[(j, i)].conj()) * 0.5)
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|z| *z == ZERO)
    }
}

impl Index<(usize, usize)> for CMat {
    type Output = C64;
    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for CMat {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

impl Add for &CMat {
    type Output = CMat;
    fn add(self, rhs: &CMat) -> CMat {
        assert_eq!(self.shape(), rhs.shape(), "add: shape mismatch");
        CMat { rows: self.rows, cols: self.cols, data: self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect() }
    }
}

impl Sub for &CMat {
    type Output = CMat;
    fn sub(self, rhs: &CMat) -> CMat {
        assert_eq!(self.shape(), rhs.shape(), "sub: shape mismatch");
        CMat { rows: self.rows, cols: self.cols, data: self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect() }
    }
}

impl Mul for &CMat {
    type Output = CMat;
    fn mul(self, rhs: &CMat) -> CMat {
        self.matmul(rhs)
    }
}

impl Neg for &CMat {
    type Output = CMat;
    fn neg(self) -> CMat {
        self.scale_real(-1.0)
    }
}

impl AddAssign<&CMat> for CMat {
    fn add_assign(&mut self, rhs: &CMat) {
        assert_eq!(self.shape(), rhs.shape(), "add_assign: shape mismatch");
        for (a, b) in self.data.iter_mut().zip(&rhs.data) {
            *a += b;
        }
    }
}

// Serialized as nested arrays of [re, im] pairs, row by row.
impl Serialize for CMat {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let rows: Vec<Vec<[f64; 2]>> =
            (0..self.rows).map(|i| self.row(i).iter().map(|z| [z.re, z.im]).collect()).collect();
        rows.serialize(s)
    }
}

impl<'de> Deserialize<'de> for CMat {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let rows: Vec<Vec<[f64; 2]>> = Vec::deserialize(d)?;
        let rows: Vec<Vec<C64>> =
            rows.into_iter().map(|r| r.into_iter().map(|[re, im]| C64::new(re, im)).collect()).collect();
        CMat::from_rows(&rows).map_err(serde::de::Error::custom)
    }
}

pub fn fro_norm(a: &CMat) -> f64 {
    a.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn vec_norm(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// y* x
pub fn vdot(y: &[C64], x: &[C64]) -> C64 {
    y.iter().zip(x).map(|(a, b)| a.conj() * b).sum()
}

fn ensure_square(a: &CMat) -> Result<(), LinalgError> {
    if a.is_square() {
        Ok(())
    } else {
        Err(LinalgError::NotSquare { rows: a.rows, cols: a.cols })
    }
}

// ---------------------------------------------------------------------------
// LU with partial pivoting
// ---------------------------------------------------------------------------

/// Packed LU factors of a square matrix with row permutation.
#[derive(Clone, Debug)]
pub struct Lu {
    lu: CMat,
    perm: Vec<usize>,
    sign: f64,
    /// Index of the first pivot below threshold, if any.
    singular_at: Option<(usize, f64)>,
}

impl Lu {
    /// Factor with the default threshold `PIVOT_FACTOR·eps·‖A‖`.
    pub fn factor(a: &CMat) -> Result<Lu, LinalgError> {
        Lu::factor_with_threshold(a, PIVOT_FACTOR * f64::EPSILON * fro_norm(a))
    }

    pub fn factor_with_threshold(a: &CMat, threshold: f64) -> Result<Lu, LinalgError> {
        ensure_square(a)?;
        let n = a.rows;
        let mut lu = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut sign = 1.0;
        let mut singular_at = None;
        for k in 0..n {
            let (p, mag) =
                (k..n)
                    .map(|i| (i, lu[(i, k)].norm()))
                    .fold((k, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
            if p != k {
                for j in 0..n {
                    lu.data.swap(k * n + j, p * n + j);
                }
                perm.swap(k, p);
                sign = -sign;
            }
            if mag <= threshold || mag == 0.0 {
                if singular_at.is_none() {
                    singular_at = Some((k, mag));
                }
                continue;
            }
            let pivot = lu[(k, k)];
            for i in k + 1..n {
                let f = lu[(i, k)] / pivot;
                lu[(i, k)] = f;
                if f == ZERO {
                    continue;
                }
                for j in k + 1..n {
                    let u = lu[(k, j)];
                    lu[(i, j)] -= f * u;
                }
            }
        }
        Ok(Lu { lu, perm, sign, singular_at })
    }

    pub fn is_singular(&self) -> bool {
        self.singular_at.is_some()
    }

    /// Smallest pivot modulus relative to the largest.
    pub fn pivot_ratio(&self) -> f64 {
        let n = self.lu.rows;
        if n == 0 {
            return 1.0;
        }
        let mags: Vec<f64> = (0..n).map(|i| self.lu[(i, i)].norm()).collect();
        let max = mags.iter().cloned().fold(0.0, f64::max);
        if max == 0.0 {
            return 0.0;
        }
        mags.iter().cloned().fold(f64::INFINITY, f64::min) / max
    }

    pub fn det(&self) -> C64 {
        if self.singular_at.is_some() {
            return ZERO;
        }
        let n = self.lu.rows;
        (0..n).fold(C64::new(self.sign, 0.0), |acc, i| acc * self.lu[(i, i)])
    }

    pub fn solve(&self, b: &CMat) -> Result<CMat, LinalgError> {
        let n = self.lu.rows;
        if b.rows != n {
            return Err(LinalgError::Shape(format!("rhs has {} rows, expected {n}", b.rows)));
        }
        if let Some((index, magnitude)) = self.singular_at {
            return Err(LinalgError::SingularMatrix { index, magnitude });
        }
        let m = b.cols;
        let mut x = CMat::zeros(n, m);
        for i in 0..n {
            for j in 0..m {
                x[(i, j)] = b[(self.perm[i], j)];
            }
        }
        for i in 0..n {
            for k in 0..i {
                let l = self.lu[(i, k)];
                if l == ZERO {
                    continue;
                }
                for j in 0..m {
                    let v = x[(k, j)];
                    x[(i, j)] -= l * v;
                }
            }
        }
        for i in (0..n).rev() {
            for k in i + 1..n {
                let u = self.lu[(i, k)];
                if u == ZERO {
                    continue;
                }
                for j in 0..m {
                    let v = x[(k, j)];
                    x[(i, j)] -= u * v;
                }
            }
            let d = self.lu[(i, i)];
            for j in 0..m {
                x[(i, j)] /= d;
            }
        }
        Ok(x)
    }

    pub fn solve_vec(&self, b: &[C64]) -> Result<Vec<C64>, LinalgError> {
        Ok(self.solve(&CMat::column_vec(b))?.data)
    }
}

/// Solves AX = B with partial pivoting.
pub fn lu_solve(a: &CMat, b: &CMat) -> Result<CMat, LinalgError> {
    Lu::factor(a)?.solve(b)
}

pub fn inverse(a: &CMat) -> Result<CMat, LinalgError> {
    lu_solve(a, &CMat::identity(a.rows))
}

/// Determinant from LU pivots; exactly zero once a pivot falls below threshold.
pub fn det(a: &CMat) -> Result<C64, LinalgError> {
    Ok(Lu::factor(a)?.det())
}

/// Number of pivots above `tol·‖A‖` under full pivoting.
pub fn rank(a: &CMat, tol: f64) -> usize {
    let threshold = tol * fro_norm(a);
    let mut m = a.clone();
    let (r, c) = m.shape();
    let mut rank = 0;
    for k in 0..r.min(c) {
        let mut best = (k, k, -1.0);
        for i in k..r {
            for j in k..c {
                let v = m[(i, j)].norm();
                if v > best.2 {
                    best = (i, j, v);
                }
            }
        }
        let (pi, pj, mag) = best;
        if mag <= threshold || mag == 0.0 {
            break;
        }
        rank += 1;
        for j in 0..c {
            m.data.swap(k * c + j, pi * c + j);
        }
        for i in 0..r {
            m.data.swap(i * c + k, i * c + pj);
        }
        let pivot = m[(k, k)];
        for i in k + 1..r {
            let f = m[(i, k)] / pivot;
            if f == ZERO {
                continue;
            }
            for j in k..c {
                let u = m[(k, j)];
                m[(i, j)] -= f * u;
            }
        }
    }
    rank
}

// ---------------------------------------------------------------------------
// Hermitian eigenproblem: cyclic complex Jacobi
// ---------------------------------------------------------------------------

#[derive(Clone, Debug)]
pub struct HermEigen {
    /// Ascending.
    pub values: Vec<f64>,
    /// Orthonormal eigenvectors as columns, in the order of `values`.
    pub vectors: CMat,
}

const MAX_SWEEPS: usize = 80;

/// Full eigendecomposition of a Hermitian matrix.
///
/// The input is accepted when ‖A − A*‖ ≤ tol·‖A‖; its Hermitian part is then
/// diagonalized by cyclic Jacobi sweeps, stopping when the off-diagonal mass
/// falls below tol·‖A‖ or when a whole sweep finds nothing above the
/// rounding level of the corresponding diagonal pair.
pub fn herm_eigen(a: &CMat, tol: f64) -> Result<HermEigen, LinalgError> {
    ensure_square(a)?;
    let n = a.rows;
    let norm = fro_norm(a);
    let residual = fro_norm(&(a - &a.adjoint()));
    if residual > tol * norm {
        return Err(LinalgError::NotHermitian { residual, norm });
    }
    let mut m = a.hermitian_part();
    for i in 0..n {
        m[(i, i)] = C64::new(m[(i, i)].re, 0.0);
    }
    let mut v = CMat::identity(n);
    let target = tol * norm;
    let eps = f64::EPSILON;

    let off_mass = |m: &CMat| -> f64 {
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    s += m[(i, j)].norm_sqr();
                }
            }
        }
        s.sqrt()
    };

    let mut sweeps = 0;
    loop {
        let off = off_mass(&m);
        if off <= target || off == 0.0 {
            break;
        }
        if sweeps >= MAX_SWEEPS {
            return Err(LinalgError::NoConvergence { sweeps, off });
        }
        sweeps += 1;
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[(p, q)];
                let r = apq.norm();
                if r == 0.0 {
                    continue;
                }
                let app = m[(p, p)].re;
                let aqq = m[(q, q)].re;
                if r <= 0.5 * eps * (app.abs() * aqq.abs()).sqrt() {
                    m[(p, q)] = ZERO;
                    m[(q, p)] = ZERO;
                    continue;
                }
                rotated = true;
                // Phase-reduce to a real symmetric 2×2 problem, then rotate.
                let phase = apq / r; // e^{iφ}
                let theta = (aqq - app) / (2.0 * r);
                let t = if theta.abs() > 1e150 {
                    0.5 / theta
                } else {
                    theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
                };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                let ph_c = phase.conj(); // e^{-iφ}
                                         // U = [[c, s], [−s e^{−iφ}, c e^{−iφ}]] on (p, q).
                let upq = C64::new(s, 0.0);
                let uqp = -ph_c * s;
                let uqq = ph_c * c;
                // Columns: A ← A U.
                for k in 0..n {
                    let akp = m[(k, p)];
                    let akq = m[(k, q)];
                    m[(k, p)] = akp * c + akq * uqp;
                    m[(k, q)] = akp * upq + akq * uqq;
                }
                // Rows: A ← U* A.
                for k in 0..n {
                    let apk = m[(p, k)];
                    let aqk = m[(q, k)];
                    m[(p, k)] = apk * c + aqk * uqp.conj();
                    m[(q, k)] = apk * upq.conj() + aqk * uqq.conj();
                }
                m[(p, p)] = C64::new(app - t * r, 0.0);
                m[(q, q)] = C64::new(aqq + t * r, 0.0);
                m[(p, q)] = ZERO;
                m[(q, p)] = ZERO;
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = vkp * c + vkq * uqp;
                    v[(k, q)] = vkp * upq + vkq * uqq;
                }
            }
        }
        if !rotated {
            break;
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[(i, i)].re.total_cmp(&m[(j, j)].re));
    let values = order.iter().map(|&i| m[(i, i)].re).collect();
    let vectors = CMat::from_fn(n, n, |i, j| v[(i, order[j])]);
    Ok(HermEigen { values, vectors })
}

/// Unitary diagonalization of a skew-Hermitian matrix: U*SU = D.
///
/// D is purely imaginary; its nonzero entries (|d| > tol·‖S‖) come first,
/// ordered by decreasing imaginary part, followed by the zero block.
pub fn diag_skew_hermitian(s: &CMat, tol: f64) -> Result<(CMat, CMat), LinalgError> {
    ensure_square(s)?;
    let norm = fro_norm(s);
    let residual = fro_norm(&(s + &s.adjoint()));
    if residual > tol * norm {
        return Err(LinalgError::NotSkewHermitian { residual, norm });
    }
    let n = s.rows;
    if norm == 0.0 {
        return Ok((CMat::identity(n), CMat::zeros(n, n)));
    }
    // iS is Hermitian and S = −i·(iS).
    let h = s.scale(I);
    let eig = herm_eigen(&h, tol.max(1e-14))?;
    let cut = tol * norm;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        let zi = eig.values[i].abs() <= cut;
        let zj = eig.values[j].abs() <= cut;
        zi.cmp(&zj).then(eig.values[i].total_cmp(&eig.values[j]))
    });
    let u = CMat::from_fn(n, n, |i, j| eig.vectors[(i, order[j])]);
    let d: Vec<C64> =
        order.iter().map(|&k| if eig.values[k].abs() <= cut { ZERO } else { C64::new(0.0, -eig.values[k]) }).collect();
    Ok((u, CMat::diag(&d)))
}
