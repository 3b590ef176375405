//! Small dense complex linear algebra.
//!
//! Everything here is sized for the problem at hand: `L` (packets) is at most
//! a few hundred, `N` (transmit antennas) a handful, and the per-packet
//! covariances are 2×2. No BLAS, no workspace reuse.

use std::ops::{Index, IndexMut};

use num_complex::Complex64;

use crate::error::{Error, Result};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Dense row-major complex matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexMat {
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
}

impl ComplexMat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![ZERO; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = ONE;
        }
        m
    }

    /// Builds a matrix from row-major entries, rejecting bad shapes and
    /// non-finite values.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<Complex64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch(format!(
                "{} entries for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        if data.iter().any(|z| !z.is_finite()) {
            return Err(Error::InvalidArg("matrix entries must be finite".into()));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    pub fn from_real_diag(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len(), diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = Complex64::new(d, 0.0);
        }
        m
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn dims(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[Complex64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<Complex64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.is_finite())
    }

    /// Conjugate transpose.
    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)].conj())
    }

    pub fn matmul(&self, rhs: &Self) -> Result<Self> {
        if self.cols != rhs.rows {
            return Err(Error::DimensionMismatch(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, rhs.rows, rhs.cols
            )));
        }
        let mut out = Self::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == ZERO {
                    continue;
                }
                let src = rhs.row(k);
                let dst = &mut out.data[i * rhs.cols..(i + 1) * rhs.cols];
                for (d, &b) in dst.iter_mut().zip(src) {
                    *d += a * b;
                }
            }
        }
        Ok(out)
    }

    pub fn scale(&self, s: Complex64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&z| z * s).collect(),
        }
    }

    pub fn scale_real(&self, s: f64) -> Self {
        self.scale(Complex64::new(s, 0.0))
    }

    pub fn add(&self, rhs: &Self) -> Result<Self> {
        self.zip_with(rhs, |a, b| a + b)
    }

    pub fn sub(&self, rhs: &Self) -> Result<Self> {
        self.zip_with(rhs, |a, b| a - b)
    }

    fn zip_with(&self, rhs: &Self, f: impl Fn(Complex64, Complex64) -> Complex64) -> Result<Self> {
        if self.dims() != rhs.dims() {
            return Err(Error::DimensionMismatch(format!(
                "{}x{} vs {}x{}",
                self.rows, self.cols, rhs.rows, rhs.cols
            )));
        }
        Ok(Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(&a, &b)| f(a, b)).collect(),
        })
    }

    /// Squared Frobenius norm, `Tr[AᴴA]`.
    pub fn frobenius_norm_sqr(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.frobenius_norm_sqr().sqrt()
    }

    pub fn trace(&self) -> Complex64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    /// Largest entrywise deviation from Hermitian symmetry.
    pub fn hermitian_defect(&self) -> f64 {
        let mut worst = 0.0_f64;
        for i in 0..self.rows {
            for j in i..self.cols {
                worst = worst.max((self[(i, j)] - self[(j, i)].conj()).norm());
            }
        }
        worst
    }

    /// Solves `self · X = rhs` by Gaussian elimination with partial pivoting.
    pub fn solve(&self, rhs: &Self) -> Result<Self> {
        if !self.is_square() || self.rows != rhs.rows {
            return Err(Error::DimensionMismatch(format!(
                "solve with {}x{} system and {}x{} right-hand side",
                self.rows, self.cols, rhs.rows, rhs.cols
            )));
        }
        let n = self.rows;
        let m = rhs.cols;
        let mut a = self.clone();
        let mut b = rhs.clone();
        let scale = a.data.iter().fold(0.0_f64, |acc, z| acc.max(z.norm()));
        if scale == 0.0 {
            return Err(Error::Singular);
        }
        for col in 0..n {
            let pivot = (col..n)
                .max_by(|&x, &y| a[(x, col)].norm().total_cmp(&a[(y, col)].norm()))
                .unwrap_or(col);
            if a[(pivot, col)].norm() <= scale * f64::EPSILON * n as f64 {
                return Err(Error::Singular);
            }
            if pivot != col {
                for j in 0..n {
                    a.data.swap(pivot * n + j, col * n + j);
                }
                for j in 0..m {
                    b.data.swap(pivot * m + j, col * m + j);
                }
            }
            let inv = a[(col, col)].inv();
            for r in (col + 1)..n {
                let factor = a[(r, col)] * inv;
                if factor == ZERO {
                    continue;
                }
                for j in col..n {
                    let v = a[(col, j)];
                    a[(r, j)] -= factor * v;
                }
                for j in 0..m {
                    let v = b[(col, j)];
                    b[(r, j)] -= factor * v;
                }
            }
        }
        for col in (0..n).rev() {
            let inv = a[(col, col)].inv();
            for j in 0..m {
                let mut acc = b[(col, j)];
                for k in (col + 1)..n {
                    acc -= a[(col, k)] * b[(k, j)];
                }
                b[(col, j)] = acc * inv;
            }
        }
        Ok(b)
    }

    pub fn inverse(&self) -> Result<Self> {
        self.solve(&Self::identity(self.rows))
    }
}

impl Index<(usize, usize)> for ComplexMat {
    type Output = Complex64;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &Complex64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for ComplexMat {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

/// Eigendecomposition `C = V diag(λ) Vᴴ` of a Hermitian matrix.
///
/// Eigenvalues are in descending order. Eigenvectors are the columns of
/// `vectors`, each normalised and phased so that its largest-magnitude
/// component is real and positive.
#[derive(Debug, Clone, PartialEq)]
pub struct HermEig {
    pub values: Vec<f64>,
    pub vectors: ComplexMat,
}

impl HermEig {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn vector(&self, k: usize) -> Vec<Complex64> {
        self.vectors.column(k)
    }

    /// `V diag(λ) Vᴴ`.
    pub fn reconstruct(&self) -> ComplexMat {
        let n = self.len();
        ComplexMat::from_fn(n, n, |i, j| {
            (0..n)
                .map(|k| self.vectors[(i, k)] * self.values[k] * self.vectors[(j, k)].conj())
                .sum()
        })
    }

    fn sorted(values: Vec<f64>, vectors: ComplexMat) -> Self {
        let n = values.len();
        let mut order: Vec<usize> = (0..n).collect();
        // stable: equal eigenvalues keep their original column order
        order.sort_by(|&a, &b| values[b].total_cmp(&values[a]));
        let mut out = ComplexMat::zeros(n, n);
        for (dst, &src) in order.iter().enumerate() {
            let mut col = vectors.column(src);
            normalize_phase(&mut col);
            for i in 0..n {
                out[(i, dst)] = col[i];
            }
        }
        Self {
            values: order.iter().map(|&k| values[k]).collect(),
            vectors: out,
        }
    }
}

/// Scales `v` to unit norm and rotates it so the largest-magnitude entry
/// (first one on ties) is real and positive.
pub fn normalize_phase(v: &mut [Complex64]) {
    let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if norm == 0.0 {
        return;
    }
    let mut pivot = 0;
    let mut best = -1.0;
    for (i, z) in v.iter().enumerate() {
        let m = z.norm();
        if m > best * (1.0 + 1e-12) {
            best = m;
            pivot = i;
        }
    }
    let phase = v[pivot].conj() / v[pivot].norm();
    for z in v.iter_mut() {
        *z = *z * phase / norm;
    }
    v[pivot] = Complex64::new(v[pivot].re, 0.0);
}

/// Closed-form eigensystem of the 2×2 Hermitian matrix
/// `[[s11, conj(s21)], [s21, s22]]`.
///
/// Note that `s21` is the lower-left entry.
pub fn herm_eig_2x2(s11: f64, s22: f64, s21: Complex64) -> HermEig {
    let half_sum = 0.5 * (s11 + s22);
    let disc = 0.5 * ((s11 - s22).powi(2) + 4.0 * s21.norm_sqr()).sqrt();
    let top = half_sum + disc;
    let bottom = half_sum - disc;

    let mut e1 = if s21 == ZERO {
        if s22 > s11 {
            [ZERO, ONE]
        } else {
            [ONE, ZERO]
        }
    } else {
        // Two null-space representations of (S - top·I); keep the longer one.
        let a = [s21.conj(), Complex64::new(top - s11, 0.0)];
        let b = [Complex64::new(top - s22, 0.0), s21];
        let na = a[0].norm_sqr() + a[1].norm_sqr();
        let nb = b[0].norm_sqr() + b[1].norm_sqr();
        if na >= nb {
            a
        } else {
            b
        }
    };
    normalize_phase(&mut e1);
    let mut e2 = [-e1[1].conj(), e1[0].conj()];
    normalize_phase(&mut e2);

    HermEig {
        values: vec![top, bottom],
        vectors: ComplexMat {
            rows: 2,
            cols: 2,
            data: vec![e1[0], e2[0], e1[1], e2[1]],
        },
    }
}

/// 2×2 Hermitian matrix `[[s11, conj(s21)], [s21, s22]]`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Herm2 {
    pub s11: f64,
    pub s22: f64,
    pub s21: Complex64,
}

impl Herm2 {
    pub fn new(s11: f64, s22: f64, s21: Complex64) -> Self {
        Self { s11, s22, s21 }
    }

    /// Entry `(1, 2)`, the conjugate of `s21`.
    pub fn s12(&self) -> Complex64 {
        self.s21.conj()
    }

    pub fn eig(&self) -> HermEig {
        herm_eig_2x2(self.s11, self.s22, self.s21)
    }

    /// Largest eigenvalue and its unit eigenvector.
    pub fn top(&self) -> (f64, [Complex64; 2]) {
        let e = self.eig();
        (e.values[0], [e.vectors[(0, 0)], e.vectors[(1, 0)]])
    }

    pub fn det(&self) -> f64 {
        self.s11 * self.s22 - self.s21.norm_sqr()
    }

    pub fn trace(&self) -> f64 {
        self.s11 + self.s22
    }

    pub fn inverse(&self) -> Option<Self> {
        let det = self.det();
        if det == 0.0 || !det.is_finite() {
            return None;
        }
        Some(Self {
            s11: self.s22 / det,
            s22: self.s11 / det,
            s21: -self.s21 / det,
        })
    }

    /// `vᴴ S v`.
    pub fn quad(&self, v: [Complex64; 2]) -> f64 {
        self.s11 * v[0].norm_sqr() + self.s22 * v[1].norm_sqr() + 2.0 * (v[1].conj() * self.s21 * v[0]).re
    }

    pub fn scale(&self, a: f64) -> Self {
        Self {
            s11: self.s11 * a,
            s22: self.s22 * a,
            s21: self.s21 * a,
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        Self {
            s11: self.s11 + other.s11,
            s22: self.s22 + other.s22,
            s21: self.s21 + other.s21,
        }
    }

    pub fn to_mat(&self) -> ComplexMat {
        ComplexMat {
            rows: 2,
            cols: 2,
            data: vec![Complex64::new(self.s11, 0.0), self.s12(), self.s21, Complex64::new(self.s22, 0.0)],
        }
    }

    pub fn is_finite(&self) -> bool {
        self.s11.is_finite() && self.s22.is_finite() && self.s21.is_finite()
    }
}

const MAX_JACOBI_SWEEPS: usize = 64;

fn off_diagonal_norm(a: &ComplexMat) -> f64 {
    let n = a.rows();
    let mut acc = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                acc += a[(i, j)].norm_sqr();
            }
        }
    }
    acc.sqrt()
}

/// Cyclic Jacobi eigensolver for a complex Hermitian matrix.
///
/// Sweeps pairs `(p, q)` in row order until the off-diagonal Frobenius norm
/// drops to `tol · ‖C‖_F`. The sweep order is fixed, so the output is a pure
/// function of the input.
pub fn herm_eig(c: &ComplexMat, tol: f64) -> Result<HermEig> {
    if !c.is_square() {
        return Err(Error::DimensionMismatch(format!(
            "eigendecomposition of a {}x{} matrix",
            c.rows(),
            c.cols()
        )));
    }
    if !c.is_finite() {
        return Err(Error::InvalidArg("matrix entries must be finite".into()));
    }
    let n = c.rows();
    let norm = c.frobenius_norm();
    let limit = tol * norm;
    let asymmetry = c.hermitian_defect();
    if asymmetry > limit {
        return Err(Error::NotHermitian { asymmetry, limit });
    }

    // symmetrize so rounding in the input cannot accumulate
    let mut a = ComplexMat::from_fn(n, n, |i, j| {
        if i == j {
            Complex64::new(c[(i, i)].re, 0.0)
        } else {
            0.5 * (c[(i, j)] + c[(j, i)].conj())
        }
    });
    let mut v = ComplexMat::identity(n);

    let mut sweeps = 0;
    while off_diagonal_norm(&a) > limit {
        if sweeps == MAX_JACOBI_SWEEPS {
            return Err(Error::NoConvergence { sweeps });
        }
        for p in 0..n {
            for q in (p + 1)..n {
                rotate(&mut a, &mut v, p, q);
            }
        }
        sweeps += 1;
    }

    let values = (0..n).map(|i| a[(i, i)].re).collect();
    Ok(HermEig::sorted(values, v))
}

/// One complex Jacobi rotation annihilating `a[p][q]`.
fn rotate(a: &mut ComplexMat, v: &mut ComplexMat, p: usize, q: usize) {
    let apq = a[(p, q)];
    let b = apq.norm();
    if b == 0.0 {
        return;
    }
    let app = a[(p, p)].re;
    let aqq = a[(q, q)].re;
    // phase that makes a[p][q] real, then a real symmetric rotation
    let phase = apq.conj() / b;
    let theta = (aqq - app) / (2.0 * b);
    let t = if theta >= 0.0 {
        1.0 / (theta + (theta * theta + 1.0).sqrt())
    } else {
        -1.0 / (-theta + (theta * theta + 1.0).sqrt())
    };
    let cos = 1.0 / (t * t + 1.0).sqrt();
    let sin = t * cos;

    let u_pp = Complex64::new(cos, 0.0);
    let u_pq = Complex64::new(sin, 0.0);
    let u_qp = phase * -sin;
    let u_qq = phase * cos;

    let n = a.rows();
    // A <- A U
    for k in 0..n {
        let akp = a[(k, p)];
        let akq = a[(k, q)];
        a[(k, p)] = akp * u_pp + akq * u_qp;
        a[(k, q)] = akp * u_pq + akq * u_qq;
    }
    // A <- Uᴴ A
    for k in 0..n {
        let apk = a[(p, k)];
        let aqk = a[(q, k)];
        a[(p, k)] = u_pp.conj() * apk + u_qp.conj() * aqk;
        a[(q, k)] = u_pq.conj() * apk + u_qq.conj() * aqk;
    }
    a[(p, q)] = ZERO;
    a[(q, p)] = ZERO;
    a[(p, p)] = Complex64::new(a[(p, p)].re, 0.0);
    a[(q, q)] = Complex64::new(a[(q, q)].re, 0.0);
    // V <- V U
    for k in 0..n {
        let vkp = v[(k, p)];
        let vkq = v[(k, q)];
        v[(k, p)] = vkp * u_pp + vkq * u_qp;
        v[(k, q)] = vkp * u_pq + vkq * u_qq;
    }
}

/// Default convergence tolerance for [`herm_eig`].
pub const EIG_TOL: f64 = 1e-14;

/// Principal square root `M = V diag(√λ) Vᴴ` of a Hermitian PSD matrix, so
/// that `M Mᴴ = C`.
///
/// Eigenvalues in `[-clamp_tol·λ_max, 0)` are treated as rounding noise and
/// clamped to zero; anything more negative is rejected.
pub fn psd_sqrt(c: &ComplexMat, clamp_tol: f64) -> Result<ComplexMat> {
    let eig = herm_eig(c, EIG_TOL)?;
    let clamped = clamp_eigenvalues(&eig.values, clamp_tol)?;
    Ok(sqrt_from_eig(&clamped, &eig.vectors))
}

/// Magnitude, relative to `λ_max`, below which an eigenvalue is treated as
/// solver rounding and set to exactly zero.
pub const EIG_DUST: f64 = 1e-13;

/// Clamps eigenvalues within `clamp_tol·λ_max` of zero up to zero.
///
/// Positive eigenvalues under `EIG_DUST·λ_max` are zeroed as well: their
/// square roots would otherwise leak `O(√ε)` noise into a rank-deficient
/// factor.
pub fn clamp_eigenvalues(values: &[f64], clamp_tol: f64) -> Result<Vec<f64>> {
    let lmax = values.iter().copied().fold(0.0_f64, f64::max);
    let limit = -clamp_tol * lmax;
    values
        .iter()
        .map(|&l| {
            if l < limit {
                Err(Error::NotPsd { eigenvalue: l, limit })
            } else if l <= EIG_DUST * lmax {
                Ok(0.0)
            } else {
                Ok(l)
            }
        })
        .collect()
}

pub(crate) fn sqrt_from_eig(values: &[f64], vectors: &ComplexMat) -> ComplexMat {
    let n = values.len();
    let roots: Vec<f64> = values.iter().map(|l| l.max(0.0).sqrt()).collect();
    ComplexMat::from_fn(n, n, |i, j| {
        (0..n)
            .map(|k| vectors[(i, k)] * roots[k] * vectors[(j, k)].conj())
            .sum()
    })
}
