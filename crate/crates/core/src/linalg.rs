//! Dense real linear algebra kernels.
//!
//! Everything here works on small, dense, row-major matrices. The kernels are
//! the ones the realization transforms need: a cyclic Jacobi symmetric
//! eigensolver, Lanczos tridiagonalization, an upper Cholesky factorization,
//! LU-based solves and determinants, and a one-sided Jacobi SVD for rank
//! decisions.

use std::fmt;
use std::ops::{Index, IndexMut};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LinalgError {
    #[error("matrix is not symmetric (max asymmetry {asymmetry:e}, tolerance {tol:e})")]
    NotSymmetric { asymmetry: f64, tol: f64 },
    #[error("Jacobi eigensolver did not converge within {sweeps} sweeps")]
    NoConvergence { sweeps: usize },
    #[error("Lanczos breakdown at step {step} (beta = {beta:e})")]
    Breakdown { step: usize, beta: f64 },
    #[error("matrix is not positive definite (pivot {pivot} = {value:e})")]
    NotPositiveDefinite { pivot: usize, value: f64 },
    #[error("matrix is singular to working precision (pivot {pivot} = {value:e})")]
    Singular { pivot: usize, value: f64 },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },
    #[error("vector is not of unit norm (norm {0})")]
    NotUnit(f64),
}

pub type Result<T> = std::result::Result<T, LinalgError>;

/// Dense real matrix stored row-major.
///
/// Serialized as an array of rows.
#[derive(Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "Vec<Vec<f64>>", try_from = "Vec<Vec<f64>>")]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        DenseMatrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_diag(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len(), diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = d;
        }
        m
    }

    /// Builds a matrix from row-major entries, rejecting NaN and infinities.
    pub fn from_row_major(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(LinalgError::DimensionMismatch(format!(
                "{} entries for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        if let Some(k) = data.iter().position(|x| !x.is_finite()) {
            return Err(LinalgError::NonFinite {
                row: k / cols.max(1),
                col: k % cols.max(1),
            });
        }
        Ok(DenseMatrix { rows, cols, data })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.as_ref().len());
        let mut data = Vec::with_capacity(r * c);
        for (i, row) in rows.iter().enumerate() {
            let row = row.as_ref();
            if row.len() != c {
                return Err(LinalgError::DimensionMismatch(format!(
                    "row {i} has {} entries, expected {c}",
                    row.len()
                )));
            }
            data.extend_from_slice(row);
        }
        Self::from_row_major(r, c, data)
    }

    /// Matrix whose columns are the given vectors.
    pub fn from_columns(cols: &[Vec<f64>]) -> Self {
        let c = cols.len();
        let r = cols.first().map_or(0, Vec::len);
        let mut m = Self::zeros(r, c);
        for (j, col) in cols.iter().enumerate() {
            assert_eq!(col.len(), r, "ragged columns");
            for (i, &x) in col.iter().enumerate() {
                m[(i, j)] = x;
            }
        }
        m
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

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).collect()
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    /// Matrix product `self * rhs`.
    ///
    /// Panics if the inner dimensions disagree.
    pub fn matmul(&self, rhs: &DenseMatrix) -> DenseMatrix {
        assert_eq!(
            self.cols, rhs.rows,
            "matmul of {}x{} by {}x{}",
            self.rows, self.cols, rhs.rows, rhs.cols
        );
        let mut out = Self::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                let rrow = rhs.row(k);
                let orow = &mut out.data[i * rhs.cols..(i + 1) * rhs.cols];
                for (o, &b) in orow.iter_mut().zip(rrow) {
                    *o += a * b;
                }
            }
        }
        out
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(self.cols, x.len(), "matvec dimension mismatch");
        (0..self.rows).map(|i| dot(self.row(i), x)).collect()
    }

    /// Row vector times matrix: `xᵗ·self`.
    pub fn vecmat(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(self.rows, x.len(), "vecmat dimension mismatch");
        let mut out = vec![0.0; self.cols];
        for (i, &xi) in x.iter().enumerate() {
            for (o, &a) in out.iter_mut().zip(self.row(i)) {
                *o += xi * a;
            }
        }
        out
    }

    pub fn add(&self, rhs: &DenseMatrix) -> DenseMatrix {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        let data = self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect();
        DenseMatrix { data, ..*self }
    }

    pub fn sub(&self, rhs: &DenseMatrix) -> DenseMatrix {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        let data = self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect();
        DenseMatrix { data, ..*self }
    }

    pub fn scale(&self, s: f64) -> DenseMatrix {
        DenseMatrix {
            data: self.data.iter().map(|a| a * s).collect(),
            ..*self
        }
    }

    /// `diag(d) * self`.
    pub fn scale_rows(&self, d: &[f64]) -> DenseMatrix {
        assert_eq!(d.len(), self.rows);
        let mut out = self.clone();
        for i in 0..self.rows {
            for j in 0..self.cols {
                out[(i, j)] *= d[i];
            }
        }
        out
    }

    /// `self * diag(d)`.
    pub fn scale_cols(&self, d: &[f64]) -> DenseMatrix {
        assert_eq!(d.len(), self.cols);
        let mut out = self.clone();
        for i in 0..self.rows {
            for j in 0..self.cols {
                out[(i, j)] *= d[j];
            }
        }
        out
    }

    /// Contiguous block `[r0, r1) x [c0, c1)`.
    pub fn submatrix(&self, r0: usize, r1: usize, c0: usize, c1: usize) -> DenseMatrix {
        let mut out = Self::zeros(r1 - r0, c1 - c0);
        for i in r0..r1 {
            for j in c0..c1 {
                out[(i - r0, j - c0)] = self[(i, j)];
            }
        }
        out
    }

    /// Symmetric permutation: entry `(i, j)` of the result is `self[(perm[i], perm[j])]`.
    pub fn permute(&self, perm: &[usize]) -> DenseMatrix {
        assert!(self.is_square() && perm.len() == self.rows);
        let mut out = Self::zeros(self.rows, self.cols);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out[(i, j)] = self[(perm[i], perm[j])];
            }
        }
        out
    }

    /// Largest absolute entry.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    /// Maximum absolute row sum.
    pub fn norm_inf(&self) -> f64 {
        (0..self.rows)
            .map(|i| self.row(i).iter().map(|x| x.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// Maximum absolute column sum.
    pub fn norm_one(&self) -> f64 {
        (0..self.cols)
            .map(|j| (0..self.rows).map(|i| self[(i, j)].abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn max_abs_diff(&self, other: &DenseMatrix) -> f64 {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data
            .iter()
            .zip(&other.data)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    /// Largest `|S_ij - S_ji|`; `None` for non-square input.
    pub fn asymmetry(&self) -> Option<f64> {
        if !self.is_square() {
            return None;
        }
        let mut worst: f64 = 0.0;
        for i in 0..self.rows {
            for j in i + 1..self.cols {
                worst = worst.max((self[(i, j)] - self[(j, i)]).abs());
            }
        }
        Some(worst)
    }

    fn check_symmetric(&self) -> Result<()> {
        let tol = 1e-10 * self.max_abs();
        match self.asymmetry() {
            None => Err(LinalgError::DimensionMismatch(format!(
                "expected a square matrix, got {}x{}",
                self.rows, self.cols
            ))),
            Some(a) if a > tol => Err(LinalgError::NotSymmetric { asymmetry: a, tol }),
            Some(_) => Ok(()),
        }
    }
}

impl Index<(usize, usize)> for DenseMatrix {
    type Output = f64;

    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for DenseMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

impl fmt::Debug for DenseMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "DenseMatrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            write!(f, "  ")?;
            for x in self.row(i) {
                write!(f, "{x:>14.7} ")?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

impl From<DenseMatrix> for Vec<Vec<f64>> {
    fn from(m: DenseMatrix) -> Self {
        m.to_rows()
    }
}

impl TryFrom<Vec<Vec<f64>>> for DenseMatrix {
    type Error = LinalgError;

    fn try_from(rows: Vec<Vec<f64>>) -> Result<Self> {
        DenseMatrix::from_rows(&rows)
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

// ---------------------------------------------------------------------------
// Symmetric eigendecomposition
// ---------------------------------------------------------------------------

const JACOBI_MAX_SWEEPS: usize = 100;

/// Eigenvalues (ascending) and orthonormal eigenvectors (as columns) of a
/// symmetric matrix, by cyclic Jacobi rotations.
///
/// Each eigenvector is signed so that its largest-magnitude component is
/// positive, which makes the output deterministic.
pub fn sym_eigen(s: &DenseMatrix) -> Result<(Vec<f64>, DenseMatrix)> {
    s.check_symmetric()?;
    let n = s.rows();
    // Work on the exactly symmetric part.
    let mut a = s.clone();
    for i in 0..n {
        for j in i + 1..n {
            let m = 0.5 * (a[(i, j)] + a[(j, i)]);
            a[(i, j)] = m;
            a[(j, i)] = m;
        }
    }
    let mut v = DenseMatrix::identity(n);

    // A pair is rotated only while |a_pq| > ε·sqrt(|a_pp a_qq|). This
    // relative test (rather than one against ‖S‖) keeps small eigenvalues of
    // definite matrices accurate to working precision, which the transfer
    // function and the star construction rely on for widely spread rates.
    let mut sweeps = 0;
    loop {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[(p, q)];
                let app = a[(p, p)];
                let aqq = a[(q, q)];
                if apq == 0.0 || apq.abs() <= f64::EPSILON * (app * aqq).abs().sqrt() {
                    continue;
                }
                rotated = true;
                let theta = (aqq - app) / (2.0 * apq);
                let t = if theta == 0.0 {
                    1.0
                } else {
                    theta.signum() / (theta.abs() + theta.hypot(1.0))
                };
                let c = 1.0 / t.hypot(1.0);
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
                a[(p, p)] = app - t * apq;
                a[(q, q)] = aqq + t * apq;
                a[(p, q)] = 0.0;
                a[(q, p)] = 0.0;
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - sn * vkq;
                    v[(k, q)] = sn * vkp + c * vkq;
                }
            }
        }
        if !rotated {
            break;
        }
        sweeps += 1;
        if sweeps == JACOBI_MAX_SWEEPS {
            return Err(LinalgError::NoConvergence {
                sweeps: JACOBI_MAX_SWEEPS,
            });
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(i, i)].total_cmp(&a[(j, j)]));
    let values = order.iter().map(|&i| a[(i, i)]).collect();
    let mut vectors = DenseMatrix::zeros(n, n);
    for (new, &old) in order.iter().enumerate() {
        let col = v.column(old);
        let pivot = col
            .iter()
            .copied()
            .fold(0.0_f64, |m, x| if x.abs() > m.abs() { x } else { m });
        let sign = if pivot < 0.0 { -1.0 } else { 1.0 };
        for (i, x) in col.into_iter().enumerate() {
            vectors[(i, new)] = sign * x;
        }
    }
    Ok((values, vectors))
}

// ---------------------------------------------------------------------------
// Lanczos
// ---------------------------------------------------------------------------

/// Output of a completed Lanczos tridiagonalization.
#[derive(Debug, Clone)]
pub struct LanczosResult {
    /// Orthogonal basis, `q[:, 0]` equal to the starting vector.
    pub q: DenseMatrix,
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    pub steps_completed: usize,
}

impl LanczosResult {
    /// The symmetric tridiagonal matrix `QᵗSQ` assembled from `alpha` and `beta`.
    pub fn tridiagonal(&self) -> DenseMatrix {
        let m = self.alpha.len();
        let mut t = DenseMatrix::from_diag(&self.alpha);
        for (k, &b) in self.beta.iter().enumerate() {
            t[(k, k + 1)] = b;
            t[(k + 1, k)] = b;
        }
        debug_assert_eq!(t.rows(), m);
        t
    }
}

/// When to re-orthogonalize Lanczos residuals against earlier basis vectors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Reorthogonalization {
    /// Plain three-term recurrence up to dimension 20, full beyond.
    #[default]
    Auto,
    Never,
    Always,
}

/// Lanczos tridiagonalization of a symmetric `s` started from unit vector `q1`.
pub fn lanczos(s: &DenseMatrix, q1: &[f64]) -> Result<LanczosResult> {
    lanczos_with(s, q1, Reorthogonalization::Auto)
}

pub fn lanczos_with(
    s: &DenseMatrix,
    q1: &[f64],
    reorth: Reorthogonalization,
) -> Result<LanczosResult> {
    s.check_symmetric()?;
    let m = s.rows();
    if q1.len() != m {
        return Err(LinalgError::DimensionMismatch(format!(
            "start vector has length {}, matrix is {m}x{m}",
            q1.len()
        )));
    }
    let nq = norm2(q1);
    if (nq - 1.0).abs() > 1e-12 {
        return Err(LinalgError::NotUnit(nq));
    }
    let full = match reorth {
        Reorthogonalization::Auto => m > 20,
        Reorthogonalization::Never => false,
        Reorthogonalization::Always => true,
    };
    let tol = 1e-10 * s.max_abs();

    let mut qs: Vec<Vec<f64>> = Vec::with_capacity(m);
    let mut alpha = Vec::with_capacity(m);
    let mut beta: Vec<f64> = Vec::with_capacity(m.saturating_sub(1));
    qs.push(q1.to_vec());
    for k in 0..m {
        let qk = &qs[k];
        let sq = s.matvec(qk);
        let a = dot(qk, &sq);
        alpha.push(a);
        if k + 1 == m {
            break;
        }
        let mut r: Vec<f64> = sq.iter().zip(qk).map(|(x, q)| x - a * q).collect();
        if k > 0 {
            let b = beta[k - 1];
            for (ri, qi) in r.iter_mut().zip(&qs[k - 1]) {
                *ri -= b * qi;
            }
        }
        if full {
            for _ in 0..2 {
                for qj in &qs {
                    let c = dot(&r, qj);
                    for (ri, q) in r.iter_mut().zip(qj) {
                        *ri -= c * q;
                    }
                }
            }
        }
        let b = norm2(&r);
        if b <= tol {
            return Err(LinalgError::Breakdown { step: k + 1, beta: b });
        }
        beta.push(b);
        qs.push(r.into_iter().map(|x| x / b).collect());
    }
    Ok(LanczosResult {
        q: DenseMatrix::from_columns(&qs),
        alpha,
        beta,
        steps_completed: m,
    })
}

// ---------------------------------------------------------------------------
// Cholesky
// ---------------------------------------------------------------------------

/// Upper-triangular `U` with positive diagonal such that `UᵗU = S`.
pub fn cholesky_upper(s: &DenseMatrix) -> Result<DenseMatrix> {
    s.check_symmetric()?;
    let n = s.rows();
    let pd_tol = 1e-14 * s.max_abs();
    let mut u = DenseMatrix::zeros(n, n);
    for j in 0..n {
        let mut d = s[(j, j)];
        for k in 0..j {
            d -= u[(k, j)] * u[(k, j)];
        }
        if d <= pd_tol || !d.is_finite() {
            return Err(LinalgError::NotPositiveDefinite { pivot: j, value: d });
        }
        let ujj = d.sqrt();
        u[(j, j)] = ujj;
        for i in j + 1..n {
            let mut x = s[(j, i)];
            for k in 0..j {
                x -= u[(k, j)] * u[(k, i)];
            }
            u[(j, i)] = x / ujj;
        }
    }
    Ok(u)
}

/// Triangular factor `R` (positive diagonal) of a Householder QR of a tall or
/// square matrix `Y = QR`, so that `RᵗR = YᵗY` without ever forming `YᵗY`.
///
/// This is the Cholesky factor of the Gram matrix computed at the
/// conditioning of `Y` instead of its square.
pub fn qr_upper(y: &DenseMatrix) -> Result<DenseMatrix> {
    qr_upper_apply(y, &vec![0.0; y.rows()]).map(|(r, _)| r)
}

/// As [`qr_upper`], also returning the leading `cols(Y)` entries of `Qᵗb`
/// (with the same sign convention as `R`).
pub fn qr_upper_apply(y: &DenseMatrix, b: &[f64]) -> Result<(DenseMatrix, Vec<f64>)> {
    let (m, n) = (y.rows(), y.cols());
    if m < n || b.len() != m {
        return Err(LinalgError::DimensionMismatch(format!(
            "QR needs rows >= cols and a matching right-hand side, got {m}x{n} and {}",
            b.len()
        )));
    }
    let mut a = y.clone();
    let mut rhs = b.to_vec();
    for k in 0..n {
        let norm = (k..m).map(|i| a[(i, k)] * a[(i, k)]).sum::<f64>().sqrt();
        if norm == 0.0 || !norm.is_finite() {
            return Err(LinalgError::Singular {
                pivot: k,
                value: norm,
            });
        }
        let alpha = if a[(k, k)] > 0.0 { -norm } else { norm };
        let mut v: Vec<f64> = (k..m).map(|i| a[(i, k)]).collect();
        v[0] -= alpha;
        let vnorm2: f64 = v.iter().map(|x| x * x).sum();
        if vnorm2 == 0.0 {
            continue;
        }
        for j in k..n {
            let proj = (k..m).map(|i| v[i - k] * a[(i, j)]).sum::<f64>() * 2.0 / vnorm2;
            for i in k..m {
                a[(i, j)] -= proj * v[i - k];
            }
        }
        let proj = (k..m).map(|i| v[i - k] * rhs[i]).sum::<f64>() * 2.0 / vnorm2;
        for i in k..m {
            rhs[i] -= proj * v[i - k];
        }
    }
    let mut r = DenseMatrix::zeros(n, n);
    let mut qtb = vec![0.0; n];
    for i in 0..n {
        let sign = if a[(i, i)] < 0.0 { -1.0 } else { 1.0 };
        for j in i..n {
            r[(i, j)] = sign * a[(i, j)];
        }
        qtb[i] = sign * rhs[i];
    }
    Ok((r, qtb))
}

/// Solves `U x = b` for upper-triangular `U` by back-substitution.
pub fn solve_upper(u: &DenseMatrix, b: &[f64]) -> Result<Vec<f64>> {
    let n = u.rows();
    if !u.is_square() || b.len() != n {
        return Err(LinalgError::DimensionMismatch("solve_upper".into()));
    }
    let mut x = b.to_vec();
    for i in (0..n).rev() {
        let mut acc = x[i];
        for j in i + 1..n {
            acc -= u[(i, j)] * x[j];
        }
        let d = u[(i, i)];
        if d == 0.0 {
            return Err(LinalgError::Singular { pivot: i, value: d });
        }
        x[i] = acc / d;
    }
    Ok(x)
}

/// Computes `Y·U⁻¹` for upper-triangular `U` without forming the inverse.
pub fn right_solve_upper(y: &DenseMatrix, u: &DenseMatrix) -> Result<DenseMatrix> {
    // (Y U⁻¹)ᵗ = U⁻ᵗ Yᵗ: forward substitution with Uᵗ on each row of Y.
    let n = u.rows();
    if !u.is_square() || y.cols() != n {
        return Err(LinalgError::DimensionMismatch("right_solve_upper".into()));
    }
    let mut out = DenseMatrix::zeros(y.rows(), n);
    for r in 0..y.rows() {
        for j in 0..n {
            let mut acc = y[(r, j)];
            for k in 0..j {
                acc -= out[(r, k)] * u[(k, j)];
            }
            let d = u[(j, j)];
            if d == 0.0 {
                return Err(LinalgError::Singular { pivot: j, value: d });
            }
            out[(r, j)] = acc / d;
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// LU: solve and determinant
// ---------------------------------------------------------------------------

struct Lu {
    lu: DenseMatrix,
    perm: Vec<usize>,
    sign: f64,
}

fn lu_factor(z: &DenseMatrix, require_nonsingular: bool) -> Result<Lu> {
    if !z.is_square() {
        return Err(LinalgError::DimensionMismatch(format!(
            "expected a square matrix, got {}x{}",
            z.rows(),
            z.cols()
        )));
    }
    let n = z.rows();
    let tol = 1e-13 * z.max_abs();
    let mut lu = z.clone();
    let mut perm: Vec<usize> = (0..n).collect();
    let mut sign = 1.0;
    for k in 0..n {
        let p = (k..n)
            .max_by(|&a, &b| lu[(a, k)].abs().total_cmp(&lu[(b, k)].abs()))
            .unwrap();
        let pv = lu[(p, k)];
        if pv.abs() <= tol || pv == 0.0 {
            if require_nonsingular {
                return Err(LinalgError::Singular { pivot: k, value: pv });
            }
            // Exactly singular for determinant purposes.
            continue;
        }
        if p != k {
            for j in 0..n {
                let t = lu[(k, j)];
                lu[(k, j)] = lu[(p, j)];
                lu[(p, j)] = t;
            }
            perm.swap(k, p);
            sign = -sign;
        }
        for i in k + 1..n {
            let f = lu[(i, k)] / lu[(k, k)];
            lu[(i, k)] = f;
            if f != 0.0 {
                for j in k + 1..n {
                    lu[(i, j)] -= f * lu[(k, j)];
                }
            }
        }
    }
    Ok(Lu { lu, perm, sign })
}

impl Lu {
    fn solve_vec(&self, b: &[f64]) -> Vec<f64> {
        let n = self.lu.rows();
        let mut x: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            for j in 0..i {
                x[i] -= self.lu[(i, j)] * x[j];
            }
        }
        for i in (0..n).rev() {
            for j in i + 1..n {
                x[i] -= self.lu[(i, j)] * x[j];
            }
            x[i] /= self.lu[(i, i)];
        }
        x
    }
}

/// Solves `Z x = b`.
pub fn solve(z: &DenseMatrix, b: &[f64]) -> Result<Vec<f64>> {
    if b.len() != z.rows() {
        return Err(LinalgError::DimensionMismatch(format!(
            "rhs length {} for {}x{} system",
            b.len(),
            z.rows(),
            z.cols()
        )));
    }
    Ok(lu_factor(z, true)?.solve_vec(b))
}

/// Solves `Z X = B` column by column.
pub fn solve_matrix(z: &DenseMatrix, b: &DenseMatrix) -> Result<DenseMatrix> {
    if b.rows() != z.rows() {
        return Err(LinalgError::DimensionMismatch(format!(
            "rhs has {} rows for {}x{} system",
            b.rows(),
            z.rows(),
            z.cols()
        )));
    }
    let lu = lu_factor(z, true)?;
    let cols: Vec<Vec<f64>> = (0..b.cols()).map(|j| lu.solve_vec(&b.column(j))).collect();
    Ok(DenseMatrix::from_columns(&cols))
}

pub fn inverse(z: &DenseMatrix) -> Result<DenseMatrix> {
    solve_matrix(z, &DenseMatrix::identity(z.rows()))
}

/// Determinant by LU with partial pivoting.
pub fn det(z: &DenseMatrix) -> Result<f64> {
    let lu = lu_factor(z, false)?;
    Ok(lu.sign * lu.lu.diagonal().iter().product::<f64>())
}

// ---------------------------------------------------------------------------
// Singular values and rank
// ---------------------------------------------------------------------------

/// Singular values in descending order, by one-sided Jacobi rotations.
pub fn singular_values(z: &DenseMatrix) -> Vec<f64> {
    // Orthogonalize the columns of a tall matrix.
    let a = if z.rows() >= z.cols() {
        z.clone()
    } else {
        z.transpose()
    };
    let (m, n) = (a.rows(), a.cols());
    let mut cols: Vec<Vec<f64>> = (0..n).map(|j| a.column(j)).collect();
    for _sweep in 0..100 {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let alpha = dot(&cols[p], &cols[p]);
                let beta = dot(&cols[q], &cols[q]);
                let gamma = dot(&cols[p], &cols[q]);
                if gamma == 0.0 || gamma.abs() <= f64::EPSILON * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let t = if zeta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for i in 0..m {
                    let xp = cols[p][i];
                    let xq = cols[q][i];
                    cols[p][i] = c * xp - s * xq;
                    cols[q][i] = s * xp + c * xq;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let mut sv: Vec<f64> = cols.iter().map(|c| norm2(c)).collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    sv
}

/// Default rank threshold: `max(rows, cols) · ε · σ_max`.
pub fn default_rank_tol(z: &DenseMatrix, sigma_max: f64) -> f64 {
    z.rows().max(z.cols()) as f64 * f64::EPSILON * sigma_max
}

/// Number of singular values above [`default_rank_tol`].
pub fn numerical_rank(z: &DenseMatrix) -> usize {
    let sv = singular_values(z);
    let smax = sv.first().copied().unwrap_or(0.0);
    let tol = default_rank_tol(z, smax);
    sv.iter().filter(|&&s| s > tol).count()
}

/// Number of singular values above an explicit threshold.
pub fn numerical_rank_with_tol(z: &DenseMatrix, tol: f64) -> usize {
    singular_values(z).iter().filter(|&&s| s > tol).count()
}
