//! Input-output analysis of a realization: controllability and
//! observability, Markov parameters, transfer functions and frequency
//! response.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{self, dot, norm2, DenseMatrix};
use crate::network::{self, StateSpace};
use crate::poly;
use crate::Tolerances;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RealizationError {
    #[error("transfer function has a pole on the imaginary axis near omega = {omega}")]
    PoleOnAxis { omega: f64 },
}

/// `[B, AB, …, A^{n-1}B]`.
pub fn controllability_matrix(ss: &StateSpace) -> DenseMatrix {
    let cols = krylov_columns(ss.a(), ss.b(), ss.n());
    DenseMatrix::from_columns(&cols)
}

/// Rows `C, CA, …, CA^{n-1}`.
pub fn observability_matrix(ss: &StateSpace) -> DenseMatrix {
    let at = ss.a().transpose();
    let rows = krylov_columns(&at, ss.c(), ss.n());
    DenseMatrix::from_rows(&rows).expect("finite Krylov rows")
}

fn krylov_columns(a: &DenseMatrix, start: Vec<f64>, count: usize) -> Vec<Vec<f64>> {
    let mut cols = Vec::with_capacity(count);
    let mut v = start;
    for _ in 0..count {
        let next = a.matvec(&v);
        cols.push(v);
        v = next;
    }
    cols
}

/// Dimension of the Krylov space `span{v, Mv, M²v, …}` computed with an
/// orthonormal (Arnoldi) basis, plus the normalized subdiagonal entries
/// `h_{k+1,k}/‖M‖_F` that decided it.
///
/// The monomial Krylov matrix becomes exponentially ill-conditioned when the
/// spectrum is spread out, so rank decisions go through this orthogonal
/// recurrence instead of its singular values.
pub fn krylov_rank(m: &DenseMatrix, start: &[f64], rank_tol: f64) -> (usize, Vec<f64>) {
    let n = m.rows();
    let scale = m.frobenius_norm();
    let nv = norm2(start);
    if nv == 0.0 || n == 0 {
        return (0, Vec::new());
    }
    let mut basis: Vec<Vec<f64>> = vec![start.iter().map(|x| x / nv).collect()];
    let mut gaps = Vec::new();
    while basis.len() < n {
        let mut w = m.matvec(basis.last().unwrap());
        for _ in 0..2 {
            for q in &basis {
                let c = dot(&w, q);
                for (wi, qi) in w.iter_mut().zip(q) {
                    *wi -= c * qi;
                }
            }
        }
        let h = norm2(&w);
        let rel = if scale > 0.0 { h / scale } else { 0.0 };
        gaps.push(rel);
        if rel <= rank_tol {
            break;
        }
        basis.push(w.into_iter().map(|x| x / h).collect());
    }
    (basis.len(), gaps)
}

/// Rank of `(A, B)` controllability.
pub fn controllability_rank(ss: &StateSpace, tol: &Tolerances) -> usize {
    krylov_rank(ss.a(), &ss.b(), tol.rank_tol).0
}

/// Rank of `(A, C)` observability.
pub fn observability_rank(ss: &StateSpace, tol: &Tolerances) -> usize {
    krylov_rank(&ss.a().transpose(), &ss.c(), tol.rank_tol).0
}

/// Outcome of a minimality test, with the numbers behind it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinimalityReport {
    pub n: usize,
    pub minimal: bool,
    /// Controllability rank from the orthogonal Krylov recurrence.
    pub rank: usize,
    /// Observability rank from the same recurrence on `(Aᵗ, Cᵗ)`.
    pub observability_rank: usize,
    /// Normalized Krylov subdiagonals; the first one at or below `rank_tol`
    /// ends the rank count.
    pub krylov_gaps: Vec<f64>,
    pub rank_tol: f64,
    /// Singular values of the controllability matrix with unit-norm columns.
    pub controllability_singular_values: Vec<f64>,
    /// Rank of that matrix under the default spectral threshold.
    pub spectral_rank: usize,
    /// For star-shaped `A`: groups (1-based zone indices) of immobile zones
    /// sharing one rate. Any such group rules out minimality.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub duplicate_rate_groups: Option<Vec<Vec<usize>>>,
}

pub fn is_minimal(ss: &StateSpace) -> MinimalityReport {
    is_minimal_with(ss, &Tolerances::default())
}

pub fn is_minimal_with(ss: &StateSpace, tol: &Tolerances) -> MinimalityReport {
    let n = ss.n();
    let (rank, krylov_gaps) = krylov_rank(ss.a(), &ss.b(), tol.rank_tol);
    let observability_rank = observability_rank(ss, tol);
    let mut cols = krylov_columns(ss.a(), ss.b(), n);
    for c in &mut cols {
        let nc = norm2(c);
        if nc > 0.0 && nc.is_finite() {
            c.iter_mut().for_each(|x| *x /= nc);
        }
    }
    let normalized = DenseMatrix::from_columns(&cols);
    let controllability_singular_values = linalg::singular_values(&normalized);
    let spectral_rank = linalg::numerical_rank(&normalized);
    MinimalityReport {
        n,
        minimal: rank == n,
        rank,
        observability_rank,
        krylov_gaps,
        rank_tol: tol.rank_tol,
        controllability_singular_values,
        spectral_rank,
        duplicate_rate_groups: star_duplicate_groups(ss, tol),
    }
}

/// Groups of equal immobile rates when `Ã` is diagonal, `None` otherwise.
fn star_duplicate_groups(ss: &StateSpace, tol: &Tolerances) -> Option<Vec<Vec<usize>>> {
    let at = ss.a_tilde();
    let k = at.rows();
    let thr = tol.struct_tol * ss.a().max_abs();
    for i in 0..k {
        for j in 0..k {
            if i != j && at[(i, j)].abs() > thr {
                return None;
            }
        }
    }
    let diag = at.diagonal();
    let groups = group_close(&diag, tol.eig_sep_tol)
        .into_iter()
        .filter(|g| g.len() > 1)
        .map(|g| g.into_iter().map(|i| i + 2).collect())
        .collect();
    Some(groups)
}

/// Partitions indices into clusters of values agreeing to `rel` relative to
/// their magnitude (single linkage on the sorted values).
pub(crate) fn group_close(values: &[f64], rel: f64) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for idx in order {
        match groups.last_mut() {
            Some(g) if close(values[idx], values[*g.last().unwrap()], rel) => g.push(idx),
            _ => groups.push(vec![idx]),
        }
    }
    groups
}

fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs())
}

/// `C A^j B` for `j = 0..count`.
pub fn markov_parameters(ss: &StateSpace, count: usize) -> Vec<f64> {
    let mut v = ss.b();
    let c = ss.c();
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        out.push(dot(&c, &v));
        v = ss.a().matvec(&v);
    }
    out
}

/// Largest difference between the first `count` Markov parameters of two
/// realizations after rescaling time so that both system matrices have
/// infinity norm at most one. The rescaled sequences are bounded by
/// `m₀ = CB = 1`, so this is a relative deviation.
pub fn markov_deviation(a: &StateSpace, b: &StateSpace, count: usize) -> f64 {
    let s = a.a().norm_inf().max(b.a().norm_inf()).max(f64::MIN_POSITIVE);
    let sa = StateSpace::new(a.a().scale(1.0 / s)).expect("square");
    let sb = StateSpace::new(b.a().scale(1.0 / s)).expect("square");
    let ma = markov_parameters(&sa, count);
    let mb = markov_parameters(&sb, count);
    let scale = ma
        .iter()
        .chain(&mb)
        .fold(0.0_f64, |m, x| m.max(x.abs()))
        .max(f64::MIN_POSITIVE);
    ma.iter()
        .zip(&mb)
        .map(|(x, y)| (x - y).abs() / scale)
        .fold(0.0, f64::max)
}

/// Strictly proper rational function `num(s)/den(s)`, coefficients in
/// ascending degree, `den` monic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransferFunction {
    pub num: Vec<f64>,
    pub den: Vec<f64>,
}

impl TransferFunction {
    pub fn evaluate(&self, s: Complex64) -> Complex64 {
        poly::eval_complex(&self.num, s) / poly::eval_complex(&self.den, s)
    }

    /// `T(0)`.
    pub fn dc_gain(&self) -> f64 {
        self.num[0] / self.den[0]
    }

    pub fn degree(&self) -> usize {
        poly::degree(&self.den)
    }

    /// Largest coefficient difference, zero-padding the shorter vectors.
    pub fn coefficient_deviation(&self, other: &TransferFunction) -> f64 {
        fn diff(a: &[f64], b: &[f64]) -> f64 {
            (0..a.len().max(b.len()))
                .map(|k| (a.get(k).unwrap_or(&0.0) - b.get(k).unwrap_or(&0.0)).abs())
                .fold(0.0, f64::max)
        }
        diff(&self.num, &other.num).max(diff(&self.den, &other.den))
    }
}

/// Characteristic polynomial `det(zI - A)`, ascending, monic.
///
/// For compartmental matrices this is the product over the eigenvalues of the
/// symmetrized matrix `V^{1/2}AV^{-1/2}`: all roots are negative, so every
/// coefficient is a sum of positive terms and keeps full relative accuracy
/// however widely the rates are spread. Other matrices go through
/// Faddeev–LeVerrier, which is exact on small integer input but loses the
/// low-order coefficients once the spectrum spans several decades.
pub fn characteristic_polynomial(a: &DenseMatrix) -> Vec<f64> {
    match symmetric_roots(a) {
        Some(roots) => poly::from_roots(&roots),
        None => faddeev_leverrier(a),
    }
}

fn symmetric_roots(a: &DenseMatrix) -> Option<Vec<f64>> {
    let d = network::recover_volumes(a).ok()?;
    let s = network::symmetrized_block(a, &d.volumes);
    linalg::sym_eigen(&s).ok().map(|(vals, _)| vals)
}

fn faddeev_leverrier(a: &DenseMatrix) -> Vec<f64> {
    let n = a.rows();
    let mut coeffs = vec![0.0; n + 1];
    coeffs[n] = 1.0;
    let mut m = DenseMatrix::zeros(n, n);
    for k in 1..=n {
        // M_k = A M_{k-1} + c_{n-k+1} I
        let mut next = a.matmul(&m);
        for i in 0..n {
            next[(i, i)] += coeffs[n - k + 1];
        }
        let am = a.matmul(&next);
        let trace: f64 = (0..n).map(|i| am[(i, i)]).sum();
        coeffs[n - k] = -trace / k as f64;
        m = next;
    }
    coeffs
}

pub fn transfer_function(ss: &StateSpace) -> TransferFunction {
    transfer_function_with(ss, Tolerances::default().gcd_tol)
}

/// `C(sI - A)⁻¹B = det(sI - Ã)/det(sI - A)`, reduced to coprime form.
///
/// With a recoverable volume vector both determinants factor over real
/// eigenvalues, and a pole and a zero within `gcd_tol` (relative) of each
/// other cancel. Their ratio `z/p` is folded into the numerator so that the
/// static gain `T(0)` is unchanged by the cancellation. Otherwise the common factor is removed by a Euclidean GCD at
/// the same tolerance.
pub fn transfer_function_with(ss: &StateSpace, gcd_tol: f64) -> TransferFunction {
    if ss.n() == 1 {
        return TransferFunction {
            num: vec![1.0],
            den: characteristic_polynomial(ss.a()),
        };
    }
    if let Ok(d) = network::recover_volumes(ss.a()) {
        let full = network::symmetrized_block(ss.a(), &d.volumes);
        let inner = network::symmetrized_block(&ss.a_tilde(), &d.volumes[1..]);
        if let (Ok((poles, _)), Ok((zeros, _))) = (linalg::sym_eigen(&full), linalg::sym_eigen(&inner)) {
            let (zeros, poles, gain) = cancel_common_roots(zeros, poles, gcd_tol);
            return TransferFunction {
                num: poly::from_roots(&zeros).iter().map(|c| c * gain).collect(),
                den: poly::from_roots(&poles),
            };
        }
    }
    let den = faddeev_leverrier(ss.a());
    let num = faddeev_leverrier(&ss.a_tilde());
    let g = poly::gcd(&den, &num, gcd_tol);
    if poly::degree(&g) == 0 {
        return TransferFunction { num, den };
    }
    let (num, _) = poly::divrem(&num, &g);
    let (den, _) = poly::divrem(&den, &g);
    let lead = *den.last().unwrap();
    TransferFunction {
        num: num.iter().map(|c| c / lead).collect(),
        den: den.iter().map(|c| c / lead).collect(),
    }
}

/// Removes each zero together with the nearest remaining pole when they agree
/// to `tol` relative to the pole's magnitude; also returns the product of the
/// removed ratios `z/p`.
fn cancel_common_roots(zeros: Vec<f64>, mut poles: Vec<f64>, tol: f64) -> (Vec<f64>, Vec<f64>, f64) {
    let mut gain = 1.0;
    let mut kept = Vec::with_capacity(zeros.len());
    for z in zeros {
        let nearest = poles
            .iter()
            .enumerate()
            .min_by(|a, b| (a.1 - z).abs().total_cmp(&(b.1 - z).abs()));
        match nearest {
            Some((k, &p)) if (p - z).abs() <= tol * p.abs().max(z.abs()) => {
                gain *= z / p;
                poles.remove(k);
            }
            _ => kept.push(z),
        }
    }
    (kept, poles, gain)
}

/// `T(iω)` for each `ω`.
pub fn frequency_response(
    tf: &TransferFunction,
    omegas: &[f64],
) -> Result<Vec<Complex64>, RealizationError> {
    omegas
        .iter()
        .map(|&w| {
            let s = Complex64::new(0.0, w);
            let d = poly::eval_complex(&tf.den, s);
            let scale: f64 = tf
                .den
                .iter()
                .enumerate()
                .map(|(k, c)| c.abs() * w.abs().powi(k as i32))
                .sum();
            if d.norm() <= 1e-9 * scale {
                return Err(RealizationError::PoleOnAxis { omega: w });
            }
            Ok(poly::eval_complex(&tf.num, s) / d)
        })
        .collect()
}

/// `count` logarithmically spaced frequencies from `lo` to `hi`.
pub fn log_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    match count {
        0 => return Vec::new(),
        1 => return vec![lo],
        _ => {}
    }
    let (a, b) = (lo.ln(), hi.ln());
    let mut grid: Vec<f64> = (0..count)
        .map(|k| (a + (b - a) * k as f64 / (count - 1) as f64).exp())
        .collect();
    grid[0] = lo;
    grid[count - 1] = hi;
    grid
}
