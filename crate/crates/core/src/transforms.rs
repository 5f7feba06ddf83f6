//! Equivalent star (MRMT) and chain (MINC) realizations.
//!
//! Both constructions are similarity transforms `Ā = R⁻¹AR` that keep the
//! input and output channels (`R⁻¹B = B`, `CR = C`) and land on a matrix that
//! again satisfies the compartmental assumptions, so the result reads as a
//! physical network with positive volumes and exchange rates.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{self, norm2, DenseMatrix, LinalgError, Reorthogonalization};
use crate::network::{
    self, build_state_space, check_assumptions, recover_volumes, Edge, NetworkError, NetworkSpec,
    Normalization, StateSpace, ValidationReport,
};
use crate::realization::{self, is_minimal_with, MinimalityReport, TransferFunction};
use crate::Tolerances;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TransformError {
    #[error("system is not controllable (rank {} of {})", .0.rank, .0.n)]
    NotControllable(Box<MinimalityReport>),
    #[error("immobile eigenvalues are numerically indistinct (gap {gap:e}, tolerance {tol:e})")]
    NumericallyDegenerate { gap: f64, tol: f64 },
    #[error("Lanczos broke down at step {step}; the input does not reach every mode")]
    LanczosBreakdown { step: usize },
    #[error("positivity violated: entry {index} of the scaling vector is {value:e}")]
    PositivityViolation { index: usize, value: f64 },
    #[error("matrix violates the compartmental assumptions")]
    AssumptionViolation(Box<ValidationReport>),
    #[error("reduction would remove every immobile zone")]
    EmptyModel,
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Network(#[from] NetworkError),
}

pub type Result<T> = std::result::Result<T, TransformError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Structure {
    #[serde(rename = "MRMT")]
    Mrmt,
    #[serde(rename = "MINC")]
    Minc,
}

impl std::fmt::Display for Structure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Structure::Mrmt => "MRMT",
            Structure::Minc => "MINC",
        })
    }
}

/// A realization equivalent (or, after truncation, close) to a source system.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EquivalentRealization {
    pub structure: Structure,
    /// Change of coordinates with `A·R = R·Ā`; square and invertible for a
    /// plain transform, `n x k` after exact reduction, absent after truncation.
    pub transform: Option<DenseMatrix>,
    pub system: StateSpace,
    /// Volumes and exchange rates of the equivalent network.
    pub params: NetworkSpec,
    /// Named verification norms.
    pub residuals: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub normalization: Option<Normalization>,
}

impl EquivalentRealization {
    pub fn to_json(&self) -> String {
        crate::json::to_string(self)
    }
}

/// Spectral data of `Ã` obtained through the symmetric similarity
/// `S = Ṽ^{1/2}ÃṼ^{-1/2} = WΛWᵗ`, so that `P = Ṽ^{-1/2}W` diagonalizes `Ã`.
pub(crate) struct Modes {
    /// Immobile volumes `Ṽ`.
    pub volumes: Vec<f64>,
    /// Eigenvalues of `Ã`, ascending (most negative first).
    pub lambda: Vec<f64>,
    /// `P = Ṽ^{-1/2}W`.
    pub p: DenseMatrix,
    /// Input weights `g = P⁻¹A(2:n,1) = WᵗṼ^{1/2}A(2:n,1)`.
    pub weights: Vec<f64>,
}

pub(crate) fn modes(ss: &StateSpace) -> Result<Modes> {
    let d = recover_volumes(ss.a())?;
    let volumes = d.volumes[1..].to_vec();
    let s = network::symmetrized_block(&ss.a_tilde(), &volumes);
    let (lambda, w) = linalg::sym_eigen(&s)?;
    let sq: Vec<f64> = volumes.iter().map(|v| v.sqrt()).collect();
    let inv: Vec<f64> = sq.iter().map(|v| 1.0 / v).collect();
    let p = w.scale_rows(&inv);
    let a_col = ss.mobile_column();
    let scaled: Vec<f64> = a_col.iter().zip(&sq).map(|(a, s)| a * s).collect();
    let weights = w.transpose().matvec(&scaled);
    Ok(Modes {
        volumes,
        lambda,
        p,
        weights,
    })
}

pub(crate) fn require_assumptions(ss: &StateSpace) -> Result<()> {
    let report = check_assumptions(ss.a());
    if report.passed {
        Ok(())
    } else {
        Err(TransformError::AssumptionViolation(Box::new(report)))
    }
}

/// Star network with mobile zone 0 and immobile zones of the given volumes and
/// exchange rates.
pub(crate) fn star_spec(volumes: &[f64], rates: &[f64]) -> NetworkSpec {
    let mut v = vec![1.0];
    v.extend_from_slice(volumes);
    NetworkSpec {
        volumes: v,
        flow: 1.0,
        edges: rates
            .iter()
            .enumerate()
            .map(|(k, &d)| Edge { i: 0, j: k + 1, d })
            .collect(),
    }
}

/// Chain network `0 - 1 - … - n-1`.
pub(crate) fn chain_spec(volumes: &[f64], rates: &[f64]) -> NetworkSpec {
    NetworkSpec {
        volumes: volumes.to_vec(),
        flow: volumes[0],
        edges: rates
            .iter()
            .enumerate()
            .map(|(k, &d)| Edge { i: k, j: k + 1, d })
            .collect(),
    }
}

pub(crate) fn block_diag_one(inner: &DenseMatrix) -> DenseMatrix {
    let (r, c) = (inner.rows(), inner.cols());
    let mut out = DenseMatrix::zeros(r + 1, c + 1);
    out[(0, 0)] = 1.0;
    for i in 0..r {
        for j in 0..c {
            out[(i + 1, j + 1)] = inner[(i, j)];
        }
    }
    out
}

/// Verification norms shared by both constructions. None of them inverts
/// `R`, whose columns scale with the square roots of volumes that may span
/// many decades:
/// `similarity` is `‖AR - RĀ‖_max / (‖A‖_max ‖R‖_max)`, and the channel checks
/// use `R⁻¹B = B ⟺ Re₁ = e₁` and `CR = C ⟺ e₁ᵗR = e₁ᵗ`.
fn residuals(
    source: &StateSpace,
    target: &StateSpace,
    r: &DenseMatrix,
    target_volumes: &[f64],
) -> Result<BTreeMap<String, f64>> {
    let n = source.n();
    let mut out = BTreeMap::new();
    let scale = (source.a().max_abs() * r.max_abs()).max(f64::MIN_POSITIVE);
    let ar = source.a().matmul(r);
    let ra = r.matmul(target.a());
    out.insert("similarity".into(), ar.max_abs_diff(&ra) / scale);
    let dev_from_e1 = |v: Vec<f64>| {
        v.iter()
            .enumerate()
            .map(|(k, x)| (x - if k == 0 { 1.0 } else { 0.0 }).abs())
            .fold(0.0, f64::max)
    };
    out.insert("input_channel".into(), dev_from_e1(r.column(0)));
    out.insert("output_channel".into(), dev_from_e1(r.row(0).to_vec()));
    out.insert(
        "markov".into(),
        realization::markov_deviation(source, target, 2 * n),
    );
    let v_src: f64 = recover_volumes(source.a())?.volumes.iter().sum();
    let v_dst: f64 = target_volumes.iter().sum();
    out.insert("total_volume".into(), (v_src - v_dst).abs() / v_src);
    let row_sum = (0..n)
        .map(|i| {
            let s: f64 = target.a().row(i).iter().sum();
            (s + if i == 0 { 1.0 } else { 0.0 }).abs()
        })
        .fold(0.0, f64::max);
    out.insert("row_sum".into(), row_sum);
    Ok(out)
}

/// Equivalent multi-rate mass transfer (star) realization.
pub fn to_mrmt(ss: &StateSpace) -> Result<EquivalentRealization> {
    to_mrmt_with(ss, &Tolerances::default())
}

pub fn to_mrmt_with(ss: &StateSpace, tol: &Tolerances) -> Result<EquivalentRealization> {
    require_assumptions(ss)?;
    let n = ss.n();
    if n == 1 {
        return Ok(EquivalentRealization {
            structure: Structure::Mrmt,
            transform: Some(DenseMatrix::identity(1)),
            system: ss.clone(),
            params: star_spec(&[], &[]),
            residuals: BTreeMap::new(),
            normalization: None,
        });
    }
    let minimality = is_minimal_with(ss, tol);
    if !minimality.minimal {
        return Err(TransformError::NotControllable(Box::new(minimality)));
    }
    let modes = modes(ss)?;
    // Distinctness is judged pair by pair relative to the pair's magnitude;
    // the eigensolver resolves small eigenvalues to working relative
    // precision, so a scale set by the largest one would misreport slow modes.
    for w in modes.lambda.windows(2) {
        let gap = w[1] - w[0];
        let sep = tol.eig_sep_tol * w[0].abs().max(w[1].abs());
        if gap <= sep {
            return Err(TransformError::NumericallyDegenerate { gap, tol: sep });
        }
    }

    // Immobile zones in ascending rate order.
    let order: Vec<usize> = (0..n - 1).rev().collect();
    let lambda: Vec<f64> = order.iter().map(|&k| modes.lambda[k]).collect();
    let weights: Vec<f64> = order.iter().map(|&k| modes.weights[k]).collect();
    let p_cols: Vec<Vec<f64>> = order.iter().map(|&k| modes.p.column(k)).collect();
    let p = DenseMatrix::from_columns(&p_cols);

    let rates = mrmt_first_row(ss, &p, &lambda, &weights);
    // Same construction with an arbitrarily rescaled eigenbasis; `G` absorbs it.
    let skew: Vec<f64> = (0..n - 1).map(|k| 1.0 + k as f64).collect();
    let p_scaled = p.scale_cols(&skew);
    let w_scaled: Vec<f64> = weights.iter().zip(&skew).map(|(g, s)| g / s).collect();
    let rates_scaled = mrmt_first_row(ss, &p_scaled, &lambda, &w_scaled);

    for (k, &d) in rates.iter().enumerate() {
        if !(d > 0.0) {
            return Err(TransformError::PositivityViolation {
                index: k + 1,
                value: d,
            });
        }
    }
    let exchange_rates: Vec<f64> = lambda.iter().map(|l| -l).collect();
    let volumes: Vec<f64> = rates
        .iter()
        .zip(&exchange_rates)
        .map(|(d, r)| d / r)
        .collect();
    let params = star_spec(&volumes, &rates);
    let system = build_state_space(&params)?.state_space;

    let g: Vec<f64> = weights.iter().zip(&lambda).map(|(w, l)| -w / l).collect();
    let r = block_diag_one(&p.scale_cols(&g));
    let mut res = residuals(ss, &system, &r, &params.volumes)?;
    let closed_form = rates
        .iter()
        .zip(&weights)
        .zip(&exchange_rates)
        .map(|((d, w), r)| (d - w * w / r).abs() / d)
        .fold(0.0, f64::max);
    res.insert("closed_form_rates".into(), closed_form);
    res.insert(
        "scale_invariance".into(),
        rates
            .iter()
            .zip(&rates_scaled)
            .map(|(a, b)| (a - b).abs() / a.abs())
            .fold(0.0, f64::max),
    );

    Ok(EquivalentRealization {
        structure: Structure::Mrmt,
        transform: Some(r),
        system,
        params,
        residuals: res,
        normalization: None,
    })
}

/// First row `A(1,2:n)·R̃` of the star form, `R̃ = P·G`,
/// `G = -Δ⁻¹diag(P⁻¹A(2:n,1))`.
fn mrmt_first_row(ss: &StateSpace, p: &DenseMatrix, lambda: &[f64], weights: &[f64]) -> Vec<f64> {
    let g: Vec<f64> = weights.iter().zip(lambda).map(|(w, l)| -w / l).collect();
    let r_tilde = p.scale_cols(&g);
    r_tilde.vecmat(&ss.mobile_row())
}

/// Equivalent multiple interacting continua (chain) realization.
pub fn to_minc(ss: &StateSpace) -> Result<EquivalentRealization> {
    to_minc_with(ss, &Tolerances::default())
}

pub fn to_minc_with(ss: &StateSpace, tol: &Tolerances) -> Result<EquivalentRealization> {
    let star = to_mrmt_with(ss, tol)?;
    let n = ss.n();
    if n == 1 {
        return Ok(EquivalentRealization {
            structure: Structure::Minc,
            params: chain_spec(&[1.0], &[]),
            ..star
        });
    }
    let sa = star.system.a();
    let delta: Vec<f64> = (1..n).map(|i| sa[(i, i)]).collect();
    let a_col = star.system.mobile_column();
    let v_tilde = star.params.volumes[1..].to_vec();

    let m = n - 1;

    // Δ is diagonal, hence self-adjoint in the Ṽ inner product. The chain basis
    // T (Ṽ-orthonormal, spanning the nested Krylov spaces of A(2:n,1)) is
    // T = Ṽ^{-1/2}Q with Q the Lanczos basis of Δ started from
    // w = Ṽ^{1/2}A(2:n,1). This avoids a Gram factorization of QᵗṼQ, which
    // loses the slow zones when volumes span many decades.
    let sqrt_v: Vec<f64> = v_tilde.iter().map(|v| v.sqrt()).collect();
    let w: Vec<f64> = a_col.iter().zip(&sqrt_v).map(|(a, s)| a * s).collect();
    let w_norm = norm2(&w);
    let q1: Vec<f64> = w.iter().map(|x| x / w_norm).collect();
    let lz = linalg::lanczos_with(&DenseMatrix::from_diag(&delta), &q1, LANCZOS_REORTH)
        .map_err(|e| match e {
            LinalgError::Breakdown { step, .. } => TransformError::LanczosBreakdown { step },
            other => other.into(),
        })?;
    let q = &lz.q;
    let tri = lz.tridiagonal();

    // J = T⁻¹AT: J₂₁ = ‖w‖, immobile couplings are the Lanczos β. Diagonal
    // entries are closed by the row sums when the chain is rebuilt.
    let mut j_off = vec![w_norm];
    j_off.extend_from_slice(&lz.beta[..m - 1]);

    // X = T⁻¹𝟙 = (1, QᵗṼ^{1/2}𝟙).
    let mut x = vec![1.0];
    x.extend(q.transpose().matvec(&sqrt_v));
    let xmax = x.iter().fold(0.0_f64, |a, b| a.max(b.abs()));
    for (k, &xi) in x.iter().enumerate() {
        if !(xi > tol.pos_tol * xmax) {
            return Err(TransformError::PositivityViolation {
                index: k + 1,
                value: xi,
            });
        }
    }
    let volumes: Vec<f64> = x.iter().map(|v| v * v).collect();
    let rates: Vec<f64> = (0..m).map(|k| x[k] * x[k + 1] * j_off[k]).collect();
    let params = chain_spec(&volumes, &rates);
    let system = build_state_space(&params)?.state_space;

    // R = R_star · blockdiag(1, T) · diag(X).
    let inv_sqrt_v: Vec<f64> = sqrt_v.iter().map(|s| 1.0 / s).collect();
    let t = q.scale_rows(&inv_sqrt_v);
    let r_stage = block_diag_one(&t).scale_cols(&x);
    let r = star
        .transform
        .as_ref()
        .expect("star transform is square")
        .matmul(&r_stage);
    let mut res = residuals(ss, &system, &r, &params.volumes)?;
    let lanczos_ortho = q
        .transpose()
        .matmul(q)
        .max_abs_diff(&DenseMatrix::identity(m));
    res.insert("lanczos_orthogonality".into(), lanczos_ortho);
    let qdq = q.transpose().scale_cols(&delta).matmul(q);
    res.insert(
        "lanczos_tridiagonal".into(),
        qdq.max_abs_diff(&tri) / delta.iter().fold(0.0_f64, |a, b| a.max(b.abs())),
    );

    Ok(EquivalentRealization {
        structure: Structure::Minc,
        transform: Some(r),
        system,
        params,
        residuals: res,
        normalization: None,
    })
}

/// Always reorthogonalize: the starting vector weights modes spread over many
/// decades, and plain three-term Lanczos loses orthogonality already at n = 7.
const LANCZOS_REORTH: Reorthogonalization = Reorthogonalization::Always;

/// Input-output comparison of two realizations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquivalenceReport {
    pub equivalent: bool,
    /// Deviation of the first `dim(a) + dim(b)` Markov parameters, see
    /// [`realization::markov_deviation`].
    pub markov_deviation: f64,
    pub markov_count: usize,
    pub tolerance: f64,
    /// Largest coefficient difference of the coprime transfer functions.
    pub tf_coefficient_deviation: f64,
    pub tf_a: TransferFunction,
    pub tf_b: TransferFunction,
}

pub const DEFAULT_EQUIVALENCE_TOL: f64 = 1e-6;

pub fn verify_equivalence(a: &StateSpace, b: &StateSpace) -> EquivalenceReport {
    verify_equivalence_with(a, b, DEFAULT_EQUIVALENCE_TOL, &Tolerances::default())
}

pub fn verify_equivalence_with(
    a: &StateSpace,
    b: &StateSpace,
    equivalence_tol: f64,
    tol: &Tolerances,
) -> EquivalenceReport {
    let count = a.n() + b.n();
    let markov_deviation = realization::markov_deviation(a, b, count);
    let tf_a = realization::transfer_function_with(a, tol.gcd_tol);
    let tf_b = realization::transfer_function_with(b, tol.gcd_tol);
    EquivalenceReport {
        equivalent: markov_deviation < equivalence_tol,
        markov_deviation,
        markov_count: count,
        tolerance: equivalence_tol,
        tf_coefficient_deviation: tf_a.coefficient_deviation(&tf_b),
        tf_a,
        tf_b,
    }
}
