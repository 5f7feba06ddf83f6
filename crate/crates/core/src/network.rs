//! Compartment networks: specification, normalized state-space form, and
//! the volume/exchange decomposition `A = -BBᵗ - V⁻¹M`.
//!
//! Zone 0 is always the mobile zone. Input enters and output leaves there, so
//! `B = e₀` and `C = e₀ᵗ` are implicit in [`StateSpace`].

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{self, DenseMatrix, LinalgError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NetworkError {
    #[error("network has no compartments")]
    Empty,
    #[error("non-positive or non-finite parameter: {0}")]
    NonPositiveParameter(String),
    #[error("invalid edge ({i}, {j}): {reason}")]
    InvalidEdge { i: usize, j: usize, reason: String },
    #[error("duplicate edge between zones {i} and {j}")]
    DuplicateEdge { i: usize, j: usize },
    #[error("graph is disconnected; zones unreachable from the mobile zone: {unreachable:?}")]
    DisconnectedGraph { unreachable: Vec<usize> },
    #[error("matrix is not square or is empty ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },
    #[error("matrix does not admit consistent volumes: {0}")]
    InconsistentSymmetry(String),
    #[error("exchange graph is not connected; unreachable zones: {unreachable:?}")]
    NotIrreducible { unreachable: Vec<usize> },
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("invalid network file: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, NetworkError>;

/// Diffusive exchange between zones `i` and `j` (0-based, `i != j`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub i: usize,
    pub j: usize,
    pub d: f64,
}

/// User-level description of a compartment network. Zone 0 is mobile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "NetworkFile", try_from = "NetworkFile")]
pub struct NetworkSpec {
    pub volumes: Vec<f64>,
    pub flow: f64,
    pub edges: Vec<Edge>,
}

/// On-disk JSON form of a network: 1-based zone indices.
///
/// `mobile` names the mobile zone when it is not zone 1; the zones are then
/// relabeled so that the mobile zone comes first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkFile {
    pub volumes: Vec<f64>,
    pub flow: f64,
    pub edges: Vec<EdgeFile>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mobile: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeFile {
    pub i: usize,
    pub j: usize,
    pub d: f64,
}

impl From<NetworkSpec> for NetworkFile {
    fn from(spec: NetworkSpec) -> Self {
        NetworkFile {
            volumes: spec.volumes,
            flow: spec.flow,
            edges: spec
                .edges
                .iter()
                .map(|e| EdgeFile {
                    i: e.i + 1,
                    j: e.j + 1,
                    d: e.d,
                })
                .collect(),
            mobile: None,
        }
    }
}

impl TryFrom<NetworkFile> for NetworkSpec {
    type Error = NetworkError;

    fn try_from(file: NetworkFile) -> Result<Self> {
        file.into_spec().map(|(spec, _)| spec)
    }
}

impl NetworkFile {
    /// Converts to 0-based canonical order. Also returns the original 1-based
    /// label of each canonical zone.
    pub fn into_spec(self) -> Result<(NetworkSpec, Vec<usize>)> {
        let n = self.volumes.len();
        if n == 0 {
            return Err(NetworkError::Empty);
        }
        let mobile = self.mobile.unwrap_or(1);
        if mobile == 0 || mobile > n {
            return Err(NetworkError::Parse(format!(
                "mobile zone {mobile} out of range 1..={n}"
            )));
        }
        // Canonical order: mobile zone first, others in file order.
        let mut labels = vec![mobile];
        labels.extend((1..=n).filter(|&k| k != mobile));
        let mut position = vec![0; n + 1];
        for (canon, &label) in labels.iter().enumerate() {
            position[label] = canon;
        }
        let mut edges = Vec::with_capacity(self.edges.len());
        for e in &self.edges {
            for idx in [e.i, e.j] {
                if idx == 0 || idx > n {
                    return Err(NetworkError::InvalidEdge {
                        i: e.i,
                        j: e.j,
                        reason: format!("zone index {idx} out of range 1..={n}"),
                    });
                }
            }
            edges.push(Edge {
                i: position[e.i],
                j: position[e.j],
                d: e.d,
            });
        }
        let volumes = labels.iter().map(|&l| self.volumes[l - 1]).collect();
        let spec = NetworkSpec {
            volumes,
            flow: self.flow,
            edges,
        };
        spec.validate()?;
        Ok((spec, labels))
    }
}

impl NetworkSpec {
    pub fn n(&self) -> usize {
        self.volumes.len()
    }

    /// Checks positivity, edge well-formedness and connectivity.
    pub fn validate(&self) -> Result<()> {
        let n = self.n();
        if n == 0 {
            return Err(NetworkError::Empty);
        }
        for (k, &v) in self.volumes.iter().enumerate() {
            if !(v > 0.0 && v.is_finite()) {
                return Err(NetworkError::NonPositiveParameter(format!(
                    "volume of zone {} is {v}",
                    k + 1
                )));
            }
        }
        if !(self.flow > 0.0 && self.flow.is_finite()) {
            return Err(NetworkError::NonPositiveParameter(format!(
                "flow is {}",
                self.flow
            )));
        }
        let mut seen = std::collections::HashSet::new();
        for e in &self.edges {
            if e.i >= n || e.j >= n {
                return Err(NetworkError::InvalidEdge {
                    i: e.i + 1,
                    j: e.j + 1,
                    reason: "zone index out of range".into(),
                });
            }
            if e.i == e.j {
                return Err(NetworkError::InvalidEdge {
                    i: e.i + 1,
                    j: e.j + 1,
                    reason: "self loop".into(),
                });
            }
            if !(e.d > 0.0 && e.d.is_finite()) {
                return Err(NetworkError::NonPositiveParameter(format!(
                    "exchange rate d({}, {}) is {}",
                    e.i + 1,
                    e.j + 1,
                    e.d
                )));
            }
            if !seen.insert((e.i.min(e.j), e.i.max(e.j))) {
                return Err(NetworkError::DuplicateEdge {
                    i: e.i.min(e.j) + 1,
                    j: e.i.max(e.j) + 1,
                });
            }
        }
        let mut adj = vec![Vec::new(); n];
        for e in &self.edges {
            adj[e.i].push(e.j);
            adj[e.j].push(e.i);
        }
        let reached = bfs(&adj, 0);
        let unreachable: Vec<usize> = (0..n).filter(|&k| !reached[k]).map(|k| k + 1).collect();
        if !unreachable.is_empty() {
            return Err(NetworkError::DisconnectedGraph { unreachable });
        }
        Ok(())
    }

    /// Exchange rate between two zones, 0 when not connected.
    pub fn rate(&self, i: usize, j: usize) -> f64 {
        self.edges
            .iter()
            .find(|e| (e.i == i && e.j == j) || (e.i == j && e.j == i))
            .map_or(0.0, |e| e.d)
    }

    pub fn to_json(&self) -> String {
        crate::json::to_string(self)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: NetworkFile =
            serde_json::from_str(text).map_err(|e| NetworkError::Parse(e.to_string()))?;
        NetworkSpec::try_from(file)
    }
}

fn bfs(adj: &[Vec<usize>], start: usize) -> Vec<bool> {
    let mut reached = vec![false; adj.len()];
    reached[start] = true;
    let mut queue = VecDeque::from([start]);
    while let Some(u) = queue.pop_front() {
        for &v in &adj[u] {
            if !reached[v] {
                reached[v] = true;
                queue.push_back(v);
            }
        }
    }
    reached
}

/// Single-input single-output realization `ẋ = Ax + Bu, y = Cx` with
/// `B = e₀` and `C = e₀ᵗ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "StateSpaceFile", try_from = "StateSpaceFile")]
pub struct StateSpace {
    a: DenseMatrix,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct StateSpaceFile {
    n: usize,
    a: DenseMatrix,
    b: Vec<f64>,
    c: Vec<f64>,
}

impl From<StateSpace> for StateSpaceFile {
    fn from(ss: StateSpace) -> Self {
        StateSpaceFile {
            n: ss.n(),
            b: ss.b(),
            c: ss.c(),
            a: ss.a,
        }
    }
}

impl TryFrom<StateSpaceFile> for StateSpace {
    type Error = NetworkError;

    fn try_from(f: StateSpaceFile) -> Result<Self> {
        let ss = StateSpace::new(f.a)?;
        if f.n != ss.n() || f.b != ss.b() || f.c != ss.c() {
            return Err(NetworkError::Parse(
                "state space must have n = dim(A), b = e1 and c = e1ᵗ".into(),
            ));
        }
        Ok(ss)
    }
}

impl StateSpace {
    /// Wraps a square, non-empty system matrix. Assumption checks are separate
    /// (see [`check_assumptions`]).
    pub fn new(a: DenseMatrix) -> Result<Self> {
        if !a.is_square() || a.rows() == 0 {
            return Err(NetworkError::NotSquare {
                rows: a.rows(),
                cols: a.cols(),
            });
        }
        Ok(StateSpace { a })
    }

    pub fn n(&self) -> usize {
        self.a.rows()
    }

    pub fn a(&self) -> &DenseMatrix {
        &self.a
    }

    pub fn into_a(self) -> DenseMatrix {
        self.a
    }

    pub fn b(&self) -> Vec<f64> {
        unit(self.n(), 0)
    }

    pub fn c(&self) -> Vec<f64> {
        unit(self.n(), 0)
    }

    /// Immobile block `Ã = A[1.., 1..]`.
    pub fn a_tilde(&self) -> DenseMatrix {
        let n = self.n();
        self.a.submatrix(1, n, 1, n)
    }

    /// First column below the diagonal, `A[1.., 0]`.
    pub fn mobile_column(&self) -> Vec<f64> {
        (1..self.n()).map(|i| self.a[(i, 0)]).collect()
    }

    /// First row right of the diagonal, `A[0, 1..]`.
    pub fn mobile_row(&self) -> Vec<f64> {
        self.a.row(0)[1..].to_vec()
    }
}

pub(crate) fn unit(n: usize, k: usize) -> Vec<f64> {
    let mut v = vec![0.0; n];
    v[k] = 1.0;
    v
}

/// `A = -BBᵗ - V⁻¹M` with diagonal volumes `V` (`V₀ = 1` after normalization)
/// and symmetric exchange matrix `M`.
#[derive(Debug, Clone, PartialEq)]
pub struct VMDecomposition {
    pub volumes: Vec<f64>,
    pub exchange: DenseMatrix,
}

impl VMDecomposition {
    pub fn n(&self) -> usize {
        self.volumes.len()
    }

    /// Rebuilds `A = -BBᵗ - V⁻¹M`.
    pub fn system_matrix(&self) -> DenseMatrix {
        let inv: Vec<f64> = self.volumes.iter().map(|v| 1.0 / v).collect();
        let mut a = self.exchange.scale_rows(&inv).scale(-1.0);
        a[(0, 0)] -= 1.0;
        a
    }

    /// Immobile block of the exchange matrix, `M̃ = M[1.., 1..]`.
    pub fn exchange_tilde(&self) -> DenseMatrix {
        let n = self.n();
        self.exchange.submatrix(1, n, 1, n)
    }

    pub fn total_volume(&self) -> f64 {
        self.volumes.iter().sum()
    }
}

/// Scale factors that map the normalized model back to physical units.
///
/// Normalized time is `t·Q/V₁`, normalized volumes are `V/V₁` and normalized
/// exchange rates `d/Q`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    /// Physical time per unit of normalized time, `V₁/Q`.
    pub time_scale: f64,
    /// Physical volume of the mobile zone, `V₁`.
    pub volume_scale: f64,
    /// Physical flow `Q`; normalized rates are multiplied by it.
    pub rate_scale: f64,
    /// Original 1-based label of each canonical zone.
    pub zone_labels: Vec<usize>,
}

impl Normalization {
    pub fn identity(n: usize) -> Self {
        Normalization {
            time_scale: 1.0,
            volume_scale: 1.0,
            rate_scale: 1.0,
            zone_labels: (1..=n).collect(),
        }
    }
}

/// Result of [`build_state_space`].
#[derive(Debug, Clone, PartialEq)]
pub struct BuiltNetwork {
    pub state_space: StateSpace,
    pub decomposition: VMDecomposition,
    pub normalization: Normalization,
}

/// Builds the normalized realization (`Q/V₁ = 1`, `V₁ = 1`) of a network.
pub fn build_state_space(spec: &NetworkSpec) -> Result<BuiltNetwork> {
    spec.validate()?;
    let n = spec.n();
    let v1 = spec.volumes[0];
    let q = spec.flow;
    let volumes: Vec<f64> = spec.volumes.iter().map(|v| v / v1).collect();
    let mut m = DenseMatrix::zeros(n, n);
    for e in &spec.edges {
        let d = e.d / q;
        m[(e.i, e.j)] -= d;
        m[(e.j, e.i)] -= d;
        m[(e.i, e.i)] += d;
        m[(e.j, e.j)] += d;
    }
    let decomposition = VMDecomposition {
        volumes,
        exchange: m,
    };
    // Off-diagonal entries d/V_i, diagonal closes the row sums exactly.
    let mut a = DenseMatrix::zeros(n, n);
    for i in 0..n {
        let mut off = 0.0;
        for j in 0..n {
            if i != j && decomposition.exchange[(i, j)] != 0.0 {
                let x = -decomposition.exchange[(i, j)] / decomposition.volumes[i];
                a[(i, j)] = x;
                off += x;
            }
        }
        a[(i, i)] = -off - if i == 0 { 1.0 } else { 0.0 };
    }
    Ok(BuiltNetwork {
        state_space: StateSpace::new(a)?,
        decomposition,
        normalization: Normalization {
            time_scale: v1 / q,
            volume_scale: v1,
            rate_scale: q,
            zone_labels: (1..=n).collect(),
        },
    })
}

/// One named assumption check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub n: usize,
    pub passed: bool,
    pub checks: Vec<Check>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub volumes: Option<Vec<f64>>,
}

impl ValidationReport {
    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }

    /// Report for a specification rejected before a matrix could be built.
    pub fn rejected(n: usize, name: &str, detail: String) -> Self {
        ValidationReport {
            n,
            passed: false,
            checks: vec![Check {
                name: name.into(),
                passed: false,
                detail: Some(detail),
            }],
            volumes: None,
        }
    }
}

/// Relative threshold below which a pair of off-diagonal entries counts as a
/// structural zero. A pair is an edge once either entry exceeds it; the other
/// entry then only has to be positive, since volume ratios of many decades
/// legitimately make one direction tiny.
const SUPPORT_TOL: f64 = 1e-12;

fn support_threshold(a: &DenseMatrix) -> f64 {
    SUPPORT_TOL * a.max_abs()
}

/// Checks a raw system matrix against the compartmental assumptions: Metzler
/// sign pattern, `A𝟙 = -B`, recoverable volumes, symmetric `VA` and an
/// irreducible exchange graph.
pub fn check_assumptions(a: &DenseMatrix) -> ValidationReport {
    let n = a.rows();
    if !a.is_square() || n == 0 {
        return ValidationReport::rejected(
            n,
            "square",
            format!("matrix is {}x{}", a.rows(), a.cols()),
        );
    }
    let mut checks = Vec::new();
    let mut push = |name: &str, passed: bool, detail: Option<String>| {
        checks.push(Check {
            name: name.into(),
            passed,
            detail,
        })
    };

    let thr = support_threshold(a);
    let worst_off = (0..n)
        .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
        .map(|(i, j)| (a[(i, j)], i, j))
        .fold((0.0, 0, 0), |m, x| if x.0 < m.0 { x } else { m });
    push(
        "metzler",
        worst_off.0 >= -thr,
        (worst_off.0 < -thr).then(|| {
            format!(
                "A[{}][{}] = {:e} is negative",
                worst_off.1 + 1,
                worst_off.2 + 1,
                worst_off.0
            )
        }),
    );

    let mut worst_row = (0.0, 0);
    for i in 0..n {
        let target = if i == 0 { -1.0 } else { 0.0 };
        let row = a.row(i);
        let sum: f64 = row.iter().sum();
        let scale = row.iter().map(|x| x.abs()).sum::<f64>().max(1.0);
        let err = (sum - target).abs() / scale;
        if err > worst_row.0 {
            worst_row = (err, i);
        }
    }
    let row_ok = worst_row.0 <= 1e-12 * n as f64;
    push(
        "row_sums",
        row_ok,
        (!row_ok).then(|| {
            format!(
                "row {} violates A1 = -B (relative error {:e})",
                worst_row.1 + 1,
                worst_row.0
            )
        }),
    );

    let irreducible = strongly_connected(a, thr);
    push(
        "irreducible",
        irreducible.is_empty(),
        (!irreducible.is_empty())
            .then(|| format!("zones not strongly connected to zone 1: {irreducible:?}")),
    );

    let recovered = recover_volumes(a);
    let volumes = recovered.as_ref().ok().map(|d| d.volumes.clone());
    match &recovered {
        Ok(d) => {
            push("volumes", true, None);
            let va = a.scale_rows(&d.volumes);
            let asym = va.asymmetry().unwrap_or(0.0);
            let ok = asym <= 1e-10 * va.max_abs().max(f64::MIN_POSITIVE);
            push(
                "symmetric_va",
                ok,
                (!ok).then(|| format!("VA asymmetry {asym:e}")),
            );
        }
        Err(e) => {
            push("volumes", false, Some(e.to_string()));
            push(
                "symmetric_va",
                false,
                Some("no consistent volume assignment".into()),
            );
        }
    }

    ValidationReport {
        n,
        passed: checks.iter().all(|c| c.passed),
        checks,
        volumes,
    }
}

/// 1-based labels of zones not in the strongly connected component of zone 1.
fn strongly_connected(a: &DenseMatrix, thr: f64) -> Vec<usize> {
    let n = a.rows();
    let mut fwd = vec![Vec::new(); n];
    let mut rev = vec![Vec::new(); n];
    for i in 0..n {
        for j in 0..n {
            if i != j && a[(i, j)] > 0.0 && a[(i, j)].max(a[(j, i)]) > thr {
                fwd[i].push(j);
                rev[j].push(i);
            }
        }
    }
    let f = bfs(&fwd, 0);
    let r = bfs(&rev, 0);
    (0..n).filter(|&k| !(f[k] && r[k])).map(|k| k + 1).collect()
}

/// Recovers `V` (with `V₀ = 1`) and `M = -V(A + BBᵗ)` from a system matrix by
/// propagating `V_j = V_i·A_ij/A_ji` along a breadth-first tree from zone 0.
///
/// Every other edge is then used to cross-check the assignment, so the
/// result does not depend on which path reached a zone.
pub fn recover_volumes(a: &DenseMatrix) -> Result<VMDecomposition> {
    let n = a.rows();
    if !a.is_square() || n == 0 {
        return Err(NetworkError::NotSquare {
            rows: a.rows(),
            cols: a.cols(),
        });
    }
    let thr = support_threshold(a);
    let mut volumes = vec![f64::NAN; n];
    volumes[0] = 1.0;
    let mut queue = VecDeque::from([0]);
    while let Some(i) = queue.pop_front() {
        for j in 0..n {
            if j == i || !volumes[j].is_nan() {
                continue;
            }
            let (aij, aji) = (a[(i, j)], a[(j, i)]);
            if aij.abs() <= thr && aji.abs() <= thr {
                continue;
            }
            if !(aij > 0.0 && aji > 0.0) {
                return Err(NetworkError::InconsistentSymmetry(format!(
                    "A[{}][{}] = {aij:e} but A[{}][{}] = {aji:e}",
                    i + 1,
                    j + 1,
                    j + 1,
                    i + 1
                )));
            }
            volumes[j] = volumes[i] * aij / aji;
            queue.push_back(j);
        }
    }
    let unreachable: Vec<usize> = (0..n)
        .filter(|&k| volumes[k].is_nan())
        .map(|k| k + 1)
        .collect();
    if !unreachable.is_empty() {
        return Err(NetworkError::NotIrreducible { unreachable });
    }
    // Cross-check every edge: V_i A_ij = V_j A_ji.
    for i in 0..n {
        for j in i + 1..n {
            if a[(i, j)].abs() <= thr && a[(j, i)].abs() <= thr {
                continue;
            }
            let lhs = volumes[i] * a[(i, j)];
            let rhs = volumes[j] * a[(j, i)];
            let scale = lhs.abs().max(rhs.abs());
            if (lhs - rhs).abs() > 1e-8 * scale {
                return Err(NetworkError::InconsistentSymmetry(format!(
                    "paths disagree on edge ({}, {}): V_i A_ij = {lhs:e}, V_j A_ji = {rhs:e}",
                    i + 1,
                    j + 1
                )));
            }
        }
    }
    let mut shifted = a.clone();
    shifted[(0, 0)] += 1.0;
    let exchange = shifted.scale_rows(&volumes).scale(-1.0);
    Ok(VMDecomposition { volumes, exchange })
}

/// Reads volumes and exchange rates back out of a decomposition. Off-diagonal
/// entries of `M` at or below `1e-12·‖M‖_max` are treated as absent edges.
pub fn extract_physical_parameters(d: &VMDecomposition) -> NetworkSpec {
    let n = d.n();
    let edge_tol = 1e-12 * d.exchange.max_abs();
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            let rate = -0.5 * (d.exchange[(i, j)] + d.exchange[(j, i)]);
            if rate > edge_tol {
                edges.push(Edge { i, j, d: rate });
            }
        }
    }
    NetworkSpec {
        volumes: d.volumes.clone(),
        // Q/V₁ = 1 in normalized form.
        flow: d.volumes[0],
        edges,
    }
}

/// Eigenvalues of `Ã`, ascending, through the symmetric similarity
/// `Ṽ^{1/2} Ã Ṽ^{-1/2}`.
pub fn immobile_spectrum(ss: &StateSpace) -> Result<Vec<f64>> {
    let d = recover_volumes(ss.a())?;
    let s = symmetrized_block(&ss.a_tilde(), &d.volumes[1..]);
    Ok(linalg::sym_eigen(&s)?.0)
}

/// Eigenvalues of `A`, ascending, through `V^{1/2} A V^{-1/2}`.
pub fn spectrum(ss: &StateSpace) -> Result<Vec<f64>> {
    let d = recover_volumes(ss.a())?;
    let s = symmetrized_block(ss.a(), &d.volumes);
    Ok(linalg::sym_eigen(&s)?.0)
}

/// `W^{1/2} X W^{-1/2}` for a diagonal weight `w`, symmetrized to remove
/// round-off.
pub fn symmetrized_block(x: &DenseMatrix, w: &[f64]) -> DenseMatrix {
    let sq: Vec<f64> = w.iter().map(|v| v.sqrt()).collect();
    let inv: Vec<f64> = sq.iter().map(|v| 1.0 / v).collect();
    let mut s = x.scale_rows(&sq).scale_cols(&inv);
    let k = s.rows();
    for i in 0..k {
        for j in i + 1..k {
            let m = 0.5 * (s[(i, j)] + s[(j, i)]);
            s[(i, j)] = m;
            s[(j, i)] = m;
        }
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::examples;

    #[test]
    fn example1_row_three() {
        let built = build_state_space(&examples::example1()).unwrap();
        assert_eq!(built.state_space.a().row(2), &[1.0, 1.5, -2.5, 0.0]);
        assert_eq!(built.state_space.a().row(0), &[-7.0, 1.0, 2.0, 3.0]);
    }

    #[test]
    fn mobile_zone_only() {
        let spec = NetworkSpec {
            volumes: vec![1.0],
            flow: 1.0,
            edges: vec![],
        };
        let built = build_state_space(&spec).unwrap();
        assert_eq!(built.state_space.a(), &DenseMatrix::from_rows(&[[-1.0]]).unwrap());
        assert_eq!(built.state_space.b(), vec![1.0]);
        assert_eq!(built.state_space.c(), vec![1.0]);
    }

    #[test]
    fn example2_matrix_from_rates() {
        let built = build_state_space(&examples::example2()).unwrap();
        assert_eq!(built.state_space.a(), &examples::example2_matrix());
    }

    #[test]
    fn normalization_rescales_time_and_volume() {
        let spec = NetworkSpec {
            volumes: vec![2.0, 4.0],
            flow: 0.5,
            edges: vec![Edge { i: 0, j: 1, d: 1.0 }],
        };
        let built = build_state_space(&spec).unwrap();
        // d/Q = 2, V/V1 = (1, 2).
        let a = built.state_space.a();
        assert_eq!(a.row(0), &[-3.0, 2.0]);
        assert_eq!(a.row(1), &[1.0, -1.0]);
        assert_eq!(built.normalization.time_scale, 4.0);
        assert_eq!(built.decomposition.volumes, vec![1.0, 2.0]);
    }

    #[test]
    fn rejects_disconnected_and_nonpositive() {
        let mut spec = examples::example1();
        spec.edges.retain(|e| e.j != 3 && e.i != 3);
        assert_eq!(
            build_state_space(&spec).unwrap_err(),
            NetworkError::DisconnectedGraph {
                unreachable: vec![4]
            }
        );
        let mut spec = examples::example1();
        spec.volumes[2] = 0.0;
        assert!(matches!(
            build_state_space(&spec),
            Err(NetworkError::NonPositiveParameter(_))
        ));
        let mut spec = examples::example1();
        spec.edges.push(Edge { i: 1, j: 0, d: 1.0 });
        assert!(matches!(
            build_state_space(&spec),
            Err(NetworkError::DuplicateEdge { i: 1, j: 2 })
        ));
    }

    #[test]
    fn example1_passes_all_checks() {
        let report = check_assumptions(&examples::example1_matrix());
        assert!(report.passed, "{report:?}");
        assert_eq!(report.volumes.unwrap(), vec![1.0, 1.0, 2.0, 3.0]);
    }

    #[test]
    fn one_sided_coupling_fails() {
        let a = DenseMatrix::from_rows(&[[-2.0, 1.0], [0.0, 0.0]]).unwrap();
        let report = check_assumptions(&a);
        assert!(!report.passed);
        let failed: Vec<&str> = report.failures().map(|c| c.name.as_str()).collect();
        assert!(failed.contains(&"irreducible"));
        assert!(failed.contains(&"symmetric_va"));
    }

    #[test]
    fn scalar_system_passes() {
        let a = DenseMatrix::from_rows(&[[-1.0]]).unwrap();
        assert!(check_assumptions(&a).passed);
    }

    #[test]
    fn recover_example1_volumes() {
        let d = recover_volumes(&examples::example1_matrix()).unwrap();
        assert_eq!(d.volumes, vec![1.0, 1.0, 2.0, 3.0]);
        assert!(d.system_matrix().max_abs_diff(&examples::example1_matrix()) < 1e-14);
    }

    #[test]
    fn recover_rejects_zeroed_reciprocal() {
        let mut a = examples::example1_matrix();
        a[(3, 1)] = 0.0;
        a[(3, 3)] = -1.0;
        assert!(matches!(
            recover_volumes(&a),
            Err(NetworkError::InconsistentSymmetry(_))
        ));
    }

    #[test]
    fn inconsistent_cycle_detected() {
        // Triangle whose volume ratios disagree around the cycle.
        let a = DenseMatrix::from_rows(&[
            [-3.0, 1.0, 1.0],
            [1.0, -2.0, 1.0],
            [2.0, 1.0, -3.0],
        ])
        .unwrap();
        assert!(matches!(
            recover_volumes(&a),
            Err(NetworkError::InconsistentSymmetry(_))
        ));
    }

    #[test]
    fn extract_round_trip_example1() {
        let spec = examples::example1();
        let built = build_state_space(&spec).unwrap();
        let back = extract_physical_parameters(&built.decomposition);
        assert_eq!(back.volumes, spec.volumes);
        for e in &spec.edges {
            assert!((back.rate(e.i, e.j) - e.d).abs() < 1e-14);
        }
        assert_eq!(back.edges.len(), spec.edges.len());
    }

    #[test]
    fn json_parsing_is_strict_and_one_based() {
        let text = r#"{"volumes":[1,2],"flow":1,"edges":[{"i":1,"j":2,"d":0.5}]}"#;
        let spec = NetworkSpec::from_json(text).unwrap();
        assert_eq!(spec.edges, vec![Edge { i: 0, j: 1, d: 0.5 }]);
        let bad = r#"{"volumes":[1,2],"flow":1,"edges":[],"extra":3}"#;
        assert!(matches!(NetworkSpec::from_json(bad), Err(NetworkError::Parse(_))));
        let bad_edge = r#"{"volumes":[1,2],"flow":1,"edges":[{"i":1,"j":2,"d":1,"w":2}]}"#;
        assert!(NetworkSpec::from_json(bad_edge).is_err());
        let out_of_range = r#"{"volumes":[1,2],"flow":1,"edges":[{"i":1,"j":3,"d":1}]}"#;
        assert!(matches!(
            NetworkSpec::from_json(out_of_range),
            Err(NetworkError::InvalidEdge { .. })
        ));
    }

    #[test]
    fn mobile_zone_relabeling() {
        let file: NetworkFile = serde_json::from_str(
            r#"{"volumes":[3,1,2],"flow":1,"mobile":2,
                "edges":[{"i":1,"j":2,"d":1},{"i":2,"j":3,"d":4}]}"#,
        )
        .unwrap();
        let (spec, labels) = file.into_spec().unwrap();
        assert_eq!(labels, vec![2, 1, 3]);
        assert_eq!(spec.volumes, vec![1.0, 3.0, 2.0]);
        assert_eq!(spec.rate(0, 1), 1.0);
        assert_eq!(spec.rate(0, 2), 4.0);
    }
}
