use serde::{Deserialize, Serialize};

/// Numerical thresholds shared by the analysis and transform routines.
///
/// All values are relative; each routine documents the scale it multiplies by.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    /// Krylov breakdown threshold for rank decisions, relative to `‖A‖_F`.
    pub rank_tol: f64,
    /// Eigenvalues `λ, μ` with `|λ - μ| ≤ eig_sep_tol·max(|λ|, |μ|)` are duplicates.
    pub eig_sep_tol: f64,
    /// A mode whose input weight is at most `mode_tol·‖P⁻¹A(2:n,1)‖_∞` is unreachable.
    pub mode_tol: f64,
    /// Structural zeros are checked against `struct_tol·‖A‖_max`.
    pub struct_tol: f64,
    /// Polynomial remainders below `gcd_tol` (relative) count as zero.
    pub gcd_tol: f64,
    /// Entries of `T⁻¹𝟙` at or below this are a positivity violation.
    pub pos_tol: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            rank_tol: 1e-10,
            eig_sep_tol: 1e-8,
            mode_tol: 1e-8,
            struct_tol: 1e-9,
            gcd_tol: 1e-8,
            pos_tol: 1e-12,
        }
    }
}
