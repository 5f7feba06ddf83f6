//! Equivalent star (MRMT) and series (MINC) realizations of compartmental
//! solute-transport networks.
//!
//! A network has one mobile zone (zone 1, through-flow) and any number of
//! immobile zones exchanging solute by diffusion. Its normalized state-space
//! form `ẋ = Ax + Bu, y = Cx` is built by [`network::build_state_space`].
//! When the realization is minimal, [`transforms::to_mrmt`] and
//! [`transforms::to_minc`] produce equivalent networks with star and chain
//! topology; [`reduction`] handles non-minimal inputs and approximate
//! truncation, and [`sim`] integrates the dynamics exactly on
//! piecewise-constant inputs.

// `!(x > 0.0)` is used on purpose so NaN falls on the rejecting side.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![allow(clippy::needless_range_loop)]

pub mod examples;
pub mod json;
pub mod linalg;
pub mod network;
pub mod poly;
pub mod random;
pub mod realization;
pub mod reduction;
pub mod sim;
mod tolerances;
pub mod transforms;

pub use linalg::{DenseMatrix, LinalgError};
pub use network::{
    build_state_space, check_assumptions, extract_physical_parameters, recover_volumes,
    BuiltNetwork, Edge, NetworkError, NetworkSpec, Normalization, StateSpace, VMDecomposition,
    ValidationReport,
};
pub use realization::{MinimalityReport, TransferFunction};
pub use tolerances::Tolerances;
pub use transforms::{EquivalenceReport, EquivalentRealization, Structure, TransformError};
