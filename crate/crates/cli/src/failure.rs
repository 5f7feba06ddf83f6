//! Exit codes and the machine-readable error report written to stderr.

use porous_equiv::realization::RealizationError;
use porous_equiv::sim::SimError;
use porous_equiv::{LinalgError, NetworkError, TransformError};
use serde::Serialize;
use serde_json::Value;

pub const EXIT_OK: u8 = 0;
pub const EXIT_IO: u8 = 1;
pub const EXIT_NOT_CONTROLLABLE: u8 = 2;
pub const EXIT_ASSUMPTIONS: u8 = 3;
pub const EXIT_NUMERICAL: u8 = 4;
/// `compare` ran fine but the realizations differ.
pub const EXIT_NOT_EQUIVALENT: u8 = 5;

#[derive(Debug, Serialize)]
pub struct ErrorReport {
    pub error: &'static str,
    pub message: String,
    pub exit_code: u8,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub details: Option<Value>,
}

/// Failure raised directly by the CLI (bad arguments, unusable files).
#[derive(Debug)]
pub struct Usage {
    pub message: String,
}

impl std::fmt::Display for Usage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for Usage {}

pub fn usage(message: impl Into<String>) -> anyhow::Error {
    Usage {
        message: message.into(),
    }
    .into()
}

fn network_code(e: &NetworkError) -> (&'static str, u8) {
    match e {
        NetworkError::Empty
        | NetworkError::InvalidEdge { .. }
        | NetworkError::NotSquare { .. }
        | NetworkError::Parse(_) => ("parse", EXIT_IO),
        NetworkError::Linalg(_) => ("numerical", EXIT_NUMERICAL),
        _ => ("assumption_violation", EXIT_ASSUMPTIONS),
    }
}

/// Maps an error chain to its kind, exit code and optional details.
pub fn classify(err: &anyhow::Error) -> ErrorReport {
    let message = format!("{err:#}");
    let report = |error, exit_code, details| ErrorReport {
        error,
        message: message.clone(),
        exit_code,
        details,
    };
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<TransformError>() {
            return match e {
                TransformError::NotControllable(m) => report(
                    "not_controllable",
                    EXIT_NOT_CONTROLLABLE,
                    serde_json::to_value(m).ok(),
                ),
                TransformError::AssumptionViolation(r) => report(
                    "assumption_violation",
                    EXIT_ASSUMPTIONS,
                    serde_json::to_value(r).ok(),
                ),
                TransformError::Network(n) => {
                    let (kind, code) = network_code(n);
                    report(kind, code, None)
                }
                TransformError::EmptyModel => report("empty_model", EXIT_IO, None),
                _ => report("numerical", EXIT_NUMERICAL, None),
            };
        }
        if let Some(e) = cause.downcast_ref::<NetworkError>() {
            let (kind, code) = network_code(e);
            return report(kind, code, None);
        }
        if let Some(e) = cause.downcast_ref::<SimError>() {
            return match e {
                SimError::Linalg(_) | SimError::NonNegativityViolated { .. } => {
                    report("numerical", EXIT_NUMERICAL, None)
                }
                _ => report("invalid_input", EXIT_IO, None),
            };
        }
        if cause.downcast_ref::<LinalgError>().is_some()
            || cause.downcast_ref::<RealizationError>().is_some()
        {
            return report("numerical", EXIT_NUMERICAL, None);
        }
        if cause.downcast_ref::<std::io::Error>().is_some() {
            return report("io", EXIT_IO, None);
        }
        if cause.downcast_ref::<serde_json::Error>().is_some() {
            return report("parse", EXIT_IO, None);
        }
        if cause.downcast_ref::<Usage>().is_some() {
            return report("usage", EXIT_IO, None);
        }
    }
    report("internal", EXIT_NUMERICAL, None)
}
