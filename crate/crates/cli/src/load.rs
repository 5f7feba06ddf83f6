//! Input files: a network specification, a realization written by `mrmt`,
//! `minc` or `reduce`, or a bare state space `{n, a, b, c}`.

use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use porous_equiv::network::NetworkFile;
use porous_equiv::{build_state_space, EquivalentRealization, Normalization, StateSpace};
use serde_json::Value;

use crate::failure::usage;

pub struct Model {
    pub system: StateSpace,
    /// Present when the file was a network specification.
    pub normalization: Option<Normalization>,
    /// Present when the file was a realization.
    pub realization: Option<EquivalentRealization>,
}

pub fn read_json(path: &Path) -> Result<Value> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

pub enum Kind {
    Spec(NetworkFile),
    Realization(Box<EquivalentRealization>),
    System(StateSpace),
}

pub fn classify(path: &Path, value: Value) -> Result<Kind> {
    let what = |k: &str| format!("parsing {} as {k}", path.display());
    let obj = value
        .as_object()
        .ok_or_else(|| usage(format!("{}: expected a JSON object", path.display())))?;
    if obj.contains_key("structure") {
        Ok(Kind::Realization(Box::new(
            serde_json::from_value(value).with_context(|| what("a realization"))?,
        )))
    } else if obj.contains_key("a") {
        Ok(Kind::System(
            serde_json::from_value(value).with_context(|| what("a state space"))?,
        ))
    } else {
        Ok(Kind::Spec(
            serde_json::from_value(value).with_context(|| what("a network specification"))?,
        ))
    }
}

pub fn load(path: &Path) -> Result<Model> {
    match classify(path, read_json(path)?)? {
        Kind::Spec(file) => {
            let (spec, labels) = file.into_spec()?;
            let mut built = build_state_space(&spec)?;
            built.normalization.zone_labels = labels;
            Ok(Model {
                system: built.state_space,
                normalization: Some(built.normalization),
                realization: None,
            })
        }
        Kind::Realization(eq) => Ok(Model {
            system: eq.system.clone(),
            normalization: eq.normalization.clone(),
            realization: Some(*eq),
        }),
        Kind::System(system) => Ok(Model {
            system,
            normalization: None,
            realization: None,
        }),
    }
}
