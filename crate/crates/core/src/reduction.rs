//! Smaller models: exact lumping to a minimal star network and
//! threshold-based truncation of star or chain realizations.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::linalg::DenseMatrix;
use crate::network::{build_state_space, StateSpace};
use crate::realization::{self, group_close, TransferFunction};
use crate::transforms::{
    block_diag_one, chain_spec, modes, require_assumptions, star_spec, to_mrmt_with,
    EquivalentRealization,
    Result, Structure, TransformError,
};
use crate::Tolerances;

/// Minimal star realization of a possibly non-minimal system.
///
/// A minimal input gives the same result as [`to_mrmt_with`]. Otherwise modes
/// of `Ã` that the input cannot reach are dropped and modes sharing an
/// eigenvalue are merged into one immobile zone carrying their total volume.
/// The transform is `n x k` with `A·R = R·Ā`.
pub fn minimal_mrmt(ss: &StateSpace) -> Result<EquivalentRealization> {
    minimal_mrmt_with(ss, &Tolerances::default())
}

pub fn minimal_mrmt_with(ss: &StateSpace, tol: &Tolerances) -> Result<EquivalentRealization> {
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
    if realization::is_minimal_with(ss, tol).minimal {
        return to_mrmt_with(ss, tol);
    }
    let modes = modes(ss)?;
    let gmax = modes.weights.iter().fold(0.0_f64, |m, g| m.max(g.abs()));

    struct Zone {
        rate: f64,
        volume: f64,
        column: Vec<f64>,
    }
    let mut zones = Vec::new();
    for group in group_close(&modes.lambda, tol.eig_sep_tol) {
        let weight = group
            .iter()
            .map(|&i| modes.weights[i].powi(2))
            .sum::<f64>()
            .sqrt();
        if weight <= tol.mode_tol * gmax || weight == 0.0 {
            continue;
        }
        let lambda = group.iter().map(|&i| modes.lambda[i]).sum::<f64>() / group.len() as f64;
        let rate = -lambda;
        let volume = weight * weight / (rate * rate);
        let mut column = vec![0.0; n - 1];
        for &i in &group {
            let g = -modes.weights[i] / modes.lambda[i];
            for (c, p) in column.iter_mut().zip(modes.p.column(i)) {
                *c += g * p;
            }
        }
        zones.push(Zone {
            rate,
            volume,
            column,
        });
    }
    zones.sort_by(|a, b| a.rate.total_cmp(&b.rate));

    let volumes: Vec<f64> = zones.iter().map(|z| z.volume).collect();
    let exchange: Vec<f64> = zones.iter().map(|z| z.rate * z.volume).collect();
    let params = star_spec(&volumes, &exchange);
    let system = build_state_space(&params)?.state_space;

    let r = if zones.is_empty() {
        let mut r = DenseMatrix::zeros(n, 1);
        r[(0, 0)] = 1.0;
        r
    } else {
        let cols: Vec<Vec<f64>> = zones.iter().map(|z| z.column.clone()).collect();
        block_diag_one(&DenseMatrix::from_columns(&cols))
    };

    let mut residuals = BTreeMap::new();
    let scale = ss.a().max_abs();
    let intertwining = ss
        .a()
        .matmul(&r)
        .max_abs_diff(&r.matmul(system.a()))
        / scale;
    residuals.insert("intertwining".into(), intertwining);
    residuals.insert(
        "markov".into(),
        realization::markov_deviation(ss, &system, n + system.n()),
    );
    // A(1,2:n)·R̃ should reproduce the closed-form exchange rates.
    let mut padded = vec![0.0];
    padded.extend(ss.mobile_row());
    let first_row = r.vecmat(&padded);
    let closed_form = exchange
        .iter()
        .zip(&first_row[1..])
        .map(|(d, f)| (d - f).abs() / d)
        .fold(0.0, f64::max);
    residuals.insert("closed_form_rates".into(), closed_form);
    let v_src: f64 = 1.0 + modes.volumes.iter().sum::<f64>();
    let v_dst: f64 = params.volumes.iter().sum();
    residuals.insert("total_volume".into(), (v_src - v_dst).abs() / v_src);

    Ok(EquivalentRealization {
        structure: Structure::Mrmt,
        transform: Some(r),
        system,
        params,
        residuals,
        normalization: None,
    })
}

/// Which compartments survive a truncation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Criterion {
    /// Keep compartments with volume at least the floor.
    VolumeFloor(f64),
    /// Keep compartments whose connecting exchange rate is at least the floor
    /// (`d₁ᵢ` for a star, `d_{i-1,i}` for a chain).
    RateFloor(f64),
    /// Keep this many compartments in total, mobile zone included: the
    /// largest immobile volumes of a star, the head of a chain.
    KeepK(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruncationReport {
    pub criterion: Criterion,
    /// 1-based indices of kept compartments in the source realization.
    pub kept: Vec<usize>,
    pub dropped: Vec<usize>,
    pub tf_source: TransferFunction,
    pub tf_truncated: TransferFunction,
    pub tf_coefficient_deviation: f64,
    /// `max |T(iω) - T̃(iω)|` over [`deviation_grid`].
    pub max_frequency_deviation: f64,
    pub markov_deviation: f64,
}

/// 100 logarithmically spaced frequencies in `[1e-2, 1e2]`.
pub fn deviation_grid() -> Vec<f64> {
    realization::log_grid(1e-2, 1e2, 100)
}

/// Drops compartments of a star or chain realization, keeping the surviving
/// volumes and exchange rates unchanged.
///
/// Fails with [`TransformError::EmptyModel`] when nothing but the mobile zone
/// would remain, unless `allow_mobile_only`.
pub fn truncate(
    eq: &EquivalentRealization,
    criterion: Criterion,
    allow_mobile_only: bool,
) -> Result<(EquivalentRealization, TruncationReport)> {
    let n = eq.params.n();
    let volumes = &eq.params.volumes;
    let kept: Vec<usize> = match eq.structure {
        Structure::Mrmt => {
            let rates: Vec<f64> = (0..n).map(|k| eq.params.rate(0, k)).collect();
            let mut keep: Vec<usize> = match criterion {
                Criterion::VolumeFloor(f) => (1..n).filter(|&k| volumes[k] >= f).collect(),
                Criterion::RateFloor(f) => (1..n).filter(|&k| rates[k] >= f).collect(),
                Criterion::KeepK(k) => {
                    let mut by_volume: Vec<usize> = (1..n).collect();
                    by_volume.sort_by(|&a, &b| volumes[b].total_cmp(&volumes[a]));
                    by_volume.truncate(k.saturating_sub(1));
                    by_volume.sort_unstable();
                    by_volume
                }
            };
            keep.insert(0, 0);
            keep
        }
        Structure::Minc => {
            let len = match criterion {
                Criterion::VolumeFloor(f) => {
                    (1..n).rev().find(|&k| volumes[k] >= f).map_or(1, |k| k + 1)
                }
                Criterion::RateFloor(f) => (1..n)
                    .rev()
                    .find(|&k| eq.params.rate(k - 1, k) >= f)
                    .map_or(1, |k| k + 1),
                Criterion::KeepK(k) => k.clamp(1, n),
            };
            (0..len).collect()
        }
    };
    if kept.len() == 1 && !allow_mobile_only {
        return Err(TransformError::EmptyModel);
    }

    let params = match eq.structure {
        Structure::Mrmt => {
            let v: Vec<f64> = kept[1..].iter().map(|&k| volumes[k]).collect();
            let d: Vec<f64> = kept[1..].iter().map(|&k| eq.params.rate(0, k)).collect();
            star_spec(&v, &d)
        }
        Structure::Minc => {
            let v: Vec<f64> = kept.iter().map(|&k| volumes[k]).collect();
            let d: Vec<f64> = (1..kept.len()).map(|k| eq.params.rate(k - 1, k)).collect();
            chain_spec(&v, &d)
        }
    };
    let built = build_state_space(&params)?;
    let system = built.state_space;

    let tf_source = realization::transfer_function(&eq.system);
    let tf_truncated = realization::transfer_function(&system);
    let max_frequency_deviation = deviation_grid()
        .into_iter()
        .map(|w| {
            let s = num_complex::Complex64::new(0.0, w);
            (tf_source.evaluate(s) - tf_truncated.evaluate(s)).norm()
        })
        .fold(0.0, f64::max);
    let report = TruncationReport {
        criterion,
        kept: kept.iter().map(|k| k + 1).collect(),
        dropped: (0..n).filter(|k| !kept.contains(k)).map(|k| k + 1).collect(),
        tf_coefficient_deviation: tf_source.coefficient_deviation(&tf_truncated),
        markov_deviation: realization::markov_deviation(
            &eq.system,
            &system,
            eq.system.n() + system.n(),
        ),
        max_frequency_deviation,
        tf_source,
        tf_truncated,
    };
    let mut residuals = BTreeMap::new();
    residuals.insert("markov".into(), report.markov_deviation);
    residuals.insert(
        "max_frequency_deviation".into(),
        report.max_frequency_deviation,
    );
    let truncated = EquivalentRealization {
        structure: eq.structure,
        transform: None,
        system,
        params,
        residuals,
        normalization: eq.normalization.clone(),
    };
    Ok((truncated, report))
}
