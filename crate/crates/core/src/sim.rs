//! Time-domain simulation of `ẋ = Ax + Bu`, `y = Cx` for piecewise-constant
//! nonnegative inputs, stepping with the exact matrix exponential.

use std::collections::HashMap;
use std::io::{self, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{self, DenseMatrix, LinalgError};
use crate::network::{self, StateSpace};

/// States below `-POS_SIM_TOL` (times the magnitude of the data) are a logic
/// error rather than round-off.
pub const POS_SIM_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("input must be nonnegative, got {0:e}")]
    NegativeInput(f64),
    #[error("initial state entry {index} is negative ({value:e})")]
    NegativeInitialState { index: usize, value: f64 },
    #[error("initial state has length {got}, expected {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("piecewise input needs one value per breakpoint ({times} times, {values} values)")]
    BadSignal { times: usize, values: usize },
    #[error("time grid must be strictly increasing and finite (at position {0})")]
    BadGrid(usize),
    #[error("state {index} reached {value:e} at t = {time}")]
    NonNegativityViolated { time: f64, index: usize, value: f64 },
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

pub type Result<T> = std::result::Result<T, SimError>;

/// Piecewise-constant input signals; all start at `t = 0` and are zero before.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InputSignal {
    /// Step of the given height.
    Constant(f64),
    /// Rectangular injection on `[0, duration)`.
    Pulse { amplitude: f64, duration: f64 },
    /// `values[k]` on `[times[k], times[k+1])`, the last value held forever.
    Piecewise { times: Vec<f64>, values: Vec<f64> },
}

impl InputSignal {
    /// Value on the interval starting at `t` (right-continuous).
    pub fn value_at(&self, t: f64) -> f64 {
        if t < 0.0 {
            return 0.0;
        }
        match self {
            InputSignal::Constant(c) => *c,
            InputSignal::Pulse {
                amplitude,
                duration,
            } => {
                if t < *duration {
                    *amplitude
                } else {
                    0.0
                }
            }
            InputSignal::Piecewise { times, values } => times
                .iter()
                .rposition(|&s| s <= t)
                .map_or(0.0, |k| values[k]),
        }
    }

    fn breakpoints(&self) -> Vec<f64> {
        match self {
            InputSignal::Constant(_) => vec![0.0],
            InputSignal::Pulse { duration, .. } => vec![0.0, *duration],
            InputSignal::Piecewise { times, .. } => {
                let mut b = vec![0.0];
                b.extend(times.iter().copied());
                b
            }
        }
    }

    fn values(&self) -> Vec<f64> {
        match self {
            InputSignal::Constant(c) => vec![*c],
            InputSignal::Pulse { amplitude, .. } => vec![*amplitude],
            InputSignal::Piecewise { values, .. } => values.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub outputs: Vec<f64>,
    pub states: Vec<Vec<f64>>,
}

impl Trajectory {
    /// Most negative state entry over the whole run.
    pub fn min_state(&self) -> f64 {
        self.states
            .iter()
            .flatten()
            .fold(f64::INFINITY, |m, &x| m.min(x))
    }

    /// CSV with header `t,y` and, if requested, `x1..xn`; 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut w: W, with_states: bool) -> io::Result<()> {
        write!(w, "t,y")?;
        let n = self.states.first().map_or(0, Vec::len);
        if with_states {
            for k in 1..=n {
                write!(w, ",x{k}")?;
            }
        }
        writeln!(w)?;
        for (i, t) in self.times.iter().enumerate() {
            write!(w, "{:.16e},{:.16e}", t, self.outputs[i])?;
            if with_states {
                for x in &self.states[i] {
                    write!(w, ",{x:.16e}")?;
                }
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

const PADE13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];
const THETA13: f64 = 5.371920351148152;

/// Matrix exponential by scaling and squaring with the degree 13 Padé
/// approximant.
pub fn expm(a: &DenseMatrix) -> Result<DenseMatrix> {
    let n = a.rows();
    let norm = a.norm_one();
    let s = if norm > THETA13 {
        (norm / THETA13).log2().ceil() as i32
    } else {
        0
    };
    let a = a.scale(0.5_f64.powi(s));
    let b = &PADE13;
    let id = DenseMatrix::identity(n);
    let a2 = a.matmul(&a);
    let a4 = a2.matmul(&a2);
    let a6 = a4.matmul(&a2);
    let lin = |c6: f64, c4: f64, c2: f64, c0: f64| {
        a6.scale(c6)
            .add(&a4.scale(c4))
            .add(&a2.scale(c2))
            .add(&id.scale(c0))
    };
    let inner_u = a6.matmul(&a6.scale(b[13]).add(&a4.scale(b[11])).add(&a2.scale(b[9])));
    let u = a.matmul(&inner_u.add(&lin(b[7], b[5], b[3], b[1])));
    let inner_v = a6.matmul(&a6.scale(b[12]).add(&a4.scale(b[10])).add(&a2.scale(b[8])));
    let v = inner_v.add(&lin(b[6], b[4], b[2], b[0]));
    let mut r = linalg::solve_matrix(&v.sub(&u), &v.add(&u))?;
    for _ in 0..s {
        r = r.matmul(&r);
    }
    Ok(r)
}

/// One exact step of length `h` for constant input: `x ← Φx + Γu` with
/// `Φ = e^{Ah}` and `Γ = (e^{Ah} - I)A⁻¹B = ∫₀ʰ e^{As}B ds`.
struct Propagator {
    phi: DenseMatrix,
    gamma: Vec<f64>,
}

impl Propagator {
    fn new(ss: &StateSpace, h: f64) -> Result<Self> {
        let n = ss.n();
        // Both blocks at once from the exponential of [[A, B], [0, 0]]·h.
        let mut aug = DenseMatrix::zeros(n + 1, n + 1);
        for i in 0..n {
            for j in 0..n {
                aug[(i, j)] = ss.a()[(i, j)] * h;
            }
        }
        aug[(0, n)] = h;
        let e = expm(&aug)?;
        Ok(Propagator {
            phi: e.submatrix(0, n, 0, n),
            gamma: (0..n).map(|i| e[(i, n)]).collect(),
        })
    }

    fn apply(&self, x: &[f64], u: f64) -> Vec<f64> {
        let mut y = self.phi.matvec(x);
        for (yi, g) in y.iter_mut().zip(&self.gamma) {
            *yi += g * u;
        }
        y
    }
}

pub fn simulate(
    ss: &StateSpace,
    input: &InputSignal,
    x0: &[f64],
    t_grid: &[f64],
) -> Result<Trajectory> {
    let n = ss.n();
    if x0.len() != n {
        return Err(SimError::DimensionMismatch {
            expected: n,
            got: x0.len(),
        });
    }
    if let Some((index, &value)) = x0.iter().enumerate().find(|(_, x)| !(**x >= 0.0)) {
        return Err(SimError::NegativeInitialState { index, value });
    }
    if let InputSignal::Piecewise { times, values } = input {
        if times.len() != values.len() {
            return Err(SimError::BadSignal {
                times: times.len(),
                values: values.len(),
            });
        }
    }
    if let Some(&u) = input.values().iter().find(|u| !(**u >= 0.0)) {
        return Err(SimError::NegativeInput(u));
    }
    for (k, w) in t_grid.windows(2).enumerate() {
        if !(w[1] > w[0]) || !w[1].is_finite() {
            return Err(SimError::BadGrid(k + 1));
        }
    }
    if t_grid.first().is_some_and(|t| !t.is_finite()) {
        return Err(SimError::BadGrid(0));
    }

    let scale = x0
        .iter()
        .chain(&input.values())
        .fold(1.0_f64, |m, x| m.max(x.abs()));
    let floor = -POS_SIM_TOL * scale;
    let breaks = input.breakpoints();
    let mut cache: HashMap<u64, Propagator> = HashMap::new();
    let mut step = |x: &[f64], t0: f64, t1: f64| -> Result<Vec<f64>> {
        let h = t1 - t0;
        let p = match cache.entry(h.to_bits()) {
            std::collections::hash_map::Entry::Occupied(e) => e.into_mut(),
            std::collections::hash_map::Entry::Vacant(e) => e.insert(Propagator::new(ss, h)?),
        };
        Ok(p.apply(x, input.value_at(t0)))
    };

    let mut x = x0.to_vec();
    let mut traj = Trajectory {
        times: Vec::with_capacity(t_grid.len()),
        outputs: Vec::with_capacity(t_grid.len()),
        states: Vec::with_capacity(t_grid.len()),
    };
    for (k, &t) in t_grid.iter().enumerate() {
        if k > 0 {
            let t_prev = t_grid[k - 1];
            let mut s = t_prev;
            for &b in breaks.iter().filter(|&&b| b > t_prev && b < t) {
                x = step(&x, s, b)?;
                s = b;
            }
            x = step(&x, s, t)?;
        }
        if let Some((index, &value)) = x.iter().enumerate().find(|(_, v)| **v < floor) {
            return Err(SimError::NonNegativityViolated {
                time: t,
                index,
                value,
            });
        }
        traj.times.push(t);
        traj.outputs.push(x[0]);
        traj.states.push(x.clone());
    }
    Ok(traj)
}

/// Output of a rectangular tracer injection starting from a clean system.
pub fn breakthrough_curve(
    ss: &StateSpace,
    amplitude: f64,
    duration: f64,
    t_grid: &[f64],
) -> Result<Vec<(f64, f64)>> {
    let input = InputSignal::Pulse {
        amplitude,
        duration,
    };
    let traj = simulate(ss, &input, &vec![0.0; ss.n()], t_grid)?;
    Ok(traj.times.into_iter().zip(traj.outputs).collect())
}

/// `(10/r_max, 50/r_min)` with `r = -λ` over the spectrum of `A`: the fast
/// time scale to resolve and the time by which the slowest mode has decayed.
/// The slowest mode of `A` is slower than every immobile rate (interlacing),
/// so the immobile spectrum alone would stop too early.
pub fn default_horizon(ss: &StateSpace) -> Result<(f64, f64)> {
    let spec = network::spectrum(ss).map_err(|e| match e {
        network::NetworkError::Linalg(l) => SimError::Linalg(l),
        other => SimError::Linalg(LinalgError::DimensionMismatch(other.to_string())),
    })?;
    let rates: Vec<f64> = spec.iter().map(|l| l.abs()).collect();
    let rmax = rates.iter().fold(0.0_f64, |m, r| m.max(*r));
    let rmin = rates.iter().fold(f64::INFINITY, |m, r| m.min(*r));
    Ok((10.0 / rmax, 50.0 / rmin))
}

/// `points` equally spaced times on `[0, t_end]`.
pub fn uniform_grid(t_end: f64, points: usize) -> Vec<f64> {
    if points < 2 {
        return vec![0.0];
    }
    (0..points)
        .map(|k| t_end * k as f64 / (points - 1) as f64)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::examples;

    #[test]
    fn expm_of_diagonal_and_nilpotent() {
        let d = DenseMatrix::from_diag(&[-1.0, 0.5, -30.0]);
        let e = expm(&d).unwrap();
        for (i, l) in [-1.0_f64, 0.5, -30.0].iter().enumerate() {
            assert!((e[(i, i)] - l.exp()).abs() <= 1e-14 * l.exp().max(1e-300));
        }
        let n = DenseMatrix::from_rows(&[[0.0, 1.0], [0.0, 0.0]]).unwrap();
        let e = expm(&n.scale(3.0)).unwrap();
        let want = DenseMatrix::from_rows(&[[1.0, 3.0], [0.0, 1.0]]).unwrap();
        assert!(e.max_abs_diff(&want) < 1e-14);
    }

    #[test]
    fn zero_input_stays_zero() {
        let ss = StateSpace::new(examples::example2_matrix()).unwrap();
        let traj = simulate(&ss, &InputSignal::Constant(0.0), &[0.0; 5], &uniform_grid(5.0, 11)).unwrap();
        assert!(traj.states.iter().flatten().all(|&x| x == 0.0));
    }

    #[test]
    fn pulse_splits_at_end_of_injection() {
        let ss = StateSpace::new(DenseMatrix::from_rows(&[[-1.0]]).unwrap()).unwrap();
        // ẏ = -y + u with u = 1 on [0, 0.5): y(1) = (1 - e^{-0.5}) e^{-0.5}.
        let curve = breakthrough_curve(&ss, 1.0, 0.5, &[0.0, 1.0]).unwrap();
        let want = (1.0 - (-0.5_f64).exp()) * (-0.5_f64).exp();
        assert!((curve[1].1 - want).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_arguments() {
        let ss = StateSpace::new(examples::example2_matrix()).unwrap();
        let grid = uniform_grid(1.0, 3);
        assert!(matches!(
            simulate(&ss, &InputSignal::Constant(-1.0), &[0.0; 5], &grid),
            Err(SimError::NegativeInput(_))
        ));
        assert!(matches!(
            simulate(&ss, &InputSignal::Constant(1.0), &[0.0, -1.0, 0.0, 0.0, 0.0], &grid),
            Err(SimError::NegativeInitialState { index: 1, .. })
        ));
        assert!(matches!(
            simulate(&ss, &InputSignal::Constant(1.0), &[0.0; 5], &[0.0, 1.0, 1.0]),
            Err(SimError::BadGrid(2))
        ));
    }

    #[test]
    fn csv_layout() {
        let traj = Trajectory {
            times: vec![0.0, 0.5],
            outputs: vec![0.0, 0.25],
            states: vec![vec![0.0, 0.0], vec![0.25, 0.125]],
        };
        let mut buf = Vec::new();
        traj.write_csv(&mut buf, true).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("t,y,x1,x2"));
        assert_eq!(
            lines.nth(1),
            Some("5.0000000000000000e-1,2.5000000000000000e-1,2.5000000000000000e-1,1.2500000000000000e-1")
        );
    }

    #[test]
    fn piecewise_values() {
        let u = InputSignal::Piecewise {
            times: vec![1.0, 2.0],
            values: vec![3.0, 0.5],
        };
        assert_eq!(u.value_at(0.5), 0.0);
        assert_eq!(u.value_at(1.0), 3.0);
        assert_eq!(u.value_at(7.0), 0.5);
    }
}
