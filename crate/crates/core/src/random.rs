//! Random connected networks for property tests and benchmarks.

use rand::Rng;

use crate::network::{Edge, NetworkSpec};

/// Draw from `10^U(lo, hi)`.
pub fn log_uniform<R: Rng + ?Sized>(rng: &mut R, lo_exp: f64, hi_exp: f64) -> f64 {
    10f64.powf(rng.gen_range(lo_exp..=hi_exp))
}

/// Connected network on `n` zones: a random spanning tree plus each remaining
/// pair with probability `extra_edge_prob`. Volumes, flow and exchange rates
/// are log-uniform in `[10^lo_exp, 10^hi_exp]`.
pub fn random_network<R: Rng + ?Sized>(
    rng: &mut R,
    n: usize,
    extra_edge_prob: f64,
    lo_exp: f64,
    hi_exp: f64,
) -> NetworkSpec {
    assert!(n >= 1);
    let volumes = (0..n).map(|_| log_uniform(rng, lo_exp, hi_exp)).collect();
    let flow = log_uniform(rng, lo_exp, hi_exp);
    let mut linked = vec![vec![false; n]; n];
    let mut edges = Vec::new();
    for j in 1..n {
        let i = rng.gen_range(0..j);
        linked[i][j] = true;
        edges.push(Edge {
            i,
            j,
            d: log_uniform(rng, lo_exp, hi_exp),
        });
    }
    for i in 0..n {
        for j in i + 1..n {
            if !linked[i][j] && rng.gen_bool(extra_edge_prob) {
                edges.push(Edge {
                    i,
                    j,
                    d: log_uniform(rng, lo_exp, hi_exp),
                });
            }
        }
    }
    NetworkSpec {
        volumes,
        flow,
        edges,
    }
}

/// [`random_network`] with the ranges used throughout the test suites:
/// `n` uniform in `1..=max_n`, parameters in `[1e-2, 1e2]`.
pub fn standard_network<R: Rng + ?Sized>(rng: &mut R, max_n: usize) -> NetworkSpec {
    let n = rng.gen_range(1..=max_n);
    random_network(rng, n, 0.3, -2.0, 2.0)
}
