//! The two worked networks used throughout the tests and the README.

use crate::linalg::DenseMatrix;
use crate::network::{Edge, NetworkSpec};

fn edges(list: &[(usize, usize, f64)]) -> Vec<Edge> {
    list.iter()
        .map(|&(i, j, d)| Edge { i: i - 1, j: j - 1, d })
        .collect()
}

/// Four zones whose immobile part is not reachable as a whole: the minimal
/// realization has two states.
pub fn example1() -> NetworkSpec {
    NetworkSpec {
        volumes: vec![1.0, 1.0, 2.0, 3.0],
        flow: 1.0,
        edges: edges(&[(1, 2, 1.0), (1, 3, 2.0), (1, 4, 3.0), (2, 3, 3.0), (2, 4, 3.0)]),
    }
}

pub fn example1_matrix() -> DenseMatrix {
    DenseMatrix::from_rows(&[
        [-7.0, 1.0, 2.0, 3.0],
        [1.0, -7.0, 3.0, 3.0],
        [1.0, 1.5, -2.5, 0.0],
        [1.0, 1.0, 0.0, -2.0],
    ])
    .unwrap()
}

/// Five unit-volume zones, neither star nor chain shaped, controllable.
pub fn example2() -> NetworkSpec {
    NetworkSpec {
        volumes: vec![1.0; 5],
        flow: 1.0,
        edges: edges(&[(1, 2, 1.0), (1, 3, 2.0), (3, 4, 1.0), (3, 5, 3.0), (4, 5, 1.0)]),
    }
}

pub fn example2_matrix() -> DenseMatrix {
    DenseMatrix::from_rows(&[
        [-4.0, 1.0, 2.0, 0.0, 0.0],
        [1.0, -1.0, 0.0, 0.0, 0.0],
        [2.0, 0.0, -6.0, 1.0, 3.0],
        [0.0, 0.0, 1.0, -2.0, 1.0],
        [0.0, 0.0, 3.0, 1.0, -4.0],
    ])
    .unwrap()
}
