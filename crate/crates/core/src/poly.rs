//! Real polynomials as ascending coefficient vectors.

use num_complex::Complex64;

/// Drops trailing zero coefficients, keeping at least one entry.
pub fn trim(mut p: Vec<f64>) -> Vec<f64> {
    while p.len() > 1 && *p.last().unwrap() == 0.0 {
        p.pop();
    }
    if p.is_empty() {
        p.push(0.0);
    }
    p
}

pub fn degree(p: &[f64]) -> usize {
    p.iter().rposition(|&c| c != 0.0).unwrap_or(0)
}

pub fn max_abs(p: &[f64]) -> f64 {
    p.iter().fold(0.0, |m, c| m.max(c.abs()))
}

pub fn monic(p: &[f64]) -> Vec<f64> {
    let p = trim(p.to_vec());
    let lead = *p.last().unwrap();
    p.iter().map(|c| c / lead).collect()
}

pub fn mul(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

/// Monic polynomial with the given real roots.
pub fn from_roots(roots: &[f64]) -> Vec<f64> {
    roots
        .iter()
        .fold(vec![1.0], |acc, &r| mul(&acc, &[-r, 1.0]))
}

/// Quotient and remainder of `a / b`.
pub fn divrem(a: &[f64], b: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let b = trim(b.to_vec());
    let db = b.len() - 1;
    let lead = b[db];
    assert!(lead != 0.0, "division by the zero polynomial");
    let mut r = trim(a.to_vec());
    if r.len() <= db {
        return (vec![0.0], r);
    }
    let mut q = vec![0.0; r.len() - db];
    for k in (0..q.len()).rev() {
        let c = r[k + db] / lead;
        q[k] = c;
        for (j, &bj) in b.iter().enumerate() {
            r[k + j] -= c * bj;
        }
        r[k + db] = 0.0;
    }
    r.truncate(db.max(1));
    (q, trim(r))
}

/// Monic greatest common divisor by the Euclidean algorithm; a remainder is
/// treated as zero once its largest coefficient falls to `tol` times that of
/// the dividend.
pub fn gcd(a: &[f64], b: &[f64], tol: f64) -> Vec<f64> {
    let (mut x, mut y) = if degree(a) >= degree(b) {
        (monic(a), monic(b))
    } else {
        (monic(b), monic(a))
    };
    loop {
        if degree(&y) == 0 {
            return vec![1.0];
        }
        let (_, r) = divrem(&x, &y);
        if max_abs(&r) <= tol * max_abs(&x).max(max_abs(&y)) {
            return y;
        }
        x = y;
        y = monic(&r);
    }
}

pub fn eval(p: &[f64], x: f64) -> f64 {
    p.iter().rev().fold(0.0, |acc, &c| acc * x + c)
}

pub fn eval_complex(p: &[f64], z: Complex64) -> Complex64 {
    p.iter()
        .rev()
        .fold(Complex64::new(0.0, 0.0), |acc, &c| acc * z + c)
}
