//! Slow, direct reference implementations used to check the fast paths.

#![allow(dead_code)]

use std::collections::BTreeMap;

use num_complex::Complex64;
use qbl_core::graph::{Assignment, GraphInstance};
use qbl_core::simulator::AngleSet;

/// Density of states by evaluating every assignment from its spins.
pub fn naive_density(g: &GraphInstance) -> BTreeMap<i64, u64> {
    let mut d = BTreeMap::new();
    for x in 0..1u64 << g.n() {
        let c = g.cut_cost(&Assignment::from_index(g.n(), x)).unwrap();
        *d.entry(c).or_insert(0) += 1;
    }
    d
}

type Matrix = Vec<Vec<Complex64>>;

fn matmul(a: &Matrix, b: &Matrix) -> Matrix {
    let n = a.len();
    let mut c = vec![vec![Complex64::new(0.0, 0.0); n]; n];
    for i in 0..n {
        for k in 0..n {
            let aik = a[i][k];
            if aik == Complex64::new(0.0, 0.0) {
                continue;
            }
            for j in 0..n {
                c[i][j] += aik * b[k][j];
            }
        }
    }
    c
}

/// `exp(A)` by scaling and squaring of a truncated Taylor series.
fn expm(a: &Matrix) -> Matrix {
    let n = a.len();
    let norm = a.iter().map(|r| r.iter().map(|v| v.norm()).sum::<f64>()).fold(0.0, f64::max);
    let mut s = 0;
    while norm / f64::from(1u32 << s) > 0.25 {
        s += 1;
    }
    let scale = f64::from(1u32 << s);
    let scaled: Matrix = a.iter().map(|r| r.iter().map(|v| v / scale).collect()).collect();
    let mut result: Matrix = (0..n)
        .map(|i| (0..n).map(|j| Complex64::new(if i == j { 1.0 } else { 0.0 }, 0.0)).collect())
        .collect();
    let mut term = result.clone();
    for k in 1..30 {
        term = matmul(&term, &scaled);
        term.iter_mut().flatten().for_each(|v| *v /= k as f64);
        result.iter_mut().flatten().zip(term.iter().flatten()).for_each(|(r, t)| *r += t);
    }
    for _ in 0..s {
        result = matmul(&result, &result);
    }
    result
}

fn apply(m: &Matrix, v: &[Complex64]) -> Vec<Complex64> {
    m.iter().map(|row| row.iter().zip(v).map(|(a, b)| a * b).sum()).collect()
}

/// QAOA state from explicit `2^n × 2^n` matrices `exp(-iγĈ)` and `exp(-iβB̂)`.
pub fn dense_qaoa(g: &GraphInstance, angles: &AngleSet) -> Vec<Complex64> {
    let n = g.n();
    let dim = 1usize << n;
    let costs: Vec<f64> =
        (0..dim).map(|x| g.cut_cost(&Assignment::from_index(n, x as u64)).unwrap() as f64).collect();
    let mut b: Matrix = vec![vec![Complex64::new(0.0, 0.0); dim]; dim];
    for x in 0..dim {
        for q in 0..n {
            b[x][x ^ (1 << q)] += Complex64::new(1.0, 0.0);
        }
    }
    let amp = Complex64::new((dim as f64).sqrt().recip(), 0.0);
    let mut psi = vec![amp; dim];
    for (&beta, &gamma) in angles.betas.iter().zip(&angles.gammas) {
        let mut hc: Matrix = vec![vec![Complex64::new(0.0, 0.0); dim]; dim];
        for x in 0..dim {
            hc[x][x] = Complex64::new(0.0, -gamma * costs[x]);
        }
        psi = apply(&expm(&hc), &psi);
        let hb: Matrix = b.iter().map(|r| r.iter().map(|v| v * Complex64::new(0.0, -beta)).collect()).collect();
        psi = apply(&expm(&hb), &psi);
    }
    psi
}

/// Central differences with step `h`.
pub fn central_difference(mut f: impl FnMut(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    (0..x.len())
        .map(|i| {
            let mut up = x.to_vec();
            let mut dn = x.to_vec();
            up[i] += h;
            dn[i] -= h;
            (f(&up) - f(&dn)) / (2.0 * h)
        })
        .collect()
}

/// `max_i |a_i − b_i| / max(‖b‖_∞, tiny)`.
pub fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    let scale = b.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max) / scale
}
