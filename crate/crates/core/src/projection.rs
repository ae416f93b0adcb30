//! Euclidean projection onto `{x ≥ 0, Σ x_i c_i = t, Σ x_i = 1}`.
//!
//! Dykstra's alternating projection between the affine set and the
//! nonnegative orthant. Once the zero pattern settles, the candidate support is
//! solved exactly and accepted if it satisfies the KKT conditions.

use crate::error::{Error, Result};

pub const MAX_ITERATIONS: usize = 100_000;
const TOL: f64 = 1e-12;

/// The two equality constraints, preprocessed for closed-form projection.
struct Affine<'a> {
    c: &'a [f64],
    target: f64,
}

impl Affine<'_> {
    fn residuals(&self, x: &[f64]) -> [f64; 2] {
        let mean: f64 = x.iter().zip(self.c).map(|(a, b)| a * b).sum();
        let total: f64 = x.iter().sum();
        [mean - self.target, total - 1.0]
    }

    /// Projects `x` in place onto the affine set restricted to the coordinates
    /// where `mask` is true. Returns false if that restriction is degenerate.
    fn project(&self, x: &mut [f64], mask: Option<&[bool]>) -> bool {
        let on = |i: usize| mask.is_none_or(|m| m[i]);
        let (mut scc, mut sc, mut k, mut rc, mut r1) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for i in (0..x.len()).filter(|&i| on(i)) {
            scc += self.c[i] * self.c[i];
            sc += self.c[i];
            k += 1.0;
            rc += x[i] * self.c[i];
            r1 += x[i];
        }
        let det = scc * k - sc * sc;
        if k == 0.0 || det.abs() <= 1e-12 * scc.max(1.0) * k {
            return false;
        }
        let (e1, e2) = (rc - self.target, r1 - 1.0);
        let l1 = (k * e1 - sc * e2) / det;
        let l2 = (scc * e2 - sc * e1) / det;
        for i in (0..x.len()).filter(|&i| on(i)) {
            x[i] -= l1 * self.c[i] + l2;
        }
        if let Some(m) = mask {
            x.iter_mut().zip(m).filter(|(_, &on)| !on).for_each(|(v, _)| *v = 0.0);
        }
        true
    }
}

/// Exact solution on the support of `x`, or `None` if it violates KKT.
fn polish(aff: &Affine, y: &[f64], support: &[bool]) -> Option<Vec<f64>> {
    let mut x = y.to_vec();
    if !aff.project(&mut x, Some(support)) {
        return None;
    }
    if x.iter().zip(support).any(|(&v, &s)| s && v < -TOL) {
        return None;
    }
    // Multipliers λ are recovered from the projection step: x − y = −(λ₁c + λ₂) on the support.
    let idx: Vec<usize> = (0..x.len()).filter(|&i| support[i]).collect();
    let (l1, l2) = if idx.len() >= 2 {
        let (i, j) = (idx[0], *idx.iter().find(|&&j| aff.c[j] != aff.c[idx[0]])?);
        let di = y[i] - x[i];
        let dj = y[j] - x[j];
        let l1 = (di - dj) / (aff.c[i] - aff.c[j]);
        (l1, di - l1 * aff.c[i])
    } else {
        return None;
    };
    // Off-support coordinates need y_i − λ₁c_i − λ₂ ≤ 0.
    let ok = (0..x.len()).filter(|&i| !support[i]).all(|i| y[i] - l1 * aff.c[i] - l2 <= TOL);
    ok.then(|| {
        x.iter_mut().for_each(|v| *v = v.max(0.0));
        x
    })
}

/// Closest point to `start` in `{x ≥ 0, Σ x_i costs_i = target, Σ x_i = 1}`.
pub fn project_simplex_slice(costs: &[f64], start: &[f64], target: f64) -> Result<Vec<f64>> {
    if costs.len() != start.len() || costs.is_empty() {
        return Err(Error::InvalidInput("costs and start must have equal, nonzero length".into()));
    }
    let lo = costs.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = costs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(lo..=hi).contains(&target) {
        return Err(Error::OutOfRange { target, lo, hi });
    }
    let aff = Affine { c: costs, target };
    if lo == hi {
        // Only the normalization binds; project onto the plain simplex.
        return Ok(simplex_projection(start));
    }
    let feasible =
        |x: &[f64]| x.iter().all(|&v| v >= 0.0) && aff.residuals(x).iter().all(|r| r.abs() <= 1e-13);
    if feasible(start) {
        return Ok(start.to_vec());
    }

    let dim = start.len();
    let mut x = start.to_vec();
    let mut p = vec![0.0; dim];
    let mut q = vec![0.0; dim];
    let mut last_support: Vec<bool> = vec![true; dim];
    let mut stable = 0;
    let mut residuals = [f64::INFINITY; 2];
    for it in 0..MAX_ITERATIONS {
        let mut yv: Vec<f64> = x.iter().zip(&p).map(|(a, b)| a + b).collect();
        let before = yv.clone();
        aff.project(&mut yv, None);
        p.iter_mut().zip(before.iter().zip(&yv)).for_each(|(pi, (b, a))| *pi = b - a);
        let z: Vec<f64> = yv.iter().zip(&q).map(|(a, b)| a + b).collect();
        let mut nx = z.clone();
        nx.iter_mut().for_each(|v| *v = v.max(0.0));
        q.iter_mut().zip(z.iter().zip(&nx)).for_each(|(qi, (b, a))| *qi = b - a);

        let support: Vec<bool> = nx.iter().map(|&v| v > 0.0).collect();
        let change: f64 = nx.iter().zip(&x).map(|(a, b)| (a - b).abs()).sum();
        x = nx;
        if support == last_support {
            stable += 1;
        } else {
            stable = 0;
            last_support = support;
        }
        if stable >= 5 || it % 64 == 63 {
            if let Some(exact) = polish(&aff, start, &last_support) {
                if aff.residuals(&exact).iter().all(|r| r.abs() <= 1e-9) {
                    return Ok(exact);
                }
            }
        }
        residuals = aff.residuals(&x);
        if change <= 1e-15 && residuals.iter().all(|r| r.abs() <= 1e-10) {
            return Ok(x);
        }
    }
    Err(Error::Convergence { iterations: MAX_ITERATIONS, residuals })
}

/// Euclidean projection onto the probability simplex.
fn simplex_projection(y: &[f64]) -> Vec<f64> {
    let mut u = y.to_vec();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut cum = 0.0;
    let mut theta = 0.0;
    for (k, &v) in u.iter().enumerate() {
        cum += v;
        let t = (cum - 1.0) / (k + 1) as f64;
        if v - t > 0.0 {
            theta = t;
        }
    }
    y.iter().map(|v| (v - theta).max(0.0)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn objective(x: &[f64], y: &[f64]) -> f64 {
        x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum()
    }

    #[test]
    fn two_cost_slice_is_a_point() {
        let costs = [-1.0, 3.0];
        for start in [[0.1, 0.9], [1.0, 0.0], [0.5, 0.5]] {
            let x = project_simplex_slice(&costs, &start, 0.0).unwrap();
            assert!((x[0] - 0.75).abs() < 1e-12 && (x[1] - 0.25).abs() < 1e-12);
        }
    }

    #[test]
    fn three_cost_toy_matches_grid() {
        let costs = [-2.0, 0.0, 2.0];
        for start in [[0.2, 0.5, 0.3], [0.9, 0.05, 0.05], [0.0, 0.0, 1.0], [0.3, 0.3, 0.4]] {
            let x = project_simplex_slice(&costs, &start, -1.0).unwrap();
            // Feasible slice: x = (s, 1.5 − 2s, s − 0.5) for s ∈ [0.5, 0.75].
            let mut best = f64::INFINITY;
            let mut s = 0.5;
            while s <= 0.75 + 1e-12 {
                best = best.min(objective(&[s, 1.5 - 2.0 * s, s - 0.5], &start));
                s += 1e-4;
            }
            assert!((objective(&x, &start) - best).abs() < 1e-6, "{x:?}");
            assert!(objective(&x, &start) <= best + 1e-12);
        }
    }

    #[test]
    fn feasible_start_is_returned() {
        let costs = [-2.0, 0.0, 2.0];
        let start = [0.6, 0.3, 0.1];
        assert_eq!(project_simplex_slice(&costs, &start, -1.0).unwrap(), start.to_vec());
    }

    #[test]
    fn infeasible_target() {
        assert!(matches!(
            project_simplex_slice(&[-1.0, 3.0], &[0.5, 0.5], 4.0),
            Err(Error::OutOfRange { .. })
        ));
    }

    #[test]
    fn simplex_projection_basics() {
        let x = simplex_projection(&[0.5, 0.5, 0.5]);
        assert!(x.iter().all(|v| (v - 1.0 / 3.0).abs() < 1e-15));
        assert_eq!(simplex_projection(&[2.0, 0.0]), vec![1.0, 0.0]);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn output_satisfies_constraints(w in prop::collection::vec(0.0f64..1.0, 3..12), t in 0.0f64..1.0) {
            let k = w.len();
            let costs: Vec<f64> = (0..k).map(|i| -(k as f64) + 2.0 * i as f64).collect();
            let s: f64 = w.iter().sum::<f64>() + 1e-9;
            let start: Vec<f64> = w.iter().map(|v| v / s).collect();
            let target = costs[0] + t * (costs[k - 1] - costs[0]);
            let x = project_simplex_slice(&costs, &start, target).unwrap();
            prop_assert!(x.iter().all(|&v| v >= 0.0));
            let mean: f64 = x.iter().zip(&costs).map(|(a, b)| a * b).sum();
            prop_assert!((mean - target).abs() <= 1e-9);
            prop_assert!((x.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
        }
    }
}
