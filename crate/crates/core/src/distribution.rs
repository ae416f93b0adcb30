use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

/// Probability mass over integer cost values.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct CostDistribution {
    mass: BTreeMap<i64, f64>,
}

impl CostDistribution {
    pub fn from_pairs(pairs: impl IntoIterator<Item = (i64, f64)>) -> Self {
        let mut mass = BTreeMap::new();
        for (c, m) in pairs {
            *mass.entry(c).or_insert(0.0) += m;
        }
        Self { mass }
    }

    /// Mass at `c`, zero outside the support.
    pub fn mass(&self, c: i64) -> f64 {
        self.mass.get(&c).copied().unwrap_or(0.0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (i64, f64)> + '_ {
        self.mass.iter().map(|(&c, &m)| (c, m))
    }

    pub fn support(&self) -> impl Iterator<Item = i64> + '_ {
        self.mass.keys().copied()
    }

    pub fn len(&self) -> usize {
        self.mass.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mass.is_empty()
    }

    pub fn total(&self) -> f64 {
        self.mass.values().sum()
    }

    /// `Σ_C mass(C)·C`.
    pub fn mean(&self) -> f64 {
        self.iter().map(|(c, m)| c as f64 * m).sum()
    }

    pub fn is_normalized(&self, tol: f64) -> bool {
        self.mass.values().all(|&m| m >= 0.0) && (self.total() - 1.0).abs() <= tol
    }
}

/// Total variation distance `Σ_C |a(C) - b(C)| / 2` over the union of supports.
pub fn tvd(a: &CostDistribution, b: &CostDistribution) -> f64 {
    let mut keys: Vec<i64> = a.support().chain(b.support()).collect();
    keys.sort_unstable();
    keys.dedup();
    let d: f64 = keys.iter().map(|&c| (a.mass(c) - b.mass(c)).abs()).sum();
    (d / 2.0).clamp(0.0, 1.0)
}

/// `Pr(C ≤ threshold)`.
pub fn cumulative(dist: &CostDistribution, threshold: f64) -> f64 {
    dist.iter().take_while(|&(c, _)| c as f64 <= threshold).map(|(_, m)| m).sum()
}
