//! Initial angles from the infinite-size SK table, local BFGS refinement and a
//! random-restart baseline.

use std::collections::BTreeMap;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{derive_seed, GraphInstance};
use crate::optim::{bfgs, BfgsOptions};
use crate::simulator::{approximation_ratio, AngleSet, Simulator};

const DEFAULT_TABLE: &str = include_str!("../data/sk_angles.json");

/// Settings for [`optimize_angles`].
pub type OptimizerSettings = BfgsOptions;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct SkEntry {
    p: usize,
    betas: Vec<f64>,
    gammas: Vec<f64>,
}

/// Angle table for the infinite-size SK model, keyed by layer count.
#[derive(Debug, Clone, PartialEq)]
pub struct SkAngleTable {
    entries: BTreeMap<usize, AngleSet>,
}

impl SkAngleTable {
    /// The table shipped with the crate (p = 1..=12).
    pub fn builtin() -> Self {
        Self::from_json(DEFAULT_TABLE).expect("embedded angle table is valid")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let raw: Vec<SkEntry> = serde_json::from_str(text)?;
        let mut entries = BTreeMap::new();
        for e in raw {
            if e.p == 0 || e.betas.len() != e.p || e.gammas.len() != e.p {
                return Err(Error::InvalidInput(format!(
                    "angle table entry p = {} has {} betas and {} gammas",
                    e.p,
                    e.betas.len(),
                    e.gammas.len()
                )));
            }
            if entries.insert(e.p, AngleSet::new(e.betas, e.gammas)?).is_some() {
                return Err(Error::InvalidInput(format!("duplicate angle table entry p = {}", e.p)));
            }
        }
        Ok(Self { entries })
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn get(&self, p: usize) -> Result<&AngleSet> {
        self.entries.get(&p).ok_or(Error::MissingTableEntry(p))
    }

    pub fn layers(&self) -> impl Iterator<Item = usize> + '_ {
        self.entries.keys().copied()
    }
}

/// `β = β^SK`, `γ = γ^SK / √d` for average degree `d`.
pub fn rescale_sk(table: &SkAngleTable, p: usize, avg_degree: f64) -> Result<AngleSet> {
    let sk = table.get(p)?;
    if !(avg_degree > 0.0) {
        return Err(Error::InvalidInstance(format!(
            "average degree must be positive to rescale angles, got {avg_degree}"
        )));
    }
    let s = avg_degree.sqrt();
    Ok(AngleSet { betas: sk.betas.clone(), gammas: sk.gammas.iter().map(|g| g / s).collect() })
}

/// Where an optimization started.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitSource {
    Given,
    /// Uniform draw with `β ∈ [0, beta_range)` and `γ ∈ [0, gamma_range)`.
    Random { sample: usize, samples: usize, seed: u64, beta_range: f64, gamma_range: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizationReport {
    pub label: String,
    pub p: usize,
    pub initial: AngleSet,
    #[serde(rename = "final")]
    pub final_angles: AngleSet,
    pub initial_cost: f64,
    pub final_cost: f64,
    pub initial_ratio: f64,
    pub final_ratio: f64,
    pub iterations: usize,
    pub grad_norm: f64,
    pub converged: bool,
    pub init: InitSource,
}

/// Runs BFGS on `⟨C⟩` from `init` using an existing simulator.
/// `c_min`/`c_max` are only used for the reported ratios.
pub fn optimize_with(
    sim: &Simulator,
    label: &str,
    c_min: i64,
    c_max: i64,
    init: &AngleSet,
    opts: &OptimizerSettings,
) -> Result<OptimizationReport> {
    let p = init.p();
    let f = |x: &[f64]| sim.value_and_gradient(&AngleSet::from_slice(x)?);
    let initial_cost = sim.expectation(init)?;
    if !initial_cost.is_finite() {
        return Err(Error::NumericalFailure { message: "non-finite initial cost".into(), last_good: init.to_vec() });
    }
    let res = bfgs(f, &init.to_vec(), opts)?;
    let final_angles = AngleSet::from_slice(&res.x)?;
    Ok(OptimizationReport {
        label: label.to_string(),
        p,
        initial: init.clone(),
        final_angles,
        initial_cost,
        final_cost: res.value,
        initial_ratio: approximation_ratio(initial_cost, c_min, c_max)?,
        final_ratio: approximation_ratio(res.value, c_min, c_max)?,
        iterations: res.iterations,
        grad_norm: res.grad_norm,
        converged: res.converged,
        init: InitSource::Given,
    })
}

fn extremes(sim: &Simulator) -> (i64, i64) {
    let costs = sim.table().costs();
    let lo = costs.iter().copied().min().unwrap_or(0);
    let hi = costs.iter().copied().max().unwrap_or(0);
    (i64::from(lo), i64::from(hi))
}

pub fn optimize_angles(g: &GraphInstance, init: &AngleSet, opts: &OptimizerSettings) -> Result<OptimizationReport> {
    let sim = Simulator::for_graph(g)?;
    let (lo, hi) = extremes(&sim);
    optimize_with(&sim, g.label(), lo, hi, init, opts)
}

/// Best of `n_samples` optimizations from uniform random starts with
/// `β_l ∈ [0, π)` and `γ_l ∈ [0, 2π)`. Ties keep the earliest sample.
pub fn brute_force_baseline(
    g: &GraphInstance,
    p: usize,
    n_samples: usize,
    seed: u64,
    opts: &OptimizerSettings,
) -> Result<OptimizationReport> {
    if n_samples == 0 {
        return Err(Error::InvalidInput("brute-force baseline needs at least one sample".into()));
    }
    if p == 0 {
        return Err(Error::InvalidInput("need at least one layer".into()));
    }
    let sim = Simulator::for_graph(g)?;
    let (lo, hi) = extremes(&sim);
    let (beta_range, gamma_range) = (std::f64::consts::PI, 2.0 * std::f64::consts::PI);
    let reports: Vec<Result<OptimizationReport>> = (0..n_samples)
        .into_par_iter()
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[k as u64]));
            let betas = (0..p).map(|_| rng.random::<f64>() * beta_range).collect();
            let gammas = (0..p).map(|_| rng.random::<f64>() * gamma_range).collect();
            let mut r = optimize_with(&sim, g.label(), lo, hi, &AngleSet { betas, gammas }, opts)?;
            r.init = InitSource::Random { sample: k, samples: n_samples, seed, beta_range, gamma_range };
            Ok(r)
        })
        .collect();
    let mut best: Option<OptimizationReport> = None;
    for r in reports {
        let r = r?;
        if best.as_ref().is_none_or(|b| r.final_ratio > b.final_ratio) {
            best = Some(r);
        }
    }
    Ok(best.expect("at least one sample"))
}
