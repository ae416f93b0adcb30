//! Dense state-vector simulation of the QAOA ansatz
//! `Π_l e^{-iβ_l B} e^{-iγ_l C} |+…+⟩` with `B = Σ_i X_i`.
//!
//! The phase operator is diagonal and uses the precomputed [`CostTable`]; the
//! mixer is applied qubit by qubit as an in-place butterfly. Reductions walk
//! fixed-size blocks in index order and combine the block partials pairwise, so
//! they do not depend on how many threads ran.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distribution::CostDistribution;
use crate::error::{Error, Result};
use crate::graph::GraphInstance;
use crate::spectrum::{build_cost_table, CostTable};

/// Default largest qubit count for state-vector simulation.
pub const DEFAULT_SIMULATOR_CAP: usize = 26;

const NORM_TOL: f64 = 1e-10;
const PAR_LEN: usize = 1 << 14;
const PAR_CHUNK: usize = 1 << 12;
const REDUCE_BLOCK: usize = 1 << 12;

/// QAOA angles, one `(β_l, γ_l)` pair per layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AngleSet {
    pub betas: Vec<f64>,
    pub gammas: Vec<f64>,
}

impl AngleSet {
    pub fn new(betas: Vec<f64>, gammas: Vec<f64>) -> Result<Self> {
        if betas.len() != gammas.len() {
            return Err(Error::InvalidInput(format!(
                "{} betas but {} gammas",
                betas.len(),
                gammas.len()
            )));
        }
        if betas.is_empty() {
            return Err(Error::InvalidInput("need at least one layer".into()));
        }
        Ok(Self { betas, gammas })
    }

    pub fn zeros(p: usize) -> Self {
        Self { betas: vec![0.0; p], gammas: vec![0.0; p] }
    }

    pub fn p(&self) -> usize {
        self.betas.len()
    }

    /// Packs as `[β_1..β_p, γ_1..γ_p]`.
    pub fn to_vec(&self) -> Vec<f64> {
        self.betas.iter().chain(&self.gammas).copied().collect()
    }

    pub fn from_slice(x: &[f64]) -> Result<Self> {
        if x.len() % 2 != 0 {
            return Err(Error::InvalidInput("packed angle vector must have even length".into()));
        }
        let p = x.len() / 2;
        Self::new(x[..p].to_vec(), x[p..].to_vec())
    }
}

/// `2^n` complex amplitudes.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    n: usize,
    amps: Vec<Complex64>,
}

impl StateVector {
    /// `|+⟩^{⊗n}`.
    pub fn init_plus(n: usize) -> Result<Self> {
        Self::init_plus_with_cap(n, DEFAULT_SIMULATOR_CAP)
    }

    pub fn init_plus_with_cap(n: usize, cap: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidInput("need at least one qubit".into()));
        }
        if n > cap {
            return Err(Error::ResourceLimit { what: "state-vector simulation", cap, n });
        }
        let a = (-(n as f64) / 2.0).exp2();
        Ok(Self { n, amps: vec![Complex64::new(a, 0.0); 1 << n] })
    }

    /// Builds a state from raw amplitudes; the length must be a power of two.
    pub fn from_amplitudes(amps: Vec<Complex64>) -> Result<Self> {
        if amps.len() < 2 || !amps.len().is_power_of_two() {
            return Err(Error::InvalidInput("amplitude count must be a power of two >= 2".into()));
        }
        let n = amps.len().trailing_zeros() as usize;
        Ok(Self { n, amps })
    }

    /// The computational basis state with index `x`.
    pub fn basis(n: usize, x: usize) -> Result<Self> {
        let mut s = Self::init_plus(n)?;
        s.amps.iter_mut().for_each(|a| *a = Complex64::new(0.0, 0.0));
        *s.amps.get_mut(x).ok_or_else(|| Error::InvalidInput("basis index out of range".into()))? =
            Complex64::new(1.0, 0.0);
        Ok(s)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.amps.iter().map(|a| a.norm_sqr()).collect()
    }

    pub fn norm_sqr(&self) -> f64 {
        block_sum(self.amps.len(), |r| self.amps[r].iter().map(|a| a.norm_sqr()).sum())
    }

    /// Rescales to unit norm.
    pub fn normalize(&mut self) {
        let s = self.norm_sqr().sqrt();
        if s > 0.0 {
            self.amps.iter_mut().for_each(|a| *a /= s);
        }
    }

    fn check_table(&self, table: &CostTable) -> Result<()> {
        if table.len() != self.amps.len() {
            return Err(Error::InvalidInput(format!(
                "cost table has {} entries, state has {}",
                table.len(),
                self.amps.len()
            )));
        }
        Ok(())
    }

    /// `|ψ⟩ → e^{-iγC}|ψ⟩`.
    pub fn apply_phase(&mut self, table: &CostTable, gamma: f64) -> Result<()> {
        self.check_table(table)?;
        let e = table.edge_count() as i64;
        let lut: Vec<Complex64> =
            (-e..=e).map(|c| Complex64::from_polar(1.0, -gamma * c as f64)).collect();
        let costs = table.costs();
        let kernel = |(amps, costs): (&mut [Complex64], &[i16])| {
            for (a, &c) in amps.iter_mut().zip(costs) {
                *a *= lut[(i64::from(c) + e) as usize];
            }
        };
        if self.amps.len() >= PAR_LEN {
            self.amps
                .par_chunks_mut(PAR_CHUNK)
                .zip(costs.par_chunks(PAR_CHUNK))
                .for_each(kernel);
        } else {
            kernel((&mut self.amps, costs));
        }
        Ok(())
    }

    /// `|ψ⟩ → e^{-iβB}|ψ⟩`, i.e. `cos β·I − i sin β·X` on every qubit.
    pub fn apply_mixer(&mut self, beta: f64) {
        let (s, c) = beta.sin_cos();
        for q in 0..self.n {
            for_each_pair(&mut self.amps, q, |a, b| {
                let x = *a;
                let y = *b;
                *a = Complex64::new(c * x.re + s * y.im, c * x.im - s * y.re);
                *b = Complex64::new(c * y.re + s * x.im, c * y.im - s * x.re);
            });
        }
    }

    /// `⟨ψ|C|ψ⟩`.
    pub fn expected_cost(&self, table: &CostTable) -> Result<f64> {
        self.check_table(table)?;
        let costs = table.costs();
        Ok(block_sum(self.amps.len(), |r| {
            self.amps[r.clone()]
                .iter()
                .zip(&costs[r])
                .map(|(a, &c)| a.norm_sqr() * f64::from(c))
                .sum()
        }))
    }

    /// Shannon entropy of the measurement distribution, in bits.
    pub fn shannon_entropy(&self) -> f64 {
        block_sum(self.amps.len(), |r| {
            self.amps[r]
                .iter()
                .map(|a| {
                    let p = a.norm_sqr();
                    if p > 0.0 {
                        -p * p.log2()
                    } else {
                        0.0
                    }
                })
                .sum()
        })
    }

    fn debug_check_norm(&self) {
        debug_assert!(
            (self.norm_sqr() - 1.0).abs() < NORM_TOL,
            "norm drifted to {}",
            self.norm_sqr()
        );
    }
}

/// Applies `f` to every amplitude pair `(x, x | 1<<q)` with bit `q` of `x` clear.
fn for_each_pair<F>(amps: &mut [Complex64], q: usize, f: F)
where
    F: Fn(&mut Complex64, &mut Complex64) + Sync,
{
    let stride = 1usize << q;
    let pair_block = |chunk: &mut [Complex64]| {
        let (lo, hi) = chunk.split_at_mut(stride);
        lo.iter_mut().zip(hi.iter_mut()).for_each(|(a, b)| f(a, b));
    };
    if amps.len() < PAR_LEN {
        amps.chunks_mut(2 * stride).for_each(pair_block);
    } else if 2 * stride <= PAR_CHUNK {
        amps.par_chunks_mut(PAR_CHUNK).for_each(|c| c.chunks_mut(2 * stride).for_each(pair_block));
    } else {
        for chunk in amps.chunks_mut(2 * stride) {
            let (lo, hi) = chunk.split_at_mut(stride);
            lo.par_chunks_mut(PAR_CHUNK)
                .zip(hi.par_chunks_mut(PAR_CHUNK))
                .for_each(|(l, h)| l.iter_mut().zip(h.iter_mut()).for_each(|(a, b)| f(a, b)));
        }
    }
}

/// Sums `part` over fixed blocks of `0..len`, then combines the block sums pairwise.
fn block_sum<F>(len: usize, part: F) -> f64
where
    F: Fn(std::ops::Range<usize>) -> f64 + Sync,
{
    let blocks = len.div_ceil(REDUCE_BLOCK);
    let partials: Vec<f64> = if len >= PAR_LEN {
        (0..blocks)
            .into_par_iter()
            .map(|b| part(b * REDUCE_BLOCK..((b + 1) * REDUCE_BLOCK).min(len)))
            .collect()
    } else {
        (0..blocks).map(|b| part(b * REDUCE_BLOCK..((b + 1) * REDUCE_BLOCK).min(len))).collect()
    };
    pairwise_sum(&partials)
}

pub(crate) fn pairwise_sum(xs: &[f64]) -> f64 {
    match xs.len() {
        0 => 0.0,
        1 => xs[0],
        n => {
            let (a, b) = xs.split_at(n / 2);
            pairwise_sum(a) + pairwise_sum(b)
        }
    }
}

/// Simulator bound to one instance's cost table.
#[derive(Debug, Clone)]
pub struct Simulator {
    table: CostTable,
}

impl Simulator {
    pub fn new(table: CostTable) -> Result<Self> {
        if table.n() > DEFAULT_SIMULATOR_CAP {
            return Err(Error::ResourceLimit {
                what: "state-vector simulation",
                cap: DEFAULT_SIMULATOR_CAP,
                n: table.n(),
            });
        }
        Ok(Self { table })
    }

    pub fn for_graph(g: &GraphInstance) -> Result<Self> {
        if g.n() > DEFAULT_SIMULATOR_CAP {
            return Err(Error::ResourceLimit {
                what: "state-vector simulation",
                cap: DEFAULT_SIMULATOR_CAP,
                n: g.n(),
            });
        }
        Self::new(build_cost_table(g)?)
    }

    pub fn table(&self) -> &CostTable {
        &self.table
    }

    pub fn n(&self) -> usize {
        self.table.n()
    }

    /// Prepares the QAOA state, layer 1 first.
    pub fn run(&self, angles: &AngleSet) -> Result<StateVector> {
        let mut psi = StateVector::init_plus(self.n())?;
        for (&beta, &gamma) in angles.betas.iter().zip(&angles.gammas) {
            psi.apply_phase(&self.table, gamma)?;
            psi.apply_mixer(beta);
            psi.debug_check_norm();
        }
        Ok(psi)
    }

    pub fn expectation(&self, angles: &AngleSet) -> Result<f64> {
        self.run(angles)?.expected_cost(&self.table)
    }

    /// `⟨C⟩` and its gradient `[∂/∂β_1..∂/∂β_p, ∂/∂γ_1..∂/∂γ_p]`, by an adjoint
    /// sweep that un-computes the forward state alongside the costate
    /// `λ = U_{>l}^† C |ψ⟩`.
    pub fn value_and_gradient(&self, angles: &AngleSet) -> Result<(f64, Vec<f64>)> {
        let p = angles.p();
        let mut psi = self.run(angles)?;
        let value = psi.expected_cost(&self.table)?;
        let costs = self.table.costs();
        let mut lam = psi.clone();
        lam.amps.iter_mut().zip(costs).for_each(|(a, &c)| *a *= f64::from(c));

        let mut grad = vec![0.0; 2 * p];
        for l in (0..p).rev() {
            grad[l] = 2.0 * im_inner_mixer(&lam.amps, &psi.amps, self.n());
            psi.apply_mixer(-angles.betas[l]);
            lam.apply_mixer(-angles.betas[l]);
            grad[p + l] = 2.0 * block_sum(psi.amps.len(), |r| {
                lam.amps[r.clone()]
                    .iter()
                    .zip(&psi.amps[r.clone()])
                    .zip(&costs[r])
                    .map(|((l, s), &c)| (l.conj() * s).im * f64::from(c))
                    .sum()
            });
            psi.apply_phase(&self.table, -angles.gammas[l])?;
            lam.apply_phase(&self.table, -angles.gammas[l])?;
        }
        Ok((value, grad))
    }

    pub fn cost_gradient(&self, angles: &AngleSet) -> Result<Vec<f64>> {
        Ok(self.value_and_gradient(angles)?.1)
    }
}

/// `Im ⟨λ|B|ψ⟩` with `B = Σ_q X_q`.
fn im_inner_mixer(lam: &[Complex64], psi: &[Complex64], n: usize) -> f64 {
    block_sum(lam.len(), |r| {
        let mut acc = 0.0;
        for x in r {
            let l = lam[x].conj();
            let mut s = Complex64::new(0.0, 0.0);
            for q in 0..n {
                s += psi[x ^ (1 << q)];
            }
            acc += (l * s).im;
        }
        acc
    })
}

/// Runs the ansatz on `g` with the given angles.
pub fn run_qaoa(g: &GraphInstance, angles: &AngleSet) -> Result<StateVector> {
    Simulator::for_graph(g)?.run(angles)
}

/// Gradient of `⟨C⟩` with respect to `[β, γ]`.
pub fn cost_gradient(g: &GraphInstance, angles: &AngleSet) -> Result<Vec<f64>> {
    Simulator::for_graph(g)?.cost_gradient(angles)
}

/// `Pr(C) = Σ_{z: C(z)=C} |⟨z|ψ⟩|²`.
pub fn measure_distribution(state: &StateVector, table: &CostTable) -> Result<CostDistribution> {
    state.check_table(table)?;
    let e = table.edge_count() as i64;
    let width = 2 * table.edge_count() + 1;
    let len = state.amps.len();
    let blocks = len.div_ceil(REDUCE_BLOCK);
    let costs = table.costs();
    let partial = |b: usize| {
        let mut h = vec![0.0; width];
        let r = b * REDUCE_BLOCK..((b + 1) * REDUCE_BLOCK).min(len);
        for (a, &c) in state.amps[r.clone()].iter().zip(&costs[r]) {
            h[(i64::from(c) + e) as usize] += a.norm_sqr();
        }
        h
    };
    let parts: Vec<Vec<f64>> = if len >= PAR_LEN {
        (0..blocks).into_par_iter().map(partial).collect()
    } else {
        (0..blocks).map(partial).collect()
    };
    let mut present = vec![false; width];
    for &c in costs {
        present[(i64::from(c) + e) as usize] = true;
    }
    Ok(CostDistribution::from_pairs((0..width).filter(|&k| present[k]).map(|k| {
        let col: Vec<f64> = parts.iter().map(|h| h[k]).collect();
        (k as i64 - e, pairwise_sum(&col))
    })))
}

/// `r = (C_max − ⟨C⟩) / (C_max − C_min)`.
pub fn approximation_ratio(mean_cost: f64, c_min: i64, c_max: i64) -> Result<f64> {
    if c_min == c_max {
        return Err(Error::DegenerateSpectrum(c_min));
    }
    let (lo, hi) = (c_min as f64, c_max as f64);
    let slack = 1e-9 * (hi - lo);
    if !(lo - slack..=hi + slack).contains(&mean_cost) {
        return Err(Error::InvalidInput(format!(
            "mean cost {mean_cost} outside [{c_min}, {c_max}]"
        )));
    }
    Ok(((hi - mean_cost) / (hi - lo)).clamp(0.0, 1.0))
}

/// `Pr(C_min)`.
pub fn optimal_probability(dist: &CostDistribution, c_min: i64) -> f64 {
    dist.mass(c_min)
}
