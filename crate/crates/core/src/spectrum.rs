//! Exhaustive density of states `ρ(C)` and the per-assignment cost table.
//!
//! The `2^n` assignments are split into blocks that share their high bits. Each
//! block is seeded with one full cost evaluation and then walked in reflected
//! Gray-code order over its low bits, so every step flips a single spin and the
//! cost changes by `-2 z_i Σ_{j∈N(i)} z_j`, evaluated with one popcount.
//! Blocks are independent and are merged with integer addition, so the result
//! does not depend on the thread count.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distribution::CostDistribution;
use crate::error::{Error, Result};
use crate::graph::{Assignment, GraphInstance};

/// Default largest `n` for the density-only sweep.
pub const DEFAULT_SPECTRUM_CAP: usize = 40;
/// Default largest `n` for which a [`CostTable`] is materialized.
pub const DEFAULT_TABLE_CAP: usize = 26;

const BLOCK_BITS: usize = 16;

/// Size limits for enumeration.
#[derive(Debug, Clone, Copy)]
pub struct EnumerationCaps {
    pub spectrum: usize,
    pub table: usize,
}

impl Default for EnumerationCaps {
    fn default() -> Self {
        Self { spectrum: DEFAULT_SPECTRUM_CAP, table: DEFAULT_TABLE_CAP }
    }
}

/// Density of solutions of one instance.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CostSpectrum {
    n: usize,
    edge_count: usize,
    density: BTreeMap<i64, u64>,
}

impl CostSpectrum {
    /// Builds a spectrum from an explicit density. Used for toy spectra and when
    /// reading spectrum files back.
    pub fn from_density(n: usize, edge_count: usize, density: BTreeMap<i64, u64>) -> Result<Self> {
        let density: BTreeMap<i64, u64> = density.into_iter().filter(|&(_, r)| r > 0).collect();
        if density.is_empty() {
            return Err(Error::InvalidInput("empty density".into()));
        }
        if n >= 64 {
            return Err(Error::InvalidInput(format!("n = {n} too large")));
        }
        let total: u64 = density.values().sum();
        if total != 1u64 << n {
            return Err(Error::Inconsistent(format!("density sums to {total}, expected 2^{n}")));
        }
        Ok(Self { n, edge_count, density })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn edge_count(&self) -> usize {
        self.edge_count
    }

    pub fn density(&self) -> &BTreeMap<i64, u64> {
        &self.density
    }

    pub fn c_min(&self) -> i64 {
        *self.density.keys().next().expect("non-empty density")
    }

    pub fn c_max(&self) -> i64 {
        *self.density.keys().next_back().expect("non-empty density")
    }

    pub fn ground_degeneracy(&self) -> u64 {
        self.density[&self.c_min()]
    }

    /// `ρ(C)`, zero outside the support.
    pub fn rho(&self, c: i64) -> u64 {
        self.density.get(&c).copied().unwrap_or(0)
    }

    pub fn support(&self) -> impl Iterator<Item = i64> + '_ {
        self.density.keys().copied()
    }

    pub fn len(&self) -> usize {
        self.density.len()
    }

    pub fn is_empty(&self) -> bool {
        self.density.is_empty()
    }

    /// `2^n`.
    pub fn dimension(&self) -> f64 {
        (self.n as f64).exp2()
    }

    /// `ρ(C) / 2^n`, the measurement distribution of the uniform superposition.
    pub fn uniform_distribution(&self) -> CostDistribution {
        let dim = self.dimension();
        CostDistribution::from_pairs(self.density.iter().map(|(&c, &r)| (c, r as f64 / dim)))
    }
}

/// Per-assignment costs indexed by the canonical assignment index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CostTable {
    n: usize,
    edge_count: usize,
    costs: Vec<i16>,
}

impl CostTable {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn edge_count(&self) -> usize {
        self.edge_count
    }

    pub fn costs(&self) -> &[i16] {
        &self.costs
    }

    pub fn len(&self) -> usize {
        self.costs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.costs.is_empty()
    }

    pub fn cost(&self, x: usize) -> i64 {
        i64::from(self.costs[x])
    }

    /// Aggregates the table into a density.
    pub fn to_spectrum(&self) -> CostSpectrum {
        let e = self.edge_count as i64;
        let mut hist = vec![0u64; 2 * self.edge_count + 1];
        for &c in &self.costs {
            hist[(i64::from(c) + e) as usize] += 1;
        }
        spectrum_from_histogram(self.n, self.edge_count, &hist)
    }
}

/// Enumerates the density of `g`, and the cost table when `with_table` is set.
pub fn enumerate_spectrum(g: &GraphInstance, with_table: bool) -> Result<(CostSpectrum, Option<CostTable>)> {
    enumerate_spectrum_with_caps(g, with_table, EnumerationCaps::default())
}

pub fn enumerate_spectrum_with_caps(
    g: &GraphInstance,
    with_table: bool,
    caps: EnumerationCaps,
) -> Result<(CostSpectrum, Option<CostTable>)> {
    let n = g.n();
    if with_table {
        let table = build_cost_table_with_cap(g, caps.table)?;
        let spectrum = table.to_spectrum();
        return Ok((spectrum, Some(table)));
    }
    if n > caps.spectrum {
        return Err(Error::ResourceLimit { what: "spectrum enumeration", cap: caps.spectrum, n });
    }
    let sweep = Sweep::new(g);
    let e = g.edge_count();
    let hist = (0..sweep.block_count())
        .into_par_iter()
        .fold(
            || vec![0u64; 2 * e + 1],
            |mut hist, block| {
                sweep.walk_block(block, |_, c| hist[(c + e as i64) as usize] += 1);
                hist
            },
        )
        .reduce(
            || vec![0u64; 2 * e + 1],
            |mut a, b| {
                a.iter_mut().zip(&b).for_each(|(x, y)| *x += y);
                a
            },
        );
    Ok((spectrum_from_histogram(n, e, &hist), None))
}

/// Materializes the cost of every assignment.
pub fn build_cost_table(g: &GraphInstance) -> Result<CostTable> {
    build_cost_table_with_cap(g, DEFAULT_TABLE_CAP)
}

pub fn build_cost_table_with_cap(g: &GraphInstance, cap: usize) -> Result<CostTable> {
    let n = g.n();
    if n > cap {
        return Err(Error::ResourceLimit { what: "cost table", cap, n });
    }
    if g.edge_count() > i16::MAX as usize {
        return Err(Error::InvalidInstance("too many edges for a 16-bit cost table".into()));
    }
    let sweep = Sweep::new(g);
    let mut costs = vec![0i16; 1usize << n];
    costs
        .par_chunks_mut(1usize << sweep.low_bits)
        .enumerate()
        .for_each(|(block, chunk)| {
            sweep.walk_block(block as u64, |low, c| chunk[low as usize] = c as i16);
        });
    Ok(CostTable { n, edge_count: g.edge_count(), costs })
}

/// All assignments attaining `C_min`.
pub fn optimal_set(g: &GraphInstance) -> Result<Vec<Assignment>> {
    let table = build_cost_table(g)?;
    let c_min = table.costs.iter().copied().min().unwrap_or(0);
    Ok(table
        .costs
        .iter()
        .enumerate()
        .filter(|(_, &c)| c == c_min)
        .map(|(x, _)| Assignment::from_index(g.n(), x as u64))
        .collect())
}

fn spectrum_from_histogram(n: usize, edge_count: usize, hist: &[u64]) -> CostSpectrum {
    let e = edge_count as i64;
    let density = hist
        .iter()
        .enumerate()
        .filter(|(_, &r)| r > 0)
        .map(|(k, &r)| (k as i64 - e, r))
        .collect();
    CostSpectrum { n, edge_count, density }
}

struct Sweep {
    n: usize,
    low_bits: usize,
    adj: Vec<u64>,
    upper: Vec<u64>,
    degree: Vec<i64>,
    edge_count: i64,
}

impl Sweep {
    fn new(g: &GraphInstance) -> Self {
        let adj = g.adjacency_masks();
        let degree = adj.iter().map(|m| i64::from(m.count_ones())).collect();
        Self {
            n: g.n(),
            low_bits: g.n().min(BLOCK_BITS),
            adj,
            upper: g.upper_masks(),
            degree,
            edge_count: g.edge_count() as i64,
        }
    }

    fn block_count(&self) -> u64 {
        1u64 << (self.n - self.low_bits)
    }

    fn full_cost(&self, x: u64) -> i64 {
        let cut: u32 = self
            .upper
            .iter()
            .enumerate()
            .map(|(i, &m)| {
                let other = if (x >> i) & 1 == 1 { !x } else { x };
                (m & other).count_ones()
            })
            .sum();
        self.edge_count - 2 * i64::from(cut)
    }

    /// Visits every assignment of block `block` as `(low bits, cost)`.
    fn walk_block(&self, block: u64, mut visit: impl FnMut(u64, i64)) {
        let base = block << self.low_bits;
        let mut x = base;
        let mut cost = self.full_cost(x);
        visit(0, cost);
        for t in 1u64..(1u64 << self.low_bits) {
            let i = t.trailing_zeros() as usize;
            let spin = 1 - 2 * ((x >> i) & 1) as i64;
            let field = self.degree[i] - 2 * i64::from((self.adj[i] & x).count_ones());
            cost -= 2 * spin * field;
            x ^= 1 << i;
            visit(x ^ base, cost);
        }
    }
}

/// One bin of a [`BinnedDistribution`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bin {
    pub lo: f64,
    pub hi: f64,
    /// Mean over samples of the total probability in the bin.
    pub mean: f64,
    /// Population standard deviation over samples.
    pub std: f64,
    /// Mean over samples of bin probability divided by the number of solutions in the bin.
    pub basis_mean: f64,
    /// No sample has any solution in this bin.
    pub empty: bool,
}

/// Probability binned in widths `|C_min| / n_bins` anchored at `C_min`.
///
/// Bins are half-open `[lo, hi)` except the last, which is closed, and they
/// tile `[C_min, C_max]`. For a single distribution `mean` is the bin total and
/// `std` is zero; [`average_binned`] combines instances bin-by-bin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinnedDistribution {
    pub width: f64,
    pub samples: usize,
    pub bins: Vec<Bin>,
}

impl BinnedDistribution {
    pub fn totals(&self) -> Vec<f64> {
        self.bins.iter().map(|b| b.mean).collect()
    }

    fn bin_index(&self, value: f64) -> usize {
        let lo = self.bins[0].lo;
        let k = ((value - lo) / self.width + 1e-9).floor();
        (k.max(0.0) as usize).min(self.bins.len() - 1)
    }

    /// Bins the bin totals again, each placed at its lower edge.
    pub fn rebinned(&self) -> Self {
        let mut out = self.clone();
        out.bins.iter_mut().for_each(|b| b.mean = 0.0);
        for b in &self.bins {
            let k = self.bin_index(b.lo);
            out.bins[k].mean += b.mean;
        }
        out
    }
}

/// Bins `dist` against the support of `spectrum`.
pub fn bin_distribution(
    dist: &CostDistribution,
    spectrum: &CostSpectrum,
    n_bins: usize,
) -> Result<BinnedDistribution> {
    if n_bins == 0 {
        return Err(Error::InvalidInput("n_bins must be >= 1".into()));
    }
    if dist.is_empty() {
        return Err(Error::InvalidInput("empty distribution".into()));
    }
    let c_min = spectrum.c_min();
    let c_max = spectrum.c_max();
    if c_min >= 0 {
        return Err(Error::InvalidInput(format!("bin width |C_min|/n_bins is zero (C_min = {c_min})")));
    }
    let width = c_min.unsigned_abs() as f64 / n_bins as f64;
    let span = (c_max - c_min) as f64;
    let count = ((span / width).ceil() as usize).max(1);
    let mut bins: Vec<Bin> = (0..count)
        .map(|k| Bin {
            lo: c_min as f64 + k as f64 * width,
            hi: c_min as f64 + (k + 1) as f64 * width,
            mean: 0.0,
            std: 0.0,
            basis_mean: 0.0,
            empty: true,
        })
        .collect();
    let mut rho = vec![0u64; count];
    let mut out = BinnedDistribution { width, samples: 1, bins: Vec::new() };
    out.bins = bins.clone();
    for (c, m) in dist.iter() {
        let k = out.bin_index(c as f64);
        bins[k].mean += m;
        rho[k] += spectrum.rho(c);
    }
    for (c, r) in spectrum.density() {
        let k = out.bin_index(*c as f64);
        if *r > 0 {
            bins[k].empty = false;
        }
    }
    for (b, &r) in bins.iter_mut().zip(&rho) {
        b.basis_mean = if r > 0 { b.mean / r as f64 } else { 0.0 };
    }
    out.bins = bins;
    Ok(out)
}

/// Averages per-instance binnings bin-by-bin. Edges of the result are in units
/// of `|C_min|` (the first bin starts at -1), since instances differ in `C_min`.
pub fn average_binned(items: &[BinnedDistribution]) -> Result<BinnedDistribution> {
    let first = items.first().ok_or_else(|| Error::InvalidInput("no binned distributions".into()))?;
    let n_bins = (first.bins[0].lo.abs() / first.width).round();
    let count = items.iter().map(|b| b.bins.len()).max().unwrap_or(0);
    let rel_width = 1.0 / n_bins;
    let m = items.len() as f64;
    let bins = (0..count)
        .map(|k| {
            let totals: Vec<f64> = items.iter().map(|b| b.bins.get(k).map_or(0.0, |x| x.mean)).collect();
            let basis: Vec<f64> = items.iter().map(|b| b.bins.get(k).map_or(0.0, |x| x.basis_mean)).collect();
            let mean = totals.iter().sum::<f64>() / m;
            let var = totals.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / m;
            Bin {
                lo: -1.0 + k as f64 * rel_width,
                hi: -1.0 + (k + 1) as f64 * rel_width,
                mean,
                std: var.sqrt(),
                basis_mean: basis.iter().sum::<f64>() / m,
                empty: items.iter().all(|b| b.bins.get(k).is_none_or(|x| x.empty)),
            }
        })
        .collect();
    Ok(BinnedDistribution { width: rel_width, samples: items.len(), bins })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::generate_er;

    fn naive_density(g: &GraphInstance) -> BTreeMap<i64, u64> {
        let mut d = BTreeMap::new();
        for x in 0..(1u64 << g.n()) {
            *d.entry(g.cost_of_index(x)).or_insert(0) += 1;
        }
        d
    }

    #[test]
    fn triangle_spectrum() {
        let g = generate_er(3, 1.0, 0).unwrap();
        let (s, _) = enumerate_spectrum(&g, false).unwrap();
        assert_eq!(s.density(), &BTreeMap::from([(-1, 6), (3, 2)]));
        assert_eq!(s.c_min(), -1);
        assert_eq!(s.ground_degeneracy(), 6);
    }

    #[test]
    fn single_edge_and_empty_spectra() {
        let g = GraphInstance::new(2, [(0, 1)], 0, "edge").unwrap();
        let (s, _) = enumerate_spectrum(&g, false).unwrap();
        assert_eq!(s.density(), &BTreeMap::from([(-1, 2), (1, 2)]));
        let e = generate_er(2, 0.0, 0).unwrap();
        let (s, _) = enumerate_spectrum(&e, false).unwrap();
        assert_eq!(s.density(), &BTreeMap::from([(0, 4)]));
    }

    #[test]
    fn optimal_sets() {
        let k3 = generate_er(3, 1.0, 0).unwrap();
        let opt = optimal_set(&k3).unwrap();
        assert_eq!(opt.len(), 6);
        assert!(opt.iter().all(|z| k3.cut_cost(z).unwrap() == -1));

        let edge = GraphInstance::new(2, [(0, 1)], 0, "edge").unwrap();
        let idx: Vec<u64> = optimal_set(&edge).unwrap().iter().map(|z| z.index()).collect();
        assert_eq!(idx, vec![1, 2]);

        let k4 = generate_er(4, 1.0, 0).unwrap();
        let opt = optimal_set(&k4).unwrap();
        assert_eq!(opt.len(), 6);
        for z in &opt {
            assert_eq!(k4.cut_cost(z).unwrap(), -2);
            assert_eq!(z.spins().iter().filter(|&&s| s == 1).count(), 2);
        }
    }

    #[test]
    fn caps_are_enforced() {
        let g = generate_er(12, 0.5, 1).unwrap();
        let caps = EnumerationCaps { spectrum: 10, table: 8 };
        match enumerate_spectrum_with_caps(&g, false, caps) {
            Err(Error::ResourceLimit { cap, .. }) => assert_eq!(cap, 10),
            other => panic!("unexpected {other:?}"),
        }
        match enumerate_spectrum_with_caps(&g, true, caps) {
            Err(Error::ResourceLimit { cap, .. }) => assert_eq!(cap, 8),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn gray_sweep_matches_naive_across_block_boundaries() {
        // n > BLOCK_BITS exercises the multi-block path.
        for (n, seed) in [(5, 1u64), (11, 2), (17, 3), (18, 4)] {
            let g = generate_er(n, 0.5, seed).unwrap();
            let (s, t) = enumerate_spectrum(&g, true).unwrap();
            let t = t.unwrap();
            assert_eq!(s.density(), &naive_density(&g));
            for x in (0..(1u64 << n)).step_by(97) {
                assert_eq!(t.cost(x as usize), g.cost_of_index(x));
            }
            let (s2, none) = enumerate_spectrum(&g, false).unwrap();
            assert!(none.is_none());
            assert_eq!(s, s2);
        }
    }

    #[test]
    fn spectrum_invariants() {
        for seed in 0..20 {
            let g = generate_er(10, 0.5, seed).unwrap();
            let (s, _) = enumerate_spectrum(&g, false).unwrap();
            let e = g.edge_count() as i64;
            assert_eq!(s.density().values().sum::<u64>(), 1 << 10);
            assert!(s.density().values().all(|r| r % 2 == 0));
            assert_eq!(s.c_max(), e);
            assert!(s.support().all(|c| (c - e).rem_euclid(2) == 0));
            let first_moment: i128 = s.density().iter().map(|(&c, &r)| c as i128 * r as i128).sum();
            assert_eq!(first_moment, 0);
        }
    }

    #[test]
    fn relabeling_preserves_spectrum() {
        let g = generate_er(9, 0.5, 5).unwrap();
        let perm = [3, 8, 1, 0, 5, 7, 2, 6, 4];
        let h = g.relabeled(&perm).unwrap();
        assert_eq!(enumerate_spectrum(&g, false).unwrap().0, enumerate_spectrum(&h, false).unwrap().0);
    }

    #[test]
    fn single_support_binning() {
        let g = generate_er(3, 1.0, 0).unwrap();
        let (s, _) = enumerate_spectrum(&g, false).unwrap();
        let dist = CostDistribution::from_pairs([(-1, 1.0)]);
        let b = bin_distribution(&dist, &s, 1).unwrap();
        assert_eq!(b.bins[0].mean, 1.0);
        assert_eq!(b.bins[0].std, 0.0);
        assert!(b.bins[1..].iter().all(|x| x.mean == 0.0));
    }

    #[test]
    fn triangle_uniform_binning_conserves_probability() {
        let g = generate_er(3, 1.0, 0).unwrap();
        let (s, _) = enumerate_spectrum(&g, false).unwrap();
        let b = bin_distribution(&s.uniform_distribution(), &s, 1).unwrap();
        assert_eq!(b.width, 1.0);
        assert_eq!(b.bins.len(), 4);
        assert_eq!(b.bins[0].mean, 0.75);
        assert_eq!(b.bins[3].mean, 0.25);
        assert!((b.totals().iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert!(b.bins[1].empty && b.bins[2].empty && !b.bins[3].empty);
        assert!((b.bins[0].basis_mean - 0.125).abs() < 1e-15);
    }

    #[test]
    fn rebinning_is_idempotent() {
        let g = generate_er(12, 0.5, 8).unwrap();
        let (s, _) = enumerate_spectrum(&g, false).unwrap();
        let b = bin_distribution(&s.uniform_distribution(), &s, 7).unwrap();
        assert_eq!(b.rebinned(), b);
        assert!((b.totals().iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn averaging_bins() {
        let mut items = Vec::new();
        for seed in 0..3 {
            let g = generate_er(10, 0.5, seed).unwrap();
            let (s, _) = enumerate_spectrum(&g, false).unwrap();
            items.push(bin_distribution(&s.uniform_distribution(), &s, 7).unwrap());
        }
        let avg = average_binned(&items).unwrap();
        assert_eq!(avg.samples, 3);
        assert_eq!(avg.bins[0].lo, -1.0);
        assert!((avg.bins.iter().map(|b| b.mean).sum::<f64>() - 1.0).abs() < 1e-12);
    }
}
