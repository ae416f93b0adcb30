//! Erdős–Rényi MaxCut instances and the Ising-form cut cost `C(z) = Σ_{(i,j)∈E} z_i z_j`.
//!
//! Spins use the convention bit `i` of an assignment index set ⇔ `z_i = -1`, so
//! index 0 is the all-`+1` assignment and matches the computational basis state
//! `|0…0⟩` of the simulator.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest vertex count representable by the bitmask cost kernels.
pub const MAX_VERTICES: usize = 63;

/// A MaxCut instance on an unweighted simple graph.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphInstance {
    n: usize,
    edges: Vec<(usize, usize)>,
    seed: u64,
    label: String,
}

impl GraphInstance {
    /// Builds an instance from an arbitrary edge list. Edges are normalized to
    /// `i < j` and sorted; self-loops, duplicates and out-of-range endpoints are
    /// rejected.
    pub fn new(
        n: usize,
        edges: impl IntoIterator<Item = (usize, usize)>,
        seed: u64,
        label: impl Into<String>,
    ) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidInstance(format!("need n >= 2, got {n}")));
        }
        if n > MAX_VERTICES {
            return Err(Error::InvalidInstance(format!(
                "n = {n} exceeds the supported maximum {MAX_VERTICES}"
            )));
        }
        let mut edges: Vec<(usize, usize)> = edges
            .into_iter()
            .map(|(a, b)| if a <= b { (a, b) } else { (b, a) })
            .collect();
        for &(i, j) in &edges {
            if i == j {
                return Err(Error::InvalidInstance(format!("self-loop at vertex {i}")));
            }
            if j >= n {
                return Err(Error::InvalidInstance(format!(
                    "edge ({i}, {j}) out of range for n = {n}"
                )));
            }
        }
        edges.sort_unstable();
        if let Some(w) = edges.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::InvalidInstance(format!("duplicate edge {:?}", w[0])));
        }
        Ok(Self { n, edges, seed, label: label.into() })
    }

    /// Re-checks the invariants, e.g. after deserializing a file.
    pub fn validate(self) -> Result<Self> {
        let Self { n, edges, seed, label } = self;
        let sorted = edges.windows(2).all(|w| w[0] < w[1]);
        let inst = Self::new(n, edges, seed, label)?;
        if !sorted {
            return Err(Error::InvalidInstance("edges are not sorted lexicographically".into()));
        }
        Ok(inst)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// `2|E| / n`.
    pub fn average_degree(&self) -> f64 {
        2.0 * self.edges.len() as f64 / self.n as f64
    }

    /// Neighbour bitmask for every vertex.
    pub fn adjacency_masks(&self) -> Vec<u64> {
        let mut adj = vec![0u64; self.n];
        for &(i, j) in &self.edges {
            adj[i] |= 1 << j;
            adj[j] |= 1 << i;
        }
        adj
    }

    /// Neighbours `j > i` of every vertex `i`, as bitmasks.
    pub fn upper_masks(&self) -> Vec<u64> {
        let mut up = vec![0u64; self.n];
        for &(i, j) in &self.edges {
            up[i] |= 1 << j;
        }
        up
    }

    /// Cost of an assignment.
    pub fn cut_cost(&self, z: &Assignment) -> Result<i64> {
        if z.len() != self.n {
            return Err(Error::InvalidAssignment { expected: self.n, got: z.len() });
        }
        Ok(self
            .edges
            .iter()
            .map(|&(i, j)| i64::from(z.spin(i)) * i64::from(z.spin(j)))
            .sum())
    }

    /// Cost of the assignment with canonical index `x`, by direct evaluation.
    pub fn cost_of_index(&self, x: u64) -> i64 {
        let cut = self
            .edges
            .iter()
            .filter(|&&(i, j)| ((x >> i) ^ (x >> j)) & 1 == 1)
            .count() as i64;
        self.edges.len() as i64 - 2 * cut
    }

    /// Copy of the instance with vertices renamed by `perm` (vertex `v` becomes `perm[v]`).
    pub fn relabeled(&self, perm: &[usize]) -> Result<Self> {
        if perm.len() != self.n {
            return Err(Error::InvalidInput("permutation length mismatch".into()));
        }
        let mut seen = vec![false; self.n];
        for &v in perm {
            if v >= self.n || std::mem::replace(&mut seen[v], true) {
                return Err(Error::InvalidInput("not a permutation".into()));
            }
        }
        Self::new(
            self.n,
            self.edges.iter().map(|&(i, j)| (perm[i], perm[j])),
            self.seed,
            format!("{}_relabeled", self.label),
        )
    }
}

/// Default label `er{n}_p{edge_prob}_s{seed}`.
pub fn default_label(n: usize, edge_prob: f64, seed: u64) -> String {
    format!("er{n}_p{edge_prob}_s{seed}")
}

/// Samples `G(n, edge_prob)`: every pair `(i, j)`, `i < j`, visited in
/// lexicographic order and kept with probability `edge_prob`. ChaCha8 seeded
/// from `seed` drives the draws, so the edge list depends only on the inputs.
pub fn generate_er(n: usize, edge_prob: f64, seed: u64) -> Result<GraphInstance> {
    generate_er_labeled(n, edge_prob, seed, None)
}

pub fn generate_er_labeled(
    n: usize,
    edge_prob: f64,
    seed: u64,
    label: Option<String>,
) -> Result<GraphInstance> {
    if n < 2 {
        return Err(Error::InvalidInstance(format!("need n >= 2, got {n}")));
    }
    if !(0.0..=1.0).contains(&edge_prob) {
        return Err(Error::InvalidInput(format!("edge probability {edge_prob} not in [0, 1]")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            let u: f64 = rng.random();
            if u < edge_prob {
                edges.push((i, j));
            }
        }
    }
    let label = label.unwrap_or_else(|| default_label(n, edge_prob, seed));
    GraphInstance::new(n, edges, seed, label)
}

/// A spin assignment `z ∈ {-1, +1}^n`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Assignment {
    spins: Vec<i8>,
}

impl Assignment {
    pub fn from_spins(spins: Vec<i8>) -> Result<Self> {
        if spins.iter().any(|&s| s != 1 && s != -1) {
            return Err(Error::InvalidInput("spins must be exactly +1 or -1".into()));
        }
        if spins.len() > 64 {
            return Err(Error::InvalidInput("at most 64 spins are supported".into()));
        }
        Ok(Self { spins })
    }

    /// Decodes the canonical index: bit `i` set ⇔ `z_i = -1`.
    pub fn from_index(n: usize, x: u64) -> Self {
        let spins = (0..n).map(|i| if (x >> i) & 1 == 1 { -1 } else { 1 }).collect();
        Self { spins }
    }

    pub fn index(&self) -> u64 {
        self.spins
            .iter()
            .enumerate()
            .filter(|(_, &s)| s == -1)
            .fold(0u64, |acc, (i, _)| acc | (1 << i))
    }

    pub fn len(&self) -> usize {
        self.spins.len()
    }

    pub fn is_empty(&self) -> bool {
        self.spins.is_empty()
    }

    pub fn spin(&self, i: usize) -> i8 {
        self.spins[i]
    }

    pub fn spins(&self) -> &[i8] {
        &self.spins
    }

    /// Global spin flip `z → -z`.
    pub fn flipped(&self) -> Self {
        Self { spins: self.spins.iter().map(|s| -s).collect() }
    }
}

/// SplitMix64 finalizer, used to derive independent seeds from a master seed.
pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Folds `parts` into `master` with SplitMix64.
pub fn derive_seed(master: u64, parts: &[u64]) -> u64 {
    parts.iter().fold(splitmix64(master), |acc, &p| splitmix64(acc ^ splitmix64(p)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn k3() -> GraphInstance {
        generate_er(3, 1.0, 7).unwrap()
    }

    #[test]
    fn complete_probability_gives_triangle() {
        assert_eq!(k3().edges(), &[(0, 1), (0, 2), (1, 2)]);
    }

    #[test]
    fn zero_probability_gives_empty_graph() {
        assert!(generate_er(5, 0.0, 99).unwrap().edges().is_empty());
    }

    #[test]
    fn generation_is_deterministic() {
        let a = generate_er(20, 0.5, 42).unwrap();
        let b = generate_er(20, 0.5, 42).unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
        assert_eq!(a.label(), "er20_p0.5_s42");
    }

    #[test]
    fn rejects_tiny_graphs() {
        assert!(matches!(generate_er(1, 0.5, 0), Err(Error::InvalidInstance(_))));
        assert!(matches!(generate_er(4, 1.5, 0), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn average_degree_examples() {
        assert_eq!(k3().average_degree(), 2.0);
        assert_eq!(GraphInstance::new(2, [(0, 1)], 0, "e").unwrap().average_degree(), 1.0);
        let g = GraphInstance::new(4, [(0, 1), (1, 2), (2, 3)], 0, "path").unwrap();
        assert_eq!(g.average_degree(), 1.5);
    }

    #[test]
    fn cut_cost_examples() {
        let g = k3();
        let all_up = Assignment::from_spins(vec![1, 1, 1]).unwrap();
        let one_down = Assignment::from_spins(vec![1, 1, -1]).unwrap();
        assert_eq!(g.cut_cost(&all_up).unwrap(), 3);
        assert_eq!(g.cut_cost(&one_down).unwrap(), -1);
        let empty = generate_er(3, 0.0, 1).unwrap();
        assert_eq!(empty.cut_cost(&one_down).unwrap(), 0);
        let short = Assignment::from_spins(vec![1, 1]).unwrap();
        assert!(matches!(g.cut_cost(&short), Err(Error::InvalidAssignment { .. })));
    }

    #[test]
    fn rejects_malformed_edges() {
        assert!(GraphInstance::new(3, [(1, 1)], 0, "x").is_err());
        assert!(GraphInstance::new(3, [(0, 3)], 0, "x").is_err());
        assert!(GraphInstance::new(3, [(0, 1), (1, 0)], 0, "x").is_err());
    }

    #[test]
    fn index_cost_matches_spin_cost() {
        let g = generate_er(9, 0.5, 3).unwrap();
        for x in 0..(1u64 << 9) {
            let z = Assignment::from_index(9, x);
            assert_eq!(z.index(), x);
            assert_eq!(g.cut_cost(&z).unwrap(), g.cost_of_index(x));
        }
    }

    #[test]
    fn edge_count_matches_binomial_mean() {
        let n = 12;
        let pairs = (n * (n - 1) / 2) as f64;
        let draws = 1000;
        let total: usize = (0..draws)
            .map(|s| generate_er(n, 0.5, derive_seed(11, &[s])).unwrap().edge_count())
            .sum();
        let mean = total as f64 / draws as f64;
        let sigma_of_mean = (pairs * 0.25 / draws as f64).sqrt();
        assert!((mean - pairs / 2.0).abs() < 5.0 * sigma_of_mean, "mean {mean}");
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn cost_symmetric_under_global_flip(seed in any::<u64>(), x in any::<u64>()) {
                let g = generate_er(10, 0.5, seed).unwrap();
                let z = Assignment::from_index(10, x & 0x3ff);
                prop_assert_eq!(g.cut_cost(&z).unwrap(), g.cut_cost(&z.flipped()).unwrap());
            }

            #[test]
            fn aligned_assignment_costs_edge_count(seed in any::<u64>(), n in 2usize..16) {
                let g = generate_er(n, 0.5, seed).unwrap();
                let up = Assignment::from_index(n, 0);
                prop_assert_eq!(g.cut_cost(&up).unwrap(), g.edge_count() as i64);
                prop_assert!(g.edge_count() <= n * (n - 1) / 2);
            }
        }
    }
}
