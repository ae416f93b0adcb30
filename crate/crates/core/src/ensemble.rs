//! Ensemble experiments: per-instance pipeline, aggregation and error analysis.

use std::collections::BTreeMap;
use std::path::PathBuf;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::angles::{optimize_with, rescale_sk, OptimizationReport, OptimizerSettings, SkAngleTable};
use crate::boltzmann::{
    cost_threshold, fit_temperature, heuristic_temperature, law_regressor, model_metrics, LawCoefficients,
    ModelMetrics, Temperature,
};
use crate::distribution::{cumulative, CostDistribution};
use crate::error::{Error, Result};
use crate::graph::{derive_seed, generate_er_labeled, GraphInstance};
use crate::simulator::{approximation_ratio, measure_distribution, Simulator, DEFAULT_SIMULATOR_CAP};
use crate::spectrum::{enumerate_spectrum, CostSpectrum, CostTable, DEFAULT_SPECTRUM_CAP};
use crate::stats::{
    fit_pcmin_scaling, fit_temperature_law_points, relative_and_difference_error, ScalingFitAB, Summary,
    TemperatureLawCD,
};
use crate::thermo::{sample_fluctuation_state, thermo_report, DEFAULT_RANDOM_DRAWS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Exact,
    PredictionOnly,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SizeSpec {
    pub n: usize,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleConfig {
    pub sizes: Vec<SizeSpec>,
    pub layers: Vec<usize>,
    pub edge_prob: f64,
    pub master_seed: u64,
    pub alphas: Vec<f64>,
    pub mode: Mode,
    pub thermo: bool,
    pub random_draws: usize,
    /// Fluctuation states sampled per record; 0 disables.
    pub fluctuation_draws: usize,
    pub law: LawCoefficients,
    pub optimizer: OptimizerSettings,
    /// Angle table file; the built-in table when absent.
    pub angle_table: Option<PathBuf>,
    /// Store per-cost probabilities in each record.
    pub keep_distributions: bool,
    /// Fit a temperature to each simulated distribution.
    pub fit: bool,
}

impl Default for EnsembleConfig {
    fn default() -> Self {
        Self {
            sizes: vec![],
            layers: vec![],
            edge_prob: 0.5,
            master_seed: 2024,
            alphas: vec![0.04, 0.08],
            mode: Mode::Exact,
            thermo: true,
            random_draws: DEFAULT_RANDOM_DRAWS,
            fluctuation_draws: 0,
            law: LawCoefficients::default(),
            optimizer: OptimizerSettings::default(),
            angle_table: None,
            keep_distributions: true,
            fit: true,
        }
    }
}

impl EnsembleConfig {
    /// 30 graphs at n = 14 and 17, 10 at n = 20, `p ∈ {2, 4, …, 12}`.
    pub fn desk() -> Self {
        Self {
            sizes: vec![SizeSpec { n: 14, count: 30 }, SizeSpec { n: 17, count: 30 }, SizeSpec { n: 20, count: 10 }],
            layers: vec![2, 4, 6, 8, 10, 12],
            ..Self::default()
        }
    }

    /// 300 graphs at each of n = 14, 17, 20, 23 with the desk layer set.
    pub fn full() -> Self {
        Self {
            sizes: [14, 17, 20, 23].iter().map(|&n| SizeSpec { n, count: 300 }).collect(),
            layers: vec![2, 4, 6, 8, 10, 12],
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let invalid = |m: String| Err(Error::InvalidInput(m));
        if self.sizes.is_empty() {
            return invalid("ensemble needs at least one size".into());
        }
        self.validate_run()?;
        let cap = self.size_cap();
        for s in &self.sizes {
            if s.count == 0 {
                return invalid(format!("count for n = {} must be >= 1", s.n));
            }
            if s.n < 2 {
                return invalid(format!("n = {} too small", s.n));
            }
            if s.n > cap {
                return Err(Error::ResourceLimit { what: "ensemble size", cap, n: s.n });
            }
        }
        Ok(())
    }

    /// Largest `n` the configured mode can process.
    pub fn size_cap(&self) -> usize {
        match self.mode {
            Mode::Exact => DEFAULT_SIMULATOR_CAP,
            Mode::PredictionOnly => DEFAULT_SPECTRUM_CAP,
        }
    }

    /// Checks everything except the sizes.
    fn validate_run(&self) -> Result<()> {
        let invalid = |m: String| Err(Error::InvalidInput(m));
        if self.layers.is_empty() {
            return invalid("ensemble needs at least one layer count".into());
        }
        if self.layers.contains(&0) {
            return invalid("layer counts must be >= 1".into());
        }
        if !(0.0..=1.0).contains(&self.edge_prob) {
            return invalid(format!("edge probability {} outside [0, 1]", self.edge_prob));
        }
        if let Some(a) = self.alphas.iter().find(|a| !(0.0..=1.0).contains(*a)) {
            return invalid(format!("alpha {a} outside [0, 1]"));
        }
        Ok(())
    }

    fn angle_table(&self) -> Result<SkAngleTable> {
        match &self.angle_table {
            Some(p) => SkAngleTable::load(p),
            None => Ok(SkAngleTable::builtin()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostClass {
    pub c: i64,
    pub rho: u64,
    pub prob: f64,
}

/// Everything computed for one `(instance, p)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceRecord {
    pub label: String,
    pub n: usize,
    pub p: usize,
    pub seed: u64,
    pub edges: usize,
    pub c_min: i64,
    pub c_max: i64,
    pub avg_degree: f64,
    pub r: Option<f64>,
    pub pr_cmin: Option<f64>,
    /// `(α, Pr(C ≤ C_α))` from the simulated state.
    pub cdf: Option<Vec<(f64, f64)>>,
    pub mean_cost: Option<f64>,
    pub t_fit: Option<Temperature>,
    pub tvd: Option<f64>,
    pub t_e: Option<Temperature>,
    pub s_qaoa: Option<f64>,
    pub t_b: Option<Temperature>,
    pub s_boltzmann: Option<f64>,
    pub s_fluc: Option<f64>,
    pub s_random: Option<f64>,
    pub s_random_std: Option<f64>,
    /// Mean entropy of sampled fluctuation states.
    pub s_fluc_sampled: Option<f64>,
    /// Model metrics at `T_e`.
    pub model: Option<ModelMetrics>,
    /// Model metrics at the fitted temperature.
    pub model_fit: Option<ModelMetrics>,
    pub angles: Option<OptimizationReport>,
    /// Exact per-cost probabilities with `ρ(C)`, kept when configured.
    pub classes: Option<Vec<CostClass>>,
    /// Non-fatal conditions, for example a non-positive `T_e`.
    pub flags: Vec<String>,
    pub error: Option<String>,
}

impl InstanceRecord {
    fn skeleton(g: &GraphInstance, p: usize) -> Self {
        Self {
            edges: g.edge_count(),
            avg_degree: g.average_degree(),
            ..Self::blank(g.label().to_string(), g.n(), p, g.seed())
        }
    }

    fn blank(label: String, n: usize, p: usize, seed: u64) -> Self {
        Self {
            label,
            n,
            p,
            seed,
            edges: 0,
            c_min: 0,
            c_max: 0,
            avg_degree: 0.0,
            r: None,
            pr_cmin: None,
            cdf: None,
            mean_cost: None,
            t_fit: None,
            tvd: None,
            t_e: None,
            s_qaoa: None,
            t_b: None,
            s_boltzmann: None,
            s_fluc: None,
            s_random: None,
            s_random_std: None,
            s_fluc_sampled: None,
            model: None,
            model_fit: None,
            angles: None,
            classes: None,
            flags: vec![],
            error: None,
        }
    }

    pub fn is_ok(&self) -> bool {
        self.error.is_none()
    }

    /// The simulated `Pr(C ≤ C_α)` for `alpha`, if recorded.
    /// Spectrum and exact distribution rebuilt from [`InstanceRecord::classes`].
    pub fn spectrum_and_distribution(&self) -> Option<(CostSpectrum, CostDistribution)> {
        let classes = self.classes.as_ref()?;
        let spectrum =
            CostSpectrum::from_density(self.n, self.edges, classes.iter().map(|k| (k.c, k.rho)).collect()).ok()?;
        Some((spectrum, CostDistribution::from_pairs(classes.iter().map(|k| (k.c, k.prob)))))
    }

    pub fn cdf_at(&self, alpha: f64) -> Option<f64> {
        self.cdf.as_ref()?.iter().find(|(a, _)| *a == alpha).map(|&(_, v)| v)
    }
}

/// Seed of instance `index` at size `n`.
pub fn instance_seed(master: u64, n: usize, index: usize) -> u64 {
    derive_seed(master, &[n as u64, index as u64])
}

pub fn run_ensemble(config: &EnsembleConfig) -> Result<Vec<InstanceRecord>> {
    run_ensemble_with(config, |_| {})
}

/// As [`run_ensemble`], calling `on_record` as each record completes.
pub fn run_ensemble_with(
    config: &EnsembleConfig,
    on_record: impl Fn(&InstanceRecord) + Sync,
) -> Result<Vec<InstanceRecord>> {
    config.validate()?;
    let graphs: Vec<std::result::Result<GraphInstance, (usize, u64, Error)>> = config
        .sizes
        .iter()
        .flat_map(|s| (0..s.count).map(move |k| (s.n, k)))
        .map(|(n, k)| {
            let seed = instance_seed(config.master_seed, n, k);
            generate_er_labeled(n, config.edge_prob, seed, None).map_err(|e| (n, seed, e))
        })
        .collect();
    let table = prepare(config)?;
    let mut records: Vec<InstanceRecord> = graphs
        .par_iter()
        .flat_map_iter(|g| {
            let recs = match g {
                Ok(g) => run_graph(config, &table, g),
                Err((n, seed, e)) => config
                    .layers
                    .iter()
                    .map(|&p| InstanceRecord {
                        error: Some(e.to_string()),
                        ..InstanceRecord::blank(format!("er{n}_s{seed}"), *n, p, *seed)
                    })
                    .collect(),
            };
            recs.iter().for_each(&on_record);
            recs
        })
        .collect();
    sort_records(&mut records);
    Ok(records)
}

fn prepare(config: &EnsembleConfig) -> Result<SkAngleTable> {
    config.validate_run()?;
    let table = config.angle_table()?;
    if config.mode == Mode::Exact {
        for &p in &config.layers {
            table.get(p)?;
        }
    }
    Ok(table)
}

fn sort_records(records: &mut [InstanceRecord]) {
    records.sort_by(|a, b| (a.n, a.p, &a.label).cmp(&(b.n, b.p, &b.label)));
}

/// Runs the pipeline on given instances; `config.sizes` is ignored. Instances
/// beyond the mode's size cap become failed records.
pub fn run_instances(
    config: &EnsembleConfig,
    graphs: &[GraphInstance],
    on_record: impl Fn(&InstanceRecord) + Sync,
) -> Result<Vec<InstanceRecord>> {
    let table = prepare(config)?;
    let cap = config.size_cap();
    let mut records: Vec<InstanceRecord> = graphs
        .par_iter()
        .flat_map_iter(|g| {
            let recs = if g.n() > cap {
                let e = Error::ResourceLimit { what: "ensemble size", cap, n: g.n() };
                config
                    .layers
                    .iter()
                    .map(|&p| InstanceRecord { error: Some(e.to_string()), ..InstanceRecord::skeleton(g, p) })
                    .collect()
            } else {
                run_graph(config, &table, g)
            };
            recs.iter().for_each(&on_record);
            recs
        })
        .collect();
    sort_records(&mut records);
    Ok(records)
}

/// Runs every configured layer count on one instance.
pub fn run_graph(config: &EnsembleConfig, table: &SkAngleTable, g: &GraphInstance) -> Vec<InstanceRecord> {
    let with_table = config.mode == Mode::Exact;
    let enumerated = enumerate_spectrum(g, with_table);
    let (spectrum, cost_table) = match enumerated {
        Ok(v) => v,
        Err(e) => {
            return config
                .layers
                .iter()
                .map(|&p| {
                    let mut r = InstanceRecord::skeleton(g, p);
                    r.error = Some(e.to_string());
                    r
                })
                .collect();
        }
    };
    let sim = cost_table.map(Simulator::new).transpose();
    config
        .layers
        .iter()
        .map(|&p| {
            let mut rec = InstanceRecord::skeleton(g, p);
            rec.c_min = spectrum.c_min();
            rec.c_max = spectrum.c_max();
            model_side(config, &spectrum, &mut rec);
            if config.mode == Mode::Exact {
                let outcome = match &sim {
                    Ok(Some(sim)) => simulate(config, table, g, &spectrum, sim, &mut rec),
                    Ok(None) => Err(Error::InvalidInput("cost table missing".into())),
                    Err(e) => Err(Error::InvalidInput(e.to_string())),
                };
                if let Err(e) = outcome {
                    rec.error = Some(e.to_string());
                }
            }
            rec
        })
        .collect()
}

fn model_side(config: &EnsembleConfig, spectrum: &CostSpectrum, rec: &mut InstanceRecord) {
    match heuristic_temperature(spectrum.c_min(), rec.n, rec.p, config.law) {
        Ok(t) => {
            rec.t_e = Some(t);
            match model_metrics(spectrum, t, &config.alphas) {
                Ok(m) => rec.model = Some(m),
                Err(e) => rec.flags.push(format!("model metrics: {e}")),
            }
        }
        Err(e) => rec.flags.push(e.to_string()),
    }
}

fn simulate(
    config: &EnsembleConfig,
    table: &SkAngleTable,
    g: &GraphInstance,
    spectrum: &CostSpectrum,
    sim: &Simulator,
    rec: &mut InstanceRecord,
) -> Result<()> {
    let p = rec.p;
    let init = rescale_sk(table, p, g.average_degree())?;
    let report = optimize_with(sim, g.label(), spectrum.c_min(), spectrum.c_max(), &init, &config.optimizer)?;
    let psi = sim.run(&report.final_angles)?;
    let cost_table: &CostTable = sim.table();
    let dist = measure_distribution(&psi, cost_table)?;
    let mean = psi.expected_cost(cost_table)?;
    rec.mean_cost = Some(mean);
    rec.r = Some(approximation_ratio(mean, spectrum.c_min(), spectrum.c_max())?);
    rec.pr_cmin = Some(dist.mass(spectrum.c_min()));
    rec.cdf = Some(config.alphas.iter().map(|&a| (a, cumulative(&dist, cost_threshold(spectrum, a)))).collect());
    if config.keep_distributions {
        rec.classes = Some(
            spectrum.density().iter().map(|(&c, &rho)| CostClass { c, rho, prob: dist.mass(c) }).collect(),
        );
    }
    let s_qaoa = psi.shannon_entropy();
    rec.s_qaoa = Some(s_qaoa);
    rec.angles = Some(report);

    if config.fit {
        let fit = fit_temperature(&dist, spectrum)?;
        rec.t_fit = Some(fit.temperature);
        rec.tvd = Some(fit.tvd);
        if !fit.converged {
            rec.flags.push("temperature fit did not converge".into());
        }
        rec.model_fit = Some(model_metrics(spectrum, fit.temperature, &config.alphas)?);
    }

    let ground_limit = mean - spectrum.c_min() as f64 <= 1e-9 * (spectrum.c_min() as f64).abs().max(1.0);
    if config.thermo && ground_limit {
        rec.flags.push("mean cost at C_min: no finite Boltzmann temperature, entropy comparison skipped".into());
    } else if config.thermo {
        let seed = derive_seed(g.seed(), &[p as u64, 1]);
        let th = thermo_report(g.label(), spectrum, mean, s_qaoa, config.random_draws, seed)?;
        rec.t_b = Some(th.t_b);
        rec.s_boltzmann = Some(th.s_boltzmann);
        rec.s_fluc = Some(th.s_fluc);
        if config.random_draws > 0 {
            rec.s_random = Some(th.s_random);
            rec.s_random_std = Some(th.s_random_std);
        }
        if config.fluctuation_draws > 0 {
            let mut total = 0.0;
            for d in 0..config.fluctuation_draws {
                let s = derive_seed(g.seed(), &[p as u64, 2, d as u64]);
                total += sample_fluctuation_state(spectrum, cost_table, th.t_b, s)?.shannon_entropy();
            }
            rec.s_fluc_sampled = Some(total / config.fluctuation_draws as f64);
        }
    }
    Ok(())
}

/// Prediction-only records from the temperature law `coeffs`: spectra are
/// enumerated, no state vectors are allocated.
pub fn predict_large_n(
    config: &EnsembleConfig,
    coeffs: LawCoefficients,
    alphas: &[f64],
) -> Result<Vec<InstanceRecord>> {
    let cfg = EnsembleConfig {
        mode: Mode::PredictionOnly,
        law: coeffs,
        alphas: alphas.to_vec(),
        thermo: false,
        ..config.clone()
    };
    run_ensemble(&cfg)
}

/// Per-`(n, p)` summary of `f` over successful records.
pub fn summarize_by(
    records: &[InstanceRecord],
    f: impl Fn(&InstanceRecord) -> Option<f64>,
) -> BTreeMap<(usize, usize), Summary> {
    let mut groups: BTreeMap<(usize, usize), Vec<f64>> = BTreeMap::new();
    for r in records.iter().filter(|r| r.is_ok()) {
        if let Some(v) = f(r).filter(|v| v.is_finite()) {
            groups.entry((r.n, r.p)).or_default().push(v);
        }
    }
    groups.into_iter().filter_map(|(k, v)| Summary::of(&v).ok().map(|s| (k, s))).collect()
}

/// `(x, T)` points from records with a finite fitted temperature.
pub fn law_points(records: &[InstanceRecord]) -> Vec<(f64, f64)> {
    records
        .iter()
        .filter(|r| r.is_ok())
        .filter_map(|r| match r.t_fit {
            Some(Temperature::Finite(t)) => Some((law_regressor(r.c_min, r.n, r.p), t)),
            _ => None,
        })
        .collect()
}

pub fn fit_temperature_law(records: &[InstanceRecord]) -> Result<TemperatureLawCD> {
    fit_temperature_law_points(&law_points(records))
}

/// Fits `a·exp(−b n/p^{2/3})` to per-`(n, p)` medians of `Pr(C_min)`.
pub fn fit_pcmin_from_records(records: &[InstanceRecord]) -> Result<ScalingFitAB> {
    let medians = summarize_by(records, |r| r.pr_cmin).into_iter().map(|(k, s)| (k, s.median)).collect();
    fit_pcmin_scaling(&medians)
}

/// Quantity compared between the simulated state and the `T_e` model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "metric", content = "alpha", rename_all = "snake_case")]
pub enum Metric {
    Ratio,
    PrCmin,
    Cdf(f64),
}

impl Metric {
    pub fn exact(self, r: &InstanceRecord) -> Option<f64> {
        match self {
            Metric::Ratio => r.r,
            Metric::PrCmin => r.pr_cmin,
            Metric::Cdf(a) => r.cdf_at(a),
        }
    }

    pub fn model(self, r: &InstanceRecord) -> Option<f64> {
        let m = r.model.as_ref()?;
        match self {
            Metric::Ratio => Some(m.r_exp),
            Metric::PrCmin => Some(m.pr_cmin_exp),
            Metric::Cdf(a) => m.cdf.iter().find(|(x, _)| *x == a).map(|&(_, v)| v),
        }
    }

    pub fn name(self) -> String {
        match self {
            Metric::Ratio => "r".into(),
            Metric::PrCmin => "pr_cmin".into(),
            Metric::Cdf(a) => format!("cdf_{a}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorSummary {
    pub n: usize,
    pub p: usize,
    /// `None` when every row had `Q = 0`.
    pub eps_r: Option<Summary>,
    pub eps_d: Summary,
    /// Rows with `Q = 0`, excluded from `eps_r`.
    pub undefined: usize,
}

pub fn error_stats(records: &[InstanceRecord], metric: Metric) -> Vec<ErrorSummary> {
    let mut groups: BTreeMap<(usize, usize), (Vec<f64>, Vec<f64>, usize)> = BTreeMap::new();
    for r in records.iter().filter(|r| r.is_ok()) {
        let (Some(q), Some(q_exp)) = (metric.exact(r), metric.model(r)) else { continue };
        let (er, ed) = relative_and_difference_error(q, q_exp);
        let g = groups.entry((r.n, r.p)).or_default();
        match er {
            Some(v) => g.0.push(v),
            None => g.2 += 1,
        }
        g.1.push(ed);
    }
    groups
        .into_iter()
        .filter_map(|((n, p), (er, ed, undefined))| {
            Some(ErrorSummary { n, p, eps_r: Summary::of(&er).ok(), eps_d: Summary::of(&ed).ok()?, undefined })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> EnsembleConfig {
        EnsembleConfig {
            sizes: vec![SizeSpec { n: 8, count: 1 }],
            layers: vec![2],
            random_draws: 3,
            fluctuation_draws: 2,
            ..EnsembleConfig::default()
        }
    }

    #[test]
    fn smoke_single_record() {
        let recs = run_ensemble(&small()).unwrap();
        assert_eq!(recs.len(), 1);
        let r = &recs[0];
        assert!(r.is_ok(), "{:?}", r.error);
        for v in [r.r, r.pr_cmin, r.mean_cost, r.tvd, r.s_qaoa, r.s_boltzmann, r.s_fluc, r.s_random, r.s_fluc_sampled]
        {
            assert!(v.is_some_and(f64::is_finite));
        }
        assert!(r.t_fit.is_some() && r.t_e.is_some() && r.t_b.is_some());
        assert!(r.model.is_some() && r.model_fit.is_some() && r.angles.is_some());
        let (spec, dist) = r.spectrum_and_distribution().unwrap();
        assert_eq!(spec.c_min(), r.c_min);
        assert!((dist.total() - 1.0).abs() < 1e-12);
        assert_eq!(r.cdf.as_ref().unwrap().len(), 2);
        assert!((0.0..=1.0).contains(&r.r.unwrap()));
        assert!((0.0..=1.0).contains(&r.model.as_ref().unwrap().r_exp));
        assert!(r.s_qaoa.unwrap() <= r.s_boltzmann.unwrap() + 1e-6);
    }

    #[test]
    fn deterministic() {
        let cfg = EnsembleConfig { sizes: vec![SizeSpec { n: 8, count: 2 }], layers: vec![1, 2], ..small() };
        assert_eq!(run_ensemble(&cfg).unwrap(), run_ensemble(&cfg).unwrap());
    }

    #[test]
    fn prediction_only_mode() {
        let cfg = EnsembleConfig {
            sizes: vec![SizeSpec { n: 30, count: 1 }],
            layers: vec![2, 12],
            mode: Mode::PredictionOnly,
            ..EnsembleConfig::default()
        };
        let recs = run_ensemble(&cfg).unwrap();
        assert_eq!(recs.len(), 2);
        for r in recs {
            assert!(r.is_ok());
            assert!(r.model.is_some() && r.t_e.is_some());
            assert!(r.r.is_none() && r.s_qaoa.is_none() && r.angles.is_none() && r.t_fit.is_none());
        }
    }

    #[test]
    fn validation() {
        let mut cfg = small();
        cfg.sizes[0].count = 0;
        assert!(run_ensemble(&cfg).is_err());
        let cfg = EnsembleConfig { sizes: vec![SizeSpec { n: 30, count: 1 }], ..small() };
        assert!(matches!(run_ensemble(&cfg), Err(Error::ResourceLimit { .. })));
        let cfg = EnsembleConfig { layers: vec![13], ..small() };
        assert!(matches!(run_ensemble(&cfg), Err(Error::MissingTableEntry(13))));
    }

    #[test]
    fn explicit_instances_and_caps() {
        let g = generate_er_labeled(6, 0.5, 11, Some("toy".into())).unwrap();
        let big = GraphInstance::new(27, [(0, 1)], 0, "big").unwrap();
        let cfg = EnsembleConfig { fit: false, thermo: false, ..small() };
        let recs = run_instances(&cfg, &[big, g], |_| {}).unwrap();
        assert_eq!(recs.len(), 2);
        assert!(recs[0].is_ok() && recs[0].label == "toy" && recs[0].t_fit.is_none() && recs[0].r.is_some());
        assert!(recs[1].error.as_deref().unwrap().contains("resource limit"));
    }

    #[test]
    fn failures_are_recorded_not_fatal() {
        let cfg = EnsembleConfig { edge_prob: 0.0, thermo: false, ..small() };
        let recs = run_ensemble(&cfg).unwrap();
        assert_eq!(recs.len(), 1);
        assert!(recs[0].error.is_some());
    }

    #[test]
    fn error_stats_by_group() {
        let cfg = EnsembleConfig { sizes: vec![SizeSpec { n: 8, count: 3 }], thermo: false, ..small() };
        let recs = run_ensemble(&cfg).unwrap();
        let rows = error_stats(&recs, Metric::Ratio);
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].eps_d.count, 3);
        let cdf = error_stats(&recs, Metric::Cdf(0.08));
        assert_eq!(cdf.len(), 1);
    }
}
