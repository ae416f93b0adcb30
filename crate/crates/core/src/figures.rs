//! Tidy per-figure tables computed from ensemble records.
//!
//! | file | content |
//! |------|---------|
//! | fig1 | quantiles of `r` per `(n, p)` |
//! | fig2 | binned average `Pr(C)` per `(n, p)`, including `p = 0` |
//! | fig3 | quantiles of `Pr(C_min)` per `(n, p)` with the fitted trend |
//! | fig4 | binned average single-basis-state probability |
//! | fig5 | exact vs fitted distributions of the median- and worst-TVD instances |
//! | fig6 | fitted `T` against `C_min/(n√p)` with `T_e` |
//! | fig7 | entropy scatter |
//! | fig8 | exact vs `T_e` model metrics per record |
//! | fig9 | relative and difference error summaries |
//! | fig10 | predicted `r_exp`, `Pr_exp(C_min)` quantiles |
//! | fig11 | layers needed for a target `Pr(C_min)` |

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::boltzmann::{law_regressor, BoltzmannModel, Temperature};
use crate::distribution::cumulative;
use crate::ensemble::{error_stats, fit_pcmin_from_records, summarize_by, InstanceRecord, Metric};
use crate::error::Result;
use crate::io::{fmt_f64, write_table};
use crate::spectrum::{average_binned, bin_distribution, BinnedDistribution};
use crate::stats::{layers_for_target, ScalingFitAB, Summary};

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    fn new(header: &[&str]) -> Self {
        Self { header: header.iter().map(|s| s.to_string()).collect(), rows: vec![] }
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let header: Vec<&str> = self.header.iter().map(String::as_str).collect();
        write_table(path, &header, self.rows.iter().cloned())
    }

    /// Index of column `name`.
    pub fn column(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FigureOptions {
    /// Bins per `|C_min|` for the binned figures.
    pub bins: usize,
    pub targets: Vec<f64>,
    pub layer_sizes: Vec<usize>,
    /// Trend used by fig3, fig10 and fig11; fitted from the records when absent.
    pub pcmin_fit: Option<ScalingFitAB>,
}

impl Default for FigureOptions {
    fn default() -> Self {
        Self {
            bins: 7,
            targets: vec![0.01, 0.1, 0.5],
            layer_sizes: (1..=20).map(|k| 10 * k).collect(),
            pcmin_fit: None,
        }
    }
}

fn temp_cell(t: Option<Temperature>) -> String {
    match t {
        Some(Temperature::Finite(v)) => fmt_f64(v),
        Some(Temperature::Infinite) => "inf".into(),
        None => String::new(),
    }
}

fn opt_cell(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

fn summary_cells(s: &Summary) -> [String; 3] {
    [fmt_f64(s.q10), fmt_f64(s.median), fmt_f64(s.q90)]
}

fn quantile_table(records: &[InstanceRecord], f: impl Fn(&InstanceRecord) -> Option<f64>) -> Table {
    let mut t = Table::new(&["n", "p", "q10", "median", "q90", "count"]);
    for ((n, p), s) in summarize_by(records, f) {
        let [a, b, c] = summary_cells(&s);
        t.rows.push(vec![n.to_string(), p.to_string(), a, b, c, s.count.to_string()]);
    }
    t
}

pub fn fig1(records: &[InstanceRecord]) -> Table {
    quantile_table(records, |r| r.r)
}

/// Per-`(n, p)` averaged binnings; `p = 0` uses each instance's uniform distribution.
fn binned_groups(records: &[InstanceRecord], bins: usize) -> Vec<((usize, usize), BinnedDistribution)> {
    let mut groups: BTreeMap<(usize, usize), Vec<BinnedDistribution>> = BTreeMap::new();
    let mut uniform: BTreeMap<(usize, String), BinnedDistribution> = BTreeMap::new();
    for r in records.iter().filter(|r| r.is_ok()) {
        let Some((spectrum, dist)) = r.spectrum_and_distribution() else { continue };
        if let Ok(b) = bin_distribution(&dist, &spectrum, bins) {
            groups.entry((r.n, r.p)).or_default().push(b);
        }
        if let Ok(b) = bin_distribution(&spectrum.uniform_distribution(), &spectrum, bins) {
            uniform.entry((r.n, r.label.clone())).or_insert(b);
        }
    }
    for ((n, _), b) in uniform {
        groups.entry((n, 0)).or_default().push(b);
    }
    groups.into_iter().filter_map(|(k, v)| average_binned(&v).ok().map(|b| (k, b))).collect()
}

pub fn fig2(records: &[InstanceRecord], bins: usize) -> Table {
    let mut t = Table::new(&["n", "p", "bin_lo", "bin_hi", "mean", "std"]);
    for ((n, p), b) in binned_groups(records, bins) {
        for bin in &b.bins {
            t.rows.push(vec![
                n.to_string(),
                p.to_string(),
                fmt_f64(bin.lo),
                fmt_f64(bin.hi),
                fmt_f64(bin.mean),
                fmt_f64(bin.std),
            ]);
        }
    }
    t
}

pub fn fig3(records: &[InstanceRecord], fit: Option<&ScalingFitAB>) -> Table {
    let mut t = quantile_table(records, |r| r.pr_cmin);
    t.header.push("trend".into());
    for row in &mut t.rows {
        let (n, p) = (row[0].parse().unwrap_or(0), row[1].parse().unwrap_or(0));
        row.push(opt_cell(fit.map(|f| f.predict(n, p))));
    }
    t
}

pub fn fig4(records: &[InstanceRecord], bins: usize) -> Table {
    let mut t = Table::new(&["n", "p", "bin_lo", "bin_hi", "basis_mean", "empty"]);
    for ((n, p), b) in binned_groups(records, bins) {
        for bin in &b.bins {
            t.rows.push(vec![
                n.to_string(),
                p.to_string(),
                fmt_f64(bin.lo),
                fmt_f64(bin.hi),
                fmt_f64(bin.basis_mean),
                bin.empty.to_string(),
            ]);
        }
    }
    t
}

/// The median-TVD (lower median) and worst-TVD records of each `(n, p)`.
pub fn example_instances(records: &[InstanceRecord]) -> Vec<(&'static str, &InstanceRecord)> {
    let mut groups: BTreeMap<(usize, usize), Vec<&InstanceRecord>> = BTreeMap::new();
    for r in records.iter().filter(|r| r.is_ok() && r.classes.is_some() && r.tvd.is_some()) {
        groups.entry((r.n, r.p)).or_default().push(r);
    }
    let mut out = vec![];
    for (_, mut v) in groups {
        v.sort_by(|a, b| a.tvd.unwrap().total_cmp(&b.tvd.unwrap()).then_with(|| a.label.cmp(&b.label)));
        out.push(("median", v[(v.len() - 1) / 2]));
        out.push(("worst", v[v.len() - 1]));
    }
    out
}

pub fn fig5(records: &[InstanceRecord]) -> Table {
    let mut t = Table::new(&["n", "p", "role", "label", "C", "rho", "prob", "prob_fit", "cdf", "cdf_te"]);
    for (role, r) in example_instances(records) {
        let Some((spectrum, dist)) = r.spectrum_and_distribution() else { continue };
        let fit = r.t_fit.and_then(|t| BoltzmannModel::new(&spectrum, t).ok());
        let te = r.t_e.and_then(|t| BoltzmannModel::new(&spectrum, t).ok()).map(|m| m.distribution());
        for c in spectrum.support() {
            t.rows.push(vec![
                r.n.to_string(),
                r.p.to_string(),
                role.to_string(),
                r.label.clone(),
                c.to_string(),
                spectrum.rho(c).to_string(),
                fmt_f64(dist.mass(c)),
                opt_cell(fit.as_ref().map(|m| m.mass(c))),
                fmt_f64(cumulative(&dist, c as f64)),
                opt_cell(te.as_ref().map(|d| cumulative(d, c as f64))),
            ]);
        }
    }
    t
}

pub fn fig6(records: &[InstanceRecord]) -> Table {
    let mut t = Table::new(&["label", "n", "p", "x", "t_fit", "t_e"]);
    for r in records.iter().filter(|r| r.is_ok() && r.t_fit.is_some()) {
        t.rows.push(vec![
            r.label.clone(),
            r.n.to_string(),
            r.p.to_string(),
            fmt_f64(law_regressor(r.c_min, r.n, r.p)),
            temp_cell(r.t_fit),
            temp_cell(r.t_e),
        ]);
    }
    t
}

pub fn fig7(records: &[InstanceRecord]) -> Table {
    let mut t = Table::new(&["s_boltzmann", "s_qaoa", "s_random", "s_fluc"]);
    for r in records.iter().filter(|r| r.is_ok()) {
        if let (Some(b), Some(q), Some(x), Some(f)) = (r.s_boltzmann, r.s_qaoa, r.s_random, r.s_fluc) {
            t.rows.push(vec![fmt_f64(b), fmt_f64(q), fmt_f64(x), fmt_f64(f)]);
        }
    }
    t
}

fn alphas_of(records: &[InstanceRecord]) -> Vec<f64> {
    let mut out: Vec<f64> = vec![];
    for r in records {
        for &(a, _) in r.cdf.iter().flatten() {
            if !out.contains(&a) {
                out.push(a);
            }
        }
    }
    out
}

pub fn fig8(records: &[InstanceRecord]) -> Table {
    let alphas = alphas_of(records);
    let mut header: Vec<String> =
        ["label", "n", "p", "r", "r_exp", "pr_cmin", "pr_cmin_exp"].iter().map(|s| s.to_string()).collect();
    for a in &alphas {
        header.push(format!("cdf_{a}"));
        header.push(format!("cdf_exp_{a}"));
    }
    let mut t = Table { header, rows: vec![] };
    for r in records.iter().filter(|r| r.is_ok() && r.r.is_some()) {
        let mut row = vec![
            r.label.clone(),
            r.n.to_string(),
            r.p.to_string(),
            opt_cell(Metric::Ratio.exact(r)),
            opt_cell(Metric::Ratio.model(r)),
            opt_cell(Metric::PrCmin.exact(r)),
            opt_cell(Metric::PrCmin.model(r)),
        ];
        for &a in &alphas {
            row.push(opt_cell(Metric::Cdf(a).exact(r)));
            row.push(opt_cell(Metric::Cdf(a).model(r)));
        }
        t.rows.push(row);
    }
    t
}

pub fn fig9(records: &[InstanceRecord]) -> Table {
    let mut t = Table::new(&[
        "metric",
        "n",
        "p",
        "eps_r_q10",
        "eps_r_median",
        "eps_r_q90",
        "eps_d_q10",
        "eps_d_median",
        "eps_d_q90",
        "count",
        "undefined",
    ]);
    let metrics =
        [Metric::Ratio, Metric::PrCmin].into_iter().chain(alphas_of(records).into_iter().map(Metric::Cdf));
    for m in metrics {
        for row in error_stats(records, m) {
            let er = row.eps_r.as_ref().map(summary_cells).unwrap_or_default();
            let [d1, d2, d3] = summary_cells(&row.eps_d);
            let [e1, e2, e3] = er;
            t.rows.push(vec![
                m.name(),
                row.n.to_string(),
                row.p.to_string(),
                e1,
                e2,
                e3,
                d1,
                d2,
                d3,
                row.eps_d.count.to_string(),
                row.undefined.to_string(),
            ]);
        }
    }
    t
}

pub fn fig10(predictions: &[InstanceRecord], fit: Option<&ScalingFitAB>) -> Table {
    let mut t = Table::new(&[
        "n",
        "p",
        "r_exp_q10",
        "r_exp_median",
        "r_exp_q90",
        "pr_cmin_exp_q10",
        "pr_cmin_exp_median",
        "pr_cmin_exp_q90",
        "count",
        "trend",
    ]);
    let r = summarize_by(predictions, |x| Metric::Ratio.model(x));
    let pr = summarize_by(predictions, |x| Metric::PrCmin.model(x));
    for (&(n, p), sr) in &r {
        let Some(sp) = pr.get(&(n, p)) else { continue };
        let [a, b, c] = summary_cells(sr);
        let [d, e, f] = summary_cells(sp);
        t.rows.push(vec![
            n.to_string(),
            p.to_string(),
            a,
            b,
            c,
            d,
            e,
            f,
            sr.count.to_string(),
            opt_cell(fit.map(|x| x.predict(n, p))),
        ]);
    }
    t
}

pub fn fig11(fit: &ScalingFitAB, sizes: &[usize], targets: &[f64]) -> Table {
    let mut t = Table::new(&["n", "target", "p"]);
    for &target in targets {
        for &n in sizes {
            let p = layers_for_target(n, target, fit).ok();
            t.rows.push(vec![n.to_string(), fmt_f64(target), opt_cell(p)]);
        }
    }
    t
}

/// Writes every figure that the inputs support into `dir`, returning the paths.
pub fn write_figures(
    dir: &Path,
    records: &[InstanceRecord],
    predictions: Option<&[InstanceRecord]>,
    opts: &FigureOptions,
) -> Result<Vec<PathBuf>> {
    let fit = opts.pcmin_fit.clone().or_else(|| fit_pcmin_from_records(records).ok());
    let mut tables = vec![
        ("fig1.csv", fig1(records)),
        ("fig2.csv", fig2(records, opts.bins)),
        ("fig3.csv", fig3(records, fit.as_ref())),
        ("fig4.csv", fig4(records, opts.bins)),
        ("fig5.csv", fig5(records)),
        ("fig6.csv", fig6(records)),
        ("fig7.csv", fig7(records)),
        ("fig8.csv", fig8(records)),
        ("fig9.csv", fig9(records)),
    ];
    if let Some(pred) = predictions {
        tables.push(("fig10.csv", fig10(pred, fit.as_ref())));
    }
    if let Some(f) = &fit {
        tables.push(("fig11.csv", fig11(f, &opts.layer_sizes, &opts.targets)));
    }
    let mut paths = vec![];
    for (name, table) in tables {
        let path = dir.join(name);
        table.write(&path)?;
        paths.push(path);
    }
    Ok(paths)
}
