//! `qbl`: generate instances, run QAOA ensembles, fit the Boltzmann model and
//! emit per-figure data.

mod config;
mod manifest;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use qbl_core::boltzmann::LawCoefficients;
use qbl_core::ensemble::{
    fit_pcmin_from_records, fit_temperature_law, instance_seed, law_points, run_ensemble_with, run_instances,
    summarize_by, EnsembleConfig, InstanceRecord, Mode,
};
use qbl_core::figures::{fig10, fig11, fig7, write_figures, FigureOptions};
use qbl_core::io::{self, RecordsFile};
use qbl_core::simulator::Simulator;
use qbl_core::spectrum::{bin_distribution, enumerate_spectrum};
use qbl_core::stats::ScalingFitAB;
use qbl_core::{generate_er, GraphInstance};

use config::EnsembleArgs;
use manifest::ManifestWriter;

#[derive(Parser)]
#[command(name = "qbl", version, about = "Boltzmann-model analysis of QAOA on random MaxCut")]
struct Cli {
    /// Worker threads; defaults to all available cores.
    #[arg(long, global = true, env = "QBL_THREADS")]
    threads: Option<usize>,
    /// Suppress the per-instance log on stderr.
    #[arg(long, short, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate Erdős–Rényi instance files.
    Gen {
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0.5)]
        edge_prob: f64,
        #[arg(long, default_value_t = 1)]
        count: usize,
        #[arg(long, default_value_t = 2024)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Enumerate the cost spectrum of an instance.
    Spectrum {
        #[arg(long)]
        instance: PathBuf,
        /// Bins per |C_min| for the binned uniform distribution.
        #[arg(long, default_value_t = 7)]
        bins: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the full pipeline on instance files, or on a generated ensemble.
    Run {
        /// Instance files or directories of them; generated from --sizes when empty.
        instances: Vec<PathBuf>,
        #[command(flatten)]
        ensemble: EnsembleArgs,
        /// Skip the entropy analysis.
        #[arg(long)]
        no_thermo: bool,
        /// Skip the per-record temperature fit.
        #[arg(long)]
        no_fit: bool,
        /// Model-side metrics only; no state vectors.
        #[arg(long)]
        predict_only: bool,
        /// Write binary state dumps for n <= 16.
        #[arg(long)]
        dump_states: bool,
        /// Write a C,prob file per record.
        #[arg(long)]
        dump_distributions: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit the temperature law or the Pr(C_min) scaling to a records file.
    Fit {
        #[arg(long)]
        records: PathBuf,
        #[arg(long, value_enum)]
        which: FitKind,
        #[arg(long)]
        out: PathBuf,
    },
    /// Entropy comparison for instance files.
    Entropy {
        instances: Vec<PathBuf>,
        #[command(flatten)]
        ensemble: EnsembleArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Model predictions from the temperature law, without simulation.
    Predict {
        #[command(flatten)]
        ensemble: EnsembleArgs,
        /// Temperature-law fit JSON from `qbl fit`; overrides --law-c/--law-d.
        #[arg(long)]
        law: Option<PathBuf>,
        /// Pr(C_min) scaling fit JSON for the trend and layer estimates.
        #[arg(long)]
        pcmin_fit: Option<PathBuf>,
        /// Target probabilities for the layer estimates.
        #[arg(long, default_value = "0.01,0.1,0.5")]
        targets: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Emit per-figure CSV files from records.
    Report {
        #[arg(long)]
        records: PathBuf,
        #[arg(long)]
        predictions: Option<PathBuf>,
        #[arg(long)]
        pcmin_fit: Option<PathBuf>,
        #[arg(long, default_value_t = 7)]
        bins: usize,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
enum FitKind {
    TemperatureLaw,
    PcminScaling,
}

/// Output of `qbl fit`.
#[derive(Debug, Serialize, Deserialize)]
struct FitOutput {
    which: FitKind,
    input: PathBuf,
    input_sha256: String,
    points: usize,
    result: serde_json::Value,
}

enum Outcome {
    Success,
    PartialFailure,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.exit_code() == 0 { 0 } else { 1 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Some(t) = cli.threads {
        if t == 0 {
            eprintln!("error: --threads must be >= 1");
            return ExitCode::from(1);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(t).build_global() {
            eprintln!("error: thread pool: {e}");
            return ExitCode::from(1);
        }
    }
    match dispatch(cli) {
        Ok(Outcome::Success) => ExitCode::SUCCESS,
        Ok(Outcome::PartialFailure) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            let resource =
                e.chain().any(|c| matches!(c.downcast_ref(), Some(qbl_core::Error::ResourceLimit { .. })));
            ExitCode::from(if resource { 3 } else { 1 })
        }
    }
}

fn dispatch(cli: Cli) -> Result<Outcome> {
    let quiet = cli.quiet;
    match cli.command {
        Command::Gen { n, edge_prob, count, seed, out } => cmd_gen(n, edge_prob, count, seed, &out),
        Command::Spectrum { instance, bins, out } => cmd_spectrum(&instance, bins, &out),
        Command::Run { instances, ensemble, no_thermo, no_fit, predict_only, dump_states, dump_distributions, out } => {
            let mut cfg = ensemble.resolve()?;
            cfg.thermo &= !no_thermo;
            cfg.fit &= !no_fit;
            if predict_only {
                cfg.mode = Mode::PredictionOnly;
            }
            cmd_run(&instances, cfg, quiet, dump_states, dump_distributions, &out)
        }
        Command::Fit { records, which, out } => cmd_fit(&records, which, &out),
        Command::Entropy { instances, ensemble, out } => {
            let mut cfg = ensemble.resolve()?;
            cfg.thermo = true;
            cmd_entropy(&instances, cfg, quiet, &out)
        }
        Command::Predict { ensemble, law, pcmin_fit, targets, out } => {
            let mut cfg = ensemble.resolve()?;
            if let Some(path) = law {
                cfg.law = read_law(&path)?;
            }
            let fit = pcmin_fit.as_deref().map(read_pcmin_fit).transpose()?;
            let targets: Vec<f64> = targets
                .split(',')
                .map(|t| t.trim().parse())
                .collect::<std::result::Result<_, _>>()
                .context("invalid --targets")?;
            cmd_predict(cfg, fit, &targets, quiet, &out)
        }
        Command::Report { records, predictions, pcmin_fit, bins, out } => {
            cmd_report(&records, predictions.as_deref(), pcmin_fit.as_deref(), bins, &out)
        }
    }
}

fn log_record(quiet: bool) -> impl Fn(&InstanceRecord) + Sync {
    move |r| {
        if quiet {
            return;
        }
        let f = |v: Option<f64>| v.map_or("-".to_string(), |x| format!("{x:.4}"));
        match &r.error {
            Some(e) => eprintln!("{} n={} p={} error: {e}", r.label, r.n, r.p),
            None => eprintln!(
                "{} n={} p={} r={} pr_cmin={} tvd={} r_exp={}",
                r.label,
                r.n,
                r.p,
                f(r.r),
                f(r.pr_cmin),
                f(r.tvd),
                f(r.model.as_ref().map(|m| m.r_exp))
            ),
        }
    }
}

fn cmd_gen(n: usize, edge_prob: f64, count: usize, seed: u64, out: &Path) -> Result<Outcome> {
    if count == 0 {
        bail!(qbl_core::Error::InvalidInput("--count must be >= 1".into()));
    }
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let config = serde_json::json!({ "n": n, "edge_prob": edge_prob, "count": count, "seed": seed });
    let mut m = ManifestWriter::create(&out.join("manifest.json"), "gen", config, &["generate"])?;
    let paths = m.stage("generate", || {
        (0..count)
            .map(|k| {
                let g = generate_er(n, edge_prob, instance_seed(seed, n, k))?;
                let path = out.join(format!("{}.json", g.label()));
                io::write_instance(&path, &g)?;
                Ok(path)
            })
            .collect::<Result<Vec<_>>>()
    })?;
    m.manifest.outputs = paths;
    m.finish()?;
    Ok(Outcome::Success)
}

fn cmd_spectrum(instance: &Path, bins: usize, out: &Path) -> Result<Outcome> {
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let config = serde_json::json!({ "instance": instance, "bins": bins });
    let mut m = ManifestWriter::create(&out.join("manifest.json"), "spectrum", config, &["enumerate", "write"])?;
    m.manifest.inputs = vec![instance.to_path_buf()];
    let g = io::read_instance(instance)?;
    let (spectrum, _) = m.stage("enumerate", || Ok(enumerate_spectrum(&g, false)?))?;
    let outputs = m.stage("write", || {
        let spec = out.join("spectrum.csv");
        io::write_spectrum_csv(&spec, &spectrum)?;
        let mut paths = vec![spec];
        if spectrum.c_min() < 0 {
            let binned = out.join("binned.csv");
            io::write_binned_csv(&binned, &bin_distribution(&spectrum.uniform_distribution(), &spectrum, bins)?)?;
            paths.push(binned);
        }
        Ok(paths)
    })?;
    m.manifest.outputs = outputs;
    m.finish()?;
    Ok(Outcome::Success)
}

/// Instance files named directly or found (as `*.json`, excluding manifests) in directories.
fn collect_instances(inputs: &[PathBuf]) -> Result<(Vec<PathBuf>, Vec<GraphInstance>)> {
    let mut files = vec![];
    for p in inputs {
        if p.is_dir() {
            let mut found: Vec<PathBuf> = std::fs::read_dir(p)?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|f| f.extension().is_some_and(|x| x == "json") && f.file_name().is_some_and(|n| n != "manifest.json"))
                .collect();
            found.sort();
            files.extend(found);
        } else {
            files.push(p.clone());
        }
    }
    let graphs = files.iter().map(|f| Ok(io::read_instance(f)?)).collect::<Result<Vec<_>>>()?;
    Ok((files, graphs))
}

/// Records plus the instances they came from; generated ensembles are rebuilt
/// from their derived seeds.
fn run_records(
    instances: &[PathBuf],
    cfg: &EnsembleConfig,
    quiet: bool,
) -> Result<(Vec<PathBuf>, Vec<GraphInstance>, Vec<InstanceRecord>)> {
    if instances.is_empty() {
        let records = run_ensemble_with(cfg, log_record(quiet))?;
        let graphs = cfg
            .sizes
            .iter()
            .flat_map(|s| (0..s.count).map(move |k| (s.n, k)))
            .filter_map(|(n, k)| generate_er(n, cfg.edge_prob, instance_seed(cfg.master_seed, n, k)).ok())
            .collect();
        Ok((vec![], graphs, records))
    } else {
        let (files, graphs) = collect_instances(instances)?;
        let records = run_instances(cfg, &graphs, log_record(quiet))?;
        Ok((files, graphs, records))
    }
}

fn write_records(out: &Path, name: &str, cfg: &EnsembleConfig, records: &[InstanceRecord]) -> Result<Vec<PathBuf>> {
    let csv = out.join(format!("{name}.csv"));
    let json = out.join(format!("{name}.json"));
    io::write_records_csv(&csv, records)?;
    io::write_json(&json, &RecordsFile::new(cfg.clone(), records.to_vec()))?;
    Ok(vec![csv, json])
}

fn cmd_run(
    instances: &[PathBuf],
    cfg: EnsembleConfig,
    quiet: bool,
    dump_states: bool,
    dump_distributions: bool,
    out: &Path,
) -> Result<Outcome> {
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let stages = ["simulate", "records", "figures", "reports"];
    let mut m = ManifestWriter::create(&out.join("manifest.json"), "run", serde_json::to_value(&cfg)?, &stages)?;
    let (inputs, graphs, records) = m.stage("simulate", || run_records(instances, &cfg, quiet))?;
    m.manifest.inputs = inputs;
    let mut outputs = m.stage("records", || write_records(out, "records", &cfg, &records))?;
    let figs = m.stage("figures", || Ok(write_figures(&out.join("figures"), &records, None, &FigureOptions::default())?))?;
    outputs.extend(figs);
    let dumps = Dumps { states: dump_states, distributions: dump_distributions };
    let reports = m.stage("reports", || write_reports(out, &records, &graphs, dumps))?;
    outputs.extend(reports);
    m.manifest.outputs = outputs;
    m.finish()?;
    Ok(if records.iter().all(InstanceRecord::is_ok) { Outcome::Success } else { Outcome::PartialFailure })
}

#[derive(Clone, Copy)]
struct Dumps {
    states: bool,
    distributions: bool,
}

/// Per-record optimization reports, plus optional distribution and state dumps.
fn write_reports(
    out: &Path,
    records: &[InstanceRecord],
    graphs: &[GraphInstance],
    dumps: Dumps,
) -> Result<Vec<PathBuf>> {
    let mut paths = vec![];
    for r in records {
        let stem = format!("{}_p{}", r.label, r.p);
        let Some(rep) = &r.angles else { continue };
        let path = out.join("reports").join(format!("{stem}.json"));
        io::write_json(&path, rep)?;
        paths.push(path);
        if dumps.distributions {
            if let Some((_, dist)) = r.spectrum_and_distribution() {
                let path = out.join("distributions").join(format!("{stem}.csv"));
                io::write_distribution_csv(&path, &dist)?;
                paths.push(path);
            }
        }
        if dumps.states && r.n <= io::STATE_DUMP_CAP {
            if let Some(g) = graphs.iter().find(|g| g.label() == r.label && g.seed() == r.seed) {
                let psi = Simulator::for_graph(g)?.run(&rep.final_angles)?;
                let path = out.join("states").join(format!("{stem}.bin"));
                io::write_state_dump(&path, &psi)?;
                paths.push(path);
            }
        }
    }
    Ok(paths)
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn read_records(path: &Path) -> Result<(Vec<u8>, RecordsFile)> {
    let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    let text = String::from_utf8(bytes.clone()).context("records file is not UTF-8")?;
    Ok((bytes, io::parse_json(&path.display().to_string(), &text)?))
}

fn cmd_fit(records: &Path, which: FitKind, out: &Path) -> Result<Outcome> {
    let (bytes, file) = read_records(records)?;
    let recs = &file.records;
    let (points, result) = match which {
        FitKind::TemperatureLaw => {
            let points = law_points(recs).len();
            (points, serde_json::to_value(fit_temperature_law(recs)?)?)
        }
        FitKind::PcminScaling => {
            let points = summarize_by(recs, |r| r.pr_cmin).len();
            (points, serde_json::to_value(fit_pcmin_from_records(recs)?)?)
        }
    };
    let output = FitOutput {
        which,
        input: records.to_path_buf(),
        input_sha256: sha256_hex(&bytes),
        points,
        result,
    };
    io::write_json(out, &output)?;
    Ok(Outcome::Success)
}

fn read_fit(path: &Path, which: FitKind) -> Result<serde_json::Value> {
    let out: FitOutput = io::read_json(path)?;
    if out.which != which {
        bail!("{} holds a {:?} fit, expected {which:?}", path.display(), out.which);
    }
    Ok(out.result)
}

fn read_law(path: &Path) -> Result<LawCoefficients> {
    let v = read_fit(path, FitKind::TemperatureLaw)?;
    Ok(serde_json::from_value::<qbl_core::stats::TemperatureLawCD>(v)?.coefficients())
}

fn read_pcmin_fit(path: &Path) -> Result<ScalingFitAB> {
    Ok(serde_json::from_value(read_fit(path, FitKind::PcminScaling)?)?)
}

#[derive(Serialize)]
struct EntropyRow<'a> {
    label: &'a str,
    n: usize,
    p: usize,
    target_mean: Option<f64>,
    s_qaoa: Option<f64>,
    t_b: Option<qbl_core::boltzmann::Temperature>,
    s_boltzmann: Option<f64>,
    s_fluc: Option<f64>,
    s_random: Option<f64>,
    s_random_std: Option<f64>,
    s_fluc_sampled: Option<f64>,
    error: Option<&'a str>,
}

fn cmd_entropy(instances: &[PathBuf], cfg: EnsembleConfig, quiet: bool, out: &Path) -> Result<Outcome> {
    if instances.is_empty() {
        bail!(qbl_core::Error::InvalidInput("entropy needs at least one instance".into()));
    }
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let mut m = ManifestWriter::create(&out.join("manifest.json"), "entropy", serde_json::to_value(&cfg)?, &[
        "simulate", "write",
    ])?;
    let (inputs, _, records) = m.stage("simulate", || run_records(instances, &cfg, quiet))?;
    m.manifest.inputs = inputs;
    let outputs = m.stage("write", || {
        let rows: Vec<EntropyRow> = records
            .iter()
            .map(|r| EntropyRow {
                label: &r.label,
                n: r.n,
                p: r.p,
                target_mean: r.mean_cost,
                s_qaoa: r.s_qaoa,
                t_b: r.t_b,
                s_boltzmann: r.s_boltzmann,
                s_fluc: r.s_fluc,
                s_random: r.s_random,
                s_random_std: r.s_random_std,
                s_fluc_sampled: r.s_fluc_sampled,
                error: r.error.as_deref(),
            })
            .collect();
        let json = out.join("entropy.json");
        io::write_json(&json, &rows)?;
        let csv = out.join("entropy.csv");
        fig7(&records).write(&csv)?;
        Ok(vec![json, csv])
    })?;
    m.manifest.outputs = outputs;
    m.finish()?;
    Ok(if records.iter().all(InstanceRecord::is_ok) { Outcome::Success } else { Outcome::PartialFailure })
}

fn cmd_predict(
    mut cfg: EnsembleConfig,
    fit: Option<ScalingFitAB>,
    targets: &[f64],
    quiet: bool,
    out: &Path,
) -> Result<Outcome> {
    cfg.mode = Mode::PredictionOnly;
    cfg.thermo = false;
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let mut m = ManifestWriter::create(&out.join("manifest.json"), "predict", serde_json::to_value(&cfg)?, &[
        "predict", "write",
    ])?;
    let records = m.stage("predict", || Ok(run_ensemble_with(&cfg, log_record(quiet))?))?;
    let outputs = m.stage("write", || {
        let mut paths = write_records(out, "predictions", &cfg, &records)?;
        let f10 = out.join("fig10.csv");
        fig10(&records, fit.as_ref()).write(&f10)?;
        paths.push(f10);
        if let Some(f) = &fit {
            let f11 = out.join("fig11.csv");
            fig11(f, &FigureOptions::default().layer_sizes, targets).write(&f11)?;
            paths.push(f11);
        }
        Ok(paths)
    })?;
    m.manifest.outputs = outputs;
    m.finish()?;
    Ok(if records.iter().all(InstanceRecord::is_ok) { Outcome::Success } else { Outcome::PartialFailure })
}

fn cmd_report(
    records: &Path,
    predictions: Option<&Path>,
    pcmin_fit: Option<&Path>,
    bins: usize,
    out: &Path,
) -> Result<Outcome> {
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let config = serde_json::json!({ "records": records, "predictions": predictions, "pcmin_fit": pcmin_fit, "bins": bins });
    let mut m = ManifestWriter::create(&out.join("manifest.json"), "report", config, &["figures"])?;
    let (_, file) = read_records(records)?;
    let preds = predictions.map(read_records).transpose()?.map(|(_, f)| f.records);
    let opts = FigureOptions {
        bins,
        pcmin_fit: pcmin_fit.map(read_pcmin_fit).transpose()?,
        ..FigureOptions::default()
    };
    m.manifest.inputs = std::iter::once(records).chain(predictions).chain(pcmin_fit).map(Path::to_path_buf).collect();
    let outputs = m.stage("figures", || Ok(write_figures(out, &file.records, preds.as_deref(), &opts)?))?;
    m.manifest.outputs = outputs;
    m.finish()?;
    Ok(Outcome::Success)
}
