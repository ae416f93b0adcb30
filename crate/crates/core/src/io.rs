//! File formats: instance and records JSON, spectrum/distribution CSV, state dumps.
//!
//! Floats in CSV output are written with 17 significant digits so values survive a
//! text roundtrip exactly.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use num_complex::Complex64;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::boltzmann::Temperature;
use crate::distribution::CostDistribution;
use crate::ensemble::{EnsembleConfig, InstanceRecord};
use crate::error::{Error, Result};
use crate::graph::GraphInstance;
use crate::simulator::StateVector;
use crate::spectrum::{BinnedDistribution, CostSpectrum};

/// Largest `n` accepted for binary state dumps.
pub const STATE_DUMP_CAP: usize = 16;

/// Round-trip decimal form of `x`: 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else if x == 0.0 {
        "0".into()
    } else {
        format!("{x:.16e}")
    }
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_f64).unwrap_or_default()
}

fn fmt_temp(t: Option<Temperature>) -> String {
    match t {
        Some(Temperature::Finite(v)) => fmt_f64(v),
        Some(Temperature::Infinite) => "inf".into(),
        None => String::new(),
    }
}

/// Creates the parent directory of `path` if needed.
pub fn ensure_parent(path: &Path) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    Ok(())
}

/// Parses JSON, mapping syntax and type errors to a byte offset in `text`.
pub fn parse_json<T: DeserializeOwned>(file: &str, text: &str) -> Result<T> {
    serde_json::from_str(text).map_err(|e| Error::Parse {
        file: file.to_string(),
        offset: byte_offset(text, e.line(), e.column()),
        message: e.to_string(),
    })
}

fn byte_offset(text: &str, line: usize, column: usize) -> usize {
    if line == 0 {
        return 0;
    }
    let start: usize = text.split_inclusive('\n').take(line - 1).map(str::len).sum();
    (start + column.saturating_sub(1)).min(text.len())
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path)?;
    parse_json(&path.display().to_string(), &text)
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    ensure_parent(path)?;
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

pub fn read_instance(path: &Path) -> Result<GraphInstance> {
    let g: GraphInstance = read_json(path)?;
    g.validate().map_err(|e| Error::Parse { file: path.display().to_string(), offset: 0, message: e.to_string() })
}

pub fn write_instance(path: &Path, g: &GraphInstance) -> Result<()> {
    write_json(path, g)
}

fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    ensure_parent(path)?;
    Ok(csv::Writer::from_path(path).map_err(csv_error)?)
}

fn csv_error(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(e) => Error::Io(e),
        other => Error::InvalidInput(format!("csv: {other:?}")),
    }
}

/// Writes rows of pre-formatted cells under `header`.
pub fn write_table(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(header).map_err(csv_error)?;
    for row in rows {
        w.write_record(&row).map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

/// `C,rho` rows in increasing `C`.
pub fn write_spectrum_csv(path: &Path, spectrum: &CostSpectrum) -> Result<()> {
    let rows = spectrum.density().iter().map(|(c, r)| vec![c.to_string(), r.to_string()]);
    write_table(path, &["C", "rho"], rows)
}

pub fn read_spectrum_csv(path: &Path) -> Result<BTreeMap<i64, u64>> {
    let file = path.display().to_string();
    let mut rdr = csv::Reader::from_path(path).map_err(csv_error)?;
    let mut out = BTreeMap::new();
    for rec in rdr.records() {
        let rec = rec.map_err(csv_error)?;
        let offset = rec.position().map_or(0, |p| p.byte() as usize);
        let bad = |m: &str| Error::Parse { file: file.clone(), offset, message: m.to_string() };
        if rec.len() != 2 {
            return Err(bad("expected two columns C,rho"));
        }
        let c: i64 = rec[0].trim().parse().map_err(|_| bad("cost is not an integer"))?;
        let r: u64 = rec[1].trim().parse().map_err(|_| bad("rho is not a non-negative integer"))?;
        if out.insert(c, r).is_some() {
            return Err(bad("duplicate cost"));
        }
    }
    Ok(out)
}

/// `bin_lo,bin_hi,mean,std`.
pub fn write_binned_csv(path: &Path, binned: &BinnedDistribution) -> Result<()> {
    let rows = binned.bins.iter().map(|b| vec![fmt_f64(b.lo), fmt_f64(b.hi), fmt_f64(b.mean), fmt_f64(b.std)]);
    write_table(path, &["bin_lo", "bin_hi", "mean", "std"], rows)
}

/// `C,prob` rows in increasing `C`.
pub fn write_distribution_csv(path: &Path, dist: &CostDistribution) -> Result<()> {
    let rows = dist.iter().map(|(c, m)| vec![c.to_string(), fmt_f64(m)]);
    write_table(path, &["C", "prob"], rows)
}

/// Little-endian `n: u32` followed by `2^n` `(re, im)` f64 pairs.
pub fn write_state_dump(path: &Path, state: &StateVector) -> Result<()> {
    if state.n() > STATE_DUMP_CAP {
        return Err(Error::ResourceLimit { what: "state dump", cap: STATE_DUMP_CAP, n: state.n() });
    }
    ensure_parent(path)?;
    let mut buf = Vec::with_capacity(4 + 16 * state.amplitudes().len());
    buf.extend_from_slice(&(state.n() as u32).to_le_bytes());
    for a in state.amplitudes() {
        buf.extend_from_slice(&a.re.to_le_bytes());
        buf.extend_from_slice(&a.im.to_le_bytes());
    }
    fs::File::create(path)?.write_all(&buf)?;
    Ok(())
}

pub fn read_state_dump(path: &Path) -> Result<StateVector> {
    let bytes = fs::read(path)?;
    let file = path.display().to_string();
    let bad = |offset: usize, m: &str| Error::Parse { file: file.clone(), offset, message: m.to_string() };
    let header: [u8; 4] = bytes.get(..4).and_then(|b| b.try_into().ok()).ok_or_else(|| bad(0, "missing header"))?;
    let n = u32::from_le_bytes(header) as usize;
    if n > STATE_DUMP_CAP {
        return Err(bad(0, "n exceeds the state dump cap"));
    }
    let expected = 4 + 16 * (1usize << n);
    if bytes.len() != expected {
        return Err(bad(bytes.len().min(expected), &format!("expected {expected} bytes, found {}", bytes.len())));
    }
    let f = |i: usize| f64::from_le_bytes(bytes[i..i + 8].try_into().expect("8 bytes"));
    let amps = (0..1usize << n).map(|k| Complex64::new(f(4 + 16 * k), f(12 + 16 * k))).collect();
    StateVector::from_amplitudes(amps)
}

/// Records JSON: the configuration that produced them plus every record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordsFile {
    pub version: String,
    pub config: EnsembleConfig,
    pub records: Vec<InstanceRecord>,
}

impl RecordsFile {
    pub fn new(config: EnsembleConfig, records: Vec<InstanceRecord>) -> Self {
        Self { version: env!("CARGO_PKG_VERSION").to_string(), config, records }
    }
}

/// The α values present in `records`, in first-seen order.
fn record_alphas(records: &[InstanceRecord]) -> Vec<f64> {
    let mut out: Vec<f64> = vec![];
    let seen = records.iter().flat_map(|r| {
        let sim = r.cdf.iter().flatten().map(|&(a, _)| a);
        let model = r.model.iter().flat_map(|m| m.cdf.iter().map(|&(a, _)| a));
        sim.chain(model).collect::<Vec<_>>()
    });
    for a in seen {
        if !out.contains(&a) {
            out.push(a);
        }
    }
    out
}

/// Flat per-record table; empty cells are absent values.
pub fn write_records_csv(path: &Path, records: &[InstanceRecord]) -> Result<()> {
    let alphas = record_alphas(records);
    let mut header: Vec<String> = [
        "label", "n", "p", "seed", "edges", "c_min", "c_max", "avg_degree", "r", "pr_cmin", "mean_cost", "t_fit",
        "tvd", "t_e", "s_qaoa", "t_b", "s_boltzmann", "s_fluc", "s_random", "s_random_std", "s_fluc_sampled",
        "r_exp", "pr_cmin_exp", "mean_cost_exp", "r_exp_fit", "pr_cmin_exp_fit",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    for a in &alphas {
        header.push(format!("cdf_{a}"));
        header.push(format!("cdf_exp_{a}"));
    }
    header.push("flags".into());
    header.push("error".into());
    let rows = records.iter().map(|r| {
        let m = r.model.as_ref();
        let mf = r.model_fit.as_ref();
        let mut row = vec![
            r.label.clone(),
            r.n.to_string(),
            r.p.to_string(),
            r.seed.to_string(),
            r.edges.to_string(),
            r.c_min.to_string(),
            r.c_max.to_string(),
            fmt_f64(r.avg_degree),
            fmt_opt(r.r),
            fmt_opt(r.pr_cmin),
            fmt_opt(r.mean_cost),
            fmt_temp(r.t_fit),
            fmt_opt(r.tvd),
            fmt_temp(r.t_e),
            fmt_opt(r.s_qaoa),
            fmt_temp(r.t_b),
            fmt_opt(r.s_boltzmann),
            fmt_opt(r.s_fluc),
            fmt_opt(r.s_random),
            fmt_opt(r.s_random_std),
            fmt_opt(r.s_fluc_sampled),
            fmt_opt(m.map(|m| m.r_exp)),
            fmt_opt(m.map(|m| m.pr_cmin_exp)),
            fmt_opt(m.map(|m| m.mean_cost)),
            fmt_opt(mf.map(|m| m.r_exp)),
            fmt_opt(mf.map(|m| m.pr_cmin_exp)),
        ];
        for &a in &alphas {
            row.push(fmt_opt(r.cdf_at(a)));
            row.push(fmt_opt(m.and_then(|m| m.cdf.iter().find(|x| x.0 == a).map(|x| x.1))));
        }
        row.push(r.flags.join("; "));
        row.push(r.error.clone().unwrap_or_default());
        row
    });
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    write_table(path, &header, rows)
}
