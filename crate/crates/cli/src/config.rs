//! Flat `key = value` configuration files and flag merging.
//!
//! Precedence is command-line flags, then the file, then the profile defaults.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::Args;
use qbl_core::ensemble::{EnsembleConfig, Mode, SizeSpec};

/// Keys accepted in configuration files.
pub const KEYS: &[&str] = &[
    "profile",
    "sizes",
    "layers",
    "edge_prob",
    "seed",
    "alphas",
    "mode",
    "thermo",
    "fit",
    "random_draws",
    "fluctuation_draws",
    "law_c",
    "law_d",
    "angle_table",
    "max_iters",
    "tol_grad",
    "tol_f",
    "keep_distributions",
];

pub fn parse_kv(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            bail!("line {}: expected key = value", i + 1);
        };
        let k = k.trim().to_string();
        if !KEYS.contains(&k.as_str()) {
            bail!("line {}: unknown key {k:?}", i + 1);
        }
        if out.insert(k.clone(), v.trim().to_string()).is_some() {
            bail!("line {}: duplicate key {k:?}", i + 1);
        }
    }
    Ok(out)
}

pub fn load_kv(path: &Path) -> Result<BTreeMap<String, String>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
    parse_kv(&text).with_context(|| format!("in config {}", path.display()))
}

/// `14:30,17:30` → sizes with counts; a bare `n` takes `default_count`.
pub fn parse_sizes(s: &str, default_count: usize) -> Result<Vec<SizeSpec>> {
    s.split(',')
        .map(|t| {
            let t = t.trim();
            let (n, count) = match t.split_once(':') {
                Some((n, c)) => (n.trim().parse()?, c.trim().parse()?),
                None => (t.parse()?, default_count),
            };
            Ok(SizeSpec { n, count })
        })
        .collect::<std::result::Result<_, std::num::ParseIntError>>()
        .with_context(|| format!("invalid sizes {s:?}"))
}

/// `2,4,6` or an inclusive range `2..12` or a stepped range `2..12:2`.
pub fn parse_layers(s: &str) -> Result<Vec<usize>> {
    let s = s.trim();
    if let Some((lo, rest)) = s.split_once("..") {
        let (hi, step) = rest.split_once(':').unwrap_or((rest, "1"));
        let (lo, hi, step): (usize, usize, usize) = (lo.trim().parse()?, hi.trim().parse()?, step.trim().parse()?);
        if step == 0 || lo > hi {
            bail!("invalid layer range {s:?}");
        }
        return Ok((lo..=hi).step_by(step).collect());
    }
    parse_list(s).with_context(|| format!("invalid layers {s:?}"))
}

fn parse_list<T: std::str::FromStr>(s: &str) -> Result<Vec<T>>
where
    T::Err: std::error::Error + Send + Sync + 'static,
{
    Ok(s.split(',').map(|t| t.trim().parse()).collect::<std::result::Result<_, _>>()?)
}

fn parse_bool(s: &str) -> Result<bool> {
    match s {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => bail!("invalid boolean {s:?}"),
    }
}

fn profile(name: &str) -> Result<EnsembleConfig> {
    match name {
        "desk" => Ok(EnsembleConfig::desk()),
        "full" => Ok(EnsembleConfig::full()),
        "default" => Ok(EnsembleConfig::default()),
        _ => bail!("unknown profile {name:?} (expected desk, full or default)"),
    }
}

/// Ensemble settings shared by `run`, `entropy` and `predict`.
#[derive(Debug, Clone, Default, Args)]
pub struct EnsembleArgs {
    /// Flat key = value configuration file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Base settings: desk, full or default.
    #[arg(long)]
    pub profile: Option<String>,
    /// Generated sizes as n:count pairs, e.g. 14:30,17:30.
    #[arg(long)]
    pub sizes: Option<String>,
    /// Layer counts, e.g. 2,4,6 or 2..12:2.
    #[arg(long)]
    pub layers: Option<String>,
    #[arg(long)]
    pub edge_prob: Option<f64>,
    /// Master seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// CDF thresholds α, comma separated.
    #[arg(long)]
    pub alphas: Option<String>,
    #[arg(long)]
    pub random_draws: Option<usize>,
    #[arg(long)]
    pub fluctuation_draws: Option<usize>,
    #[arg(long, allow_hyphen_values = true)]
    pub law_c: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub law_d: Option<f64>,
    /// Angle table JSON replacing the built-in table.
    #[arg(long)]
    pub angle_table: Option<PathBuf>,
    #[arg(long)]
    pub max_iters: Option<usize>,
}

impl EnsembleArgs {
    /// Resolves defaults, the config file and flags, in increasing priority.
    pub fn resolve(&self) -> Result<EnsembleConfig> {
        let file = match &self.config {
            Some(p) => load_kv(p)?,
            None => BTreeMap::new(),
        };
        let base = self.profile.as_deref().or(file.get("profile").map(String::as_str)).unwrap_or("default");
        let mut cfg = profile(base)?;
        for (k, v) in &file {
            apply(&mut cfg, k, v).with_context(|| format!("config key {k}"))?;
        }
        let flags: [(&str, Option<String>); 11] = [
            ("sizes", self.sizes.clone()),
            ("layers", self.layers.clone()),
            ("edge_prob", self.edge_prob.map(|v| v.to_string())),
            ("seed", self.seed.map(|v| v.to_string())),
            ("alphas", self.alphas.clone()),
            ("random_draws", self.random_draws.map(|v| v.to_string())),
            ("fluctuation_draws", self.fluctuation_draws.map(|v| v.to_string())),
            ("law_c", self.law_c.map(|v| v.to_string())),
            ("law_d", self.law_d.map(|v| v.to_string())),
            ("angle_table", self.angle_table.as_ref().map(|p| p.display().to_string())),
            ("max_iters", self.max_iters.map(|v| v.to_string())),
        ];
        for (k, v) in flags {
            if let Some(v) = v {
                apply(&mut cfg, k, &v).with_context(|| format!("--{}", k.replace('_', "-")))?;
            }
        }
        Ok(cfg)
    }
}

fn apply(cfg: &mut EnsembleConfig, key: &str, v: &str) -> Result<()> {
    match key {
        "profile" => {}
        "sizes" => cfg.sizes = parse_sizes(v, 1)?,
        "layers" => cfg.layers = parse_layers(v)?,
        "edge_prob" => cfg.edge_prob = v.parse()?,
        "seed" => cfg.master_seed = v.parse()?,
        "alphas" => cfg.alphas = parse_list(v)?,
        "mode" => {
            cfg.mode = match v {
                "exact" => Mode::Exact,
                "prediction_only" | "predict-only" => Mode::PredictionOnly,
                _ => bail!("invalid mode {v:?}"),
            }
        }
        "thermo" => cfg.thermo = parse_bool(v)?,
        "fit" => cfg.fit = parse_bool(v)?,
        "random_draws" => cfg.random_draws = v.parse()?,
        "fluctuation_draws" => cfg.fluctuation_draws = v.parse()?,
        "law_c" => cfg.law.c = v.parse()?,
        "law_d" => cfg.law.d = v.parse()?,
        "angle_table" => cfg.angle_table = Some(PathBuf::from(v)),
        "max_iters" => cfg.optimizer.max_iters = v.parse()?,
        "tol_grad" => cfg.optimizer.tol_grad = v.parse()?,
        "tol_f" => cfg.optimizer.tol_f = v.parse()?,
        "keep_distributions" => cfg.keep_distributions = parse_bool(v)?,
        _ => bail!("unknown key {key:?}"),
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kv_parsing() {
        let kv = parse_kv("# comment\nlayers = 2,4\n\nseed=7 # trailing\n").unwrap();
        assert_eq!(kv["layers"], "2,4");
        assert_eq!(kv["seed"], "7");
        assert!(parse_kv("bogus = 1").is_err());
        assert!(parse_kv("seed").is_err());
        assert!(parse_kv("seed = 1\nseed = 2").is_err());
    }

    #[test]
    fn ranges_and_sizes() {
        assert_eq!(parse_layers("2..12:2").unwrap(), vec![2, 4, 6, 8, 10, 12]);
        assert_eq!(parse_layers("1..3").unwrap(), vec![1, 2, 3]);
        assert_eq!(parse_layers("3,5").unwrap(), vec![3, 5]);
        assert!(parse_layers("5..2").is_err());
        let s = parse_sizes("14:30, 17", 2).unwrap();
        assert_eq!(s, vec![SizeSpec { n: 14, count: 30 }, SizeSpec { n: 17, count: 2 }]);
        assert!(parse_sizes("x:1", 1).is_err());
    }

    #[test]
    fn flags_override_file_override_profile() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cfg.txt");
        std::fs::write(&path, "profile = desk\nseed = 5\nlayers = 2,4\nthermo = false\n").unwrap();
        let args = EnsembleArgs { config: Some(path), layers: Some("6".into()), ..Default::default() };
        let cfg = args.resolve().unwrap();
        assert_eq!(cfg.sizes, EnsembleConfig::desk().sizes);
        assert_eq!(cfg.master_seed, 5);
        assert_eq!(cfg.layers, vec![6]);
        assert!(!cfg.thermo);
    }
}
