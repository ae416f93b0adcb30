//! Exponential cost-distribution model `Pr(C) = ρ(C) e^{-C/T} / Z` and its fit
//! to QAOA output.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::distribution::{cumulative, tvd, CostDistribution};
use crate::error::{Error, Result};
use crate::simulator::approximation_ratio;
use crate::spectrum::CostSpectrum;

/// A positive temperature, or the explicit infinite-temperature limit.
///
/// Serialized as a number, or as the string `"inf"`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Temperature {
    Finite(f64),
    Infinite,
}

impl Temperature {
    pub fn finite(t: f64) -> Result<Self> {
        if t.is_finite() && t > 0.0 {
            Ok(Self::Finite(t))
        } else if t == f64::INFINITY {
            Ok(Self::Infinite)
        } else {
            Err(Error::InvalidTemperature(t))
        }
    }

    /// From an inverse temperature `β ≥ 0`; `β = 0` is infinite.
    pub fn from_beta(beta: f64) -> Result<Self> {
        if beta == 0.0 {
            Ok(Self::Infinite)
        } else if beta.is_finite() && beta > 0.0 {
            Ok(Self::Finite(1.0 / beta))
        } else {
            Err(Error::InvalidTemperature(1.0 / beta))
        }
    }

    pub fn beta(self) -> f64 {
        match self {
            Self::Finite(t) => 1.0 / t,
            Self::Infinite => 0.0,
        }
    }

    /// The temperature as a float, `f64::INFINITY` for the limit.
    pub fn value(self) -> f64 {
        match self {
            Self::Finite(t) => t,
            Self::Infinite => f64::INFINITY,
        }
    }

    pub fn is_infinite(self) -> bool {
        matches!(self, Self::Infinite)
    }

    fn validate(self) -> Result<Self> {
        match self {
            Self::Finite(t) if !(t.is_finite() && t > 0.0) => Err(Error::InvalidTemperature(t)),
            t => Ok(t),
        }
    }
}

impl fmt::Display for Temperature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Finite(t) => write!(f, "{t}"),
            Self::Infinite => f.write_str("inf"),
        }
    }
}

impl Serialize for Temperature {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Self::Finite(t) => s.serialize_f64(*t),
            Self::Infinite => s.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for Temperature {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Str(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(t) => Temperature::finite(t).map_err(serde::de::Error::custom),
            Raw::Str(s) if s == "inf" => Ok(Temperature::Infinite),
            Raw::Str(s) => Err(serde::de::Error::custom(format!("bad temperature {s:?}"))),
        }
    }
}

/// `(ln Z, ⟨C⟩, Var C)` at inverse temperature `β`, from exponents shifted by `C_min`.
pub(crate) fn moments(spectrum: &CostSpectrum, beta: f64) -> (f64, f64, f64) {
    let c0 = spectrum.c_min();
    let mut z = 0.0;
    let mut s1 = 0.0;
    let mut s2 = 0.0;
    for (&c, &r) in spectrum.density() {
        let dc = (c - c0) as f64;
        let w = r as f64 * (-beta * dc).exp();
        z += w;
        s1 += w * dc;
        s2 += w * dc * dc;
    }
    let m = s1 / z;
    (z.ln() - beta * c0 as f64, c0 as f64 + m, (s2 / z - m * m).max(0.0))
}

/// `ln Σ_C ρ(C) e^{-C/T}`.
pub fn log_partition(spectrum: &CostSpectrum, t: Temperature) -> Result<f64> {
    Ok(match t.validate()? {
        Temperature::Infinite => spectrum.n() as f64 * std::f64::consts::LN_2,
        Temperature::Finite(t) => moments(spectrum, 1.0 / t).0,
    })
}

/// The model bound to one spectrum and temperature.
#[derive(Debug, Clone)]
pub struct BoltzmannModel<'a> {
    spectrum: &'a CostSpectrum,
    temperature: Temperature,
    log_partition: f64,
}

impl<'a> BoltzmannModel<'a> {
    pub fn new(spectrum: &'a CostSpectrum, t: Temperature) -> Result<Self> {
        let log_partition = log_partition(spectrum, t)?;
        Ok(Self { spectrum, temperature: t, log_partition })
    }

    pub fn temperature(&self) -> Temperature {
        self.temperature
    }

    pub fn log_partition(&self) -> f64 {
        self.log_partition
    }

    pub fn spectrum(&self) -> &CostSpectrum {
        self.spectrum
    }

    /// `e^{-C/T} / Z`, the probability of any single assignment with cost `C`.
    pub fn basis_probability(&self, c: i64) -> f64 {
        match self.temperature {
            Temperature::Infinite => 1.0 / self.spectrum.dimension(),
            Temperature::Finite(t) => (-(c as f64) / t - self.log_partition).exp(),
        }
    }

    pub fn mass(&self, c: i64) -> f64 {
        let r = self.spectrum.rho(c);
        if r == 0 {
            return 0.0;
        }
        match self.temperature {
            Temperature::Infinite => r as f64 / self.spectrum.dimension(),
            Temperature::Finite(t) => ((r as f64).ln() - c as f64 / t - self.log_partition).exp(),
        }
    }

    pub fn distribution(&self) -> CostDistribution {
        CostDistribution::from_pairs(self.spectrum.support().map(|c| (c, self.mass(c))))
    }

    pub fn mean_cost(&self) -> f64 {
        match self.temperature {
            Temperature::Infinite => self.distribution().mean(),
            Temperature::Finite(t) => moments(self.spectrum, 1.0 / t).1,
        }
    }
}

pub fn model_cost_distribution(spectrum: &CostSpectrum, t: Temperature) -> Result<CostDistribution> {
    Ok(BoltzmannModel::new(spectrum, t)?.distribution())
}

/// `mass(C) / ρ(C)` per cost.
pub fn mean_basis_probability(dist: &CostDistribution, spectrum: &CostSpectrum) -> Result<BTreeMap<i64, f64>> {
    let mut out = BTreeMap::new();
    for (c, m) in dist.iter() {
        let r = spectrum.rho(c);
        if r == 0 {
            if m > 0.0 {
                return Err(Error::Inconsistent(format!("mass {m} at cost {c} where ρ = 0")));
            }
            continue;
        }
        out.insert(c, m / r as f64);
    }
    Ok(out)
}

/// Options for [`fit_temperature_with`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    /// Fit per-assignment probabilities `mass/ρ` instead of class masses.
    pub weighted: bool,
    pub max_iters: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self { weighted: false, max_iters: 200 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TemperatureFit {
    pub temperature: Temperature,
    /// Sum of squared residuals at the optimum.
    pub ssr: f64,
    pub tvd: f64,
    pub converged: bool,
}

/// Least-squares residual and its first two derivatives in `β`.
struct Objective<'a> {
    cost: Vec<f64>,
    rho: Vec<f64>,
    exact: Vec<f64>,
    weight: Vec<f64>,
    spectrum: &'a CostSpectrum,
}

impl<'a> Objective<'a> {
    fn new(exact: &CostDistribution, spectrum: &'a CostSpectrum, weighted: bool) -> Self {
        let mut o = Self { cost: vec![], rho: vec![], exact: vec![], weight: vec![], spectrum };
        for (&c, &r) in spectrum.density() {
            o.cost.push(c as f64);
            o.rho.push(r as f64);
            o.exact.push(exact.mass(c));
            o.weight.push(if weighted { 1.0 / (r as f64 * r as f64) } else { 1.0 });
        }
        o
    }

    fn masses(&self, beta: f64) -> (Vec<f64>, f64, f64) {
        if beta == 0.0 {
            let dim = self.spectrum.dimension();
            let m: Vec<f64> = self.rho.iter().map(|r| r / dim).collect();
            let (_, mean, var) = moments(self.spectrum, 0.0);
            return (m, mean, var);
        }
        let (lnz, mean, var) = moments(self.spectrum, beta);
        let m = self.rho.iter().zip(&self.cost).map(|(r, c)| (r.ln() - beta * c - lnz).exp()).collect();
        (m, mean, var)
    }

    fn value(&self, beta: f64) -> f64 {
        let (m, _, _) = self.masses(beta);
        m.iter().zip(&self.exact).zip(&self.weight).map(|((a, b), w)| w * (a - b) * (a - b)).sum()
    }

    /// `(f, f', f'')` with respect to `β`.
    fn derivatives(&self, beta: f64) -> (f64, f64, f64) {
        let (m, mean, var) = self.masses(beta);
        let (mut f, mut d1, mut d2) = (0.0, 0.0, 0.0);
        for i in 0..m.len() {
            let r = m[i] - self.exact[i];
            let dm = m[i] * (mean - self.cost[i]);
            let ddm = m[i] * ((self.cost[i] - mean).powi(2) - var);
            f += self.weight[i] * r * r;
            d1 += 2.0 * self.weight[i] * r * dm;
            d2 += 2.0 * self.weight[i] * (dm * dm + r * ddm);
        }
        (f, d1, d2)
    }
}

/// Unweighted least-squares fit of the model temperature to `exact`.
pub fn fit_temperature(exact: &CostDistribution, spectrum: &CostSpectrum) -> Result<TemperatureFit> {
    fit_temperature_with(exact, spectrum, &FitOptions::default())
}

/// Log-grid bracket in `T`, golden-section refinement in `ln T`, then Newton
/// polishing on `β = 1/T`.
pub fn fit_temperature_with(
    exact: &CostDistribution,
    spectrum: &CostSpectrum,
    opts: &FitOptions,
) -> Result<TemperatureFit> {
    if !exact.is_normalized(1e-8) {
        return Err(Error::InvalidInput(format!("distribution sums to {}", exact.total())));
    }
    let obj = Objective::new(exact, spectrum, opts.weighted);
    let unit = (spectrum.c_min().abs() as f64 / spectrum.n() as f64).max(1e-12);
    let f_at = |u: f64| obj.value((-u).exp());

    // Grid in u = ln T.
    let (mut lo, mut hi) = ((1e-3 * unit).ln(), (1e3 * unit).ln());
    let points = 61;
    let mut best_u;
    let mut expansions = 0;
    loop {
        let grid: Vec<f64> = (0..points).map(|i| lo + (hi - lo) * i as f64 / (points - 1) as f64).collect();
        let vals: Vec<f64> = grid.iter().map(|&u| f_at(u)).collect();
        let k = (0..points).fold(0, |b, i| if vals[i] < vals[b] { i } else { b });
        best_u = grid[k];
        let width = hi - lo;
        if k == 0 && expansions < 8 && lo > -700.0 {
            hi = grid[1];
            lo -= width;
        } else if k == points - 1 && expansions < 8 && hi < 700.0 {
            lo = grid[points - 2];
            hi += width;
        } else {
            let a = grid[k.saturating_sub(1)];
            let b = grid[(k + 1).min(points - 1)];
            lo = a;
            hi = b;
            break;
        }
        expansions += 1;
    }

    // Golden section on [lo, hi].
    let phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (lo, hi);
    let mut x1 = b - phi * (b - a);
    let mut x2 = a + phi * (b - a);
    let (mut f1, mut f2) = (f_at(x1), f_at(x2));
    let mut iters = 0;
    while (b - a) > 1e-9 && iters < opts.max_iters {
        if f1 < f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - phi * (b - a);
            f1 = f_at(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + phi * (b - a);
            f2 = f_at(x2);
        }
        iters += 1;
    }
    let mut u = if f1 < f2 { x1 } else { x2 };
    if f_at(best_u) < f_at(u) {
        u = best_u;
    }

    // Newton on β.
    let mut beta = (-u).exp();
    let (mut f, mut g, mut h) = obj.derivatives(beta);
    let mut converged = false;
    for _ in 0..opts.max_iters {
        if g == 0.0 {
            converged = true;
            break;
        }
        if !(h > 0.0) {
            break;
        }
        let step = g / h;
        let mut trial = beta - step;
        let mut accepted = false;
        for _ in 0..30 {
            if trial > 0.0 {
                let (ft, gt, ht) = obj.derivatives(trial);
                if ft <= f {
                    beta = trial;
                    f = ft;
                    g = gt;
                    h = ht;
                    accepted = true;
                    break;
                }
            }
            trial = 0.5 * (trial + beta);
        }
        if !accepted || step.abs() <= 1e-15 * beta {
            converged = true;
            break;
        }
    }
    if !f.is_finite() || !beta.is_finite() {
        return Err(Error::FitFailure { message: "temperature fit diverged".into(), best: vec![1.0 / beta] });
    }
    // Golden-section convergence in ln T is itself a valid stopping rule.
    converged |= (b - a) <= 1e-9;

    let f_inf = obj.value(0.0);
    let temperature = if f_inf <= f { Temperature::Infinite } else { Temperature::Finite(1.0 / beta) };
    let ssr = if temperature.is_infinite() { f_inf } else { f };
    let model = model_cost_distribution(spectrum, temperature)?;
    Ok(TemperatureFit { temperature, ssr, tvd: tvd(exact, &model), converged })
}

/// Coefficients of the temperature law `T_e = c·C_min/(n√p) + d`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LawCoefficients {
    pub c: f64,
    pub d: f64,
}

impl Default for LawCoefficients {
    fn default() -> Self {
        Self { c: -2.738, d: -0.255 }
    }
}

/// `x = C_min / (n √p)`, the regressor of the temperature law.
pub fn law_regressor(c_min: i64, n: usize, p: usize) -> f64 {
    c_min as f64 / (n as f64 * (p as f64).sqrt())
}

pub fn heuristic_temperature(c_min: i64, n: usize, p: usize, coeffs: LawCoefficients) -> Result<Temperature> {
    if n == 0 || p == 0 {
        return Err(Error::InvalidInput(format!("temperature law needs n, p >= 1 (n = {n}, p = {p})")));
    }
    if c_min >= 0 {
        return Err(Error::InvalidInput(format!("temperature law needs c_min < 0, got {c_min}")));
    }
    let t = coeffs.c * law_regressor(c_min, n, p) + coeffs.d;
    if !(t > 0.0) || !t.is_finite() {
        return Err(Error::DegenerateTemperature { value: t, c_min, n, p });
    }
    Ok(Temperature::Finite(t))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelMetrics {
    pub mean_cost: f64,
    pub r_exp: f64,
    pub pr_cmin_exp: f64,
    /// `(α, Pr(C ≤ C_α))` for each requested `α`.
    pub cdf: Vec<(f64, f64)>,
}

/// `C_α = (1 − α) C_min + α C_max`.
pub fn cost_threshold(spectrum: &CostSpectrum, alpha: f64) -> f64 {
    (1.0 - alpha) * spectrum.c_min() as f64 + alpha * spectrum.c_max() as f64
}

pub fn model_metrics(spectrum: &CostSpectrum, t: Temperature, alphas: &[f64]) -> Result<ModelMetrics> {
    if let Some(&a) = alphas.iter().find(|a| !(0.0..=1.0).contains(*a)) {
        return Err(Error::InvalidInput(format!("alpha {a} outside [0, 1]")));
    }
    let model = BoltzmannModel::new(spectrum, t)?;
    let dist = model.distribution();
    let mean_cost = dist.mean();
    Ok(ModelMetrics {
        mean_cost,
        r_exp: approximation_ratio(mean_cost, spectrum.c_min(), spectrum.c_max())?,
        pr_cmin_exp: dist.mass(spectrum.c_min()),
        cdf: alphas.iter().map(|&a| (a, cumulative(&dist, cost_threshold(spectrum, a)))).collect(),
    })
}
