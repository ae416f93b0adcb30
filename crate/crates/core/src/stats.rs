//! Quantiles, the two regression laws and their inversions.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optim::{invert_spd, levenberg_marquardt};

/// Linear-interpolation quantiles (`h = (len − 1) q`) of the sorted sample.
pub fn quantiles(values: &[f64], qs: &[f64]) -> Result<Vec<f64>> {
    if values.is_empty() {
        return Err(Error::InvalidInput("quantiles of an empty sample".into()));
    }
    if let Some(q) = qs.iter().find(|q| !(0.0..=1.0).contains(*q)) {
        return Err(Error::InvalidInput(format!("quantile {q} outside [0, 1]")));
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    Ok(qs
        .iter()
        .map(|&q| {
            let h = (v.len() - 1) as f64 * q;
            let lo = h.floor() as usize;
            let hi = h.ceil() as usize;
            v[lo] + (h - lo as f64) * (v[hi] - v[lo])
        })
        .collect())
}

pub fn median(values: &[f64]) -> Result<f64> {
    Ok(quantiles(values, &[0.5])?[0])
}

/// Median with the 0.1 and 0.9 quantiles.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub q10: f64,
    pub median: f64,
    pub q90: f64,
    pub count: usize,
}

impl Summary {
    pub fn of(values: &[f64]) -> Result<Self> {
        let q = quantiles(values, &[0.1, 0.5, 0.9])?;
        Ok(Self { q10: q[0], median: q[1], q90: q[2], count: values.len() })
    }
}

/// `Pr(C_min) ≈ a·exp(−b n / p^{2/3})`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingFitAB {
    pub a: f64,
    pub b: f64,
    pub a_err: f64,
    pub b_err: f64,
    pub residual_norm: f64,
}

impl ScalingFitAB {
    pub fn predict(&self, n: usize, p: usize) -> f64 {
        self.a * (-self.b * scaling_regressor(n, p)).exp()
    }
}

/// `n / p^{2/3}`.
pub fn scaling_regressor(n: usize, p: usize) -> f64 {
    n as f64 / (p as f64).powf(2.0 / 3.0)
}

/// Fits `a`, `b` to median optimal-solution probabilities keyed by `(n, p)`.
pub fn fit_pcmin_scaling(medians: &BTreeMap<(usize, usize), f64>) -> Result<ScalingFitAB> {
    if medians.len() < 3 {
        return Err(Error::InvalidInput(format!("need at least 3 points, got {}", medians.len())));
    }
    if let Some((k, v)) = medians.iter().find(|(_, v)| !(**v > 0.0)) {
        return Err(Error::InvalidInput(format!("non-positive median {v} at (n, p) = {k:?}")));
    }
    let xs: Vec<f64> = medians.keys().map(|&(n, p)| scaling_regressor(n, p)).collect();
    let ys: Vec<f64> = medians.values().copied().collect();
    let logs: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let start = ols(&xs, &logs).ok_or_else(|| Error::FitFailure {
        message: "log-linear start is singular".into(),
        best: vec![],
    })?;
    let p0 = [start.intercept.exp(), -start.slope];
    let res = levenberg_marquardt(
        |p| {
            let mut r = Vec::with_capacity(xs.len());
            let mut j = Vec::with_capacity(2 * xs.len());
            for (x, y) in xs.iter().zip(&ys) {
                let e = (-p[1] * x).exp();
                r.push(p[0] * e - y);
                j.push(e);
                j.push(-p[0] * x * e);
            }
            (r, j)
        },
        &p0,
        500,
    )?;
    let se = res.standard_errors();
    Ok(ScalingFitAB { a: res.params[0], b: res.params[1], a_err: se[0], b_err: se[1], residual_norm: res.residual_norm })
}

/// Layers needed for `Pr(C_min) = target` under the fitted law:
/// `p = (b n / ln(a / target))^{3/2}`.
pub fn layers_for_target(n: usize, target: f64, fit: &ScalingFitAB) -> Result<f64> {
    if !(target > 0.0) {
        return Err(Error::InvalidInput(format!("target probability must be positive, got {target}")));
    }
    if target >= fit.a {
        return Err(Error::UnattainableTarget { target, ceiling: fit.a });
    }
    Ok((fit.b * n as f64 / (fit.a / target).ln()).powf(1.5))
}

/// `T = c·x + d` with `x = C_min / (n√p)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TemperatureLawCD {
    pub c: f64,
    pub d: f64,
    pub c_err: f64,
    pub d_err: f64,
    pub residual_norm: f64,
}

impl TemperatureLawCD {
    pub fn coefficients(&self) -> crate::boltzmann::LawCoefficients {
        crate::boltzmann::LawCoefficients { c: self.c, d: self.d }
    }
}

pub(crate) struct Ols {
    pub slope: f64,
    pub intercept: f64,
    pub slope_err: f64,
    pub intercept_err: f64,
    pub ssr: f64,
}

/// Ordinary least squares `y = slope·x + intercept`, computed on centred data.
pub(crate) fn ols(x: &[f64], y: &[f64]) -> Option<Ols> {
    let m = x.len() as f64;
    let mx = x.iter().sum::<f64>() / m;
    let my = y.iter().sum::<f64>() / m;
    let sxx: f64 = x.iter().map(|v| (v - mx) * (v - mx)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let scale: f64 = x.iter().map(|v| v * v).sum();
    if !(sxx > 1e-24 * scale) {
        return None;
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ssr: f64 = x.iter().zip(y).map(|(a, b)| (b - slope * a - intercept).powi(2)).sum();
    let sigma2 = if x.len() > 2 { ssr / (m - 2.0) } else { 0.0 };
    // (XᵀX)⁻¹ for the uncentred design [x, 1].
    let sx: f64 = x.iter().sum();
    let sxx_raw: f64 = x.iter().map(|v| v * v).sum();
    let inv = invert_spd(&[sxx_raw, sx, sx, m], 2)?;
    Some(Ols {
        slope,
        intercept,
        slope_err: (inv[0] * sigma2).sqrt(),
        intercept_err: (inv[3] * sigma2).sqrt(),
        ssr,
    })
}

/// OLS of fitted temperatures on `x = C_min/(n√p)`. Each point is `(x, T)`.
pub fn fit_temperature_law_points(points: &[(f64, f64)]) -> Result<TemperatureLawCD> {
    if points.len() < 3 {
        return Err(Error::InvalidInput(format!("need at least 3 records, got {}", points.len())));
    }
    let (x, y): (Vec<f64>, Vec<f64>) = points.iter().copied().unzip();
    let fit = ols(&x, &y).ok_or_else(|| Error::FitFailure {
        message: "all records share the same regressor".into(),
        best: vec![],
    })?;
    Ok(TemperatureLawCD {
        c: fit.slope,
        d: fit.intercept,
        c_err: fit.slope_err,
        d_err: fit.intercept_err,
        residual_norm: fit.ssr.sqrt(),
    })
}

/// `ε_R = |1 − Q_exp/Q|` (`None` when `Q = 0`) and `ε_D = |Q_exp − Q|`.
pub fn relative_and_difference_error(q: f64, q_exp: f64) -> (Option<f64>, f64) {
    let d = (q_exp - q).abs();
    let r = (q != 0.0).then(|| (1.0 - q_exp / q).abs());
    (r, d)
}
