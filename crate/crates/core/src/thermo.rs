//! Entropy comparisons at matched mean cost: the maximum-entropy (Boltzmann)
//! state, Gaussian fluctuations about it, and random constrained states.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Exp1, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::boltzmann::{moments, BoltzmannModel, Temperature};
use crate::distribution::CostDistribution;
use crate::error::{Error, Result};
use crate::graph::derive_seed;
use crate::projection::project_simplex_slice;
use crate::simulator::StateVector;
use crate::spectrum::{CostSpectrum, CostTable};

/// Euler–Mascheroni constant.
pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Entropy lost to complex Gaussian fluctuations, `(1 − γ_EM) / ln 2` bits.
pub const FLUCTUATION_DEFICIT: f64 = (1.0 - EULER_GAMMA) / std::f64::consts::LN_2;

pub const DEFAULT_RANDOM_DRAWS: usize = 20;

/// Temperature whose model mean cost equals `target_mean`.
///
/// Only the positive-temperature branch `C_min < target ≤ ⟨C⟩_∞` is supported;
/// the uniform mean itself maps to [`Temperature::Infinite`].
pub fn solve_boltzmann_temperature(spectrum: &CostSpectrum, target_mean: f64) -> Result<Temperature> {
    let c_min = spectrum.c_min() as f64;
    let (_, mean_inf, _) = moments(spectrum, 0.0);
    let scale = c_min.abs().max(1.0);
    if !(target_mean > c_min) || target_mean > mean_inf + 1e-12 * scale {
        return Err(Error::OutOfRange { target: target_mean, lo: c_min, hi: mean_inf });
    }
    if (target_mean - mean_inf).abs() <= 1e-12 * scale {
        return Ok(Temperature::Infinite);
    }
    let mean = |b: f64| moments(spectrum, b).1;
    let (mut lo, mut hi) = (0.0, 1.0 / scale);
    while mean(hi) > target_mean {
        lo = hi;
        hi *= 2.0;
        if hi > 1e300 {
            return Err(Error::OutOfRange { target: target_mean, lo: c_min, hi: mean_inf });
        }
    }
    let tol = 1e-9 * scale;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mean(mid) > target_mean {
            lo = mid;
        } else {
            hi = mid;
        }
        if (hi - lo) <= 1e-6 * hi {
            break;
        }
    }
    // Newton on β using d⟨C⟩/dβ = −Var C, falling back to bisection outside the bracket.
    let mut beta = 0.5 * (lo + hi);
    for _ in 0..100 {
        let (_, m, var) = moments(spectrum, beta);
        let err = m - target_mean;
        if err.abs() <= 0.01 * tol {
            break;
        }
        if err > 0.0 {
            lo = beta;
        } else {
            hi = beta;
        }
        let next = if var > 0.0 { beta + err / var } else { f64::NAN };
        beta = if next > lo && next < hi { next } else { 0.5 * (lo + hi) };
    }
    let (_, m, _) = moments(spectrum, beta);
    if (m - target_mean).abs() > tol {
        return Err(Error::NumericalFailure {
            message: format!("temperature solve missed target by {}", m - target_mean),
            last_good: vec![beta],
        });
    }
    Temperature::from_beta(beta)
}

/// Shannon entropy of the model's assignment distribution, in bits.
pub fn boltzmann_entropy(spectrum: &CostSpectrum, t: Temperature) -> Result<f64> {
    let Temperature::Finite(temp) = t else {
        return Ok(spectrum.n() as f64);
    };
    if !(temp.is_finite() && temp > 0.0) {
        return Err(Error::InvalidTemperature(temp));
    }
    // S = β(⟨C⟩ − C_min) + ln Σ ρ e^{−β(C − C_min)}, which avoids cancelling two large terms.
    let beta = 1.0 / temp;
    let c0 = spectrum.c_min();
    let (lnz, mean, _) = moments(spectrum, beta);
    let lnz_shifted = lnz + beta * c0 as f64;
    Ok((beta * (mean - c0 as f64) + lnz_shifted) / std::f64::consts::LN_2)
}

pub fn fluctuation_entropy(s_boltzmann: f64) -> f64 {
    s_boltzmann - FLUCTUATION_DEFICIT
}

/// `ψ(z) ∝ g̃_z √(e^{−C(z)/T}/Z)` with `g̃ = (g + i g′)/√2`, renormalized.
pub fn sample_fluctuation_state(
    spectrum: &CostSpectrum,
    table: &CostTable,
    t: Temperature,
    seed: u64,
) -> Result<StateVector> {
    if table.n() != spectrum.n() {
        return Err(Error::InvalidInput("cost table and spectrum sizes differ".into()));
    }
    let model = BoltzmannModel::new(spectrum, t)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let amps: Vec<Complex64> = table
        .costs()
        .iter()
        .map(|&c| {
            let g: f64 = rng.sample(StandardNormal);
            let h: f64 = rng.sample(StandardNormal);
            Complex64::new(g, h) * (model.basis_probability(i64::from(c)) / 2.0).sqrt()
        })
        .collect();
    let mut psi = StateVector::from_amplitudes(amps)?;
    psi.normalize();
    Ok(psi)
}

/// Dirichlet(1, …, 1) start over the cost classes, projected onto the
/// distributions with mean `target_mean`.
pub fn random_constrained_distribution(
    spectrum: &CostSpectrum,
    target_mean: f64,
    seed: u64,
) -> Result<CostDistribution> {
    let (lo, hi) = (spectrum.c_min() as f64, spectrum.c_max() as f64);
    if !(lo..=hi).contains(&target_mean) {
        return Err(Error::OutOfRange { target: target_mean, lo, hi });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let costs: Vec<f64> = spectrum.support().map(|c| c as f64).collect();
    let w: Vec<f64> = (0..costs.len()).map(|_| rng.sample::<f64, _>(Exp1)).collect();
    let s: f64 = w.iter().sum();
    let start: Vec<f64> = w.iter().map(|v| v / s).collect();
    let x = project_simplex_slice(&costs, &start, target_mean)?;
    Ok(CostDistribution::from_pairs(spectrum.support().zip(x)))
}

/// Splits each class mass over its `ρ(C)` assignments with uniform random
/// weights and returns the Shannon entropy of the result, in bits.
///
/// Each class is streamed twice from its own derived seed (once for the weight
/// sum, once for the entropy), so memory stays constant in `ρ(C)`.
pub fn random_state_entropy(spectrum: &CostSpectrum, class_masses: &CostDistribution, seed: u64) -> Result<f64> {
    if !class_masses.is_normalized(1e-8) {
        return Err(Error::InvalidInput(format!("class masses sum to {}", class_masses.total())));
    }
    for c in class_masses.support() {
        if spectrum.rho(c) == 0 && class_masses.mass(c) > 0.0 {
            return Err(Error::Inconsistent(format!("mass at cost {c} outside the spectrum")));
        }
    }
    let classes: Vec<(usize, i64, u64)> =
        spectrum.density().iter().enumerate().map(|(k, (&c, &r))| (k, c, r)).collect();
    let parts: Vec<f64> = classes
        .par_iter()
        .map(|&(k, c, rho)| {
            let m = class_masses.mass(c);
            if m <= 0.0 {
                return 0.0;
            }
            let s_seed = derive_seed(seed, &[k as u64]);
            let mut rng = ChaCha8Rng::seed_from_u64(s_seed);
            let sum: f64 = (0..rho).map(|_| rng.random::<f64>()).sum();
            let mut rng = ChaCha8Rng::seed_from_u64(s_seed);
            let ulnu: f64 = (0..rho)
                .map(|_| {
                    let u: f64 = rng.random();
                    if u > 0.0 { u * u.ln() } else { 0.0 }
                })
                .sum();
            -(m / sum) * ulnu - m * (m / sum).ln()
        })
        .collect();
    Ok(parts.iter().sum::<f64>() / std::f64::consts::LN_2)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThermoReport {
    pub label: String,
    pub target_mean: f64,
    pub s_qaoa: f64,
    pub t_b: Temperature,
    pub s_boltzmann: f64,
    pub s_fluc: f64,
    pub s_random: f64,
    pub s_random_std: f64,
    pub draws: usize,
}

/// Full comparison for one state with mean cost `target_mean` and entropy
/// `s_qaoa` bits. Random draw `k` uses seed `derive_seed(seed, [k])`.
pub fn thermo_report(
    label: &str,
    spectrum: &CostSpectrum,
    target_mean: f64,
    s_qaoa: f64,
    draws: usize,
    seed: u64,
) -> Result<ThermoReport> {
    let t_b = solve_boltzmann_temperature(spectrum, target_mean)?;
    let s_boltzmann = boltzmann_entropy(spectrum, t_b)?;
    let samples: Vec<f64> = (0..draws)
        .into_par_iter()
        .map(|k| {
            let ds = derive_seed(seed, &[k as u64]);
            let masses = random_constrained_distribution(spectrum, target_mean, ds)?;
            random_state_entropy(spectrum, &masses, derive_seed(ds, &[1]))
        })
        .collect::<Result<_>>()?;
    let (s_random, s_random_std) = mean_std(&samples);
    Ok(ThermoReport {
        label: label.to_string(),
        target_mean,
        s_qaoa,
        t_b,
        s_boltzmann,
        s_fluc: fluctuation_entropy(s_boltzmann),
        s_random,
        s_random_std,
        draws,
    })
}

/// Mean and sample standard deviation (zero for fewer than two values).
pub(crate) fn mean_std(v: &[f64]) -> (f64, f64) {
    if v.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let m = v.iter().sum::<f64>() / v.len() as f64;
    if v.len() < 2 {
        return (m, 0.0);
    }
    let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64;
    (m, var.sqrt())
}
