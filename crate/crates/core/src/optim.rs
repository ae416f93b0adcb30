//! Small dense optimizers: BFGS with Armijo backtracking, and a
//! Levenberg–Marquardt solver for few-parameter least squares.

use crate::error::{Error, Result};

/// BFGS settings.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct BfgsOptions {
    /// Stop when `‖∇f‖ < tol_grad`.
    pub tol_grad: f64,
    /// Stop when `|Δf| / max(|f|, 1) < tol_f`.
    pub tol_f: f64,
    pub max_iters: usize,
    /// Armijo sufficient-decrease constant.
    pub armijo: f64,
}

impl Default for BfgsOptions {
    fn default() -> Self {
        Self { tol_grad: 1e-6, tol_f: 1e-10, max_iters: 500, armijo: 1e-4 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BfgsResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub grad_norm: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Minimizes `f` given a closure returning `(f(x), ∇f(x))`.
///
/// Keeps a dense inverse-Hessian approximation. The update is skipped when the
/// curvature condition `sᵀy > 0` fails, and the approximation is reset to the
/// identity when the search direction stops being a descent direction.
pub fn bfgs<F>(mut fg: F, x0: &[f64], opts: &BfgsOptions) -> Result<BfgsResult>
where
    F: FnMut(&[f64]) -> Result<(f64, Vec<f64>)>,
{
    let dim = x0.len();
    let mut x = x0.to_vec();
    let (mut f, mut g) = fg(&x)?;
    let mut evaluations = 1;
    if !f.is_finite() || g.iter().any(|v| !v.is_finite()) {
        return Err(Error::NumericalFailure { message: "non-finite value at start".into(), last_good: x });
    }
    let identity = |h: &mut Vec<f64>| {
        h.iter_mut().for_each(|v| *v = 0.0);
        (0..dim).for_each(|i| h[i * dim + i] = 1.0);
    };
    let mut h = vec![0.0; dim * dim];
    identity(&mut h);
    let mut first_step = true;

    for iter in 0..opts.max_iters {
        let gn = norm(&g);
        if gn < opts.tol_grad {
            return Ok(BfgsResult { x, value: f, grad_norm: gn, iterations: iter, evaluations, converged: true });
        }
        let mut d: Vec<f64> = (0..dim).map(|i| -dot(&h[i * dim..(i + 1) * dim], &g)).collect();
        let mut slope = dot(&d, &g);
        if slope >= 0.0 {
            identity(&mut h);
            d = g.iter().map(|v| -v).collect();
            slope = -gn * gn;
        }
        // Cap the very first step, when `h` carries no curvature information.
        let mut step = if first_step { (1.0 / gn).min(1.0) } else { 1.0 };
        let (x_new, f_new, g_new) = loop {
            let trial: Vec<f64> = x.iter().zip(&d).map(|(xi, di)| xi + step * di).collect();
            let (ft, gt) = fg(&trial)?;
            evaluations += 1;
            let finite = ft.is_finite() && gt.iter().all(|v| v.is_finite());
            if finite && ft <= f + opts.armijo * step * slope {
                break (trial, ft, gt);
            }
            step *= 0.5;
            if step < 1e-20 {
                if !finite {
                    return Err(Error::NumericalFailure {
                        message: "non-finite value during line search".into(),
                        last_good: x,
                    });
                }
                // No decrease is possible along d: we are at numerical precision.
                return Ok(BfgsResult { x, value: f, grad_norm: gn, iterations: iter, evaluations, converged: true });
            }
        };
        first_step = false;
        let s: Vec<f64> = x_new.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        let df = (f - f_new).abs();
        let scale = f.abs().max(f_new.abs()).max(1.0);
        x = x_new;
        f = f_new;
        g = g_new;
        if df / scale < opts.tol_f {
            let gn = norm(&g);
            return Ok(BfgsResult { x, value: f, grad_norm: gn, iterations: iter + 1, evaluations, converged: true });
        }
        if sy > 1e-12 * norm(&s) * norm(&y) {
            if iter == 0 {
                // Rescale the initial approximation before the first update.
                let yy = dot(&y, &y);
                h.iter_mut().for_each(|v| *v *= sy / yy);
            }
            update_inverse_hessian(&mut h, &s, &y, sy);
        }
    }
    let gn = norm(&g);
    Ok(BfgsResult { x, value: f, grad_norm: gn, iterations: opts.max_iters, evaluations, converged: false })
}

/// `H ← (I − ρ s yᵀ) H (I − ρ y sᵀ) + ρ s sᵀ`, `ρ = 1 / sᵀy`.
fn update_inverse_hessian(h: &mut [f64], s: &[f64], y: &[f64], sy: f64) {
    let dim = s.len();
    let rho = 1.0 / sy;
    let hy: Vec<f64> = (0..dim).map(|i| dot(&h[i * dim..(i + 1) * dim], y)).collect();
    let yhy = dot(y, &hy);
    for i in 0..dim {
        for j in 0..dim {
            h[i * dim + j] += -rho * (hy[i] * s[j] + s[i] * hy[j]) + (rho * rho * yhy + rho) * s[i] * s[j];
        }
    }
}

/// Result of a Levenberg–Marquardt fit.
#[derive(Debug, Clone, PartialEq)]
pub struct LmResult {
    pub params: Vec<f64>,
    pub residual_norm: f64,
    /// `(JᵀJ)⁻¹ σ²` with `σ² = SSR / (m − k)`, row-major.
    pub covariance: Vec<f64>,
    pub iterations: usize,
}

impl LmResult {
    pub fn standard_errors(&self) -> Vec<f64> {
        let k = self.params.len();
        (0..k).map(|i| self.covariance[i * k + i].max(0.0).sqrt()).collect()
    }
}

/// Solves `A x = b` for a small symmetric positive definite `A` by Cholesky.
pub(crate) fn solve_spd(a: &[f64], b: &[f64]) -> Option<Vec<f64>> {
    let k = b.len();
    let mut l = vec![0.0; k * k];
    for i in 0..k {
        for j in 0..=i {
            let mut s = a[i * k + j];
            for m in 0..j {
                s -= l[i * k + m] * l[j * k + m];
            }
            if i == j {
                if s <= 0.0 {
                    return None;
                }
                l[i * k + i] = s.sqrt();
            } else {
                l[i * k + j] = s / l[j * k + j];
            }
        }
    }
    let mut z = vec![0.0; k];
    for i in 0..k {
        let s: f64 = (0..i).map(|m| l[i * k + m] * z[m]).sum();
        z[i] = (b[i] - s) / l[i * k + i];
    }
    let mut x = vec![0.0; k];
    for i in (0..k).rev() {
        let s: f64 = ((i + 1)..k).map(|m| l[m * k + i] * x[m]).sum();
        x[i] = (z[i] - s) / l[i * k + i];
    }
    Some(x)
}

pub(crate) fn invert_spd(a: &[f64], k: usize) -> Option<Vec<f64>> {
    let mut inv = vec![0.0; k * k];
    for c in 0..k {
        let e: Vec<f64> = (0..k).map(|i| if i == c { 1.0 } else { 0.0 }).collect();
        let col = solve_spd(a, &e)?;
        for r in 0..k {
            inv[r * k + c] = col[r];
        }
    }
    Some(inv)
}

/// Levenberg–Marquardt for `min Σ r_i(θ)²`. `model` returns residuals and the
/// row-major Jacobian (`m × k`).
pub fn levenberg_marquardt<F>(mut model: F, p0: &[f64], max_iters: usize) -> Result<LmResult>
where
    F: FnMut(&[f64]) -> (Vec<f64>, Vec<f64>),
{
    let k = p0.len();
    let mut p = p0.to_vec();
    let (mut r, mut jac) = model(&p);
    let m = r.len();
    let mut ssr = dot(&r, &r);
    let mut lambda = 1e-3;
    let mut iterations = 0;
    for it in 0..max_iters {
        iterations = it + 1;
        let (jtj, jtr) = normal_equations(&jac, &r, m, k);
        let grad_inf = jtr.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        if grad_inf < 1e-30 || ssr < 1e-300 {
            break;
        }
        let mut improved = false;
        for _ in 0..60 {
            let mut a = jtj.clone();
            for i in 0..k {
                a[i * k + i] += lambda * jtj[i * k + i].max(1e-300);
            }
            let Some(delta) = solve_spd(&a, &jtr.iter().map(|v| -v).collect::<Vec<_>>()) else {
                lambda *= 10.0;
                continue;
            };
            let trial: Vec<f64> = p.iter().zip(&delta).map(|(a, b)| a + b).collect();
            let (rt, jt) = model(&trial);
            let st = dot(&rt, &rt);
            if st.is_finite() && st <= ssr {
                let rel_step = delta
                    .iter()
                    .zip(&trial)
                    .fold(0.0f64, |acc, (d, x)| acc.max(d.abs() / x.abs().max(1e-12)));
                let rel_drop = (ssr - st) / ssr.max(1e-300);
                p = trial;
                r = rt;
                jac = jt;
                ssr = st;
                lambda = (lambda / 10.0).max(1e-15);
                improved = true;
                if rel_step < 1e-15 || rel_drop < 1e-16 {
                    return finish(p, r, jac, m, k, iterations);
                }
                break;
            }
            lambda *= 10.0;
        }
        if !improved {
            break;
        }
    }
    finish(p, r, jac, m, k, iterations)
}

fn normal_equations(jac: &[f64], r: &[f64], m: usize, k: usize) -> (Vec<f64>, Vec<f64>) {
    let mut jtj = vec![0.0; k * k];
    let mut jtr = vec![0.0; k];
    for row in 0..m {
        let jr = &jac[row * k..(row + 1) * k];
        for i in 0..k {
            jtr[i] += jr[i] * r[row];
            for j in 0..k {
                jtj[i * k + j] += jr[i] * jr[j];
            }
        }
    }
    (jtj, jtr)
}

fn finish(p: Vec<f64>, r: Vec<f64>, jac: Vec<f64>, m: usize, k: usize, iterations: usize) -> Result<LmResult> {
    let (jtj, _) = normal_equations(&jac, &r, m, k);
    let ssr = dot(&r, &r);
    let inv = invert_spd(&jtj, k).ok_or_else(|| Error::FitFailure {
        message: "singular Jacobian".into(),
        best: p.clone(),
    })?;
    let dof = m.saturating_sub(k).max(1) as f64;
    let sigma2 = ssr / dof;
    Ok(LmResult {
        params: p,
        residual_norm: ssr.sqrt(),
        covariance: inv.iter().map(|v| v * sigma2).collect(),
        iterations,
    })
}
