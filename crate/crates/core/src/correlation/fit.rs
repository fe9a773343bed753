use std::f64::consts::{E, PI};
use std::fmt::Write as _;

use nalgebra::{Matrix4, Vector4};
use serde::Serialize;

use super::correlogram::Correlogram;
use crate::error::{Error, Result};
use crate::physics::{background_prefactor, g2_atom, g2_model, g2_model_gradient, G2ModelParams};

/// Quantities held fixed during a correlogram fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FixedParams {
    /// Background-to-signal rate ratio R_b/R_s.
    pub bg_to_signal: f64,
    pub drive_y: f64,
    /// γ_tot in angular units (1/s).
    pub gamma_total: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    /// Lags with |τ| at or below this are not fitted (s).
    pub exclusion: f64,
    /// Largest |τ| fitted (s).
    pub fit_span: f64,
    pub max_iterations: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self { exclusion: 50e-9, fit_span: 5e-6, max_iterations: 200 }
    }
}

/// Best-fit transit parameters of a correlogram.
#[derive(Debug, Clone, PartialEq)]
pub struct G2FitResult {
    /// Full parameter set at the optimum, including the fixed values.
    pub params: G2ModelParams,
    pub fixed: FixedParams,
    /// Standard errors of (N̄, T, β, Ω).
    pub std_errors: [f64; 4],
    /// Covariance of (N̄, T, β, Ω) from the Jacobian at the optimum.
    pub covariance: [[f64; 4]; 4],
    pub chi2: f64,
    pub reduced_chi2: f64,
    pub points: usize,
    pub excluded_region: f64,
    pub fit_span: f64,
    pub iterations: usize,
    pub initial: G2ModelParams,
}

impl G2FitResult {
    pub fn n_bar(&self) -> f64 {
        self.params.n_bar
    }

    pub fn transit_t(&self) -> f64 {
        self.params.transit_t
    }

    /// Oscillation damping time 1/β (s).
    pub fn damping_time(&self) -> f64 {
        1.0 / self.params.damping_beta
    }

    pub fn damping_time_error(&self) -> f64 {
        self.std_errors[2] / self.params.damping_beta.powi(2)
    }

    /// Standing-wave oscillation frequency Ω/2π (Hz).
    pub fn omega_over_2pi(&self) -> f64 {
        self.params.standing_wave_omega.abs() / (2.0 * PI)
    }

    pub fn omega_over_2pi_error(&self) -> f64 {
        self.std_errors[3] / (2.0 * PI)
    }

    /// Report lines `parameter,estimate,std_error` followed by the fit
    /// settings.
    pub fn report(&self) -> String {
        let mut out = String::from("parameter,estimate,std_error\n");
        let rows = [
            ("n_bar", self.n_bar(), self.std_errors[0]),
            ("transit_t_s", self.transit_t(), self.std_errors[1]),
            ("damping_beta_per_s", self.params.damping_beta, self.std_errors[2]),
            ("damping_time_s", self.damping_time(), self.damping_time_error()),
            ("omega_over_2pi_hz", self.omega_over_2pi(), self.omega_over_2pi_error()),
        ];
        for (name, v, e) in rows {
            let _ = writeln!(out, "{name},{v:e},{e:e}");
        }
        let _ = writeln!(out, "reduced_chi2,{},", self.reduced_chi2);
        let _ = writeln!(out, "points,{},", self.points);
        let _ = writeln!(out, "excluded_region_s,{:e},", self.excluded_region);
        let _ = writeln!(out, "fit_span_s,{:e},", self.fit_span);
        let _ = writeln!(out, "bg_to_signal,{},", self.fixed.bg_to_signal);
        let _ = writeln!(out, "drive_y,{},", self.fixed.drive_y);
        let _ = writeln!(out, "gamma_total_per_s,{:e},", self.fixed.gamma_total);
        out
    }
}

struct FitData {
    tau: Vec<f64>,
    y: Vec<f64>,
    sigma: Vec<f64>,
}

fn select(corr: &Correlogram, opts: &FitOptions) -> Result<FitData> {
    if !(opts.exclusion >= 0.0 && opts.fit_span > opts.exclusion) {
        return Err(Error::invalid(
            "fit_span",
            format!("need 0 <= exclusion < fit_span, got {} and {}", opts.exclusion, opts.fit_span),
        ));
    }
    let mut d = FitData { tau: Vec::new(), y: Vec::new(), sigma: Vec::new() };
    for i in 0..corr.len() {
        let t = corr.tau(i).abs();
        if t > opts.exclusion && t <= opts.fit_span {
            d.tau.push(corr.tau(i));
            d.y.push(corr.g2[i]);
            d.sigma.push(corr.errors[i]);
        }
    }
    if d.tau.len() < 50 {
        return Err(Error::invalid(
            "fit_span",
            format!("only {} correlogram bins between exclusion and fit span, need 50", d.tau.len()),
        ));
    }
    Ok(d)
}

fn with_free(fixed: &FixedParams, x: &[f64; 4]) -> G2ModelParams {
    G2ModelParams {
        n_bar: x[0],
        transit_t: x[1],
        damping_beta: x[2],
        standing_wave_omega: x[3],
        bg_to_signal: fixed.bg_to_signal,
        drive_y: fixed.drive_y,
        gamma_total: fixed.gamma_total,
    }
}

fn admissible(x: &[f64; 4]) -> bool {
    x.iter().all(|v| v.is_finite()) && x[0] > 0.0 && x[1] > 0.0 && x[2] >= 0.0
}

fn chi2_of(d: &FitData, p: &G2ModelParams) -> f64 {
    d.tau.iter().zip(&d.y).zip(&d.sigma).map(|((&t, &y), &s)| ((y - g2_model(t, p)) / s).powi(2)).sum()
}

/// Normal equations JᵀJ and Jᵀr in parameters scaled by `scale`.
fn normal_equations(d: &FitData, p: &G2ModelParams, scale: &[f64; 4]) -> (Matrix4<f64>, Vector4<f64>, f64) {
    let mut a = Matrix4::zeros();
    let mut g = Vector4::zeros();
    let mut chi2 = 0.0;
    for ((&t, &y), &s) in d.tau.iter().zip(&d.y).zip(&d.sigma) {
        let r = (y - g2_model(t, p)) / s;
        let grad = g2_model_gradient(t, p);
        let j = Vector4::from_fn(|k, _| grad[k] * scale[k] / s);
        a += j * j.transpose();
        g += j * r;
        chi2 += r * r;
    }
    (a, g, chi2)
}

/// χ² over the fitted bins and its analytic gradient with respect to
/// (N̄, T, β, Ω).
pub fn chi2_and_gradient(
    corr: &Correlogram,
    fixed: &FixedParams,
    opts: &FitOptions,
    params: &G2ModelParams,
) -> Result<(f64, [f64; 4])> {
    let d = select(corr, opts)?;
    let p = with_free(fixed, &[params.n_bar, params.transit_t, params.damping_beta, params.standing_wave_omega]);
    let (_, g, chi2) = normal_equations(&d, &p, &[1.0; 4]);
    Ok((chi2, [-2.0 * g[0], -2.0 * g[1], -2.0 * g[2], -2.0 * g[3]]))
}

/// Symmetrised correlogram over positive lags inside the fit range.
fn folded(corr: &Correlogram, opts: &FitOptions) -> FitData {
    let n = corr.bins_per_side();
    let mut d = FitData { tau: Vec::new(), y: Vec::new(), sigma: Vec::new() };
    for j in 0..n {
        let t = corr.tau(n + j);
        if t > opts.exclusion && t <= opts.fit_span {
            d.tau.push(t);
            d.y.push(0.5 * (corr.g2[n + j] + corr.g2[n - 1 - j]));
            d.sigma.push(0.5 * corr.errors[n + j].hypot(corr.errors[n - 1 - j]));
        }
    }
    d
}

/// Weighted significance of the mean excess over 1 in the inner microsecond.
fn excess_significance(f: &FitData) -> f64 {
    let limit = f.tau[0] + 1e-6;
    let (mut num, mut den) = (0.0, 0.0);
    for ((&t, &y), &s) in f.tau.iter().zip(&f.y).zip(&f.sigma) {
        if t <= limit {
            num += (y - 1.0) / (s * s);
            den += 1.0 / (s * s);
        }
    }
    num / den.sqrt()
}

/// Starting values derived from the shape of the correlogram.
pub fn initial_guess(corr: &Correlogram, fixed: &FixedParams, opts: &FitOptions) -> Result<G2ModelParams> {
    select(corr, opts)?;
    let f = folded(corr, opts);
    if excess_significance(&f) < 5.0 {
        return Err(Error::DegenerateFit("no significant correlation above 1 near zero lag".into()));
    }
    let pref = background_prefactor(fixed.bg_to_signal);

    let edge = f.tau.len().min(5);
    let tau_edge = f.tau[..edge].iter().sum::<f64>() / edge as f64;
    let a0 = f.y[..edge].iter().sum::<f64>() / edge as f64 - 1.0;
    let n_bar = pref * 2.0 * g2_atom(tau_edge, fixed.drive_y, fixed.gamma_total) / a0;

    let half = (0.5e-6f64).min(0.1 * opts.fit_span);
    let pedestal = |t: f64| {
        let (mut sum, mut n) = (0.0, 0usize);
        for (&u, &y) in f.tau.iter().zip(&f.y) {
            if (u - t).abs() <= half {
                sum += y;
                n += 1;
            }
        }
        if n == 0 { 1.0 } else { sum / n as f64 }
    };
    let t_peak = f.tau[0] + half;
    let peak = pedestal(t_peak);
    let level = 1.0 + (peak - 1.0) / E;
    let transit_t = f
        .tau
        .iter()
        .copied()
        .filter(|&t| t > t_peak)
        .find(|&t| pedestal(t) < level)
        .unwrap_or(opts.fit_span);

    let residual: Vec<f64> = f.tau.iter().zip(&f.y).map(|(&t, &y)| y - pedestal(t.max(t_peak))).collect();
    let mut best = (0.0, 2.0 * PI * 1e6);
    for step in 0..=198 {
        let w = 2.0 * PI * (0.1e6 + 0.05e6 * step as f64);
        let (mut re, mut im) = (0.0, 0.0);
        for (&t, &r) in f.tau.iter().zip(&residual) {
            let (s, c) = (w * t).sin_cos();
            re += r * c;
            im += r * s;
        }
        let power = re * re + im * im;
        if power > best.0 {
            best = (power, w);
        }
    }

    Ok(with_free(fixed, &[n_bar, transit_t, 1.0 / transit_t, best.1]))
}

struct Minimum {
    x: [f64; 4],
    chi2: f64,
    iterations: usize,
}

fn levenberg_marquardt(d: &FitData, fixed: &FixedParams, start: [f64; 4], max_iter: usize) -> Result<Minimum> {
    let scale = start.map(|v| if v.abs() > 0.0 { v.abs() } else { 1.0 });
    let mut x = start;
    let mut lambda = 1e-3;
    let (mut a, mut g, mut chi2) = normal_equations(d, &with_free(fixed, &x), &scale);
    for iter in 1..=max_iter {
        let mut improved = false;
        while lambda < 1e12 {
            let mut damped = a;
            for k in 0..4 {
                damped[(k, k)] += lambda * a[(k, k)].max(1e-12);
            }
            let Some(delta) = damped.lu().solve(&g) else {
                lambda *= 10.0;
                continue;
            };
            let trial: [f64; 4] = std::array::from_fn(|k| x[k] + delta[k] * scale[k]);
            if !admissible(&trial) {
                lambda *= 10.0;
                continue;
            }
            let trial_chi2 = chi2_of(d, &with_free(fixed, &trial));
            if trial_chi2 < chi2 {
                let step_size = delta.amax();
                let drop = (chi2 - trial_chi2) / chi2.max(1e-300);
                x = trial;
                (a, g, chi2) = normal_equations(d, &with_free(fixed, &x), &scale);
                lambda = (lambda * 0.1).max(1e-12);
                improved = true;
                if drop < 1e-10 && step_size < 1e-7 {
                    return Ok(Minimum { x, chi2, iterations: iter });
                }
                break;
            }
            lambda *= 10.0;
        }
        if !improved {
            return Ok(Minimum { x, chi2, iterations: iter });
        }
    }
    Err(Error::NonConvergence { iterations: max_iter, last: x.to_vec() })
}

/// Inverse of JᵀJ at `p`. A parameter the data do not constrain at all
/// (for example Ω once β has damped the oscillation away) gets infinite
/// variance instead of making the whole matrix singular.
fn covariance(d: &FitData, p: &G2ModelParams) -> Result<Matrix4<f64>> {
    let x = [p.n_bar, p.transit_t, p.damping_beta, p.standing_wave_omega];
    let scale = x.map(|v| if v.abs() > 0.0 { v.abs() } else { 1.0 });
    let (a, _, _) = normal_equations(d, p, &scale);
    let max_diag = (0..4).map(|k| a[(k, k)]).fold(0.0, f64::max);
    let free: Vec<usize> = (0..4).filter(|&k| a[(k, k)] > 1e-12 * max_diag).collect();
    let n = free.len();
    let sub = nalgebra::DMatrix::from_fn(n, n, |i, j| a[(free[i], free[j])]);
    let inv = sub
        .try_inverse()
        .ok_or_else(|| Error::DegenerateFit("parameters are not independently constrained".into()))?;
    let mut cov = Matrix4::zeros();
    for k in 0..4 {
        if !free.contains(&k) {
            cov[(k, k)] = f64::INFINITY;
        }
    }
    for (i, &fi) in free.iter().enumerate() {
        for (j, &fj) in free.iter().enumerate() {
            cov[(fi, fj)] = inv[(i, j)] * scale[fi] * scale[fj];
        }
    }
    Ok(cov)
}

/// Fits the transit model to a correlogram with R_b/R_s, Y and γ_tot held
/// fixed.
///
/// The damped standing-wave term admits several local minima, so the fit is
/// started from a few damping rates around the shape-derived guess and the
/// lowest χ² is kept.
pub fn fit_g2(corr: &Correlogram, fixed: FixedParams, opts: &FitOptions) -> Result<G2FitResult> {
    let d = select(corr, opts)?;
    let init = initial_guess(corr, &fixed, opts)?;
    let mut best: Option<Minimum> = None;
    let mut failure = None;
    for factor in [1.0, 3.0, 10.0, 30.0] {
        let start = [init.n_bar, init.transit_t, init.damping_beta * factor, init.standing_wave_omega];
        match levenberg_marquardt(&d, &fixed, start, opts.max_iterations) {
            Ok(m) if best.as_ref().is_none_or(|b| m.chi2 < b.chi2) => best = Some(m),
            Ok(_) => {}
            Err(e) => failure = Some(e),
        }
    }
    let Some(m) = best else {
        return Err(failure.unwrap_or_else(|| Error::DegenerateFit("no fit start succeeded".into())));
    };

    let p = with_free(&fixed, &m.x);
    let cov = covariance(&d, &p)?;
    let std_errors: [f64; 4] = std::array::from_fn(|k| cov[(k, k)].max(0.0).sqrt());
    if !(p.n_bar / std_errors[0] >= 3.0) {
        return Err(Error::DegenerateFit(format!(
            "correlation amplitude 1/N̄ is consistent with zero (N̄ = {} ± {})",
            p.n_bar, std_errors[0]
        )));
    }
    let dof = d.tau.len() - 4;
    Ok(G2FitResult {
        params: G2ModelParams { standing_wave_omega: p.standing_wave_omega.abs(), ..p },
        fixed,
        std_errors,
        covariance: std::array::from_fn(|i| std::array::from_fn(|j| cov[(i, j)])),
        chi2: m.chi2,
        reduced_chi2: m.chi2 / dof as f64,
        points: d.tau.len(),
        excluded_region: opts.exclusion,
        fit_span: opts.fit_span,
        iterations: m.iterations,
        initial: init,
    })
}
