//! Intensity autocorrelation models.

use super::params::G2ModelParams;

/// sinh(x)/x, accurate near zero.
fn sinhc(x: f64) -> f64 {
    if x.abs() < 1e-4 {
        1.0 + x * x / 6.0
    } else {
        x.sinh() / x
    }
}

fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-4 {
        1.0 - x * x / 6.0
    } else {
        x.sin() / x
    }
}

/// Single-atom resonance-fluorescence correlation
/// 1 − e^(−3γτ/4)(cosh δτ + (3γ/4δ) sinh δτ), δ = (γ/4)√(1−8Y).
///
/// `gamma_total` is the angular decay rate (1/s). For Y > 1/8, δ is
/// imaginary and the hyperbolic functions turn into circular ones. Negative
/// lags are folded onto |τ| (the process is stationary).
pub fn g2_atom(tau: f64, drive_y: f64, gamma_total: f64) -> f64 {
    let tau = tau.abs();
    let a = 0.75 * gamma_total;
    let at = a * tau;
    let disc = 1.0 - 8.0 * drive_y;
    let delta = 0.25 * gamma_total * disc.abs().sqrt();
    let dt = delta * tau;
    let envelope = if disc >= 0.0 {
        if dt < 1.0 {
            (-at).exp() * (dt.cosh() + at * sinhc(dt))
        } else {
            // e^{-aτ}cosh and e^{-aτ}sinh without overflow; δ < a always
            let plus = ((delta - a) * tau).exp();
            let minus = (-(delta + a) * tau).exp();
            0.5 * (plus + minus) + 0.5 * (a / delta) * (plus - minus)
        }
    } else {
        (-at).exp() * (dt.cos() + at * sinc(dt))
    };
    1.0 - envelope
}

/// Least upper bound of [`g2_atom`] over τ ≥ 0: 1 in the overdamped regime,
/// 1 + e^(−3γπ/(4|δ|)) once the response rings.
pub fn g2_atom_max(drive_y: f64, gamma_total: f64) -> f64 {
    let disc = 1.0 - 8.0 * drive_y;
    if disc >= 0.0 {
        1.0
    } else {
        let a = 0.75 * gamma_total;
        let delta = 0.25 * gamma_total * (-disc).sqrt();
        1.0 + (-a * std::f64::consts::PI / delta).exp()
    }
}

/// Transit window f(τ) = [cos(Ωτ)e^(−β|τ|) + 1] e^(−(τ/T)²).
pub fn window(tau: f64, p: &G2ModelParams) -> f64 {
    let t = tau.abs();
    ((p.standing_wave_omega * t).cos() * (-p.damping_beta * t).exp() + 1.0)
        * (-(t / p.transit_t).powi(2)).exp()
}

/// Hook for the coherent beating term between fields of different atoms or
/// between atoms and background. It is not modelled and contributes zero.
pub fn beating_term(_tau: f64, _p: &G2ModelParams) -> f64 {
    0.0
}

/// Background dilution factor 1/(1 + R_b/R_s)².
pub fn background_prefactor(bg_to_signal: f64) -> f64 {
    1.0 / (1.0 + bg_to_signal).powi(2)
}

/// Full correlation model 1 + f(τ) g²_A(τ) / [N̄ (1 + R_b/R_s)²].
pub fn g2_model(tau: f64, p: &G2ModelParams) -> f64 {
    let tau = tau.abs();
    1.0 + background_prefactor(p.bg_to_signal) * window(tau, p) * g2_atom(tau, p.drive_y, p.gamma_total)
        / p.n_bar
        + beating_term(tau, p)
}

/// Partial derivatives of [`g2_model`] with respect to (N̄, T, β, Ω).
pub fn g2_model_gradient(tau: f64, p: &G2ModelParams) -> [f64; 4] {
    let t = tau.abs();
    let scale = background_prefactor(p.bg_to_signal) * g2_atom(t, p.drive_y, p.gamma_total) / p.n_bar;
    let gauss = (-(t / p.transit_t).powi(2)).exp();
    let damp = (-p.damping_beta * t).exp();
    let (sin, cos) = (p.standing_wave_omega * t).sin_cos();
    let f = (cos * damp + 1.0) * gauss;
    [
        -scale * f / p.n_bar,
        scale * f * 2.0 * t * t / p.transit_t.powi(3),
        -scale * t * cos * damp * gauss,
        -scale * t * sin * damp * gauss,
    ]
}
