use nalgebra::Vector3;

use super::params::{AtomParams, CavityParams, Polarization, TransitionEntry};
use crate::error::{Error, Result};

/// Coupling of an atom at `pos` to the TEM00 standing-wave mode,
/// g0 cos(kz) exp(-(x²+y²)/w0²). The cavity axis is z.
pub fn mode_coupling(pos: &Vector3<f64>, cavity: &CavityParams, g0: f64) -> f64 {
    g0 * (cavity.wavenumber() * pos.z).cos() * (-(pos.x * pos.x + pos.y * pos.y) / cavity.waist.powi(2)).exp()
}

/// Squared coupling relative to g0², i.e. cos²(kz) exp(-2(x²+y²)/w0²).
pub fn relative_coupling_sq(pos: &Vector3<f64>, cavity: &CavityParams) -> f64 {
    let c = (cavity.wavenumber() * pos.z).cos();
    c * c * (-2.0 * (pos.x * pos.x + pos.y * pos.y) / cavity.waist.powi(2)).exp()
}

/// Single-atom cooperativity C1 = g0²/(κ γ_tot) and saturation photon
/// number n0 = γ_tot²/(3 g0²) for a transition with coupling `g0_over_2pi` (Hz).
pub fn derived_transition_params(
    g0_over_2pi: f64,
    cavity: &CavityParams,
    atom: &AtomParams,
) -> Result<(f64, f64)> {
    if !(g0_over_2pi.is_finite() && g0_over_2pi > 0.0) {
        return Err(Error::Degenerate(format!(
            "saturation photon number needs g0 > 0, got {g0_over_2pi}"
        )));
    }
    // 2π factors cancel in both ratios.
    let g2 = g0_over_2pi * g0_over_2pi;
    let gamma = atom.gamma_over_2pi;
    let c1 = g2 / (cavity.kappa_over_2pi * gamma);
    let n0 = gamma * gamma / (3.0 * g2);
    Ok((c1, n0))
}

/// F=3 → F'=4 transitions of the ⁸⁵Rb D2 line for π and σ⁺ drive, with the
/// tabulated couplings, cooperativities and saturation photon numbers.
pub fn transition_table() -> Vec<TransitionEntry> {
    let row = |gm, em, pol, cg: f64, g0_mhz: f64, c1, n0| TransitionEntry {
        ground_f: 3,
        ground_m: gm,
        excited_f: 4,
        excited_m: em,
        polarization: pol,
        cg_coefficient: cg,
        g0_over_2pi: g0_mhz * 1e6,
        c1,
        n0,
    };
    vec![
        row(0, 0, Polarization::Pi, -(2.0f64 / 7.0).sqrt(), 1.5, 0.12, 5.3),
        row(3, 3, Polarization::Pi, -(1.0f64 / 8.0).sqrt(), 0.99, 0.053, 12.0),
        row(0, 1, Polarization::SigmaPlus, (5.0f64 / 28.0).sqrt(), 1.2, 0.075, 8.5),
        row(3, 4, Polarization::SigmaPlus, (1.0f64 / 2.0).sqrt(), 2.0, 0.21, 3.0),
        row(-3, -2, Polarization::SigmaPlus, (1.0f64 / 56.0).sqrt(), 0.38, 0.0075, 85.0),
    ]
}

/// Squared Clebsch-Gordan coefficient of the π transition |F=3,m> → |F'=4,m>.
pub fn pi_cg_squared(m: i32) -> f64 {
    (16 - m * m) as f64 / 56.0
}

/// Squared π coupling of sublevel `m` relative to the m=0 reference transition.
pub fn pi_relative_strength(m: i32) -> f64 {
    pi_cg_squared(m) / pi_cg_squared(0)
}
