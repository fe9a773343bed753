use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::units;

/// Reduced Planck constant (J s).
pub const HBAR: f64 = 1.054_571_817e-34;
/// Bohr magneton (J/T).
pub const BOHR_MAGNETON: f64 = 9.274_010_078_3e-24;

pub(crate) fn require_positive(field: &str, value: f64) -> Result<()> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(field, format!("must be finite and > 0, got {value}")))
    }
}

pub(crate) fn require_non_negative(field: &str, value: f64) -> Result<()> {
    if value.is_finite() && value >= 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(field, format!("must be finite and >= 0, got {value}")))
    }
}

/// Fabry-Perot cavity supporting the two degenerate polarization modes.
///
/// Frequencies are ordinary frequencies (Hz); conversion to angular units
/// happens inside the formulas that need it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CavityParams {
    #[serde(with = "units::frequency")]
    pub kappa_over_2pi: f64,
    #[serde(with = "units::length")]
    pub waist: f64,
    #[serde(with = "units::length")]
    pub wavelength: f64,
    #[serde(with = "units::length")]
    pub mirror_separation: f64,
    pub finesse: f64,
    pub input_transmission_ppm: f64,
    pub output_transmission_ppm: f64,
}

impl Default for CavityParams {
    fn default() -> Self {
        Self {
            kappa_over_2pi: 3.2e6,
            waist: 56e-6,
            wavelength: 780e-9,
            mirror_separation: 2.2e-3,
            finesse: 11_000.0,
            input_transmission_ppm: 15.0,
            output_transmission_ppm: 300.0,
        }
    }
}

impl CavityParams {
    pub fn validate(&self) -> Result<()> {
        require_positive("cavity.kappa_over_2pi", self.kappa_over_2pi)?;
        require_positive("cavity.waist", self.waist)?;
        require_positive("cavity.wavelength", self.wavelength)?;
        require_positive("cavity.mirror_separation", self.mirror_separation)?;
        require_positive("cavity.finesse", self.finesse)?;
        require_positive("cavity.input_transmission_ppm", self.input_transmission_ppm)?;
        require_positive("cavity.output_transmission_ppm", self.output_transmission_ppm)?;
        if self.waist < 10.0 * self.wavelength {
            return Err(Error::invalid(
                "cavity.waist",
                "waist must be much larger than the wavelength (paraxial mode)",
            ));
        }
        Ok(())
    }

    /// Wavenumber k = 2π/λ (rad/m).
    pub fn wavenumber(&self) -> f64 {
        2.0 * PI / self.wavelength
    }

    /// Field decay rate κ in angular units (1/s).
    pub fn kappa(&self) -> f64 {
        2.0 * PI * self.kappa_over_2pi
    }
}

/// Three-level atom: a driven decay channel γ and an undriven one Γ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AtomParams {
    /// Total decay rate γ_tot/2π (Hz).
    #[serde(with = "units::frequency")]
    pub gamma_over_2pi: f64,
    /// Decay into the driven-mode channel, γ/2π (Hz).
    #[serde(with = "units::frequency")]
    pub gamma_partial: f64,
    /// Decay into the undriven-mode channel, Γ/2π (Hz).
    #[serde(with = "units::frequency")]
    pub big_gamma_partial: f64,
}

impl Default for AtomParams {
    fn default() -> Self {
        Self {
            gamma_over_2pi: 6.0e6,
            gamma_partial: 3.0e6,
            big_gamma_partial: 3.0e6,
        }
    }
}

impl AtomParams {
    pub fn validate(&self) -> Result<()> {
        require_positive("atom.gamma_over_2pi", self.gamma_over_2pi)?;
        require_positive("atom.gamma_partial", self.gamma_partial)?;
        require_positive("atom.big_gamma_partial", self.big_gamma_partial)?;
        let sum = self.gamma_partial + self.big_gamma_partial;
        if ((sum - self.gamma_over_2pi) / self.gamma_over_2pi).abs() > 1e-9 {
            return Err(Error::invalid(
                "atom.gamma_over_2pi",
                format!("partial rates sum to {sum} Hz, not the total {}", self.gamma_over_2pi),
            ));
        }
        Ok(())
    }

    /// γ_tot in angular units (1/s).
    pub fn gamma_total(&self) -> f64 {
        2.0 * PI * self.gamma_over_2pi
    }

    /// Excited-state lifetime 1/γ_tot (s).
    pub fn lifetime(&self) -> f64 {
        1.0 / self.gamma_total()
    }

    /// Undriven-mode coupling from the driven one, using g/G = γ/Γ.
    pub fn undriven_coupling(&self, g0: f64) -> f64 {
        g0 * self.big_gamma_partial / self.gamma_partial
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Polarization {
    Pi,
    SigmaPlus,
    SigmaMinus,
}

/// One row of the F=3 → F'=4 coupling table.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionEntry {
    pub ground_f: i32,
    pub ground_m: i32,
    pub excited_f: i32,
    pub excited_m: i32,
    pub polarization: Polarization,
    pub cg_coefficient: f64,
    /// g0/2π (Hz).
    pub g0_over_2pi: f64,
    pub c1: f64,
    pub n0: f64,
}

/// Cooperativities of an ensemble of N maximally coupled atoms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CouplingSet {
    pub c1_driven: f64,
    pub c1_undriven: f64,
    pub n_atoms: f64,
    pub c_total: f64,
}

impl CouplingSet {
    pub fn new(c1_driven: f64, c1_undriven: f64, n_atoms: f64) -> Result<Self> {
        require_non_negative("c1_driven", c1_driven)?;
        require_non_negative("c1_undriven", c1_undriven)?;
        require_non_negative("n_atoms", n_atoms)?;
        Ok(Self {
            c1_driven,
            c1_undriven,
            n_atoms,
            c_total: c1_driven * n_atoms / (1.0 + 2.0 * c1_undriven),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FaradayParams {
    /// Signed magnetic field along the cavity axis (T).
    #[serde(with = "units::field")]
    pub b_field: f64,
    pub lande_gl: f64,
    pub bohr_magneton: f64,
}

impl Default for FaradayParams {
    fn default() -> Self {
        Self {
            b_field: 3.3e-4,
            lande_gl: 1.0 / 3.0,
            bohr_magneton: BOHR_MAGNETON,
        }
    }
}

impl FaradayParams {
    pub fn validate(&self) -> Result<()> {
        if !self.b_field.is_finite() {
            return Err(Error::invalid("faraday.b_field", "must be finite"));
        }
        if !self.lande_gl.is_finite() {
            return Err(Error::invalid("faraday.lande_gl", "must be finite"));
        }
        require_positive("faraday.bohr_magneton", self.bohr_magneton)
    }

    /// Field at which the Zeeman parameter 2 g_L μ_B B/(ħ γ_tot) equals `x`.
    pub fn field_for_zeeman_parameter(x: f64, lande_gl: f64, atom: &AtomParams) -> f64 {
        x * HBAR * atom.gamma_total() / (2.0 * lande_gl * BOHR_MAGNETON)
    }
}

/// Drive strength Y = <n>/n0, normalized to the m=0 π saturation photon number.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriveParams {
    pub intensity_y: f64,
}

impl DriveParams {
    pub fn new(intensity_y: f64) -> Result<Self> {
        require_non_negative("drive.intensity_y", intensity_y)?;
        Ok(Self { intensity_y })
    }
}

/// Parameters of the full intensity-correlation model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct G2ModelParams {
    pub n_bar: f64,
    /// Gaussian transit width T (s).
    pub transit_t: f64,
    /// Standing-wave oscillation Ω in rad/s.
    pub standing_wave_omega: f64,
    /// Oscillation damping β (1/s).
    pub damping_beta: f64,
    /// Background-to-signal rate ratio R_b/R_s.
    pub bg_to_signal: f64,
    pub drive_y: f64,
    /// γ_tot in angular units (1/s).
    pub gamma_total: f64,
}

impl G2ModelParams {
    pub fn validate(&self) -> Result<()> {
        require_positive("n_bar", self.n_bar)?;
        require_positive("transit_t", self.transit_t)?;
        require_non_negative("damping_beta", self.damping_beta)?;
        require_non_negative("bg_to_signal", self.bg_to_signal)?;
        require_non_negative("drive_y", self.drive_y)?;
        require_positive("gamma_total", self.gamma_total)?;
        if !self.standing_wave_omega.is_finite() {
            return Err(Error::invalid("standing_wave_omega", "must be finite"));
        }
        Ok(())
    }
}
