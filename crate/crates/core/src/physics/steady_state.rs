use super::params::{AtomParams, CouplingSet, DriveParams, FaradayParams, HBAR};
use crate::error::{Error, Result};

/// Steady-state photon numbers (X∥, X⊥) of the driven and undriven modes.
///
/// Without a Faraday angle the undriven mode holds only collected spontaneous
/// emission. With one, the small-C form Y(2C̃₁C + |φ|²) is used.
pub fn steady_state_photons(
    drive: DriveParams,
    coupling: &CouplingSet,
    faraday_angle: Option<f64>,
) -> (f64, f64) {
    let y = drive.intensity_y;
    let c = coupling.c_total;
    let ct = coupling.c1_undriven;
    let x_par = y / (1.0 + 2.0 * c).powi(2);
    let x_perp = match faraday_angle {
        None => y * (2.0 * ct / (1.0 + 2.0 * ct)) * (c / (1.0 + 2.0 * c).powi(2)),
        Some(phi) => y * (2.0 * ct * c + phi * phi),
    };
    (x_par, x_perp)
}

/// Zeeman parameter x = 2 g_L μ_B B / (ħ γ_tot).
pub fn zeeman_parameter(faraday: &FaradayParams, atom: &AtomParams) -> f64 {
    2.0 * faraday.lande_gl * faraday.bohr_magneton * faraday.b_field / (HBAR * atom.gamma_total())
}

/// Cavity-compounded Faraday rotation angle C·x/(1+x²).
pub fn faraday_angle(faraday: &FaradayParams, atom: &AtomParams, c_total: f64) -> f64 {
    let x = zeeman_parameter(faraday, atom);
    c_total * x / (1.0 + x * x)
}

/// Rotation angle from the field amplitudes in the two polarizations,
/// |ε∥ε⊥| / (|ε∥|² − |ε⊥|²).
pub fn rotation_from_fields(eps_parallel: f64, eps_perp: f64) -> Result<f64> {
    let (a, b) = (eps_parallel.abs(), eps_perp.abs());
    if !(a.is_finite() && b.is_finite()) || a <= b {
        return Err(Error::Domain(format!(
            "rotation needs |eps_parallel| > |eps_perp|, got {a} and {b}"
        )));
    }
    Ok(a * b / (a * a - b * b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn coupling(c1: f64, ct: f64, n: f64) -> CouplingSet {
        CouplingSet::new(c1, ct, n).unwrap()
    }

    #[test]
    fn empty_cavity_transmits_everything() {
        let y = DriveParams::new(0.7).unwrap();
        assert_eq!(steady_state_photons(y, &coupling(0.1, 0.1, 0.0), None), (0.7, 0.0));
    }

    #[test]
    fn weak_ensemble_transmission() {
        let set = coupling(0.09, 0.0, 0.04);
        assert_relative_eq!(set.c_total, 0.0036, epsilon = 1e-15);
        let (xp, _) = steady_state_photons(DriveParams::new(1.0).unwrap(), &set, None);
        assert!((xp - 0.99).abs() < 0.005, "X∥/Y = {xp}");
    }

    #[test]
    fn optimal_faraday_signal() {
        let atom = AtomParams::default();
        let c = 0.01;
        let b = FaradayParams::field_for_zeeman_parameter(1.0, 1.0 / 3.0, &atom);
        let far = FaradayParams { b_field: b, ..FaradayParams::default() };
        let phi = faraday_angle(&far, &atom, c);
        assert_relative_eq!(phi, c / 2.0, epsilon = 1e-12);
        let set = coupling(c, 0.0, 1.0);
        let y = DriveParams::new(2.0).unwrap();
        let (_, xperp) = steady_state_photons(y, &set, Some(phi));
        assert_relative_eq!(xperp, 2.0 * c * c / 4.0, epsilon = 1e-14);
    }

    #[test]
    fn faraday_angle_shape() {
        let atom = AtomParams::default();
        let mut far = FaradayParams { b_field: 0.0, ..FaradayParams::default() };
        assert_eq!(faraday_angle(&far, &atom, 0.3), 0.0);
        far.b_field = FaradayParams::field_for_zeeman_parameter(2.0, far.lande_gl, &atom);
        assert_relative_eq!(faraday_angle(&far, &atom, 0.3), 0.3 * 2.0 / 5.0, epsilon = 1e-12);
        let plus = faraday_angle(&far, &atom, 0.3);
        far.b_field = -far.b_field;
        assert_relative_eq!(faraday_angle(&far, &atom, 0.3), -plus, epsilon = 1e-15);
    }

    #[test]
    fn rotation_examples() {
        assert_eq!(rotation_from_fields(1.0, 0.0).unwrap(), 0.0);
        let small = rotation_from_fields(1.0, 0.035).unwrap();
        assert!((small - 0.035).abs() < 1e-4);
        let exact = rotation_from_fields(1.0, 0.1).unwrap();
        assert_relative_eq!(exact, 0.1 / 0.99, epsilon = 1e-14);
        assert!((exact - 0.1010).abs() < 5e-5);
        assert!(matches!(rotation_from_fields(0.5, 0.5), Err(Error::Domain(_))));
        assert!(matches!(rotation_from_fields(0.2, -0.5), Err(Error::Domain(_))));
    }

    #[test]
    fn transmission_decreases_with_cooperativity() {
        let y = DriveParams::new(1.0).unwrap();
        let mut last = f64::INFINITY;
        for i in 0..=100 {
            let c = i as f64 * 1e-4;
            let (xp, _) = steady_state_photons(y, &coupling(c, 0.0, 1.0), None);
            assert!(xp < last);
            assert!(xp <= 1.0);
            let linear = 1.0 - 4.0 * c;
            assert!((xp - linear).abs() <= 0.05 * xp);
            last = xp;
        }
    }
}
