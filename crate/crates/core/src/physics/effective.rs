//! Coupling-weighted atom counting and saturation-weighted mode volumes.

use nalgebra::Vector3;
use rand::Rng;
use rand_distr::{Distribution, Poisson};

use super::coupling::relative_coupling_sq;
use super::params::CavityParams;
use crate::error::{Error, Result};

/// Σ g²(rᵢ)/g0²: the number of maximally coupled atoms equivalent to the
/// configuration.
pub fn effective_atom_number(positions: &[Vector3<f64>], cavity: &CavityParams) -> f64 {
    positions.iter().map(|p| relative_coupling_sq(p, cavity)).sum()
}

#[derive(Debug, Clone, PartialEq)]
pub struct EffectiveAtomStats {
    pub mean: f64,
    pub std_error: f64,
    pub configurations: usize,
    /// Fraction of configurations with more than one effective atom.
    pub p_above_one: f64,
}

/// Monte Carlo average of the effective atom number when a Poisson number of
/// atoms (mean `mean_atoms`) is placed uniformly in a box of ±`half_width_factor`·w0
/// in both transverse directions and one wavelength along the axis.
pub fn effective_atom_number_mc<R: Rng + ?Sized>(
    mean_atoms: f64,
    half_width_factor: f64,
    configurations: usize,
    cavity: &CavityParams,
    rng: &mut R,
) -> Result<EffectiveAtomStats> {
    if configurations < 2 {
        return Err(Error::invalid("configurations", "need at least two"));
    }
    if !(half_width_factor > 0.0) {
        return Err(Error::invalid("half_width_factor", "must be > 0"));
    }
    let half = half_width_factor * cavity.waist;
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    let mut above = 0usize;
    let poisson = if mean_atoms > 0.0 {
        Some(Poisson::new(mean_atoms).map_err(|e| Error::invalid("mean_atoms", e.to_string()))?)
    } else {
        None
    };
    let mut positions = Vec::new();
    for _ in 0..configurations {
        let n = poisson.as_ref().map_or(0, |p| p.sample(rng) as usize);
        positions.clear();
        positions.extend((0..n).map(|_| {
            Vector3::new(
                rng.random_range(-half..half),
                rng.random_range(-half..half),
                rng.random_range(0.0..cavity.wavelength),
            )
        }));
        let n_eff = effective_atom_number(&positions, cavity);
        sum += n_eff;
        sum_sq += n_eff * n_eff;
        if n_eff > 1.0 {
            above += 1;
        }
    }
    let m = configurations as f64;
    let mean = sum / m;
    let var = (sum_sq / m - mean * mean).max(0.0) * m / (m - 1.0);
    Ok(EffectiveAtomStats {
        mean,
        std_error: (var / m).sqrt(),
        configurations,
        p_above_one: above as f64 / m,
    })
}

/// Standing-wave average of u·(s u)/(1 + s u) with u = a cos²(kz),
/// written as a·h(s a).
fn lobe_averaged_weight(a: f64, s: f64) -> f64 {
    let b = s * a;
    let h = if b < 1e-3 {
        b * (3.0 / 8.0 - b * (5.0 / 16.0 - b * 35.0 / 128.0))
    } else {
        0.5 - (1.0 - 1.0 / (1.0 + b).sqrt()) / b
    };
    a * h
}

/// Volume integral (m³) of the collection-times-saturation weight
/// (g²/g0²)·[s g²/g0²]/[1 + s g²/g0²] over a box of ±`half_width_factor`·w0
/// transversely and `axial_length` along the cavity axis.
///
/// The axial average over the standing wave is done in closed form; the
/// transverse square uses composite Simpson quadrature.
pub fn saturation_volume_integral(
    s: f64,
    cavity: &CavityParams,
    half_width_factor: f64,
    axial_length: f64,
) -> f64 {
    const N: usize = 400;
    let half = half_width_factor * cavity.waist;
    let h = 2.0 * half / N as f64;
    let w2 = cavity.waist * cavity.waist;
    let simpson = |i: usize| match i {
        0 => 1.0,
        i if i == N => 1.0,
        i if i % 2 == 1 => 4.0,
        _ => 2.0,
    };
    let mut total = 0.0;
    for i in 0..=N {
        let x = -half + i as f64 * h;
        let ex = (-2.0 * x * x / w2).exp();
        let mut row = 0.0;
        for j in 0..=N {
            let y = -half + j as f64 * h;
            row += simpson(j) * lobe_averaged_weight(ex * (-2.0 * y * y / w2).exp(), s);
        }
        total += simpson(i) * row;
    }
    total * (h / 3.0) * (h / 3.0) * axial_length
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn single_atom_examples() {
        let c = CavityParams::default();
        assert_eq!(effective_atom_number(&[Vector3::zeros()], &c), 1.0);
        let node = Vector3::new(0.0, 0.0, c.wavelength / 4.0);
        assert!(effective_atom_number(&[node], &c) < 1e-30);
        assert_eq!(effective_atom_number(&[], &c), 0.0);
    }

    #[test]
    fn mc_scales_with_density() {
        let c = CavityParams::default();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let one = effective_atom_number_mc(0.5, 2.0, 200_000, &c, &mut rng).unwrap();
        let two = effective_atom_number_mc(1.0, 2.0, 200_000, &c, &mut rng).unwrap();
        let ratio = two.mean / one.mean;
        let err = ratio * ((one.std_error / one.mean).powi(2) + (two.std_error / two.mean).powi(2)).sqrt();
        assert!((ratio - 2.0).abs() < 4.0 * err, "ratio {ratio} ± {err}");
    }

    #[test]
    fn lobe_average_matches_direct_quadrature() {
        for &(a, s) in &[(1.0, 1e-5), (0.8, 0.3), (0.2, 4.0), (1.0, 100.0)] {
            let n = 20_000;
            let direct: f64 = (0..n)
                .map(|i| {
                    let c = ((i as f64 + 0.5) / n as f64 * std::f64::consts::PI).cos().powi(2);
                    let u = a * c;
                    u * s * u / (1.0 + s * u)
                })
                .sum::<f64>()
                / n as f64;
            assert_relative_eq!(lobe_averaged_weight(a, s), direct, max_relative = 1e-6);
        }
    }
}
