use nalgebra::{Vector2, Vector3};
use rand::Rng;
use rand::distr::weighted::WeightedIndex;
use rand_distr::{Distribution, Normal, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::physics::{require_non_negative, require_positive, CavityParams};
use crate::units;

/// Effective parameters of the atomic beam crossing the cavity mode.
///
/// The beam travels along +x, perpendicular to the cavity axis z up to
/// `tilt_angle`, which tips the velocity toward the axis. Atoms enter a box
/// of half-width `mode_extent_factor`·w0 in x and y.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BeamParams {
    /// Atoms per second crossing the box.
    #[serde(with = "units::rate")]
    pub flux: f64,
    #[serde(with = "units::speed")]
    pub mean_speed: f64,
    #[serde(with = "units::speed")]
    pub speed_sigma: f64,
    #[serde(with = "units::angle")]
    pub tilt_angle: f64,
    /// Gaussian spread of each transverse velocity component (m/s) from
    /// geometric collimation. Sets the damping of the standing-wave
    /// oscillation in the correlogram.
    #[serde(with = "units::speed")]
    pub transverse_sigma: f64,
    pub mode_extent_factor: f64,
    /// Relative populations of ground sublevels m = -3..=3.
    pub m_weights: [f64; 7],
}

impl Default for BeamParams {
    fn default() -> Self {
        Self {
            flux: 680_000.0,
            mean_speed: 14.7,
            speed_sigma: 1.0,
            tilt_angle: 2.3f64.to_radians(),
            transverse_sigma: 0.24,
            mode_extent_factor: 2.0,
            m_weights: [1.0; 7],
        }
    }
}

impl BeamParams {
    pub fn validate(&self) -> Result<()> {
        require_non_negative("beam.flux", self.flux)?;
        require_positive("beam.mean_speed", self.mean_speed)?;
        require_non_negative("beam.speed_sigma", self.speed_sigma)?;
        require_non_negative("beam.transverse_sigma", self.transverse_sigma)?;
        require_positive("beam.mode_extent_factor", self.mode_extent_factor)?;
        if !(0.0..std::f64::consts::FRAC_PI_2).contains(&self.tilt_angle) {
            return Err(Error::invalid("beam.tilt_angle", "must lie in [0, π/2)"));
        }
        if self.m_weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) || self.m_weights.iter().sum::<f64>() <= 0.0 {
            return Err(Error::invalid("beam.m_weights", "weights must be non-negative with a positive sum"));
        }
        Ok(())
    }

    pub fn half_width(&self, cavity: &CavityParams) -> f64 {
        self.mode_extent_factor * cavity.waist
    }
}

/// One atom's straight-line passage through the simulation box.
#[derive(Debug, Clone, PartialEq)]
pub struct Transit {
    /// Time the atom crosses the upstream face of the box (s).
    pub entry_time: f64,
    pub velocity: Vector3<f64>,
    /// (y, z) at the moment the atom crosses x = 0.
    pub impact_offset: Vector2<f64>,
    pub ground_state_m: i32,
    /// Box half-width the transit was sampled for (m).
    pub half_width: f64,
}

impl Transit {
    /// Time at which the atom crosses x = 0.
    pub fn center_time(&self) -> f64 {
        self.entry_time + self.half_width / self.velocity.x
    }

    pub fn exit_time(&self) -> f64 {
        self.entry_time + 2.0 * self.half_width / self.velocity.x
    }

    pub fn position(&self, t: f64) -> Vector3<f64> {
        let dt = t - self.center_time();
        Vector3::new(
            self.velocity.x * dt,
            self.impact_offset.x + self.velocity.y * dt,
            self.impact_offset.y + self.velocity.z * dt,
        )
    }

    /// Smallest |y| reached inside the box.
    pub fn min_abs_y(&self) -> f64 {
        let dt = self.half_width / self.velocity.x;
        let a = self.impact_offset.x - self.velocity.y * dt;
        let b = self.impact_offset.x + self.velocity.y * dt;
        if a.signum() != b.signum() {
            0.0
        } else {
            a.abs().min(b.abs())
        }
    }
}

/// Samples the atoms entering the box during `[start, start + duration)`.
///
/// Arrivals form a homogeneous Poisson process of rate `flux`. Speeds are
/// normal, truncated to positive values; the velocity is tipped by the tilt
/// toward the cavity axis and then perturbed transversely. Impact offsets are
/// uniform across the box in y and over one wavelength in z.
pub fn sample_transits<R: Rng + ?Sized>(
    beam: &BeamParams,
    cavity: &CavityParams,
    start: f64,
    duration: f64,
    rng: &mut R,
) -> Result<Vec<Transit>> {
    require_positive("duration", duration)?;
    let mean = beam.flux * duration;
    if mean == 0.0 {
        return Ok(Vec::new());
    }
    let count = Poisson::new(mean).map_err(|e| Error::invalid("beam.flux", e.to_string()))?.sample(rng) as usize;
    let mut times: Vec<f64> = (0..count).map(|_| start + rng.random::<f64>() * duration).collect();
    times.sort_by(f64::total_cmp);
    let sampler = TransitSampler::new(beam, cavity)?;
    Ok(times.into_iter().map(|t| sampler.sample(t, rng)).collect())
}

/// Draws transit geometry and velocity for a given entry time.
#[derive(Debug, Clone)]
pub struct TransitSampler {
    speed: Normal<f64>,
    transverse: Normal<f64>,
    sublevel: WeightedIndex<f64>,
    tilt: f64,
    half_width: f64,
    wavelength: f64,
    min_speed: f64,
}

impl TransitSampler {
    pub fn new(beam: &BeamParams, cavity: &CavityParams) -> Result<Self> {
        beam.validate()?;
        Ok(Self {
            speed: Normal::new(beam.mean_speed, beam.speed_sigma)
                .map_err(|e| Error::invalid("beam.speed_sigma", e.to_string()))?,
            transverse: Normal::new(0.0, beam.transverse_sigma)
                .map_err(|e| Error::invalid("beam.transverse_sigma", e.to_string()))?,
            sublevel: WeightedIndex::new(beam.m_weights)
                .map_err(|e| Error::invalid("beam.m_weights", e.to_string()))?,
            tilt: beam.tilt_angle,
            half_width: beam.half_width(cavity),
            wavelength: cavity.wavelength,
            min_speed: 1e-3 * beam.mean_speed,
        })
    }

    pub fn sample<R: Rng + ?Sized>(&self, entry_time: f64, rng: &mut R) -> Transit {
        let speed = loop {
            let v = self.speed.sample(rng);
            if v > self.min_speed {
                break v;
            }
        };
        let velocity = Vector3::new(
            speed * self.tilt.cos(),
            self.transverse.sample(rng),
            speed * self.tilt.sin() + self.transverse.sample(rng),
        );
        let impact_offset = Vector2::new(
            rng.random_range(-self.half_width..self.half_width),
            rng.random_range(-0.5 * self.wavelength..0.5 * self.wavelength),
        );
        let ground_state_m = self.sublevel.sample(rng) as i32 - 3;
        Transit {
            entry_time,
            velocity,
            impact_offset,
            ground_state_m,
            half_width: self.half_width,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_flux_gives_no_atoms() {
        let beam = BeamParams { flux: 0.0, ..Default::default() };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!(sample_transits(&beam, &CavityParams::default(), 0.0, 1.0, &mut rng).unwrap().is_empty());
    }

    #[test]
    fn arrival_count_is_poisson() {
        let beam = BeamParams { flux: 160_000.0, ..Default::default() };
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let n = sample_transits(&beam, &CavityParams::default(), 0.0, 1.0, &mut rng).unwrap().len() as f64;
        assert!((n - 160_000.0).abs() < 3.0 * 400.0, "{n}");
    }

    #[test]
    fn axial_velocity_follows_tilt() {
        let beam = BeamParams { mean_speed: 15.0, ..Default::default() };
        let cavity = CavityParams::default();
        let sampler = TransitSampler::new(&beam, &cavity).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 100_000;
        let mean_vz = (0..n).map(|_| sampler.sample(0.0, &mut rng).velocity.z).sum::<f64>() / n as f64;
        let expected = 15.0 * 2.3f64.to_radians().sin();
        assert!((expected - 0.60).abs() < 0.005);
        let se = beam.transverse_sigma / (n as f64).sqrt() * 1.1 + 1.0 * 0.04 / (n as f64).sqrt();
        assert!((mean_vz - expected).abs() < 4.0 * se, "{mean_vz} vs {expected}");
        assert!((mean_vz - 0.58).abs() < 0.03);
    }

    #[test]
    fn transits_stay_in_box() {
        let beam = BeamParams::default();
        let cavity = CavityParams::default();
        let sampler = TransitSampler::new(&beam, &cavity).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..10_000 {
            let t = sampler.sample(1.0, &mut rng);
            assert!(t.velocity.norm() > 0.0);
            assert!(t.impact_offset.x.abs() <= beam.half_width(&cavity));
            assert!((-3..=3).contains(&t.ground_state_m));
            let p_in = t.position(t.entry_time);
            assert!((p_in.x + t.half_width).abs() < 1e-12);
            assert!(t.min_abs_y() <= t.position(t.center_time()).y.abs());
        }
    }
}
