use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::physics::{require_non_negative, require_positive};
use crate::units;

/// Rates of the three uncorrelated background sources, as detected count
/// rates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BackgroundParams {
    /// Dark counts of each detector (1/s).
    #[serde(with = "units::rate")]
    pub dark_rate_per_detector: f64,
    /// Scattered MOT light reaching the detectors (1/s).
    #[serde(with = "units::rate")]
    pub mot_scatter_rate: f64,
    /// Drive light leaking into the detected mode, per unit Y (1/s).
    #[serde(with = "units::rate")]
    pub birefringence_rate_per_y: f64,
}

impl Default for BackgroundParams {
    fn default() -> Self {
        Self {
            dark_rate_per_detector: 300.0,
            mot_scatter_rate: 2000.0,
            birefringence_rate_per_y: 1000.0,
        }
    }
}

impl BackgroundParams {
    pub fn validate(&self) -> Result<()> {
        require_non_negative("background.dark_rate_per_detector", self.dark_rate_per_detector)?;
        require_non_negative("background.mot_scatter_rate", self.mot_scatter_rate)?;
        require_non_negative("background.birefringence_rate_per_y", self.birefringence_rate_per_y)
    }

    pub fn birefringence_rate(&self, drive_y: f64) -> f64 {
        self.birefringence_rate_per_y * drive_y
    }

    /// Background reaching the splitter, i.e. everything except dark counts.
    pub fn optical_rate(&self, drive_y: f64) -> f64 {
        self.mot_scatter_rate + self.birefringence_rate(drive_y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Source {
    Atom,
    Mot,
    Birefringence,
    /// Dark count of the given detector.
    Dark(u8),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Emission {
    pub time: f64,
    pub source: Source,
}

fn poisson_times<R: Rng + ?Sized>(rate: f64, start: f64, duration: f64, rng: &mut R) -> Result<Vec<f64>> {
    let mean = rate * duration;
    if mean == 0.0 {
        return Ok(Vec::new());
    }
    let n = Poisson::new(mean).map_err(|e| Error::invalid("background", e.to_string()))?.sample(rng) as usize;
    let mut t: Vec<f64> = (0..n).map(|_| start + rng.random::<f64>() * duration).collect();
    t.sort_by(f64::total_cmp);
    Ok(t)
}

/// Background events in `[start, start + duration)`, sorted by time.
///
/// MOT and birefringence photons are tagged for the splitter; dark counts are
/// generated for each detector whose entry in `detector_weights` is
/// non-zero.
pub fn generate_background<R: Rng + ?Sized>(
    bg: &BackgroundParams,
    drive_y: f64,
    start: f64,
    duration: f64,
    detector_weights: [f64; 2],
    rng: &mut R,
) -> Result<Vec<Emission>> {
    require_positive("duration", duration)?;
    let mut out = Vec::new();
    let mut push = |rate: f64, source: Source, rng: &mut R| -> Result<()> {
        out.extend(poisson_times(rate, start, duration, rng)?.into_iter().map(|time| Emission { time, source }));
        Ok(())
    };
    push(bg.mot_scatter_rate, Source::Mot, rng)?;
    push(bg.birefringence_rate(drive_y), Source::Birefringence, rng)?;
    for ch in 0..2u8 {
        let rate = if detector_weights[ch as usize] > 0.0 { bg.dark_rate_per_detector } else { 0.0 };
        push(rate, Source::Dark(ch), rng)?;
    }
    out.sort_by(|a, b| a.time.total_cmp(&b.time));
    Ok(out)
}
