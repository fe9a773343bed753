use std::cmp::Reverse;
use std::collections::BinaryHeap;

use rand::Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use super::background::{Emission, Source};
use crate::error::{Error, Result};
use crate::physics::{require_non_negative, require_positive};
use crate::stream::PhotonStream;
use crate::units;

/// Detection chain: beam splitter onto two APDs and the time tagger.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DetectorParams {
    /// Probability that a photon leaving the cavity is registered.
    #[serde(with = "units::number")]
    pub efficiency: f64,
    #[serde(with = "units::time")]
    pub dead_time: f64,
    #[serde(with = "units::number")]
    pub afterpulse_probability: f64,
    /// Mean of the exponential afterpulse delay.
    #[serde(with = "units::time")]
    pub afterpulse_delay: f64,
    /// Fraction of photons sent to channel 0.
    #[serde(with = "units::number")]
    pub splitter_ratio: f64,
    #[serde(with = "units::time")]
    pub timestamp_quantum: f64,
}

impl Default for DetectorParams {
    fn default() -> Self {
        Self {
            efficiency: 0.23,
            dead_time: 50e-9,
            afterpulse_probability: 5e-4,
            afterpulse_delay: 100e-9,
            splitter_ratio: 0.5,
            timestamp_quantum: 4e-12,
        }
    }
}

impl DetectorParams {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.efficiency) {
            return Err(Error::invalid("detector.efficiency", format!("must lie in [0, 1], got {}", self.efficiency)));
        }
        require_non_negative("detector.dead_time", self.dead_time)?;
        if !(0.0..0.05).contains(&self.afterpulse_probability) {
            return Err(Error::invalid(
                "detector.afterpulse_probability",
                format!("must lie in [0, 0.05), got {}", self.afterpulse_probability),
            ));
        }
        require_positive("detector.afterpulse_delay", self.afterpulse_delay)?;
        if !(0.0..=1.0).contains(&self.splitter_ratio) {
            return Err(Error::invalid(
                "detector.splitter_ratio",
                format!("must lie in [0, 1], got {}", self.splitter_ratio),
            ));
        }
        require_positive("detector.timestamp_quantum", self.timestamp_quantum)?;
        if self.timestamp_quantum < 1e-12 {
            return Err(Error::invalid("detector.timestamp_quantum", "must be at least 1 ps"));
        }
        Ok(())
    }

    /// Fraction of light reaching each channel.
    pub fn channel_weights(&self) -> [f64; 2] {
        [self.splitter_ratio, 1.0 - self.splitter_ratio]
    }

    pub fn quantum_ps(&self) -> u64 {
        ((self.timestamp_quantum * 1e12).round() as u64).max(1)
    }

    pub fn quantize(&self, t: f64) -> u64 {
        let q = self.quantum_ps();
        ((t * 1e12 / q as f64).round() as u64) * q
    }

    fn dead_time_ps(&self) -> u64 {
        (self.dead_time * 1e12).round() as u64
    }
}

/// Applies efficiency (to atom photons only; background rates are already
/// detected rates), the splitter and quantisation. Returns unsorted raw
/// timestamps per channel, before any dead time.
pub fn route<R: Rng + ?Sized>(emissions: &[Emission], det: &DetectorParams, rng: &mut R) -> [Vec<u64>; 2] {
    let mut out = [Vec::new(), Vec::new()];
    for e in emissions {
        let ch = match e.source {
            Source::Dark(ch) => ch as usize,
            src => {
                if src == Source::Atom && rng.random::<f64>() >= det.efficiency {
                    continue;
                }
                if rng.random::<f64>() < det.splitter_ratio { 0 } else { 1 }
            }
        };
        out[ch].push(det.quantize(e.time));
    }
    out
}

/// Dead-time filtering and afterpulsing on one channel. `raw` must be sorted.
///
/// Afterpulses are fed back into the same channel and are subject to the
/// same dead time; they may themselves afterpulse.
pub fn settle<R: Rng + ?Sized>(raw: &[u64], det: &DetectorParams, rng: &mut R) -> Vec<u64> {
    debug_assert!(raw.windows(2).all(|w| w[0] <= w[1]));
    let dead = det.dead_time_ps();
    let q = det.quantum_ps();
    let mean_delay_ps = det.afterpulse_delay * 1e12;
    let mut pending: BinaryHeap<Reverse<u64>> = BinaryHeap::new();
    let mut out = Vec::with_capacity(raw.len());
    let mut last: Option<u64> = None;
    let mut i = 0;
    loop {
        let next_raw = raw.get(i).copied();
        let next_ap = pending.peek().map(|r| r.0);
        let t = match (next_raw, next_ap) {
            (None, None) => break,
            (Some(a), Some(b)) if b < a => {
                pending.pop();
                b
            }
            (Some(a), _) => {
                i += 1;
                a
            }
            (None, Some(b)) => {
                pending.pop();
                b
            }
        };
        if last.is_some_and(|l| t - l < dead) {
            continue;
        }
        out.push(t);
        last = Some(t);
        if det.afterpulse_probability > 0.0 && rng.random::<f64>() < det.afterpulse_probability {
            let delay: f64 = Exp1.sample(rng);
            let d = (((delay * mean_delay_ps) / q as f64).round() as u64).max(1) * q;
            pending.push(Reverse(t + d));
        }
    }
    out
}

/// Full detection chain on a merged, time-sorted list of emissions.
pub fn detect<R: Rng + ?Sized>(
    emissions: &[Emission],
    det: &DetectorParams,
    rng: &mut R,
) -> Result<(PhotonStream, PhotonStream)> {
    det.validate()?;
    let [mut a, mut b] = route(emissions, det, rng);
    a.sort_unstable();
    b.sort_unstable();
    let s0 = PhotonStream::new(0, settle(&a, det, rng))?;
    let s1 = PhotonStream::new(1, settle(&b, det, rng))?;
    Ok((s0, s1))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn atoms(times: &[f64]) -> Vec<Emission> {
        times.iter().map(|&time| Emission { time, source: Source::Atom }).collect()
    }

    fn ideal() -> DetectorParams {
        DetectorParams {
            efficiency: 1.0,
            dead_time: 0.0,
            afterpulse_probability: 0.0,
            ..Default::default()
        }
    }

    #[test]
    fn ideal_chain_only_splits() {
        let times: Vec<f64> = (0..10_000).map(|i| i as f64 * 1e-6).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let (a, b) = detect(&atoms(&times), &ideal(), &mut rng).unwrap();
        assert_eq!(a.len() + b.len(), times.len());
        assert!((a.len() as f64 - 5000.0).abs() < 3.0 * 50.0);
        let mut all: Vec<u64> = a.timestamps().iter().chain(b.timestamps()).copied().collect();
        all.sort_unstable();
        let expected: Vec<u64> = times.iter().map(|t| ideal().quantize(*t)).collect();
        assert_eq!(all, expected);
    }

    #[test]
    fn efficiency_thins_poisson_stream() {
        let det = DetectorParams { efficiency: 0.23, dead_time: 0.0, afterpulse_probability: 0.0, ..Default::default() };
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let rate = 1e5;
        let mut t = 0.0;
        let mut times = Vec::new();
        while t < 10.0 {
            let g: f64 = Exp1.sample(&mut rng);
            t += g / rate;
            times.push(t);
        }
        let (a, b) = detect(&atoms(&times), &det, &mut rng).unwrap();
        let expected = 0.23 * times.len() as f64 / 2.0;
        let sigma = expected.sqrt();
        assert!((a.len() as f64 - expected).abs() < 3.0 * sigma);
        assert!((b.len() as f64 - expected).abs() < 3.0 * sigma);
    }

    #[test]
    fn dead_time_drops_close_events() {
        let det = DetectorParams { splitter_ratio: 1.0, ..ideal() };
        let det = DetectorParams { dead_time: 50e-9, ..det };
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (a, b) = detect(&atoms(&[1e-6, 1.01e-6]), &det, &mut rng).unwrap();
        assert_eq!(a.len(), 1);
        assert!(b.is_empty());
    }

    #[test]
    fn timestamps_are_quantized() {
        let det = DetectorParams::default();
        assert_eq!(det.quantize(1e-6 + 1.7e-12), 1_000_000);
        assert_eq!(det.quantize(1e-6 + 2.1e-12), 1_000_004);
    }

    #[test]
    fn afterpulses_follow_their_parent() {
        let det = DetectorParams { afterpulse_probability: 0.049, splitter_ratio: 1.0, ..ideal() };
        let raw: Vec<u64> = (0..100_000u64).map(|i| i * 100_000_000).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let out = settle(&raw, &det, &mut rng);
        let extra = out.len() - raw.len();
        let expected = 0.049 / (1.0 - 0.049) * raw.len() as f64;
        assert!((extra as f64 - expected).abs() < 4.0 * expected.sqrt(), "{extra} vs {expected}");
    }

    proptest! {
        #[test]
        fn dead_time_is_respected(mut raw in proptest::collection::vec(0u64..10_000_000, 0..500), seed in any::<u64>()) {
            raw.sort_unstable();
            let det = DetectorParams { afterpulse_probability: 0.04, ..Default::default() };
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let out = settle(&raw, &det, &mut rng);
            prop_assert!(out.windows(2).all(|w| w[1] - w[0] >= det.dead_time_ps()));
        }
    }
}
