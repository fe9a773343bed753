use super::binning::width_ps;
use crate::error::Result;
use crate::stream::PhotonStream;

/// Histogram of intervals between consecutive detections.
#[derive(Debug, Clone, PartialEq)]
pub struct WaitingTimeHistogram {
    /// Bin width (s).
    pub bin_width: f64,
    pub counts: Vec<u64>,
    /// Intervals at or beyond the last bin edge.
    pub overflow: u64,
}

impl WaitingTimeHistogram {
    /// Number of intervals, i.e. the integral over [0, ∞).
    pub fn total(&self) -> u64 {
        self.counts.iter().sum::<u64>() + self.overflow
    }

    pub fn bin_center(&self, i: usize) -> f64 {
        (i as f64 + 0.5) * self.bin_width
    }

    /// Rows of (bin centre, count, Poisson error).
    pub fn rows(&self) -> Vec<(f64, f64, f64)> {
        self.counts
            .iter()
            .enumerate()
            .map(|(i, &c)| (self.bin_center(i), c as f64, (c as f64).sqrt()))
            .collect()
    }
}

/// Histograms t_{i+1} − t_i in bins of `bin` up to `max_tau`.
pub fn waiting_time_distribution(stream: &PhotonStream, max_tau: f64, bin: f64) -> Result<WaitingTimeHistogram> {
    let w = width_ps("bin", bin)?;
    let max = width_ps("max_tau", max_tau)?;
    let nbins = max.div_ceil(w) as usize;
    let mut counts = vec![0u64; nbins];
    let mut overflow = 0;
    for pair in stream.timestamps().windows(2) {
        let i = ((pair[1] - pair[0]) / w) as usize;
        match counts.get_mut(i) {
            Some(c) => *c += 1,
            None => overflow += 1,
        }
    }
    Ok(WaitingTimeHistogram { bin_width: bin, counts, overflow })
}

/// Consecutive-detection intervals strictly shorter than `gate` (s).
pub fn consecutive_coincidences(stream: &PhotonStream, gate: f64) -> Result<u64> {
    let g = width_ps("gate", gate)?;
    Ok(stream.timestamps().windows(2).filter(|p| p[1] - p[0] < g).count() as u64)
}
