use std::fmt::Write as _;

use rayon::prelude::*;

use crate::analysis::write_text;
use crate::error::{Error, Result};
use crate::stream::{joint_span_s, PhotonStream};

/// Minimum number of stream-0 events handed to one worker.
const CHUNK: usize = 1 << 15;

/// Normalised two-channel coincidence histogram g²(τ), τ = t₁ − t₀.
///
/// Bins are symmetric about zero: with n = `bins_per_side`, bin `n + j`
/// (j ≥ 0) holds lags in [jΔ, (j+1)Δ) and bin `n − 1 − j` holds lags in
/// (−(j+1)Δ, −jΔ]. Swapping the channels therefore mirrors the histogram
/// exactly, except for zero-lag ties, which always go to the +0 bin.
#[derive(Debug, Clone, PartialEq)]
pub struct Correlogram {
    pub bin_width: f64,
    pub max_lag: f64,
    pub raw_counts: Vec<u64>,
    /// Expected counts per bin for uncorrelated streams, N₀N₁Δ/T.
    pub normalization: f64,
    pub g2: Vec<f64>,
    pub errors: Vec<f64>,
}

impl Correlogram {
    /// Builds a correlogram from raw counts and a normalisation. Errors are
    /// Poisson with a floor of one count.
    pub fn from_raw(bin_width: f64, raw_counts: Vec<u64>, normalization: f64) -> Result<Self> {
        if raw_counts.is_empty() || raw_counts.len() % 2 != 0 {
            return Err(Error::invalid("raw_counts", "need a non-empty, even number of bins"));
        }
        if !(normalization.is_finite() && normalization > 0.0) {
            return Err(Error::Degenerate(format!("normalization must be positive, got {normalization}")));
        }
        let g2 = raw_counts.iter().map(|&c| c as f64 / normalization).collect();
        let errors = raw_counts.iter().map(|&c| (c.max(1) as f64).sqrt() / normalization).collect();
        Ok(Self {
            bin_width,
            max_lag: bin_width * (raw_counts.len() / 2) as f64,
            raw_counts,
            normalization,
            g2,
            errors,
        })
    }

    pub fn bins_per_side(&self) -> usize {
        self.raw_counts.len() / 2
    }

    pub fn len(&self) -> usize {
        self.raw_counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.raw_counts.is_empty()
    }

    /// Lag at the centre of bin `i` (s).
    pub fn tau(&self, i: usize) -> f64 {
        (i as f64 - self.bins_per_side() as f64 + 0.5) * self.bin_width
    }

    /// Index of the bin holding lag `tau` (s), if inside the histogram.
    pub fn bin_of(&self, tau: f64) -> Option<usize> {
        let i = (tau / self.bin_width + self.bins_per_side() as f64).floor();
        (i >= 0.0 && (i as usize) < self.len()).then_some(i as usize)
    }

    /// CSV with columns `tau_s,g2,g2_error,raw_count`.
    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(48 * self.len() + 32);
        out.push_str("tau_s,g2,g2_error,raw_count\n");
        for i in 0..self.len() {
            let _ = writeln!(out, "{:e},{},{},{}", self.tau(i), self.g2[i], self.errors[i], self.raw_counts[i]);
        }
        out
    }

    pub fn write_csv(&self, path: &std::path::Path) -> Result<()> {
        write_text(path, &self.to_csv())
    }

    /// Parses the CSV written by [`Correlogram::to_csv`].
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let header = lines.next().unwrap_or_default();
        if header.trim() != "tau_s,g2,g2_error,raw_count" {
            return Err(Error::MalformedStream(format!("bad correlogram header {header:?}")));
        }
        let mut taus = Vec::new();
        let mut raw = Vec::new();
        let mut norm = None;
        for (i, line) in lines.enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let bad = || Error::MalformedStream(format!("correlogram line {}: {line:?}", i + 2));
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 4 {
                return Err(bad());
            }
            let tau: f64 = f[0].trim().parse().map_err(|_| bad())?;
            let g2: f64 = f[1].trim().parse().map_err(|_| bad())?;
            let count: u64 = f[3].trim().parse().map_err(|_| bad())?;
            if count > 0 && norm.is_none() {
                norm = Some(count as f64 / g2);
            }
            taus.push(tau);
            raw.push(count);
        }
        if taus.len() < 2 {
            return Err(Error::MalformedStream("correlogram has fewer than two bins".into()));
        }
        let width = taus[1] - taus[0];
        let norm = norm.ok_or_else(|| Error::Degenerate("correlogram has no counts".into()))?;
        Self::from_raw(width, raw, norm)
    }
}

/// Counts all pairs (t₀ from `stream0`, t₁ from `stream1`) with
/// |t₁ − t₀| below `bins_per_side`·Δ and histograms t₁ − t₀.
pub fn pair_histogram(stream0: &PhotonStream, stream1: &PhotonStream, bin_ps: u64, bins_per_side: usize) -> Vec<u64> {
    let a = stream0.timestamps();
    let b = stream1.timestamps();
    let half = bins_per_side as u64 * bin_ps;
    let n = 2 * bins_per_side;
    let chunk = CHUNK.max(a.len().div_ceil(rayon::current_num_threads().max(1)));
    a.par_chunks(chunk)
        .map(|chunk| {
            let mut hist = vec![0u64; n];
            let mut lo = b.partition_point(|&t| t + half <= chunk[0]);
            for &t0 in chunk {
                while lo < b.len() && b[lo] + half <= t0 {
                    lo += 1;
                }
                for &t1 in &b[lo..] {
                    if t1 >= t0 + half {
                        break;
                    }
                    let idx = if t1 >= t0 {
                        bins_per_side + ((t1 - t0) / bin_ps) as usize
                    } else {
                        bins_per_side - 1 - ((t0 - t1) / bin_ps) as usize
                    };
                    hist[idx] += 1;
                }
            }
            hist
        })
        .reduce(
            || vec![0u64; n],
            |mut x, y| {
                x.iter_mut().zip(y).for_each(|(p, q)| *p += q);
                x
            },
        )
}

/// Cross-correlogram of two streams over ±`max_lag` in bins of `bin_width`.
///
/// The normalisation uses the joint span of the two streams as the
/// measurement duration unless `duration` is given.
pub fn cross_correlogram(
    stream0: &PhotonStream,
    stream1: &PhotonStream,
    bin_width: f64,
    max_lag: f64,
    duration: Option<f64>,
) -> Result<Correlogram> {
    if stream0.is_empty() || stream1.is_empty() {
        return Err(Error::Degenerate("cannot normalise a correlogram of an empty stream".into()));
    }
    if !(bin_width.is_finite() && bin_width >= 1e-12) {
        return Err(Error::invalid("bin_width", format!("must be at least 1 ps, got {bin_width}")));
    }
    if !(max_lag.is_finite() && max_lag >= bin_width) {
        return Err(Error::invalid("max_lag", format!("must be at least one bin, got {max_lag}")));
    }
    let bin_ps = (bin_width * 1e12).round() as u64;
    let per_side = (max_lag / bin_width).round() as usize;
    let span = match duration {
        Some(d) if d.is_finite() && d > 0.0 => d,
        Some(d) => return Err(Error::invalid("duration", format!("must be > 0, got {d}"))),
        None => joint_span_s(&[stream0, stream1]),
    };
    if !(span > 0.0) {
        return Err(Error::Degenerate("streams span zero time".into()));
    }
    let raw = pair_histogram(stream0, stream1, bin_ps, per_side);
    let norm = stream0.len() as f64 * stream1.len() as f64 * (bin_ps as f64 * 1e-12) / span;
    Correlogram::from_raw(bin_ps as f64 * 1e-12, raw, norm)
}
