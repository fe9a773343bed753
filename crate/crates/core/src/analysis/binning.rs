use crate::error::{Error, Result};
use crate::stream::PhotonStream;

/// Photon counts in consecutive, equal, left-closed time bins.
#[derive(Debug, Clone, PartialEq)]
pub struct BinnedCounts {
    /// Bin width (s).
    pub bin_width: f64,
    /// Start of the first bin (s).
    pub start_time: f64,
    pub counts: Vec<u64>,
    /// Whether the last bin was cut short by the end of the data.
    pub last_bin_partial: bool,
}

impl BinnedCounts {
    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Bins that cover their full width.
    pub fn complete(&self) -> &[u64] {
        if self.last_bin_partial {
            &self.counts[..self.counts.len() - 1]
        } else {
            &self.counts
        }
    }
}

pub(crate) fn width_ps(field: &str, width: f64) -> Result<u64> {
    if !(width.is_finite() && width > 0.0) {
        return Err(Error::invalid(field, format!("must be finite and > 0, got {width}")));
    }
    let ps = (width * 1e12).round() as u64;
    if ps == 0 {
        return Err(Error::invalid(field, "shorter than 1 ps"));
    }
    Ok(ps)
}

/// Bins a stream starting at its first detection and ending at its last.
///
/// A detection exactly on a bin boundary belongs to the later bin. The final
/// bin holds the last detection and is usually partial.
pub fn bin_counts(stream: &PhotonStream, bin_width: f64) -> Result<BinnedCounts> {
    let w = width_ps("bin_width", bin_width)?;
    let Some((first, last)) = stream.bounds() else {
        return Ok(BinnedCounts { bin_width, start_time: 0.0, counts: Vec::new(), last_bin_partial: false });
    };
    let n = ((last - first) / w + 1) as usize;
    let mut counts = vec![0u64; n];
    for &t in stream.timestamps() {
        counts[((t - first) / w) as usize] += 1;
    }
    Ok(BinnedCounts {
        bin_width,
        start_time: first as f64 * 1e-12,
        counts,
        last_bin_partial: true,
    })
}

/// Bins the detections in `[start, end)` (s). Only whole bins are kept, so
/// events after the last whole bin are ignored.
pub fn bin_counts_in(stream: &PhotonStream, bin_width: f64, start: f64, end: f64) -> Result<BinnedCounts> {
    let w = width_ps("bin_width", bin_width)?;
    if !(start.is_finite() && end.is_finite() && end > start && start >= 0.0) {
        return Err(Error::invalid("range", format!("need 0 <= start < end, got [{start}, {end})")));
    }
    let s = (start * 1e12).round() as u64;
    let e = (end * 1e12).round() as u64;
    let n = ((e - s) / w) as usize;
    let mut counts = vec![0u64; n];
    let stop = s + n as u64 * w;
    for &t in stream.timestamps() {
        if t >= s && t < stop {
            counts[((t - s) / w) as usize] += 1;
        }
    }
    Ok(BinnedCounts { bin_width, start_time: start, counts, last_bin_partial: false })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn empty_stream_has_no_counts() {
        let b = bin_counts(&PhotonStream::default(), 1e-6).unwrap();
        assert!(b.counts.iter().all(|&c| c == 0));
        let b = bin_counts_in(&PhotonStream::default(), 1e-6, 0.0, 1e-3).unwrap();
        assert_eq!(b.counts.len(), 1000);
        assert_eq!(b.total(), 0);
    }

    #[test]
    fn boundary_events_go_to_later_bin() {
        let s = PhotonStream::new(0, vec![0, 1_000_000, 2_000_000, 3_000_000]).unwrap();
        let b = bin_counts(&s, 1e-6).unwrap();
        assert_eq!(b.counts, vec![1, 1, 1, 1]);
        assert_eq!(b.complete(), &[1, 1, 1]);
    }

    #[test]
    fn rejects_bad_width() {
        assert!(bin_counts(&PhotonStream::default(), 0.0).is_err());
        assert!(bin_counts(&PhotonStream::default(), -1.0).is_err());
    }

    #[test]
    fn poisson_mean_count() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let rate = 2e4;
        let mut t = 0.0;
        let mut ts = Vec::new();
        while t < 10.0 {
            t += -rng.random::<f64>().ln() / rate;
            ts.push((t * 1e12) as u64);
        }
        let s = PhotonStream::new(0, ts).unwrap();
        let b = bin_counts_in(&s, 1e-4, 0.0, 10.0).unwrap();
        let mean = b.total() as f64 / b.counts.len() as f64;
        let se = (2.0 / b.counts.len() as f64).sqrt();
        assert!((mean - 2.0).abs() < 3.0 * se, "{mean}");
    }

    proptest! {
        #[test]
        fn total_is_preserved(mut ts in proptest::collection::vec(0u64..1_000_000_000, 0..300), w in 1u64..50_000_000) {
            ts.sort_unstable();
            let s = PhotonStream::new(0, ts.clone()).unwrap();
            let b = bin_counts(&s, w as f64 * 1e-12).unwrap();
            prop_assert_eq!(b.total(), ts.len() as u64);
        }
    }
}
