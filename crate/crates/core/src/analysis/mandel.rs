use rand::Rng;
use serde::Serialize;

use super::binning::bin_counts;
use crate::error::{Error, Result};
use crate::rng::{substream, Domain};
use crate::stream::PhotonStream;

/// Moments of the counts at one bin width.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MandelPoint {
    pub bin_width: f64,
    /// ⟨n⟩.
    pub mean: f64,
    /// ⟨n²⟩/⟨n⟩ − 1.
    pub y: f64,
    /// Bootstrap standard error of `y`.
    pub y_error: f64,
    pub bins: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MandelFitResult {
    /// Intercept: detected photons per atom.
    pub alpha: f64,
    /// Slope, the atom-number correlation g_aa.
    pub slope: f64,
    /// Range of ⟨n⟩ actually used.
    pub fit_range: (f64, f64),
    /// Standard errors of (alpha, slope).
    pub std_errors: (f64, f64),
    pub reduced_chi2: f64,
    pub points: Vec<MandelPoint>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MandelOptions {
    pub resamples: usize,
    /// Number of contiguous blocks the bins are grouped into for resampling.
    pub blocks: usize,
    pub seed: u64,
}

impl Default for MandelOptions {
    fn default() -> Self {
        Self { resamples: 100, blocks: 200, seed: 0 }
    }
}

/// Widths from `from` to `to` (s) inclusive in `count` equal steps.
pub fn bin_width_grid(from: f64, to: f64, count: usize) -> Vec<f64> {
    if count < 2 {
        return vec![from];
    }
    (0..count).map(|i| from + (to - from) * i as f64 / (count - 1) as f64).collect()
}

fn moment_y(s1: f64, s2: f64) -> f64 {
    s2 / s1 - 1.0
}

fn point<R: Rng + ?Sized>(counts: &[u64], bin_width: f64, opts: &MandelOptions, rng: &mut R) -> Option<MandelPoint> {
    let n = counts.len();
    let (s1, s2) = counts.iter().fold((0.0, 0.0), |(a, b), &c| (a + c as f64, b + (c * c) as f64));
    if n == 0 || s1 == 0.0 {
        return None;
    }
    let blocks = opts.blocks.clamp(2, n.max(2));
    let per = n.div_ceil(blocks);
    let sums: Vec<(f64, f64)> = counts
        .chunks(per)
        .map(|ch| ch.iter().fold((0.0, 0.0), |(a, b), &c| (a + c as f64, b + (c * c) as f64)))
        .collect();
    let mut ys = Vec::with_capacity(opts.resamples);
    for _ in 0..opts.resamples {
        let (mut a, mut b) = (0.0, 0.0);
        for _ in 0..sums.len() {
            let (x, y) = sums[rng.random_range(0..sums.len())];
            a += x;
            b += y;
        }
        if a > 0.0 {
            ys.push(moment_y(a, b));
        }
    }
    let m = ys.iter().sum::<f64>() / ys.len().max(1) as f64;
    let var = ys.iter().map(|y| (y - m).powi(2)).sum::<f64>() / (ys.len().max(2) - 1) as f64;
    Some(MandelPoint {
        bin_width,
        mean: s1 / n as f64,
        y: moment_y(s1, s2),
        y_error: var.sqrt(),
        bins: n,
    })
}

/// Weighted straight-line fit y = a + b x. Returns (a, b, σa, σb, χ²).
pub(crate) fn weighted_line(x: &[f64], y: &[f64], sigma: &[f64]) -> Result<(f64, f64, f64, f64, f64)> {
    let floor = sigma.iter().copied().filter(|s| *s > 0.0).fold(f64::INFINITY, f64::min);
    let floor = if floor.is_finite() { floor } else { 1.0 };
    let w: Vec<f64> = sigma.iter().map(|s| 1.0 / s.max(floor).powi(2)).collect();
    let (mut sw, mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for i in 0..x.len() {
        sw += w[i];
        sx += w[i] * x[i];
        sy += w[i] * y[i];
        sxx += w[i] * x[i] * x[i];
        sxy += w[i] * x[i] * y[i];
    }
    let det = sw * sxx - sx * sx;
    let xmin = x.iter().copied().fold(f64::INFINITY, f64::min);
    let xmax = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(det > 0.0) || xmax - xmin <= 1e-12 * xmax.abs().max(1.0) {
        return Err(Error::DegenerateFit("all abscissae are equal; the line is undetermined".into()));
    }
    let a = (sxx * sy - sx * sxy) / det;
    let b = (sw * sxy - sx * sy) / det;
    let chi2 = (0..x.len()).map(|i| w[i] * (y[i] - a - b * x[i]).powi(2)).sum();
    Ok((a, b, (sxx / det).sqrt(), (sw / det).sqrt(), chi2))
}

/// Extracts the photons-per-atom intercept α and the slope g_aa from the
/// bin-width dependence of ⟨n²⟩/⟨n⟩ − 1 = g_aa⟨n⟩ + α.
///
/// Points whose ⟨n⟩ falls outside `fit_window` are computed but not fitted.
pub fn mandel_alpha(
    stream: &PhotonStream,
    bin_widths: &[f64],
    fit_window: (f64, f64),
    opts: &MandelOptions,
) -> Result<MandelFitResult> {
    let mut points = Vec::new();
    for (i, &w) in bin_widths.iter().enumerate() {
        let bins = bin_counts(stream, w)?;
        let mut rng = substream(opts.seed, Domain::Analysis, i as u64);
        if let Some(p) = point(bins.complete(), w, opts, &mut rng) {
            points.push(p);
        }
    }
    let used: Vec<&MandelPoint> =
        points.iter().filter(|p| p.mean >= fit_window.0 && p.mean <= fit_window.1).collect();
    if used.len() < 3 {
        return Err(Error::invalid(
            "bin_widths",
            format!("need at least 3 bin widths with <n> in [{}, {}], got {}", fit_window.0, fit_window.1, used.len()),
        ));
    }
    let x: Vec<f64> = used.iter().map(|p| p.mean).collect();
    let y: Vec<f64> = used.iter().map(|p| p.y).collect();
    let s: Vec<f64> = used.iter().map(|p| p.y_error).collect();
    let (alpha, slope, sa, sb, chi2) = weighted_line(&x, &y, &s)?;
    let lo = x.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(MandelFitResult {
        alpha,
        slope,
        fit_range: (lo, hi),
        std_errors: (sa, sb),
        reduced_chi2: chi2 / (x.len() - 2).max(1) as f64,
        points,
    })
}

/// Undoes the dilution of the intercept by uncorrelated background counts.
///
/// Poisson background adds to ⟨n⟩ but not to the excess variance, so the
/// fitted intercept is α·R_s/(R_s + R_b). Rates are detections per second of
/// the analysed stream and of a background-only measurement.
pub fn background_corrected_alpha(alpha: f64, total_rate: f64, background_rate: f64) -> Result<f64> {
    if !(background_rate >= 0.0 && total_rate > background_rate) {
        return Err(Error::invalid(
            "background_rate",
            format!("need 0 <= background rate < total rate, got {background_rate} and {total_rate}"),
        ));
    }
    Ok(alpha * total_rate / (total_rate - background_rate))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Poisson};

    fn poisson_stream(rate: f64, duration: f64, seed: u64) -> PhotonStream {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = Poisson::new(rate * duration).unwrap().sample(&mut rng) as usize;
        PhotonStream::from_unsorted(0, (0..n).map(|_| (rng.random::<f64>() * duration * 1e12) as u64).collect())
    }

    /// Atoms arrive as a Poisson process; each gives a Poisson number of
    /// photons spread over a short burst.
    fn compound_stream(atom_rate: f64, alpha: f64, duration: f64, seed: u64) -> PhotonStream {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let atoms = Poisson::new(atom_rate * duration).unwrap().sample(&mut rng) as usize;
        let per = Poisson::new(alpha).unwrap();
        let mut ts = Vec::new();
        for _ in 0..atoms {
            let t0 = rng.random::<f64>() * duration;
            for _ in 0..per.sample(&mut rng) as usize {
                ts.push(((t0 + rng.random::<f64>() * 1e-7) * 1e12) as u64);
            }
        }
        PhotonStream::from_unsorted(0, ts)
    }

    #[test]
    fn poisson_stream_gives_unit_slope_and_zero_intercept() {
        let mut ok = 0;
        let trials = 20;
        for seed in 0..trials {
            let s = poisson_stream(4e4, 20.0, seed);
            let fit = mandel_alpha(&s, &bin_width_grid(50e-6, 100e-6, 11), (0.0, 10.0), &MandelOptions::default())
                .unwrap();
            assert!((fit.slope - 1.0).abs() < 0.05, "{fit:?}");
            if fit.alpha.abs() < 3.0 * fit.std_errors.0 {
                ok += 1;
            }
        }
        assert!(ok >= 18, "{ok}/{trials}");
    }

    #[test]
    fn compound_poisson_recovers_alpha() {
        let s = compound_stream(2e4, 0.5, 30.0, 7);
        let fit =
            mandel_alpha(&s, &bin_width_grid(50e-6, 100e-6, 11), (0.0, 10.0), &MandelOptions::default()).unwrap();
        assert!((fit.alpha / 0.5 - 1.0).abs() < 0.1, "{fit:?}");
        for p in &fit.points {
            assert!((p.y - p.mean - 0.5).abs() < 4.0 * p.y_error + 0.02, "{p:?}");
        }
    }

    #[test]
    fn background_dilution_is_undone() {
        let signal = compound_stream(2e4, 0.5, 30.0, 8);
        let background = poisson_stream(1e4, 30.0, 9);
        let both = PhotonStream::merged(0, &[&signal, &background]);
        let widths = bin_width_grid(50e-6, 100e-6, 11);
        let fit = mandel_alpha(&both, &widths, (0.0, 10.0), &MandelOptions::default()).unwrap();
        let total = both.len() as f64 / 30.0;
        let corrected = background_corrected_alpha(fit.alpha, total, background.len() as f64 / 30.0).unwrap();
        assert!(fit.alpha < 0.45, "{fit:?}");
        assert!((corrected / 0.5 - 1.0).abs() < 0.1, "{corrected}");
        assert!(background_corrected_alpha(0.1, 10.0, 10.0).is_err());
    }

    #[test]
    fn degenerate_x_range_is_an_error() {
        let s = poisson_stream(4e4, 2.0, 1);
        let err = mandel_alpha(&s, &[5e-5, 5e-5, 5e-5], (0.0, 10.0), &MandelOptions::default()).unwrap_err();
        assert!(matches!(err, Error::DegenerateFit(_)), "{err}");
        assert!(mandel_alpha(&s, &[5e-5, 6e-5], (0.0, 10.0), &MandelOptions::default()).is_err());
    }
}
