use serde::Serialize;

use super::binning::width_ps;
use super::waiting::consecutive_coincidences;
use crate::error::{Error, Result};
use crate::physics::{require_non_negative, require_positive};
use crate::stream::PhotonStream;

/// One-sided 95% Poisson upper limit on the mean when zero events are seen.
pub const ZERO_COUNT_UPPER_LIMIT: f64 = 2.995_732_273_553_991;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum FidelityOutcome {
    /// Both runs produced coincidences.
    Measured,
    /// No background coincidences were seen; the reported fidelity is 1 and
    /// `lower_bound` uses the 95% upper limit on the background.
    BackgroundFree { lower_bound: f64 },
    /// No coincidences with atoms; fidelity is undefined.
    NoSignal,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FidelityReport {
    /// Gate length (s).
    pub gate_length: f64,
    pub coincidences_with: u64,
    pub coincidences_without: u64,
    /// 1 − c_without/c_with with c_without rescaled to the duration of the
    /// with-atoms run, clamped to [0, 1]. `None` when there is no signal.
    pub fidelity: Option<f64>,
    pub outcome: FidelityOutcome,
}

fn span_of(stream: &PhotonStream) -> f64 {
    stream.span_s()
}

/// Two-photon detection fidelity at one gate length from a run with atoms
/// and a run without.
///
/// Coincidences are consecutive detections closer than the gate (the
/// integral of the waiting-time distribution). When the two runs span
/// different durations the background count is rescaled to the duration of
/// the with-atoms run.
pub fn coincidence_fidelity(with: &PhotonStream, without: &PhotonStream, gate: f64) -> Result<FidelityReport> {
    let c_with = consecutive_coincidences(with, gate)?;
    let c_without = consecutive_coincidences(without, gate)?;
    let scale = match (span_of(with), span_of(without)) {
        (a, b) if a > 0.0 && b > 0.0 => a / b,
        _ => 1.0,
    };
    let (fidelity, outcome) = if c_with == 0 {
        (None, FidelityOutcome::NoSignal)
    } else if c_without == 0 {
        let lower = (1.0 - ZERO_COUNT_UPPER_LIMIT * scale / c_with as f64).max(0.0);
        (Some(1.0), FidelityOutcome::BackgroundFree { lower_bound: lower })
    } else {
        let f = 1.0 - c_without as f64 * scale / c_with as f64;
        (Some(f.clamp(0.0, 1.0)), FidelityOutcome::Measured)
    };
    Ok(FidelityReport { gate_length: gate, coincidences_with: c_with, coincidences_without: c_without, fidelity, outcome })
}

/// Number of detections whose own gate of length `window`, opened at the
/// detection and not extended by later ones, contains at least `k`
/// detections including the opener.
pub fn k_fold_count(stream: &PhotonStream, window: f64, k: usize) -> Result<u64> {
    if k == 0 {
        return Err(Error::invalid("k", "must be at least 1"));
    }
    let w = width_ps("window", window)?;
    let ts = stream.timestamps();
    let mut hi = 0;
    let mut count = 0;
    for (i, &t) in ts.iter().enumerate() {
        hi = hi.max(i);
        while hi < ts.len() && ts[hi] - t < w {
            hi += 1;
        }
        if hi - i >= k {
            count += 1;
        }
    }
    Ok(count)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SignalToBackground {
    Value { ratio: f64, error: f64 },
    /// No background events: the ratio is at least this value.
    LowerBound { ratio: f64 },
    /// Neither run produced a k-fold event.
    NoData,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KFoldReport {
    pub k: usize,
    pub window: f64,
    pub count_with: u64,
    pub count_without: u64,
    pub rate_with: f64,
    pub rate_without: f64,
    pub signal_to_background: SignalToBackground,
}

/// k-fold signal-to-background (r_with − r_without)/r_without with Poisson
/// errors.
pub fn k_fold_signal_to_background(
    with: &PhotonStream,
    without: &PhotonStream,
    window: f64,
    k: usize,
) -> Result<KFoldReport> {
    let n_with = k_fold_count(with, window, k)?;
    let n_without = k_fold_count(without, window, k)?;
    let (t_with, t_without) = (span_of(with), span_of(without));
    if !(t_with > 0.0 && t_without > 0.0) {
        return Err(Error::Degenerate("both streams need at least two detections to define a duration".into()));
    }
    let r_with = n_with as f64 / t_with;
    let r_without = n_without as f64 / t_without;
    let sb = if n_without == 0 {
        if n_with == 0 {
            SignalToBackground::NoData
        } else {
            SignalToBackground::LowerBound { ratio: r_with / (ZERO_COUNT_UPPER_LIMIT / t_without) - 1.0 }
        }
    } else {
        let q = r_with / r_without;
        let rel = (1.0 / n_with.max(1) as f64 + 1.0 / n_without as f64).sqrt();
        SignalToBackground::Value { ratio: q - 1.0, error: q * rel }
    };
    Ok(KFoldReport {
        k,
        window,
        count_with: n_with,
        count_without: n_without,
        rate_with: r_with,
        rate_without: r_without,
        signal_to_background: sb,
    })
}

/// Macroscopic signal rate R_s = N̄α/(2T).
pub fn predicted_rate(n_bar: f64, alpha: f64, transit_t: f64) -> Result<f64> {
    require_non_negative("n_bar", n_bar)?;
    require_non_negative("alpha", alpha)?;
    require_positive("transit_t", transit_t)?;
    Ok(n_bar * alpha / (2.0 * transit_t))
}
