//! Single-channel statistics of photon streams: binned counts, the Mandel
//! photons-per-atom estimate, waiting times, coincidence fidelity and k-fold
//! signal-to-background.

mod binning;
mod coincidence;
mod mandel;
mod output;
mod waiting;

pub use binning::{bin_counts, bin_counts_in, BinnedCounts};
pub use coincidence::{
    coincidence_fidelity, k_fold_count, k_fold_signal_to_background, predicted_rate, FidelityOutcome,
    FidelityReport, KFoldReport, SignalToBackground, ZERO_COUNT_UPPER_LIMIT,
};
pub use mandel::{background_corrected_alpha, bin_width_grid, mandel_alpha, MandelFitResult, MandelOptions, MandelPoint};
pub use output::{histogram_csv, summary_text, write_text, HISTOGRAM_HEADER};
pub use waiting::{consecutive_coincidences, waiting_time_distribution, WaitingTimeHistogram};
