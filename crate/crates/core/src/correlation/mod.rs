//! Two-channel intensity correlation: correlogram construction, the transit
//! model fit and the atom-number saturation curve.

mod correlogram;
mod fit;
mod saturation;

pub use correlogram::{cross_correlogram, pair_histogram, Correlogram};
pub use fit::{chi2_and_gradient, fit_g2, initial_guess, FitOptions, FixedParams, G2FitResult};
pub use saturation::{atom_number_vs_drive, DrivePoint, SaturationFit, SaturationRow};
