use serde::Serialize;

use super::fit::G2FitResult;
use crate::error::{Error, Result};
use crate::physics::{saturation_volume_integral, CavityParams};

/// Transverse half-width of the integration box in waists.
const BOX_HALF_WIDTH: f64 = 2.0;

/// One measured atom number at a drive setting.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DrivePoint {
    /// Drive intensity Y in units of the nominal n₀.
    pub drive_y: f64,
    pub n_bar: f64,
    pub n_bar_error: f64,
}

impl From<&G2FitResult> for DrivePoint {
    fn from(fit: &G2FitResult) -> Self {
        Self { drive_y: fit.fixed.drive_y, n_bar: fit.n_bar(), n_bar_error: fit.std_errors[0] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SaturationRow {
    pub drive_y: f64,
    pub n_bar: f64,
    pub n_bar_error: f64,
    pub model: f64,
}

/// Measured N̄(Y) with the fitted saturation curve A·V(Y/n₀), where V is the
/// volume integral of the collection-weighted saturation weight.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SaturationFit {
    /// Vertical scale A (1/m³).
    pub scale: f64,
    /// Fitted saturation drive in the same units as `drive_y`.
    pub n0: f64,
    pub chi2: f64,
    pub rows: Vec<SaturationRow>,
}

impl SaturationFit {
    pub fn model(&self, drive_y: f64, cavity: &CavityParams) -> f64 {
        self.scale * volume(drive_y / self.n0, cavity)
    }

    /// Model curve sampled at `count` drives spread evenly over [0, `max_y`].
    pub fn overlay(&self, max_y: f64, count: usize, cavity: &CavityParams) -> Vec<(f64, f64)> {
        (0..count.max(2))
            .map(|i| {
                let y = max_y * i as f64 / (count.max(2) - 1) as f64;
                (y, self.model(y, cavity))
            })
            .collect()
    }
}

fn volume(s: f64, cavity: &CavityParams) -> f64 {
    saturation_volume_integral(s, cavity, BOX_HALF_WIDTH, cavity.wavelength)
}

/// Best scale and χ² at a fixed n₀.
fn scaled(points: &[DrivePoint], n0: f64, cavity: &CavityParams) -> (f64, f64) {
    let v: Vec<f64> = points.iter().map(|p| volume(p.drive_y / n0, cavity)).collect();
    let w: Vec<f64> = points.iter().map(|p| 1.0 / p.n_bar_error.powi(2)).collect();
    let num: f64 = (0..points.len()).map(|i| w[i] * points[i].n_bar * v[i]).sum();
    let den: f64 = (0..points.len()).map(|i| w[i] * v[i] * v[i]).sum();
    let a = if den > 0.0 { num / den } else { 0.0 };
    let chi2 = (0..points.len()).map(|i| w[i] * (points[i].n_bar - a * v[i]).powi(2)).sum();
    (a, chi2)
}

/// Fits the saturation curve to N̄ measured at several drive strengths.
///
/// The scale is solved in closed form for each n₀ and n₀ is found by a
/// logarithmic grid scan refined with golden-section search.
pub fn atom_number_vs_drive(points: &[DrivePoint], cavity: &CavityParams) -> Result<SaturationFit> {
    if points.len() < 3 {
        return Err(Error::invalid("points", format!("need at least 3 drive settings, got {}", points.len())));
    }
    for p in points {
        if !(p.drive_y > 0.0 && p.n_bar.is_finite() && p.n_bar_error > 0.0) {
            return Err(Error::invalid("points", format!("need Y > 0 and a positive N̄ error, got {p:?}")));
        }
    }
    let chi = |ln_n0: f64| scaled(points, ln_n0.exp(), cavity).1;
    let grid: Vec<f64> = (0..=40).map(|i| (1e-3f64).ln() + i as f64 * (1e6f64).ln() / 40.0).collect();
    let best = (0..grid.len()).min_by(|&i, &j| chi(grid[i]).total_cmp(&chi(grid[j]))).unwrap_or(0);
    let (mut lo, mut hi) = (grid[best.saturating_sub(1)], grid[(best + 1).min(grid.len() - 1)]);
    let phi = 0.5 * (5f64.sqrt() - 1.0);
    let (mut c, mut d) = (hi - phi * (hi - lo), lo + phi * (hi - lo));
    let (mut fc, mut fd) = (chi(c), chi(d));
    for _ in 0..40 {
        if fc < fd {
            hi = d;
            (d, fd) = (c, fc);
            c = hi - phi * (hi - lo);
            fc = chi(c);
        } else {
            lo = c;
            (c, fc) = (d, fd);
            d = lo + phi * (hi - lo);
            fd = chi(d);
        }
    }
    let n0 = (0.5 * (lo + hi)).exp();
    let (scale, chi2) = scaled(points, n0, cavity);
    let rows = points
        .iter()
        .map(|p| SaturationRow {
            drive_y: p.drive_y,
            n_bar: p.n_bar,
            n_bar_error: p.n_bar_error,
            model: scale * volume(p.drive_y / n0, cavity),
        })
        .collect();
    Ok(SaturationFit { scale, n0, chi2, rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::physics::relative_coupling_sq;
    use nalgebra::Vector3;

    /// Midpoint-rule integral of u·(s u)/(1 + s u) over 4w0 × 4w0 × 2λ.
    fn brute_force(s: f64, cavity: &CavityParams) -> f64 {
        let (nt, nz) = (120, 200);
        let half = 2.0 * cavity.waist;
        let len = 2.0 * cavity.wavelength;
        let (hx, hz) = (2.0 * half / nt as f64, len / nz as f64);
        let mut total = 0.0;
        for i in 0..nt {
            for j in 0..nt {
                for k in 0..nz {
                    let p = Vector3::new(
                        -half + (i as f64 + 0.5) * hx,
                        -half + (j as f64 + 0.5) * hx,
                        (k as f64 + 0.5) * hz,
                    );
                    let u = relative_coupling_sq(&p, cavity);
                    total += u * s * u / (1.0 + s * u);
                }
            }
        }
        total * hx * hx * hz
    }

    #[test]
    fn saturation_ratio_matches_brute_force_quadrature() {
        let c = CavityParams::default();
        let ratio = volume(2.0, &c) / volume(0.05, &c);
        let oracle = brute_force(2.0, &c) / brute_force(0.05, &c);
        assert!((ratio / oracle - 1.0).abs() < 1e-3, "{ratio} vs {oracle}");
    }

    #[test]
    fn weak_drive_shape_is_linear_in_drive() {
        let c = CavityParams::default();
        let r = volume(2e-4, &c) / volume(1e-4, &c);
        assert!((r - 2.0).abs() < 1e-3, "{r}");
    }

    #[test]
    fn model_is_monotone_in_drive() {
        let c = CavityParams::default();
        let v: Vec<f64> = [0.01, 0.05, 0.1, 0.3, 1.0, 2.0, 5.0].iter().map(|&s| volume(s, &c)).collect();
        assert!(v.windows(2).all(|w| w[1] >= w[0]), "{v:?}");
    }

    #[test]
    fn recovers_synthetic_saturation_curve() {
        let c = CavityParams::default();
        let truth_scale = 0.9 / volume(0.24 / 0.8, &c);
        let points: Vec<DrivePoint> = [0.05, 0.1, 0.24, 0.5, 1.0, 2.0]
            .iter()
            .map(|&y| DrivePoint { drive_y: y, n_bar: truth_scale * volume(y / 0.8, &c), n_bar_error: 0.02 })
            .collect();
        let fit = atom_number_vs_drive(&points, &c).unwrap();
        assert!((fit.n0 / 0.8 - 1.0).abs() < 1e-3, "{fit:?}");
        assert!(fit.chi2 < 1e-6);
        assert_eq!(fit.overlay(2.0, 5, &c).len(), 5);
    }

    #[test]
    fn needs_three_settings() {
        let p = DrivePoint { drive_y: 0.1, n_bar: 1.0, n_bar_error: 0.1 };
        assert!(atom_number_vs_drive(&[p, p], &CavityParams::default()).is_err());
    }
}
