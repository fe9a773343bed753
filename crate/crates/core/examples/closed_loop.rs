//! Simulates a run, builds the cross-correlogram and fits the transit model.
//!
//! Usage: closed_loop [drive_y] [duration_s] [flux_per_s] [transverse_sigma_m_per_s]

use std::time::Instant;

use atomtrace::config::ExperimentConfig;
use atomtrace::correlation::{cross_correlogram, fit_g2, FitOptions, FixedParams};
use atomtrace::sim::run_simulation;

fn arg(i: usize) -> Option<f64> {
    std::env::args().nth(i).and_then(|a| a.parse().ok())
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut cfg = ExperimentConfig::default();
    cfg.drive.intensity_y = arg(1).unwrap_or(0.24);
    cfg.run.duration = arg(2).unwrap_or(60.0);
    if let Some(f) = arg(3) {
        cfg.beam.flux = f;
    }
    if let Some(s) = arg(4) {
        cfg.beam.transverse_sigma = s;
    }
    let start = Instant::now();
    let out = run_simulation(&cfg, cfg.run.seed)?;
    let s = &out.truth.summary;
    println!("simulated in {:.1?}: {s:#?}", start.elapsed());
    let corr = cross_correlogram(&out.streams[0], &out.streams[1], 10e-9, 10e-6, None)?;
    let fixed = FixedParams {
        bg_to_signal: s.expected_background_rate / s.expected_signal_rate,
        drive_y: cfg.drive.intensity_y,
        gamma_total: cfg.atom.gamma_total(),
    };
    let fit = fit_g2(&corr, fixed, &FitOptions::default())?;
    println!("{}", fit.report());
    println!("1/beta = {:.3e} s, truth N = {:.3}", fit.damping_time(), s.n_bar);
    Ok(())
}
