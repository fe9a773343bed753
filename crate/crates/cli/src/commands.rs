use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use atomtrace::analysis::{
    background_corrected_alpha, bin_width_grid, coincidence_fidelity, k_fold_signal_to_background, mandel_alpha, predicted_rate, summary_text,
    write_text, FidelityOutcome, MandelOptions, SignalToBackground,
};
use atomtrace::config::ExperimentConfig;
use atomtrace::correlation::{
    atom_number_vs_drive, cross_correlogram, fit_g2, Correlogram, DrivePoint, FitOptions, FixedParams,
};
use atomtrace::sim::{run_simulation, write_run};
use atomtrace::stream::{read_stream, PhotonStream};
use atomtrace::{Error, Result};
use rayon::prelude::*;

use crate::runs::{base_config, bg_to_signal, invalid, load_config, load_run, out_dir};
use crate::{CorrelateArgs, FidelityArgs, FitArgs, MandelArgs, SimulateArgs, SweepArgs};

const SWEEP_BIN_WIDTH: f64 = 10e-9;
const SWEEP_MAX_LAG: f64 = 10e-6;

/// Writes to standard output, treating a closed pipe as success.
fn print(text: &str) -> Result<()> {
    match std::io::stdout().lock().write_all(text.as_bytes()) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => {
            Err(Error::Io { path: "<stdout>".into(), source: e })
        }
        _ => Ok(()),
    }
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => write_text(p, text),
        None => print(text),
    }
}

fn read_file(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|source| Error::Io { path: path.display().to_string(), source })
}

pub fn simulate(args: &SimulateArgs) -> Result<()> {
    let mut cfg = load_config(&args.run)?;
    if let Some(f) = args.flux {
        cfg.beam.flux = f;
        cfg.validate()?;
    }
    let out = run_simulation(&cfg, cfg.run.seed)?;
    let dir = out_dir(&cfg);
    let files = write_run(&dir, &cfg, &out, cfg.run.format.into())?;
    let mut text = String::new();
    for p in files.channels.iter().chain([&files.sidecar]).chain(files.transits.as_ref()) {
        let _ = writeln!(text, "wrote {}", p.display());
    }
    text.push_str(&summary_text(&out.truth.summary)?);
    print(&text)
}

pub fn correlate(args: &CorrelateArgs) -> Result<()> {
    let s0 = read_stream(&args.ch0, None)?;
    let s1 = read_stream(&args.ch1, None)?;
    let corr = cross_correlogram(&s0, &s1, args.bin_width, args.max_lag, None)?;
    emit(args.out.as_deref(), &corr.to_csv())
}

pub fn fit(args: &FitArgs) -> Result<()> {
    let corr = Correlogram::from_csv(&read_file(&args.correlogram)?)?;
    let mut cfg = base_config(args.config.as_deref())?;
    let bg = match (args.bg_to_signal, &args.with, &args.without) {
        (Some(r), _, _) => r,
        (None, Some(w), Some(wo)) => {
            let with = load_run(w)?;
            if args.config.is_none() {
                if let Some((c, _)) = &with.sidecar {
                    cfg = c.clone();
                }
            }
            bg_to_signal(&with, &load_run(wo)?)?
        }
        _ => return Err(invalid("bg_to_signal", "give --bg-to-signal or both --with and --without")),
    };
    if let Some(y) = args.drive_y {
        cfg.drive.intensity_y = y;
    }
    let fixed = FixedParams { bg_to_signal: bg, drive_y: cfg.drive.intensity_y, gamma_total: cfg.atom.gamma_total() };
    let opts = FitOptions { exclusion: args.exclusion, fit_span: args.fit_span, ..FitOptions::default() };
    let result = fit_g2(&corr, fixed, &opts)?;
    emit(args.out.as_deref(), &result.report())
}

pub fn mandel(args: &MandelArgs) -> Result<()> {
    let streams = args.streams.iter().map(|p| read_stream(p, None)).collect::<Result<Vec<_>>>()?;
    let merged = PhotonStream::merged(0, &streams.iter().collect::<Vec<_>>());
    let opts = MandelOptions { resamples: args.resamples, seed: args.seed, ..MandelOptions::default() };
    let widths = bin_width_grid(args.from, args.to, args.steps);
    let fit = mandel_alpha(&merged, &widths, (args.fit_min, args.fit_max), &opts)?;
    emit(args.out.as_deref(), &summary_text(&fit)?)
}

pub fn fidelity(args: &FidelityArgs) -> Result<()> {
    let with = load_run(&args.with)?.merged();
    let without = load_run(&args.without)?.merged();
    let mut text = String::from(
        "gate_s,coincidences_with,coincidences_without,fidelity,fidelity_lower_bound,outcome,k,k_fold_ratio,k_fold_error\n",
    );
    for &gate in &args.gates {
        let r = coincidence_fidelity(&with, &without, gate)?;
        let k = k_fold_signal_to_background(&with, &without, gate, args.k)?;
        let (outcome, lower) = match r.outcome {
            FidelityOutcome::Measured => ("measured", String::new()),
            FidelityOutcome::BackgroundFree { lower_bound } => ("background_free", lower_bound.to_string()),
            FidelityOutcome::NoSignal => ("no_signal", String::new()),
        };
        let (ratio, error) = match k.signal_to_background {
            SignalToBackground::Value { ratio, error } => (ratio.to_string(), error.to_string()),
            SignalToBackground::LowerBound { ratio } => (format!(">{ratio}"), String::new()),
            SignalToBackground::NoData => (String::new(), String::new()),
        };
        let f = r.fidelity.map(|f| f.to_string()).unwrap_or_default();
        let _ = writeln!(
            text,
            "{gate:e},{},{},{f},{lower},{outcome},{},{ratio},{error}",
            r.coincidences_with, r.coincidences_without, args.k
        );
    }
    emit(args.out.as_deref(), &text)
}

struct SweepPoint {
    drive_y: f64,
    corr: Correlogram,
    merged: PhotonStream,
    bg_to_signal: f64,
    signal_rate: f64,
    background_rate: f64,
}

fn sweep_point(cfg: &ExperimentConfig, drive_y: f64) -> Result<SweepPoint> {
    let mut with_cfg = cfg.clone();
    with_cfg.drive.intensity_y = drive_y;
    with_cfg.validate()?;
    let mut without_cfg = with_cfg.clone();
    without_cfg.beam.flux = 0.0;
    let with = run_simulation(&with_cfg, cfg.run.seed)?;
    let without = run_simulation(&without_cfg, cfg.run.seed)?;
    let rate = |s: &[PhotonStream; 2]| (s[0].len() + s[1].len()) as f64 / cfg.run.duration;
    let background = rate(&without.streams);
    let signal_rate = rate(&with.streams) - background;
    let corr = cross_correlogram(&with.streams[0], &with.streams[1], SWEEP_BIN_WIDTH, SWEEP_MAX_LAG, None)?;
    Ok(SweepPoint {
        drive_y,
        corr,
        merged: PhotonStream::merged(0, &[&with.streams[0], &with.streams[1]]),
        bg_to_signal: if signal_rate > 0.0 { background / signal_rate } else { f64::INFINITY },
        signal_rate,
        background_rate: background,
    })
}

pub fn sweep(args: &SweepArgs) -> Result<()> {
    let cfg = load_config(&args.run)?;
    if args.drives.is_empty() {
        return Err(invalid("drives", "need at least one drive strength"));
    }
    let dir = out_dir(&cfg);
    std::fs::create_dir_all(&dir).map_err(|source| Error::Io { path: dir.display().to_string(), source })?;
    let points = args.drives.iter().map(|&y| sweep_point(&cfg, y)).collect::<Result<Vec<_>>>()?;

    let gamma = cfg.atom.gamma_total();
    let results: Vec<_> = points
        .par_iter()
        .map(|p| {
            let fixed = FixedParams { bg_to_signal: p.bg_to_signal, drive_y: p.drive_y, gamma_total: gamma };
            let fit = fit_g2(&p.corr, fixed, &FitOptions::default());
            let alpha = mandel_alpha(
                &p.merged,
                &bin_width_grid(50e-6, 100e-6, 11),
                (0.0, f64::INFINITY),
                &MandelOptions { seed: cfg.run.seed, ..MandelOptions::default() },
            );
            (p, fit, alpha)
        })
        .collect();

    let mut table = String::from(
        "drive_y,n_bar,n_bar_error,transit_t_s,omega_over_2pi_hz,damping_time_s,reduced_chi2,alpha,alpha_error,signal_rate,predicted_rate,status\n",
    );
    let mut drive_points = Vec::new();
    for (p, fit, alpha) in &results {
        // α is reported for the atomic photons alone, with the background dilution removed.
        let (a, ae) = match alpha {
            Ok(m) => match background_corrected_alpha(1.0, p.signal_rate + p.background_rate, p.background_rate) {
                Ok(scale) => (m.alpha * scale, m.std_errors.0 * scale),
                Err(_) => (f64::NAN, f64::NAN),
            },
            Err(_) => (f64::NAN, f64::NAN),
        };
        let _ = match fit {
            Ok(f) => {
                drive_points.push(DrivePoint::from(f));
                let predicted = predicted_rate(f.n_bar(), a.max(0.0), f.transit_t()).unwrap_or(f64::NAN);
                writeln!(
                    table,
                    "{},{},{},{:e},{:e},{:e},{},{a},{ae},{},{predicted},ok",
                    p.drive_y,
                    f.n_bar(),
                    f.std_errors[0],
                    f.transit_t(),
                    f.omega_over_2pi(),
                    f.damping_time(),
                    f.reduced_chi2,
                    p.signal_rate
                )
            }
            Err(e) => writeln!(
                table,
                "{},nan,nan,nan,nan,nan,nan,{a},{ae},{},nan,\"{}\"",
                p.drive_y,
                p.signal_rate,
                e.to_string().replace('"', "'")
            ),
        };
    }
    write_text(&dir.join("sweep.csv"), &table)?;
    print(&table)?;

    if drive_points.len() >= 3 {
        let sat = atom_number_vs_drive(&drive_points, &cfg.cavity)?;
        let max_y = args.drives.iter().copied().fold(0.0, f64::max);
        let mut text = format!("# scale = {:e} m^-3, n0 = {}\ndrive_y,model_n_bar\n", sat.scale, sat.n0);
        for (y, m) in sat.overlay(max_y, 101, &cfg.cavity) {
            let _ = writeln!(text, "{y},{m}");
        }
        write_text(&dir.join("saturation.csv"), &text)?;
        print(&format!("saturation fit: n0 = {:.3}, chi2 = {:.2}\n", sat.n0, sat.chi2))?;
    }
    Ok(())
}
