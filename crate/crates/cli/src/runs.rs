use std::path::{Path, PathBuf};

use atomtrace::config::{ExperimentConfig, OutputFormat};
use atomtrace::sim::{parse_sidecar, RunSummary};
use atomtrace::stream::{joint_span_s, read_stream, PhotonStream};
use atomtrace::{Error, Result};

use crate::{Format, RunOptions};

const DEFAULT_OUT_DIR: &str = "atomtrace-out";

pub fn invalid(field: &str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter { field: field.into(), reason: reason.into() }
}

pub fn base_config(path: Option<&Path>) -> Result<ExperimentConfig> {
    match path {
        Some(p) => ExperimentConfig::load(p),
        None => Ok(ExperimentConfig::default()),
    }
}

/// Configuration file plus command-line overrides, validated.
pub fn load_config(opts: &RunOptions) -> Result<ExperimentConfig> {
    let mut cfg = base_config(opts.config.as_deref())?;
    if let Some(seed) = opts.seed {
        cfg.run.seed = seed;
    }
    if let Some(d) = opts.duration {
        cfg.run.duration = d;
    }
    if let Some(f) = opts.format {
        cfg.run.format = match f {
            Format::Binary => OutputFormat::Binary,
            Format::Csv => OutputFormat::Csv,
        };
    }
    if let Some(y) = opts.drive_y {
        cfg.drive.intensity_y = y;
    }
    if let Some(out) = &opts.out {
        cfg.run.out_dir = Some(out.display().to_string());
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn out_dir(cfg: &ExperimentConfig) -> PathBuf {
    PathBuf::from(cfg.run.out_dir.as_deref().unwrap_or(DEFAULT_OUT_DIR))
}

/// Both channels of a run directory written by `simulate`.
pub struct RunDir {
    pub streams: [PhotonStream; 2],
    /// Measurement duration: the simulated duration when a sidecar is present,
    /// otherwise the joint span of the streams.
    pub duration: f64,
    pub sidecar: Option<(ExperimentConfig, RunSummary)>,
}

impl RunDir {
    pub fn merged(&self) -> PhotonStream {
        PhotonStream::merged(0, &[&self.streams[0], &self.streams[1]])
    }

    /// Detections per second summed over both channels.
    pub fn rate(&self) -> f64 {
        (self.streams[0].len() + self.streams[1].len()) as f64 / self.duration
    }
}

fn channel_file(dir: &Path, ch: u8) -> Result<PathBuf> {
    ["phts", "csv"]
        .iter()
        .map(|ext| dir.join(format!("ch{ch}.{ext}")))
        .find(|p| p.exists())
        .ok_or_else(|| {
            Error::Io {
                path: dir.join(format!("ch{ch}.phts")).display().to_string(),
                source: std::io::Error::new(std::io::ErrorKind::NotFound, "no channel stream in run directory"),
            }
        })
}

pub fn load_run(dir: &Path) -> Result<RunDir> {
    let s0 = read_stream(&channel_file(dir, 0)?, Some(0))?;
    let s1 = read_stream(&channel_file(dir, 1)?, Some(1))?;
    let sidecar_path = dir.join("ground_truth.toml");
    let sidecar = if sidecar_path.exists() {
        let text = std::fs::read_to_string(&sidecar_path)
            .map_err(|source| Error::Io { path: sidecar_path.display().to_string(), source })?;
        Some(parse_sidecar(&text)?)
    } else {
        None
    };
    let duration = match &sidecar {
        Some((_, s)) => s.duration_s,
        None => joint_span_s(&[&s0, &s1]),
    };
    if !(duration > 0.0) {
        return Err(Error::Degenerate(format!("{}: run has no measurable duration", dir.display())));
    }
    Ok(RunDir { streams: [s0, s1], duration, sidecar })
}

/// R_b/R_s from a run with atoms and a background-only run.
pub fn bg_to_signal(with: &RunDir, without: &RunDir) -> Result<f64> {
    let background = without.rate();
    let signal = with.rate() - background;
    if !(signal > 0.0) {
        return Err(Error::Degenerate(format!(
            "run with atoms ({:.1}/s) is not brighter than the background run ({background:.1}/s)",
            with.rate()
        )));
    }
    Ok(background / signal)
}
