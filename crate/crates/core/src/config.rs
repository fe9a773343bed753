//! Experiment configuration: one TOML document with a section per
//! subsystem. Physical quantities accept unit-suffixed strings
//! (`kappa_over_2pi = "3.2MHz"`) or bare SI numbers; every section is
//! optional and falls back to the apparatus defaults.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::physics::{AtomParams, CavityParams, FaradayParams};
use crate::sim::{BackgroundParams, BeamParams, DetectorParams};
use crate::stream::StreamFormat;
use crate::units;

/// Drive strength and the per-atom photon yield calibration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DriveConfig {
    /// Y = <n>/n0 of the run.
    #[serde(with = "units::number")]
    pub intensity_y: f64,
    /// Detected photons per atom, in the sense of the Mandel intercept
    /// (<a²>/<a> over the atom population), at `calibration_y`.
    #[serde(with = "units::number")]
    pub photons_per_atom: f64,
    #[serde(with = "units::number")]
    pub calibration_y: f64,
}

impl Default for DriveConfig {
    fn default() -> Self {
        Self {
            intensity_y: 0.4,
            photons_per_atom: 0.196,
            calibration_y: 0.4,
        }
    }
}

impl DriveConfig {
    pub fn validate(&self) -> Result<()> {
        crate::physics::require_non_negative("drive.intensity_y", self.intensity_y)?;
        crate::physics::require_non_negative("drive.photons_per_atom", self.photons_per_atom)?;
        crate::physics::require_positive("drive.calibration_y", self.calibration_y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    #[default]
    Binary,
    Csv,
}

impl From<OutputFormat> for StreamFormat {
    fn from(f: OutputFormat) -> Self {
        match f {
            OutputFormat::Binary => StreamFormat::Binary,
            OutputFormat::Csv => StreamFormat::Csv,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    #[serde(with = "units::time")]
    pub duration: f64,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<String>,
    pub format: OutputFormat,
    /// Length of the independent time blocks the run is split into.
    #[serde(with = "units::time")]
    pub block_duration: f64,
    /// Keep one record per atom transit in memory (short runs only).
    pub record_transits: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            duration: 300.0,
            seed: 1,
            out_dir: None,
            format: OutputFormat::Binary,
            block_duration: 10e-3,
            record_transits: false,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        crate::physics::require_positive("run.duration", self.duration)?;
        crate::physics::require_positive("run.block_duration", self.block_duration)?;
        if self.duration / self.block_duration > 1e8 {
            return Err(Error::invalid("run.block_duration", "too many blocks for the run duration"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub cavity: CavityParams,
    pub atom: AtomParams,
    pub faraday: FaradayParams,
    pub beam: BeamParams,
    pub background: BackgroundParams,
    pub detector: DetectorParams,
    pub drive: DriveConfig,
    pub run: RunConfig,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        self.cavity.validate()?;
        self.atom.validate()?;
        self.faraday.validate()?;
        self.beam.validate()?;
        self.background.validate()?;
        self.detector.validate()?;
        self.drive.validate()?;
        self.run.validate()
    }

    /// Parses a configuration document. A run sidecar is accepted too, in
    /// which case its `[config]` table is used and the summary ignored.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let mut table: toml::Table = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        if table.contains_key("summary") {
            if let Some(toml::Value::Table(inner)) = table.remove("config") {
                table = inner;
            }
        }
        let cfg: Self = table.try_into().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("configuration is always representable as TOML")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_gives_defaults() {
        let cfg = ExperimentConfig::from_toml_str("").unwrap();
        assert_eq!(cfg, ExperimentConfig::default());
    }

    #[test]
    fn unit_suffixes_are_honoured() {
        let cfg = ExperimentConfig::from_toml_str(
            r#"
            [cavity]
            kappa_over_2pi = "3.2MHz"
            waist = "56um"
            wavelength = "780nm"
            mirror_separation = "2.2mm"
            finesse = 11000
            input_transmission_ppm = 15
            output_transmission_ppm = 300
            [beam]
            tilt_angle = "2.3deg"
            [run]
            duration = "2ms"
            "#,
        )
        .unwrap();
        assert_eq!(cfg.cavity.kappa_over_2pi, 3.2e6);
        assert!((cfg.beam.tilt_angle - 2.3f64.to_radians()).abs() < 1e-15);
        assert!((cfg.run.duration - 2e-3).abs() < 1e-18);
    }

    #[test]
    fn invalid_field_is_named() {
        let err = ExperimentConfig::from_toml_str("[detector]\nefficiency = 1.5\n").unwrap_err();
        assert!(err.to_string().contains("detector.efficiency"), "{err}");
        let err = ExperimentConfig::from_toml_str("[beam]\nflux = \"3MHz\"\nbogus = 1\n").unwrap_err();
        assert!(err.to_string().contains("bogus"), "{err}");
    }

    #[test]
    fn roundtrip_is_exact() {
        let mut cfg = ExperimentConfig::default();
        cfg.beam.tilt_angle = 0.1234567890123;
        cfg.run.out_dir = Some("out".into());
        let back = ExperimentConfig::from_toml_str(&cfg.to_toml_string()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn sidecar_layout_is_accepted() {
        let text = "[config.drive]\nintensity_y = 0.7\n\n[summary]\nseed = 3\n";
        let cfg = ExperimentConfig::from_toml_str(text).unwrap();
        assert_eq!(cfg.drive.intensity_y, 0.7);
        assert_eq!(cfg.beam, ExperimentConfig::default().beam);
    }
}
