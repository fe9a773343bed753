//! End-to-end orchestration: calibration, block-parallel generation, the
//! detector pass and the ground-truth sidecar.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::background::{generate_background, Emission, Source};
use super::beam::{sample_transits, Transit, TransitSampler};
use super::detector::{route, settle};
use super::emission::EmissionModel;
use crate::config::ExperimentConfig;
use crate::error::{Error, Result};
use crate::physics::DriveParams;
use crate::rng::{substream, Domain};
use crate::stream::{write_stream, PhotonStream, StreamFormat};

const PILOT_CHUNKS: u64 = 64;
const PILOT_PER_CHUNK: usize = 6_250;
const TRUTH_TRANSITS: usize = 40_000;
const TRUTH_STEPS: usize = 240;
const LOBE_PHASES: usize = 16;

/// Photon-number statistics of the emission process over a pilot sample of
/// transits.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PilotStats {
    /// Mean emitted photons per atom entering the box.
    pub mean: f64,
    /// Emitted ⟨a(a−1)⟩/⟨a⟩, the Mandel-effective photons per atom.
    pub mandel: f64,
}

fn pilot_transits(cfg: &ExperimentConfig, seed: u64) -> Result<Vec<Vec<Transit>>> {
    let sampler = TransitSampler::new(&cfg.beam, &cfg.cavity)?;
    Ok((0..PILOT_CHUNKS)
        .into_par_iter()
        .map(|c| {
            let mut rng = substream(seed, Domain::Calibration, c);
            (0..PILOT_PER_CHUNK).map(|_| sampler.sample(0.0, &mut rng)).collect()
        })
        .collect())
}

fn pilot_stats(model: &EmissionModel, chunks: &[Vec<Transit>], seed: u64) -> PilotStats {
    let (n, s1, s2) = chunks
        .par_iter()
        .enumerate()
        .map(|(c, transits)| {
            let mut rng = substream(seed, Domain::Calibration, PILOT_CHUNKS + c as u64);
            let mut buf = Vec::new();
            let (mut s1, mut s2) = (0.0, 0.0);
            for tr in transits {
                buf.clear();
                model.emit(tr, &mut rng, &mut buf);
                let a = buf.len() as f64;
                s1 += a;
                s2 += a * (a - 1.0);
            }
            (transits.len() as f64, s1, s2)
        })
        .reduce(|| (0.0, 0.0, 0.0), |a, b| (a.0 + b.0, a.1 + b.1, a.2 + b.2));
    PilotStats {
        mean: s1 / n,
        mandel: if s1 > 0.0 { s2 / s1 } else { 0.0 },
    }
}

/// Finds the peak emission rate for which the detected Mandel-effective
/// photon number per atom equals `drive.photons_per_atom` at
/// `drive.calibration_y`. The pilot reuses the same random numbers at every
/// iterate.
pub fn calibrate_peak_rate(cfg: &ExperimentConfig, seed: u64) -> Result<f64> {
    let target = cfg.drive.photons_per_atom;
    if target == 0.0 {
        return Ok(0.0);
    }
    if cfg.detector.efficiency == 0.0 {
        return Err(Error::invalid(
            "detector.efficiency",
            "cannot reach a non-zero photons_per_atom with zero efficiency",
        ));
    }
    let target = target / cfg.detector.efficiency;
    let chunks = pilot_transits(cfg, seed)?;
    let base = EmissionModel::new(&cfg.cavity, &cfg.atom, DriveParams::new(cfg.drive.calibration_y)?, 1.0)?;
    let mut peak = 1e7;
    for _ in 0..12 {
        let got = pilot_stats(&base.with_peak_rate(peak), &chunks, seed).mandel;
        if got == 0.0 {
            return Err(Error::Degenerate("calibration pilot produced no photon pairs".into()));
        }
        let ratio = target / got;
        peak *= ratio;
        if (ratio - 1.0).abs() < 1e-3 {
            return Ok(peak);
        }
    }
    Ok(peak)
}

/// Expected envelope amplitude of the intra-atom correlation, expressed as
/// the mean interacting atom number N̄ = Φ⟨E⟩²/⟨C⟩ with E = ∫r̄ dt and
/// C = ∫r̄² dt, where r̄ is the standing-wave-averaged emission rate with the
/// renewal correction r/(1 + rD).
pub fn expected_atom_number(cfg: &ExperimentConfig, model: &EmissionModel, seed: u64) -> Result<f64> {
    if cfg.beam.flux == 0.0 || model.peak_rate == 0.0 || model.drive_y == 0.0 {
        return Ok(0.0);
    }
    let sampler = TransitSampler::new(&cfg.beam, &cfg.cavity)?;
    let dead = model.renewal_dead_time();
    let phases: Vec<f64> = (0..LOBE_PHASES)
        .map(|j| ((j as f64 + 0.5) / LOBE_PHASES as f64 * std::f64::consts::PI).cos().powi(2))
        .collect();
    let chunk = TRUTH_TRANSITS / PILOT_CHUNKS as usize;
    let (e, c) = (0..PILOT_CHUNKS)
        .into_par_iter()
        .map(|ch| {
            let mut rng = substream(seed, Domain::Calibration, 2 * PILOT_CHUNKS + ch);
            let (mut se, mut sc) = (0.0, 0.0);
            for _ in 0..chunk {
                let tr = sampler.sample(0.0, &mut rng);
                let mut lobe_free = tr.clone();
                lobe_free.impact_offset.y = 0.0;
                lobe_free.velocity.z = 0.0;
                let dt = (tr.exit_time() - tr.entry_time) / TRUTH_STEPS as f64;
                for i in 0..TRUTH_STEPS {
                    let t = tr.entry_time + (i as f64 + 0.5) * dt;
                    let u = model.relative_coupling(&lobe_free, t);
                    let r = phases
                        .iter()
                        .map(|c| {
                            let r = model.peak_rate * model.saturation_weight(u * c);
                            r / (1.0 + r * dead)
                        })
                        .sum::<f64>()
                        / LOBE_PHASES as f64;
                    se += r * dt;
                    sc += r * r * dt;
                }
            }
            (se, sc)
        })
        .reduce(|| (0.0, 0.0), |a, b| (a.0 + b.0, a.1 + b.1));
    let n = (chunk * PILOT_CHUNKS as usize) as f64;
    let (e, c) = (e / n, c / n);
    Ok(if c > 0.0 { cfg.beam.flux * e * e / c } else { 0.0 })
}

/// One recorded atom passage.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitRecord {
    pub transit: Transit,
    pub emissions: u32,
}

/// Run-level summary written to the sidecar.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct RunSummary {
    pub seed: u64,
    pub duration_s: f64,
    /// Emitted rate (1/s) of an m=0 atom at an antinode per unit saturation weight.
    pub peak_rate: f64,
    /// Detected photons per atom (Mandel intercept sense) at the run drive.
    pub alpha: f64,
    /// Mean detected photons per atom entering the simulation box.
    pub mean_detected_per_atom: f64,
    pub n_bar: f64,
    /// Nominal correlation width w0/(√2 v̄ₓ) (s).
    pub transit_t: f64,
    /// Nominal standing-wave oscillation 2v̄_z/λ (Hz).
    pub omega_over_2pi: f64,
    /// Expected atomic detection rate summed over both channels (1/s).
    pub expected_signal_rate: f64,
    /// Expected background detection rate summed over both channels (1/s).
    pub expected_background_rate: f64,
    pub atoms: u64,
    pub emitted_photons: u64,
    pub detected_ch0: u64,
    pub detected_ch1: u64,
}

/// Everything known about a run beyond its detection streams.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct GroundTruth {
    pub summary: RunSummary,
    /// Per-atom records, only kept when `run.record_transits` is set.
    pub transits: Vec<TransitRecord>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationOutput {
    pub streams: [PhotonStream; 2],
    pub truth: GroundTruth,
}

struct BlockOutput {
    raw: [Vec<u64>; 2],
    atoms: u64,
    emitted: u64,
    records: Vec<TransitRecord>,
}

fn run_block(
    cfg: &ExperimentConfig,
    model: &EmissionModel,
    seed: u64,
    block: u64,
    end_ps: u64,
) -> Result<BlockOutput> {
    let start = block as f64 * cfg.run.block_duration;
    let duration = (cfg.run.duration - start).min(cfg.run.block_duration);
    let mut rng = substream(seed, Domain::Atoms, block);
    let transits = sample_transits(&cfg.beam, &cfg.cavity, start, duration, &mut rng)?;
    let mut emissions = Vec::new();
    let mut records = Vec::new();
    let mut times = Vec::new();
    for tr in &transits {
        times.clear();
        model.emit(tr, &mut rng, &mut times);
        emissions.extend(times.iter().map(|&time| Emission { time, source: Source::Atom }));
        if cfg.run.record_transits {
            records.push(TransitRecord { transit: tr.clone(), emissions: times.len() as u32 });
        }
    }
    let emitted = emissions.len() as u64;
    let mut bg_rng = substream(seed, Domain::Background, block);
    emissions.extend(generate_background(
        &cfg.background,
        model.drive_y,
        start,
        duration,
        cfg.detector.channel_weights(),
        &mut bg_rng,
    )?);
    let mut route_rng = substream(seed, Domain::Routing, block);
    let mut raw = route(&emissions, &cfg.detector, &mut route_rng);
    for ch in &mut raw {
        ch.retain(|&t| t < end_ps);
    }
    Ok(BlockOutput { raw, atoms: transits.len() as u64, emitted, records })
}

/// Simulates a complete run. The output depends only on `(cfg, seed)`, not on
/// the number of worker threads.
pub fn run_simulation(cfg: &ExperimentConfig, seed: u64) -> Result<SimulationOutput> {
    cfg.validate()?;
    let peak = calibrate_peak_rate(cfg, seed)?;
    let model = EmissionModel::new(&cfg.cavity, &cfg.atom, DriveParams::new(cfg.drive.intensity_y)?, peak)?;

    let blocks = (cfg.run.duration / cfg.run.block_duration).ceil() as u64;
    let end_ps = cfg.detector.quantize(cfg.run.duration);
    let outputs: Vec<BlockOutput> = (0..blocks)
        .into_par_iter()
        .map(|b| run_block(cfg, &model, seed, b, end_ps))
        .collect::<Result<_>>()?;

    let mut atoms = 0;
    let mut emitted = 0;
    let mut raw: [Vec<u64>; 2] = [Vec::new(), Vec::new()];
    let mut records = Vec::new();
    for out in outputs {
        atoms += out.atoms;
        emitted += out.emitted;
        for (dst, src) in raw.iter_mut().zip(out.raw) {
            dst.extend(src);
        }
        records.extend(out.records);
    }
    let streams: Vec<PhotonStream> = raw
        .into_par_iter()
        .enumerate()
        .map(|(ch, mut ts)| {
            ts.sort_unstable();
            let mut rng = substream(seed, Domain::Detector, ch as u64);
            let mut settled = settle(&ts, &cfg.detector, &mut rng);
            settled.retain(|&t| t < end_ps);
            PhotonStream::new(ch as u8, settled)
        })
        .collect::<Result<_>>()?;
    let [s0, s1]: [PhotonStream; 2] = streams.try_into().expect("two channels");

    let pilot = if peak > 0.0 {
        pilot_stats(&model, &pilot_transits(cfg, seed)?, seed)
    } else {
        PilotStats { mean: 0.0, mandel: 0.0 }
    };
    let eta = cfg.detector.efficiency;
    let used_detectors = cfg.detector.channel_weights().iter().filter(|w| **w > 0.0).count() as f64;
    let v = cfg.beam.mean_speed;
    let summary = RunSummary {
        seed,
        duration_s: cfg.run.duration,
        peak_rate: peak,
        alpha: eta * pilot.mandel,
        mean_detected_per_atom: eta * pilot.mean,
        n_bar: expected_atom_number(cfg, &model, seed)?,
        transit_t: cfg.cavity.waist / (std::f64::consts::SQRT_2 * v * cfg.beam.tilt_angle.cos()),
        omega_over_2pi: 2.0 * v * cfg.beam.tilt_angle.sin() / cfg.cavity.wavelength,
        expected_signal_rate: cfg.beam.flux * eta * pilot.mean,
        expected_background_rate: cfg.background.optical_rate(model.drive_y)
            + used_detectors * cfg.background.dark_rate_per_detector,
        atoms,
        emitted_photons: emitted,
        detected_ch0: s0.len() as u64,
        detected_ch1: s1.len() as u64,
    };
    Ok(SimulationOutput {
        streams: [s0, s1],
        truth: GroundTruth { summary, transits: records },
    })
}

#[derive(Serialize, Deserialize)]
struct Sidecar {
    config: ExperimentConfig,
    summary: RunSummary,
}

/// Renders the ground-truth sidecar: the full configuration followed by the
/// run summary.
pub fn sidecar_toml(cfg: &ExperimentConfig, truth: &GroundTruth) -> String {
    toml::to_string(&Sidecar { config: cfg.clone(), summary: truth.summary.clone() })
        .expect("sidecar is always representable as TOML")
}

/// Parses a sidecar back into its configuration and summary.
pub fn parse_sidecar(text: &str) -> Result<(ExperimentConfig, RunSummary)> {
    let s: Sidecar = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
    s.config.validate()?;
    Ok((s.config, s.summary))
}

/// Paths of the files written for one run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunFiles {
    pub channels: [PathBuf; 2],
    pub sidecar: PathBuf,
    pub transits: Option<PathBuf>,
}

/// Writes both channel streams, the sidecar and (if recorded) a per-transit
/// CSV into `dir`.
pub fn write_run(dir: &Path, cfg: &ExperimentConfig, out: &SimulationOutput, format: StreamFormat) -> Result<RunFiles> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let ext = match format {
        StreamFormat::Binary => "phts",
        StreamFormat::Csv => "csv",
    };
    let channels = [dir.join(format!("ch0.{ext}")), dir.join(format!("ch1.{ext}"))];
    for (path, stream) in channels.iter().zip(&out.streams) {
        write_stream(path, stream, format)?;
    }
    let sidecar = dir.join("ground_truth.toml");
    std::fs::write(&sidecar, sidecar_toml(cfg, &out.truth)).map_err(|e| Error::io(&sidecar, e))?;
    let transits = if out.truth.transits.is_empty() {
        None
    } else {
        let path = dir.join("transits.csv");
        let mut text = String::from("entry_time_s,vx,vy,vz,y0,z0,ground_state_m,emissions\n");
        for r in &out.truth.transits {
            let t = &r.transit;
            text.push_str(&format!(
                "{},{},{},{},{},{},{},{}\n",
                t.entry_time,
                t.velocity.x,
                t.velocity.y,
                t.velocity.z,
                t.impact_offset.x,
                t.impact_offset.y,
                t.ground_state_m,
                r.emissions
            ));
        }
        std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
        Some(path)
    };
    Ok(RunFiles { channels, sidecar, transits })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn short(duration: f64) -> ExperimentConfig {
        let mut cfg = ExperimentConfig::default();
        cfg.run.duration = duration;
        cfg
    }

    #[test]
    fn same_seed_is_bit_identical() {
        let cfg = short(0.05);
        let a = run_simulation(&cfg, 9).unwrap();
        let b = run_simulation(&cfg, 9).unwrap();
        assert_eq!(a.streams, b.streams);
        assert_eq!(a.truth, b.truth);
        let c = run_simulation(&cfg, 10).unwrap();
        assert_ne!(a.streams, c.streams);
    }

    #[test]
    fn result_does_not_depend_on_thread_count() {
        let cfg = short(0.05);
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let a = one.install(|| run_simulation(&cfg, 3).unwrap());
        let b = run_simulation(&cfg, 3).unwrap();
        assert_eq!(a.streams, b.streams);
    }

    #[test]
    fn zero_flux_leaves_only_background() {
        let mut cfg = short(1.0);
        cfg.beam.flux = 0.0;
        let out = run_simulation(&cfg, 1).unwrap();
        assert_eq!(out.truth.summary.atoms, 0);
        let total = (out.streams[0].len() + out.streams[1].len()) as f64;
        let expected = out.truth.summary.expected_background_rate;
        assert!((total - expected).abs() < 4.0 * expected.sqrt(), "{total} vs {expected}");
    }

    #[test]
    fn calibration_hits_target() {
        let cfg = ExperimentConfig::default();
        let peak = calibrate_peak_rate(&cfg, 1).unwrap();
        let model = EmissionModel::new(&cfg.cavity, &cfg.atom, DriveParams::new(cfg.drive.calibration_y).unwrap(), peak)
            .unwrap();
        let stats = pilot_stats(&model, &pilot_transits(&cfg, 1).unwrap(), 1);
        let alpha = cfg.detector.efficiency * stats.mandel;
        assert!((alpha / cfg.drive.photons_per_atom - 1.0).abs() < 1e-2, "{alpha}");
    }

    #[test]
    fn invalid_config_names_field() {
        let mut cfg = short(1.0);
        cfg.detector.efficiency = -0.1;
        let err = run_simulation(&cfg, 1).unwrap_err();
        assert!(err.to_string().contains("detector.efficiency"));
    }

    #[test]
    fn sidecar_roundtrips() {
        let mut cfg = short(0.02);
        cfg.run.record_transits = true;
        let out = run_simulation(&cfg, 2).unwrap();
        let text = sidecar_toml(&cfg, &out.truth);
        let (back, summary) = parse_sidecar(&text).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(summary, out.truth.summary);
        assert_eq!(out.truth.transits.len() as u64, out.truth.summary.atoms);
    }
}
