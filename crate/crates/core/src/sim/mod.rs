//! Monte Carlo generation of two-channel photon detection streams.

mod background;
mod beam;
mod detector;
mod emission;
mod run;

pub use background::{generate_background, BackgroundParams, Emission, Source};
pub use beam::{sample_transits, BeamParams, Transit, TransitSampler};
pub use detector::{detect, route, settle, DetectorParams};
pub use emission::{emission_rate, emit_transit_photons, EmissionModel};
pub use run::{
    calibrate_peak_rate, expected_atom_number, parse_sidecar, run_simulation, sidecar_toml, write_run,
    GroundTruth, PilotStats, RunFiles, RunSummary, SimulationOutput, TransitRecord,
};
