//! Seeded random substreams.
//!
//! Every random draw in a run descends from a single 64-bit seed. A
//! substream is a ChaCha8 generator keyed by that seed with its stream id
//! set to `domain << 56 | index`, so each (domain, index) pair gets an
//! independent sequence that does not depend on how work is scheduled
//! across threads. This derivation is part of the reproducibility contract
//! and must not change between versions.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Domain {
    /// Atom arrivals and per-atom emissions, indexed by time block.
    Atoms = 1,
    /// Background photons, indexed by time block.
    Background = 2,
    /// Efficiency and splitter draws, indexed by time block.
    Routing = 3,
    /// Dead-time / afterpulse pass, indexed by channel.
    Detector = 4,
    /// Calibration pilot runs, indexed by pilot number.
    Calibration = 5,
    /// Analysis resampling (bootstrap), indexed by caller.
    Analysis = 6,
}

pub fn substream(seed: u64, domain: Domain, index: u64) -> ChaCha8Rng {
    debug_assert!(index < 1 << 56);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((domain as u64) << 56) | index);
    rng
}
