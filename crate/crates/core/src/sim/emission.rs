//! Per-atom photon emission as a rate-modulated, self-inhibiting point
//! process.

use rand::Rng;
use rand_distr::{Distribution, Exp1};

use super::beam::Transit;
use crate::error::Result;
use crate::physics::{
    g2_atom, g2_atom_max, pi_relative_strength, require_non_negative, AtomParams, CavityParams,
    DriveParams,
};

/// Largest number of pieces a transit is cut into for the piecewise
/// thinning bound.
const MAX_SEGMENTS: usize = 24;

/// Everything needed to turn a transit into emission times.
#[derive(Debug, Clone, PartialEq)]
pub struct EmissionModel {
    /// Emitted rate (1/s) of an m=0 atom at an antinode on axis, per unit
    /// saturation weight.
    pub peak_rate: f64,
    pub drive_y: f64,
    /// γ_tot in angular units.
    pub gamma_total: f64,
    g2_bound: f64,
    k: f64,
    waist: f64,
    strength: [f64; 7],
}

impl EmissionModel {
    pub fn new(cavity: &CavityParams, atom: &AtomParams, drive: DriveParams, peak_rate: f64) -> Result<Self> {
        require_non_negative("peak_rate", peak_rate)?;
        let gamma_total = atom.gamma_total();
        Ok(Self {
            peak_rate,
            drive_y: drive.intensity_y,
            gamma_total,
            g2_bound: g2_atom_max(drive.intensity_y, gamma_total),
            k: cavity.wavenumber(),
            waist: cavity.waist,
            strength: std::array::from_fn(|i| pi_relative_strength(i as i32 - 3)),
        })
    }

    pub fn with_peak_rate(&self, peak_rate: f64) -> Self {
        Self { peak_rate, ..self.clone() }
    }

    /// Collection times saturation weight u·(Yu)/(1+Yu).
    pub fn saturation_weight(&self, u: f64) -> f64 {
        let s = self.drive_y * u;
        u * s / (1.0 + s)
    }

    /// Relative coupling u = (cg_m/cg_0)² g²(r)/g0² of `transit` at time `t`.
    pub fn relative_coupling(&self, transit: &Transit, t: f64) -> f64 {
        let p = transit.position(t);
        let c = (self.k * p.z).cos();
        self.strength_of(transit) * c * c * (-2.0 * (p.x * p.x + p.y * p.y) / (self.waist * self.waist)).exp()
    }

    pub fn rate(&self, transit: &Transit, t: f64) -> f64 {
        self.peak_rate * self.saturation_weight(self.relative_coupling(transit, t))
    }

    fn strength_of(&self, transit: &Transit) -> f64 {
        self.strength[(transit.ground_state_m + 3).clamp(0, 6) as usize]
    }

    /// Integral of 1 − g²_A, the effective dead time of the emitter (s).
    pub fn renewal_dead_time(&self) -> f64 {
        3.0 / (self.gamma_total * (1.0 + self.drive_y))
    }

    /// Upper bound of the rate over `[ta, tb]` from the closest approach to
    /// the mode axis within that interval, ignoring the standing wave.
    fn segment_bound(&self, transit: &Transit, ta: f64, tb: f64) -> f64 {
        let (a, b) = (transit.position(ta), transit.position(tb));
        let closest = |u: f64, v: f64| if u.signum() != v.signum() { 0.0 } else { u.abs().min(v.abs()) };
        let (x, y) = (closest(a.x, b.x), closest(a.y, b.y));
        let u = self.strength_of(transit) * (-2.0 * (x * x + y * y) / (self.waist * self.waist)).exp();
        self.peak_rate * self.saturation_weight(u) * self.g2_bound
    }

    /// Appends the emission times of one atom to `out`.
    ///
    /// The conditional intensity is rate(t)·g²_A(t − t_last), realised by
    /// thinning against a piecewise-constant bound.
    pub fn emit<R: Rng + ?Sized>(&self, transit: &Transit, rng: &mut R, out: &mut Vec<f64>) {
        if self.peak_rate == 0.0 || self.drive_y == 0.0 {
            return;
        }
        let t0 = transit.entry_time;
        let span = transit.exit_time() - t0;
        // Finer pieces only pay off when many candidates are expected.
        let expected = self.segment_bound(transit, t0, t0 + span) * span;
        let segments = ((expected / 3.0).ceil() as usize).clamp(1, MAX_SEGMENTS);
        let step = span / segments as f64;
        let mut last: Option<f64> = None;
        for seg in 0..segments {
            let ta = t0 + seg as f64 * step;
            let tb = ta + step;
            let bound = self.segment_bound(transit, ta, tb);
            if bound <= 0.0 {
                continue;
            }
            let mut t = ta;
            loop {
                let gap: f64 = Exp1.sample(rng);
                t += gap / bound;
                if t >= tb {
                    break;
                }
                let inhibition = last.map_or(1.0, |l| g2_atom(t - l, self.drive_y, self.gamma_total));
                let lambda = self.rate(transit, t) * inhibition;
                assert!(
                    lambda <= bound * (1.0 + 1e-9),
                    "thinning bound violated: {lambda} > {bound}"
                );
                if rng.random::<f64>() * bound < lambda {
                    out.push(t);
                    last = Some(t);
                }
            }
        }
    }
}

/// Emitted photon rate (1/s) of `transit` at time `t` for an m=0-normalised
/// `peak_rate`.
pub fn emission_rate(
    transit: &Transit,
    t: f64,
    cavity: &CavityParams,
    atom: &AtomParams,
    drive: DriveParams,
    peak_rate: f64,
) -> Result<f64> {
    Ok(EmissionModel::new(cavity, atom, drive, peak_rate)?.rate(transit, t))
}

/// Emission times of one atom, in increasing order.
pub fn emit_transit_photons<R: Rng + ?Sized>(transit: &Transit, model: &EmissionModel, rng: &mut R) -> Vec<f64> {
    let mut out = Vec::new();
    model.emit(transit, rng, &mut out);
    out
}
