//! Closed-form cavity QED relations: mode coupling, cooperativities,
//! steady-state photon numbers, Faraday rotation and the intensity
//! correlation models.

mod coupling;
mod effective;
mod g2;
mod params;
mod steady_state;

pub use coupling::{
    derived_transition_params, mode_coupling, pi_cg_squared, pi_relative_strength,
    relative_coupling_sq, transition_table,
};
pub use effective::{
    effective_atom_number, effective_atom_number_mc, saturation_volume_integral,
    EffectiveAtomStats,
};
pub use g2::{
    background_prefactor, beating_term, g2_atom, g2_atom_max, g2_model, g2_model_gradient, window,
};
pub use params::{
    AtomParams, CavityParams, CouplingSet, DriveParams, FaradayParams, G2ModelParams,
    Polarization, TransitionEntry, BOHR_MAGNETON, HBAR,
};
pub(crate) use params::{require_non_negative, require_positive};
pub use steady_state::{faraday_angle, rotation_from_fields, steady_state_photons, zeeman_parameter};
