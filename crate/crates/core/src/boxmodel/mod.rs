//! Spin-1/2 particle in a one-dimensional box, measured along spin directions that
//! rotate with position.
//!
//! The grid representation carries the dynamics: its projectors are exact and the
//! closed-form kernel applies `N` channel steps in one pass. The energy representation
//! exists for bookkeeping and to expose the defects that truncation introduces.

mod config;
mod heat;
mod projectors;
mod repr;

pub use config::{energy_levels, BoxConfig, Representation};
pub use heat::{
    hamiltonian_is_zero_band, measured_energy, phi_bound, phi_bound_sq, predicted_energy, EnergyReading,
    TRUNCATION_FLAG_THRESHOLD,
};
pub use projectors::{
    build_f_projectors, heat_vision_channel, kernel_evolve, mode_couplings, mode_couplings_quadrature,
    verification_panels, verified_mode_couplings, ModeCouplings, COUPLING_CHECK_TOL,
};
pub use repr::{spin_one, spin_y, spin_zero, BoxRepresentation};
