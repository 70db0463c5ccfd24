//! States, projective measurements, random-measurement channels and their
//! superoperators, plus the spectral and entropic diagnostics shared by every model.

mod channel;
mod metrics;
mod pvm;
mod state;
mod superop;

pub use channel::MeasurementChannel;
pub use metrics::{
    entropy_of_spectrum, hs_norm, iterate_channel, leading_mass, purity, renyi2_entropy, tail_mass,
    trace_distance, trace_distance_matrices, von_neumann_entropy, Metric, MetricTrace,
};
pub use pvm::{Projector, Pvm, NO_PARTNER};
pub use state::DensityOperator;
pub use superop::{
    build_superoperator, build_superoperator_capped, converge_to_fixed_point, fixed_point_projector,
    FixedPointProjector, Superoperator, DEFAULT_FIXED_TOL, DEFAULT_MAX_SIDE,
};
