//! Left regular representation of `Z_2 * ... * Z_2` (`s` factors) truncated to words
//! of bounded length: the reflection measurements `(1 +- lambda(g_i))/2`, norm
//! estimates for `sum_i lambda(g_i)`, and the resulting exponential purity decay.
//!
//! The norm bound rests on writing `lambda(g_i) = x_i + y_i` with
//! `x_i = lambda(g_i) Pi_i`, `y_i = Pi_i lambda(g_i)`, where `Pi_i` projects on words
//! starting with `g_i`, and bounding `||sum x_i||, ||sum y_i|| <= sqrt(s)` by
//! Cauchy-Schwarz. Those pieces are only used in that argument and are not computed.

mod norm;
mod purity;
mod words;

pub use norm::{
    generator_sum_bound, generator_sum_norm, omega_norm_bound, omega_norm_from_generator_norm, NormEstimate,
    NORM_MAX_ITERATIONS, NORM_RESIDUAL_TOL,
};
pub use purity::{
    channel_norm_power, dense_reflection_channel, purity_decay_check, random_supported_state, reflection_channel,
    reflection_pvms, support_length, unital_fixed_point_contrast, PurityDecay, UnitalRecord, ENVELOPE_SLACK,
    MAX_PURITY_WORDS,
};
pub use words::{enumerate, word_multiply, Word, WordSpace};

/// `(1 + estimate / s) / 2` with the estimate from [`generator_sum_norm`].
pub fn omega_norm_estimate(space: &WordSpace, iterations: usize, seed: u64) -> crate::Result<f64> {
    let est = generator_sum_norm(space, iterations, seed)?;
    Ok(omega_norm_from_generator_norm(space.generators(), est.estimate))
}
