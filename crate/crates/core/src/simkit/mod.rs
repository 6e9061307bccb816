//! Signals and deterministic simulation of LTI and control-affine systems.

mod process;
mod signal;
mod simulate;

pub use process::{cumulative_integral, differentiate, lowpass, shift_forward};
pub use signal::Signal;
pub(crate) use signal::rms;
pub use simulate::{
    simulate_affine, simulate_lti, simulate_tf, step_response, ControlAffineSystem, Plant,
    ScalarField, VectorField, DEFAULT_STEP_DIVISOR, DIVERGENCE_LIMIT,
};
pub(crate) use simulate::rk4_step;
