//! Rational transfer functions in `s` and `z`, their state-space realizations,
//! and the construction of the zero-error transfer map between two systems.

mod polynomial;
mod rational;
mod spec;
mod statespace;

pub use polynomial::Polynomial;
pub use rational::{
    optimal_map, perfect_map_exists, Domain, RationalTF, CANCELLATION_RESIDUAL, CANCELLATION_TOL, STABILITY_MARGIN,
};
pub use spec::{SpecDomain, SystemSpec};
pub use statespace::{discretize_zoh, realize, StateSpace};
