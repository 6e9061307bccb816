//! Synthetic systems for experiments and tests.

use std::f64::consts::PI;

use nalgebra::DVector;
use num_complex::Complex64;
use rand::Rng;

use crate::error::Result;
use crate::polytf::{Domain, Polynomial, RationalTF};
use crate::simkit::ControlAffineSystem;

/// Roots for a real polynomial of the given degree, in conjugate pairs plus
/// at most one real root. DT roots have radius in `[0.1, 0.8]`; CT roots have
/// real part in `[-3, -0.5]`.
fn stable_roots<R: Rng>(rng: &mut R, degree: usize, domain: Domain) -> Vec<Complex64> {
    let mut roots = Vec::with_capacity(degree);
    while roots.len() < degree {
        let pair = degree - roots.len() >= 2 && rng.gen_bool(0.5);
        let z = match domain {
            Domain::Discrete { .. } => {
                let radius = rng.gen_range(0.1..0.8);
                let angle = if pair { rng.gen_range(0.1..PI - 0.1) } else if rng.gen_bool(0.5) { 0.0 } else { PI };
                Complex64::from_polar(radius, angle)
            }
            Domain::Continuous => {
                let re = rng.gen_range(-3.0..-0.5);
                Complex64::new(re, if pair { rng.gen_range(0.2..2.0) } else { 0.0 })
            }
        };
        roots.push(z);
        if pair {
            roots.push(z.conj());
        }
    }
    roots
}

/// Near pole-zero cancellations make a system practically unidentifiable.
pub const MIN_POLE_ZERO_GAP: f64 = 0.05;

/// Random stable, minimum-phase transfer function with the given order and
/// relative degree (`reldeg <= order`). The gain magnitude is in `[0.5, 2]`
/// and every zero sits at least `MIN_POLE_ZERO_GAP` from every pole.
pub fn random_stable_min_phase<R: Rng>(
    rng: &mut R,
    order: usize,
    reldeg: usize,
    domain: Domain,
) -> Result<RationalTF> {
    assert!(reldeg <= order, "relative degree above order");
    loop {
        let poles = stable_roots(rng, order, domain);
        let zeros = stable_roots(rng, order - reldeg, domain);
        if zeros.iter().any(|z| poles.iter().any(|p| (z - p).norm() < MIN_POLE_ZERO_GAP)) {
            continue;
        }
        let den = Polynomial::from_roots(&poles);
        let sign = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
        let num = Polynomial::from_roots(&zeros).scale(sign * rng.gen_range(0.5..2.0));
        let g = RationalTF::new(num, den, domain)?;
        if g.order() == order {
            return Ok(g);
        }
    }
}

/// `θ'' = -cos θ - damping · θ' + u`, output `θ`. The equilibrium for
/// `u = 0` is `θ = -π/2`, stable when `damping > 0`.
pub fn pendulum(damping: f64, x0: [f64; 2]) -> ControlAffineSystem {
    ControlAffineSystem::new(
        move |x| DVector::from_vec(vec![x[1], -x[0].cos() - damping * x[1]]),
        |_| DVector::from_vec(vec![0.0, 1.0]),
        |x| x[0],
        DVector::from_vec(x0.to_vec()),
    )
    .expect("pendulum is well-formed")
}
