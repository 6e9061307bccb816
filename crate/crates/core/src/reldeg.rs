//! Relative degree from a transfer function, from recorded step responses, and
//! from numerical Lie derivatives of a control-affine system.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::polytf::RationalTF;
use crate::simkit::{ControlAffineSystem, Signal};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RelDegMethod {
    ExactRational,
    StepResponseCt,
    StepResponseDt,
    LieNumeric,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RelDegEstimate {
    pub value: usize,
    pub method: RelDegMethod,
    /// Detected magnitude over the detection threshold; at least 1.
    pub confidence_ratio: f64,
}

/// Required ratio between the step-instant statistic and its pre-step level
/// for a continuous-time jump.
pub const CT_JUMP_RATIO: f64 = 10.0;

/// Highest order the nested Lie derivative estimate accepts.
pub const MAX_LIE_ORDER: usize = 4;

pub fn reldeg_exact(g: &RationalTF) -> Result<RelDegEstimate> {
    let r = g.relative_degree();
    if r < 0 {
        return Err(Error::NonCausal(r));
    }
    if g.is_zero() {
        return Err(Error::NoResponse);
    }
    Ok(RelDegEstimate {
        value: r as usize,
        method: RelDegMethod::ExactRational,
        confidence_ratio: 1.0,
    })
}

/// Threshold for noise-free simulated data: `1e-9 · max|u|`.
pub fn noise_free_threshold(step_amplitude: f64) -> f64 {
    1e-9 * step_amplitude.abs()
}

/// Threshold for noisy records: five standard deviations of the output before
/// the step. Needs at least two pre-step samples.
pub fn noise_adaptive_threshold(step: &Signal, step_time_index: usize) -> Result<f64> {
    if step_time_index < 2 || step_time_index > step.len() {
        return Err(Error::InvalidArgument(
            "need at least two samples before the step".into(),
        ));
    }
    let pre = &step.values()[..step_time_index];
    let mean = pre.iter().sum::<f64>() / pre.len() as f64;
    let var = pre.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (pre.len() - 1) as f64;
    Ok(5.0 * var.sqrt())
}

/// Sample delay between the input step at `step_time_index` and the first
/// output sample whose magnitude exceeds `threshold`.
pub fn reldeg_from_step_dt(
    step: &Signal,
    step_time_index: usize,
    threshold: f64,
) -> Result<RelDegEstimate> {
    if !(threshold > 0.0) {
        return Err(Error::InvalidArgument(format!("threshold must be positive, got {threshold}")));
    }
    if step_time_index >= step.len() {
        return Err(Error::InvalidArgument(format!(
            "step index {step_time_index} outside a {}-sample signal",
            step.len()
        )));
    }
    let v = step.values();
    if let Some(index) = v[..step_time_index].iter().position(|y| y.abs() >= threshold) {
        return Err(Error::NotAtRest { index });
    }
    let (d, y) = v[step_time_index..]
        .iter()
        .enumerate()
        .find(|(_, y)| y.abs() > threshold)
        .ok_or(Error::NoResponse)?;
    Ok(RelDegEstimate {
        value: d,
        method: RelDegMethod::StepResponseDt,
        confidence_ratio: y.abs() / threshold,
    })
}

/// Lowest derivative order of a sampled continuous step response that jumps
/// at the step instant.
///
/// The step instant is `t = 0` on the signal's time axis. For each order `k`
/// the k-th backward difference quotient is taken over the first `k + 1`
/// samples from the step instant onward, which approximates `y^(k)(0+)`. Orders
/// below the relative degree shrink like `h^(r - k)`; order `r` stays finite.
/// A jump needs the statistic to exceed `threshold` (in output units per
/// second^k) and to be [`CT_JUMP_RATIO`] times larger than the same statistic
/// anywhere in the pre-step window, or than the round-off floor when there is
/// no pre-step window.
pub fn reldeg_from_step_ct(step: &Signal, threshold: f64, max_order: usize) -> Result<RelDegEstimate> {
    if !(threshold > 0.0) {
        return Err(Error::InvalidArgument(format!("threshold must be positive, got {threshold}")));
    }
    if max_order > 5 {
        return Err(Error::InvalidArgument(format!("max_order {max_order} exceeds 5")));
    }
    let h = step.sample_period();
    let i0 = (-step.start_time() / h).round().max(0.0) as usize;
    if step.len() <= i0 + max_order {
        return Err(Error::SignalTooShort { len: step.len(), needed: i0 + max_order });
    }
    let v = step.values();
    let scale = step.max_abs();
    for k in 0..=max_order {
        let hk = h.powi(k as i32);
        let quotient = |end: usize| backward_difference(&v[end - k..=end]) / hk;
        let at_step = quotient(i0 + k).abs();
        let pre_step = (k..i0).map(|i| quotient(i).abs()).fold(0.0f64, f64::max);
        let roundoff = 1e3 * f64::EPSILON * scale * 2f64.powi(k as i32) / hk;
        let floor = pre_step.max(roundoff);
        if at_step > threshold && at_step > CT_JUMP_RATIO * floor {
            return Ok(RelDegEstimate {
                value: k,
                method: RelDegMethod::StepResponseCt,
                confidence_ratio: at_step / threshold,
            });
        }
    }
    Err(Error::Inconclusive(format!("no derivative up to order {max_order} jumps at the step")))
}

/// k-th backward difference of `w`, where `k = w.len() - 1`, evaluated at the
/// last sample.
fn backward_difference(w: &[f64]) -> f64 {
    let mut d = w.to_vec();
    for level in 1..w.len() {
        for i in (level..w.len()).rev() {
            d[i] -= d[i - 1];
        }
    }
    *d.last().unwrap()
}

fn gradient(phi: &dyn Fn(&DVector<f64>) -> f64, x: &DVector<f64>, delta: f64) -> DVector<f64> {
    let mut grad = DVector::zeros(x.len());
    let mut probe = x.clone();
    for i in 0..x.len() {
        let xi = x[i];
        probe[i] = xi + delta;
        let up = phi(&probe);
        probe[i] = xi - delta;
        let down = phi(&probe);
        probe[i] = xi;
        grad[i] = (up - down) / (2.0 * delta);
    }
    grad
}

/// `L_f^k h(x)` by nested central differences with step `delta`.
///
/// Each nesting level costs `2n` evaluations of the level below, so the cost
/// is `(2n)^k` evaluations of `h`.
pub fn lie_f_power(sys: &ControlAffineSystem, k: usize, x: &DVector<f64>, delta: f64) -> f64 {
    if k == 0 {
        return sys.h(x);
    }
    let inner = |y: &DVector<f64>| lie_f_power(sys, k - 1, y, delta);
    gradient(&inner, x, delta).dot(&sys.f(x))
}

/// `L_g L_f^(k-1) h(x)` by nested central differences with step `delta`.
pub fn lie_g_lie_f_power(sys: &ControlAffineSystem, k: usize, x: &DVector<f64>, delta: f64) -> f64 {
    assert!(k >= 1);
    let inner = |y: &DVector<f64>| lie_f_power(sys, k - 1, y, delta);
    gradient(&inner, x, delta).dot(&sys.g(x))
}

/// Step used for every difference in an order-`k` nested estimate.
///
/// With `k` nested central differences of step `d`, truncation error scales
/// like `d^2` while round-off grows like `eps / d^k`; widening the step as
/// `fd_step^(1/k)` keeps the round-off term from swamping higher orders.
pub fn lie_step(fd_step: f64, k: usize) -> f64 {
    fd_step.powf(1.0 / k as f64)
}

/// Smallest `k` in `1..=max_order` with `|L_g L_f^(k-1) h(x_probe)| > zero_tol`.
pub fn lie_relative_degree(
    sys: &ControlAffineSystem,
    x_probe: &DVector<f64>,
    max_order: usize,
    fd_step: f64,
    zero_tol: f64,
) -> Result<RelDegEstimate> {
    if x_probe.len() != sys.dim() {
        return Err(Error::DimensionMismatch { expected: sys.dim(), got: x_probe.len() });
    }
    if max_order == 0 || max_order > MAX_LIE_ORDER {
        return Err(Error::InvalidArgument(format!(
            "max_order must be in 1..={MAX_LIE_ORDER}, got {max_order}"
        )));
    }
    if !(fd_step > 0.0 && zero_tol > 0.0) {
        return Err(Error::InvalidArgument("fd_step and zero_tol must be positive".into()));
    }
    for k in 1..=max_order {
        let value = lie_g_lie_f_power(sys, k, x_probe, lie_step(fd_step, k));
        if !value.is_finite() {
            return Err(Error::Inconclusive(format!("non-finite Lie derivative at order {k}")));
        }
        if value.abs() > zero_tol {
            return Ok(RelDegEstimate {
                value: k,
                method: RelDegMethod::LieNumeric,
                confidence_ratio: value.abs() / zero_tol,
            });
        }
    }
    Err(Error::Inconclusive(format!(
        "L_g L_f^(k-1) h vanishes for every k <= {max_order}"
    )))
}

/// Lie-derivative relative degree at `x0` and at extra probe points.
#[derive(Clone, Debug)]
pub struct ProbeReport {
    pub at_x0: RelDegEstimate,
    /// `None` where the estimate was inconclusive.
    pub probes: Vec<(Vec<f64>, Option<usize>)>,
}

impl ProbeReport {
    pub fn consistent(&self) -> bool {
        self.probes.iter().all(|(_, r)| *r == Some(self.at_x0.value))
    }
}

pub fn lie_relative_degree_probes(
    sys: &ControlAffineSystem,
    probes: &[DVector<f64>],
    max_order: usize,
    fd_step: f64,
    zero_tol: f64,
) -> Result<ProbeReport> {
    let at_x0 = lie_relative_degree(sys, sys.x0(), max_order, fd_step, zero_tol)?;
    let probes = probes
        .iter()
        .map(|p| {
            let r = match lie_relative_degree(sys, p, max_order, fd_step, zero_tol) {
                Ok(e) => Some(e.value),
                Err(Error::Inconclusive(_)) => None,
                Err(e) => return Err(e),
            };
            Ok((p.iter().copied().collect(), r))
        })
        .collect::<Result<_>>()?;
    Ok(ProbeReport { at_x0, probes })
}
