use std::f64::consts::PI;

use super::signal::Signal;
use crate::error::{Error, Result};

/// `order`-fold numerical derivative.
///
/// Each pass is a central difference in the interior and a second-order
/// one-sided stencil at both ends, so the output keeps the input length. The
/// outer `order` samples on each side carry the edge stencils and are the
/// least accurate.
pub fn differentiate(sig: &Signal, order: usize) -> Result<Signal> {
    if order == 0 {
        return Err(Error::InvalidArgument("derivative order must be at least 1".into()));
    }
    if sig.len() <= 2 * order || sig.len() < 3 {
        return Err(Error::SignalTooShort {
            len: sig.len(),
            needed: (2 * order).max(2),
        });
    }
    let h = sig.sample_period();
    let mut v = sig.values().to_vec();
    for _ in 0..order {
        v = first_derivative(&v, h);
    }
    Ok(sig.replace_values(v))
}

fn first_derivative(v: &[f64], h: f64) -> Vec<f64> {
    let n = v.len();
    let mut d = vec![0.0; n];
    d[0] = (-3.0 * v[0] + 4.0 * v[1] - v[2]) / (2.0 * h);
    d[n - 1] = (3.0 * v[n - 1] - 4.0 * v[n - 2] + v[n - 3]) / (2.0 * h);
    for k in 1..n - 1 {
        d[k] = (v[k + 1] - v[k - 1]) / (2.0 * h);
    }
    d
}

/// Running integral `h · Σ_{j<=k} x_j`.
pub fn cumulative_integral(sig: &Signal) -> Signal {
    let h = sig.sample_period();
    let mut acc = 0.0;
    sig.replace_values(
        sig.values()
            .iter()
            .map(|&x| {
                acc += x * h;
                acc
            })
            .collect(),
    )
}

/// Zero-phase first-order low-pass: one exponential smoothing pass forward
/// and one backward. DC gain is exactly one.
pub fn lowpass(sig: &Signal, cutoff_hz: f64) -> Result<Signal> {
    let h = sig.sample_period();
    let nyquist_hz = 0.5 / h;
    if !(cutoff_hz > 0.0) {
        return Err(Error::InvalidArgument(format!("cutoff must be positive, got {cutoff_hz}")));
    }
    if cutoff_hz >= nyquist_hz {
        return Err(Error::CutoffAboveNyquist { cutoff_hz, nyquist_hz });
    }
    let alpha = 1.0 - (-2.0 * PI * cutoff_hz * h).exp();
    let mut v = sig.values().to_vec();
    for k in 1..v.len() {
        v[k] = v[k - 1] + alpha * (v[k] - v[k - 1]);
    }
    for k in (0..v.len().saturating_sub(1)).rev() {
        v[k] = v[k + 1] + alpha * (v[k] - v[k + 1]);
    }
    Ok(sig.replace_values(v))
}

/// Advances the signal by `samples`: `y(k) = x(k + samples)`, with the tail
/// filled by the last value. The result records the shift.
pub fn shift_forward(sig: &Signal, samples: usize) -> Result<Signal> {
    let n = sig.len();
    if samples >= n {
        return Err(Error::ShiftTooLarge { shift: samples, len: n });
    }
    let v = sig.values();
    let last = v[n - 1];
    let shifted = (0..n).map(|k| v.get(k + samples).copied().unwrap_or(last)).collect();
    Ok(sig.replace_values(shifted).with_shift(sig.shift() + samples))
}
