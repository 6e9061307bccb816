//! Transfer through the inverse source dynamics followed by the target.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, StageExt};
use crate::reldeg::{lie_f_power, lie_g_lie_f_power, lie_relative_degree, lie_step, MAX_LIE_ORDER};
use crate::simkit::{differentiate, lowpass, rk4_step, rms, simulate_affine, ControlAffineSystem, Signal};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CascadeOptions {
    /// Base finite-difference step for Lie derivatives.
    pub fd_step: f64,
    pub zero_tol: f64,
    /// Low-pass applied to the source output before differentiation.
    pub lowpass_cutoff_hz: Option<f64>,
    /// RK4 substeps per sample for every simulation in the cascade.
    pub step_divisor: usize,
}

impl Default for CascadeOptions {
    fn default() -> Self {
        CascadeOptions {
            fd_step: 1e-6,
            zero_tol: 1e-6,
            lowpass_cutoff_hz: None,
            step_divisor: 4,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CascadeReport {
    pub schema: String,
    pub source_reldeg: usize,
    pub target_reldeg: usize,
    /// `rms(y_s - y_t)`.
    pub rms_direct: f64,
    /// `rms(y_TL - y_t)`.
    pub rms_transfer: f64,
    /// `rms(d̂ - d)` with `source_reldeg` samples trimmed at both ends.
    pub rms_input: f64,
    pub reduction_pct: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct CascadeRun {
    pub report: CascadeReport,
    pub y_s: Signal,
    pub y_t: Signal,
    pub y_tl: Signal,
    pub d_hat: Signal,
}

/// Input that makes `y^(r) = v` at state `x`:
/// `u = (v - L_f^r h) / (L_g L_f^(r-1) h)`.
fn inverse_input(sys: &ControlAffineSystem, r: usize, x: &DVector<f64>, v: f64, opts: &CascadeOptions) -> Result<f64> {
    let delta = lie_step(opts.fd_step, r);
    let gain = lie_g_lie_f_power(sys, r, x, delta);
    if !(gain.abs() > opts.zero_tol) {
        return Err(Error::Inconclusive(format!(
            "L_g L_f^{} h vanishes along the inverse trajectory",
            r - 1
        )));
    }
    Ok((v - lie_f_power(sys, r, x, delta)) / gain)
}

/// Reconstructs the common input from the source output and replays it on
/// the target.
///
/// `y_s^(r)` comes from central differences of the recorded output. Because
/// the input is held over each sample, the derivative is averaged onto the
/// middle of each hold interval before driving the inverse, and the input
/// estimate for the interval is the trapezoidal mean of the inverse input
/// over its substeps. The source zero dynamics must be stable; this is not
/// checked.
pub fn run_nonlinear_cascade(
    src: &ControlAffineSystem,
    tgt: &ControlAffineSystem,
    d: &Signal,
    opts: &CascadeOptions,
) -> Result<CascadeRun> {
    if opts.step_divisor == 0 {
        return Err(Error::InvalidArgument("step_divisor must be at least 1".into()));
    }
    let r_s = lie_relative_degree(src, src.x0(), MAX_LIE_ORDER, opts.fd_step, opts.zero_tol)
        .stage("reldeg")?
        .value;
    let r_t = lie_relative_degree(tgt, tgt.x0(), MAX_LIE_ORDER, opts.fd_step, opts.zero_tol)
        .stage("reldeg")?
        .value;

    let y_s = simulate_affine(src, d, opts.step_divisor).stage("simulate")?;
    let y_t = simulate_affine(tgt, d, opts.step_divisor).stage("simulate")?;

    let base = match opts.lowpass_cutoff_hz {
        Some(fc) => lowpass(&y_s, fc).stage("differentiate")?,
        None => y_s.clone(),
    };
    let v = differentiate(&base, r_s).stage("differentiate")?;
    let vv = v.values();
    let n = vv.len();
    let v_mid: Vec<f64> = (0..n).map(|k| if k + 1 < n { 0.5 * (vv[k] + vv[k + 1]) } else { vv[k] }).collect();

    let dt = d.sample_period() / opts.step_divisor as f64;
    let mut failure = None;
    let rhs = |x: &DVector<f64>, v: f64| match inverse_input(src, r_s, x, v, opts) {
        Ok(u) => src.f(x) + src.g(x) * u,
        Err(_) => DVector::from_element(x.len(), f64::NAN),
    };
    let mut x = src.x0().clone();
    let mut d_hat = Vec::with_capacity(n);
    for (k, &vk) in v_mid.iter().enumerate() {
        let mut acc = 0.5 * inverse_input(src, r_s, &x, vk, opts).stage("inverse")?;
        for j in 0..opts.step_divisor {
            x = rk4_step(&rhs, &x, vk, dt);
            if !x.iter().all(|c| c.is_finite()) || x.norm() > crate::simkit::DIVERGENCE_LIMIT {
                failure = Some(Error::SimulationDiverged { index: k + 1 });
                break;
            }
            let u = inverse_input(src, r_s, &x, vk, opts).stage("inverse")?;
            acc += if j + 1 == opts.step_divisor { 0.5 * u } else { u };
        }
        if failure.is_some() {
            break;
        }
        d_hat.push(acc / opts.step_divisor as f64);
    }
    if let Some(e) = failure {
        return Err(e.at("inverse"));
    }
    let d_hat = d.replace_values(d_hat);
    let y_tl = simulate_affine(tgt, &d_hat, opts.step_divisor).stage("target")?;

    let diff = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x - y).collect::<Vec<_>>();
    let rms_direct = rms(&diff(y_s.values(), y_t.values()));
    let rms_transfer = rms(&diff(y_tl.values(), y_t.values()));
    let trim = r_s.min(n / 2);
    let rms_input = rms(&diff(&d_hat.values()[trim..n - trim], &d.values()[trim..n - trim]));
    Ok(CascadeRun {
        report: CascadeReport {
            schema: super::REPORT_SCHEMA.to_string(),
            source_reldeg: r_s,
            target_reldeg: r_t,
            rms_direct,
            rms_transfer,
            rms_input,
            reduction_pct: (rms_direct > 0.0).then(|| 100.0 * (1.0 - rms_transfer / rms_direct)),
        },
        y_s,
        y_t,
        y_tl,
        d_hat,
    })
}
