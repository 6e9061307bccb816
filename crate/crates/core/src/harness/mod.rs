//! End-to-end experiments: record two systems on a shared reference, derive
//! the map structure, identify or construct the map and score the transfer.

mod cascade;
mod config;
mod experiment;
mod sweep;
pub mod synth;

pub use cascade::{run_nonlinear_cascade, CascadeOptions, CascadeReport, CascadeRun};
pub use config::{Excitation, ExperimentConfig, IdentOptions, MapSource};
pub use experiment::{
    analytic_map, apply_map, estimate_reldeg_from_step, evaluate_map, identify_map, prepare,
    run_lti_experiment, run_lti_experiment_detailed, Dataset, ExperimentRun, IdentifiedMap,
    IdentifySettings, Prepared, Provenance, SystemSummary, TransferMetrics, TransferReport,
    TransferSignals, CT_STEP_PERIOD, CT_STEP_THRESHOLD_FRACTION, FALLBACK_RIDGE, REPORT_SCHEMA,
};
pub use sweep::{order_sweep, SweepRow, SweepTable};

use crate::polytf::{SpecDomain, SystemSpec};

/// Built-in two-vehicle surrogate: closed-loop second-order position
/// dynamics with PD-style zeros, both relative degree 1 and unit DC gain.
/// The parameters are illustrative.
pub fn demo_config(seed: u64) -> ExperimentConfig {
    let ct = |num: &[f64], den: &[f64]| SystemSpec {
        domain: SpecDomain::Ct,
        num: num.to_vec(),
        den: den.to_vec(),
        sample_period: None,
    };
    ExperimentConfig {
        source: ct(&[0.8, 2.25], &[1.0, 2.1, 2.25]),
        target: ct(&[2.0, 4.0], &[1.0, 2.4, 4.0]),
        train_excitation: Excitation::MultiSine {
            frequencies: vec![0.03, 0.07, 0.13, 0.23, 0.41],
            amplitudes: vec![0.4; 5],
        },
        test_excitation: Excitation::MultiSine {
            frequencies: vec![0.05, 0.11, 0.19, 0.31],
            amplitudes: vec![0.45; 4],
        },
        train_duration: 60.0,
        test_duration: 60.0,
        sample_period: 0.02,
        seed,
        noise_std: 2e-3,
        identification: IdentOptions {
            ridge: 0.0,
            refine_iterations: 5,
            order_override: None,
            map_source: MapSource::Identify,
        },
    }
}
