use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, MapSource};
use crate::error::{Error, Result, StageExt};
use crate::mapprops::{derive_map_properties, tailor_input, MapProperties, SignalDomain, SystemFacts};
use crate::polytf::{discretize_zoh, optimal_map, RationalTF, SystemSpec};
use crate::reldeg::{noise_free_threshold, reldeg_from_step_ct, reldeg_from_step_dt, RelDegEstimate};
use crate::simkit::{rms, simulate_tf, step_response, Signal};
use crate::sysid::{fit_arx, fit_static_gain, free_run_report, refine_prefilter, ArxModel, FitReport};

pub const REPORT_SCHEMA: &str = "tlmap-report-v1";

/// Sampling used to resolve derivative jumps of continuous step responses.
pub const CT_STEP_PERIOD: f64 = 1e-4;
/// CT jump threshold as a fraction of the peak step-response magnitude.
pub const CT_STEP_THRESHOLD_FRACTION: f64 = 1e-2;

/// Relative ridge used when an unregularized fit is rank deficient.
pub const FALLBACK_RIDGE: f64 = 1e-10;

/// A dynamic map ready to be applied to new source data.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IdentifiedMap {
    pub map_properties: MapProperties,
    pub map_source: MapSource,
    pub model: ArxModel,
    pub static_gain: f64,
    /// Free-run fit on the training data.
    pub fit_train: FitReport,
    pub fit_train_one_step: Option<FitReport>,
    pub condition_number: Option<f64>,
    /// Prefilter iteration that produced `model`; 0 for the plain fit.
    pub refinement_iteration: usize,
}

impl IdentifiedMap {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("map serializes") + "\n"
    }

    pub fn parse(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse(format!("identified map: {e}")))
    }
}

/// Direct, static and dynamic transfer errors on one dataset.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransferMetrics {
    pub rms_direct: f64,
    pub rms_static: f64,
    pub rms_dynamic: f64,
    /// `100 · (1 - rms_static / rms_direct)`; null when `rms_direct = 0`.
    pub reduction_static_pct: Option<f64>,
    pub reduction_dynamic_pct: Option<f64>,
    /// Free-run fit of the dynamic transfer against the target output.
    pub fit_dynamic_pct: Option<f64>,
    pub n_samples: usize,
}

/// Recorded and transferred trajectories on one dataset.
#[derive(Clone, Debug, PartialEq)]
pub struct TransferSignals {
    pub y_s: Signal,
    pub y_t: Signal,
    pub y_static: Signal,
    pub y_dynamic: Signal,
}

impl TransferSignals {
    /// Tidy CSV: `t,series,value`, one row per sample and series.
    pub fn to_tidy_csv(&self) -> String {
        let mut out = String::from("t,series,value\n");
        for (name, sig) in [
            ("source", &self.y_s),
            ("target", &self.y_t),
            ("static", &self.y_static),
            ("dynamic", &self.y_dynamic),
        ] {
            for (k, v) in sig.values().iter().enumerate() {
                out.push_str(&format!("{:.16e},{name},{v:.16e}\n", sig.time(k)));
            }
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SystemSummary {
    pub spec: SystemSpec,
    pub order: usize,
    pub reldeg_estimate: RelDegEstimate,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub config_hash: String,
    pub seed: Option<u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransferReport {
    pub schema: String,
    pub rms_direct: f64,
    pub rms_static: f64,
    pub rms_dynamic: f64,
    pub reduction_static_pct: Option<f64>,
    pub reduction_dynamic_pct: Option<f64>,
    pub fit_train_pct: f64,
    pub fit_test_pct: Option<f64>,
    pub train: Option<TransferMetrics>,
    pub source: Option<SystemSummary>,
    pub target: Option<SystemSummary>,
    pub map_properties: MapProperties,
    pub identified_map: IdentifiedMap,
    pub warnings: Vec<String>,
    pub provenance: Provenance,
}

impl TransferReport {
    fn assemble(
        map: &IdentifiedMap,
        test: &TransferMetrics,
        train: Option<TransferMetrics>,
        warnings: Vec<String>,
        provenance: Provenance,
    ) -> Self {
        TransferReport {
            schema: REPORT_SCHEMA.to_string(),
            rms_direct: test.rms_direct,
            rms_static: test.rms_static,
            rms_dynamic: test.rms_dynamic,
            reduction_static_pct: test.reduction_static_pct,
            reduction_dynamic_pct: test.reduction_dynamic_pct,
            fit_train_pct: map.fit_train.fit_percent,
            fit_test_pct: test.fit_dynamic_pct,
            train,
            source: None,
            target: None,
            map_properties: map.map_properties.clone(),
            identified_map: map.clone(),
            warnings,
            provenance,
        }
    }

    /// Pretty JSON with a fixed key order and a trailing newline.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }

    pub fn parse(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse(format!("transfer report: {e}")))
    }
}

fn reduction(rms_x: f64, rms_direct: f64) -> Option<f64> {
    (rms_direct > 0.0).then(|| 100.0 * (1.0 - rms_x / rms_direct))
}

/// Applies a map to recorded source data and scores it against the target.
///
/// Samples held at the end of a forward-shifted input are left out of every
/// error so the three transfers are compared on the same window.
pub fn apply_map(
    map: &IdentifiedMap,
    y_s: &Signal,
    y_t: &Signal,
) -> Result<(TransferMetrics, TransferSignals)> {
    y_s.ensure_compatible(y_t)?;
    if (map.model.sample_period() - y_s.sample_period()).abs() > 1e-12 * y_s.sample_period() {
        return Err(Error::SignalMismatch(format!(
            "map sampled at {} s, data at {} s",
            map.model.sample_period(),
            y_s.sample_period()
        )));
    }
    let u = tailor_input(y_s, &map.map_properties, None)?;
    let y_dynamic = map.model.simulate(&u)?;
    let y_static = y_s.scale(map.static_gain);
    let end = y_t.len() - u.shift();
    let err = |y: &Signal| {
        let d: Vec<f64> = y.values()[..end].iter().zip(&y_t.values()[..end]).map(|(a, b)| a - b).collect();
        rms(&d)
    };
    let (rms_direct, rms_static, rms_dynamic) = (err(y_s), err(&y_static), err(&y_dynamic));
    let fit_dynamic_pct = crate::sysid::evaluate_fit_window(y_t, &y_dynamic, 0, u.shift())
        .ok()
        .map(|f| f.fit_percent);
    Ok((
        TransferMetrics {
            rms_direct,
            rms_static,
            rms_dynamic,
            reduction_static_pct: reduction(rms_static, rms_direct),
            reduction_dynamic_pct: reduction(rms_dynamic, rms_direct),
            fit_dynamic_pct,
            n_samples: end,
        },
        TransferSignals {
            y_s: y_s.clone(),
            y_t: y_t.clone(),
            y_static,
            y_dynamic,
        },
    ))
}

/// Identification options independent of how the data was produced.
#[derive(Clone, Debug, PartialEq)]
pub struct IdentifySettings {
    pub ridge: f64,
    pub refine_iterations: usize,
}

/// Static gain plus ARX map from training data.
pub fn identify_map(
    y_s: &Signal,
    y_t: &Signal,
    props: &MapProperties,
    settings: &IdentifySettings,
    warnings: &mut Vec<String>,
) -> Result<IdentifiedMap> {
    let (static_gain, _) = fit_static_gain(y_s, y_t)?;
    let u = tailor_input(y_s, props, None)?;
    let fit = match fit_arx(&u, y_t, props, settings.ridge) {
        Err(Error::RankDeficient { condition }) if settings.ridge == 0.0 => {
            warnings.push(format!(
                "regressors are rank deficient (condition {condition:.3e}); refitted with ridge {FALLBACK_RIDGE:e}"
            ));
            fit_arx(&u, y_t, props, FALLBACK_RIDGE)?
        }
        other => other?,
    };
    let mut map = IdentifiedMap {
        map_properties: props.clone(),
        map_source: MapSource::Identify,
        model: fit.model.clone(),
        static_gain,
        fit_train: fit.report,
        fit_train_one_step: Some(fit.one_step),
        condition_number: Some(fit.condition_number),
        refinement_iteration: 0,
    };
    if settings.refine_iterations > 0 {
        if !fit.model.is_stable() {
            warnings.push("identified model is unstable; prefilter refinement skipped".into());
        } else {
            let refined = refine_prefilter(&u, y_t, &fit.model, settings.refine_iterations)?;
            if refined.stopped_unstable {
                warnings.push("prefilter refinement stopped at an unstable iterate".into());
            }
            map.model = refined.model;
            map.fit_train = refined.report;
            map.refinement_iteration = refined.best_iteration;
        }
    }
    Ok(map)
}

/// `G_t / G_s` between the sampled systems, delayed to match the tailored
/// input: with `u = z^gap y_s` the causal map is `z^-gap · G_t / G_s`.
pub fn analytic_map(g_s: &RationalTF, g_t: &RationalTF, props: &MapProperties, h: f64) -> Result<RationalTF> {
    let sampled = |g: &RationalTF| {
        if g.domain().is_discrete() {
            Ok(g.clone())
        } else {
            discretize_zoh(g, h)
        }
    };
    let map = optimal_map(&sampled(g_s)?, &sampled(g_t)?)?;
    let gap = props.input_recipe.gap();
    let map = if gap > 0 { map.multiply(&RationalTF::delay(gap, h)?)? } else { map };
    if !map.is_causal() {
        return Err(Error::NonCausal(map.relative_degree()));
    }
    Ok(map)
}

/// Source-side data for one split.
#[derive(Clone, Debug)]
pub struct Dataset {
    pub excitation: Signal,
    pub y_s: Signal,
    pub y_t: Signal,
}

/// Everything before identification: systems, structure and recorded data.
#[derive(Clone, Debug)]
pub struct Prepared {
    pub g_s: RationalTF,
    pub g_t: RationalTF,
    pub source: SystemSummary,
    pub target: SystemSummary,
    pub props: MapProperties,
    pub train: Dataset,
    pub test: Dataset,
    pub warnings: Vec<String>,
}

/// Relative degree from a simulated unit step.
pub fn estimate_reldeg_from_step(g: &RationalTF, sample_period: f64) -> Result<RelDegEstimate> {
    if g.domain().is_discrete() {
        let step = step_response(g, 1.0, 20.0 * sample_period, sample_period)?;
        reldeg_from_step_dt(&step, 0, noise_free_threshold(1.0))
    } else {
        let coarse = step_response(g, 1.0, 10.0, 1e-2)?;
        let scale = coarse.max_abs();
        if scale == 0.0 {
            return Err(Error::NoResponse);
        }
        let fine = step_response(g, 1.0, 200.0 * CT_STEP_PERIOD, CT_STEP_PERIOD)?;
        reldeg_from_step_ct(&fine, CT_STEP_THRESHOLD_FRACTION * scale, 5)
    }
}

fn load_system(spec: &SystemSpec, name: &'static str, h: f64) -> Result<RationalTF> {
    let g = spec.to_rational()?;
    if let Some(p) = g.domain().sample_period() {
        if (p - h).abs() > 1e-12 * h {
            return Err(Error::InvalidArgument(format!(
                "{name} sample period {p} differs from the experiment's {h}"
            )));
        }
    }
    if !g.is_causal() {
        return Err(Error::NonCausal(g.relative_degree()));
    }
    if !g.is_bibo_stable() {
        return Err(Error::UnstableSystem(name));
    }
    Ok(g)
}

fn add_noise(sig: &Signal, std: f64, rng: &mut ChaCha8Rng) -> Result<Signal> {
    if std == 0.0 {
        return Ok(sig.clone());
    }
    let normal = Normal::new(0.0, std).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let noisy = sig.values().iter().map(|v| v + normal.sample(rng)).collect();
    Ok(sig.replace_values(noisy))
}

/// Loads the systems, estimates relative degrees, derives the map structure
/// and records both systems on the training and test excitations.
pub fn prepare(cfg: &ExperimentConfig) -> Result<Prepared> {
    cfg.validate().stage("load")?;
    let h = cfg.sample_period;
    let g_s = load_system(&cfg.source, "source", h).stage("load")?;
    let g_t = load_system(&cfg.target, "target", h).stage("load")?;
    if g_s.domain().is_discrete() != g_t.domain().is_discrete() {
        return Err(Error::DomainMismatch(g_s.domain().to_string(), g_t.domain().to_string()).at("load"));
    }
    let mut warnings = Vec::new();
    if !g_s.is_minimum_phase() {
        warnings.push("source is not minimum-phase; no stable inverse exists".into());
    }

    let r_s = estimate_reldeg_from_step(&g_s, h).stage("reldeg")?;
    let r_t = estimate_reldeg_from_step(&g_t, h).stage("reldeg")?;
    for (name, g, est) in [("source", &g_s, &r_s), ("target", &g_t, &r_t)] {
        if est.value as i32 != g.relative_degree() {
            warnings.push(format!(
                "{name} relative degree estimated as {} but the model has {}",
                est.value,
                g.relative_degree()
            ));
        }
    }
    let src = SystemFacts::source(g_s.order(), r_s.value).stage("props")?;
    let tgt = SystemFacts::target(g_t.order(), r_t.value).stage("props")?;
    let mut props = derive_map_properties(&src, &tgt, SignalDomain::Dt);
    if let Some(order) = cfg.identification.order_override {
        if order < props.map_reldeg {
            return Err(Error::InvalidArgument(format!(
                "order override {order} is below the map relative degree {}",
                props.map_reldeg
            ))
            .at("props"));
        }
        props.map_order = order;
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut record = |exc: &super::config::Excitation, duration: f64| -> Result<Dataset> {
        let excitation = exc.signal(duration, h)?;
        let y_s = add_noise(&simulate_tf(&g_s, &excitation)?, cfg.noise_std, &mut rng)?;
        let y_t = add_noise(&simulate_tf(&g_t, &excitation)?, cfg.noise_std, &mut rng)?;
        Ok(Dataset { excitation, y_s, y_t })
    };
    let train = record(&cfg.train_excitation, cfg.train_duration).stage("simulate")?;
    let test = record(&cfg.test_excitation, cfg.test_duration).stage("simulate")?;

    Ok(Prepared {
        source: SystemSummary { spec: cfg.source.clone(), order: g_s.order(), reldeg_estimate: r_s },
        target: SystemSummary { spec: cfg.target.clone(), order: g_t.order(), reldeg_estimate: r_t },
        g_s,
        g_t,
        props,
        train,
        test,
        warnings,
    })
}

/// Result of a full experiment, including the test trajectories.
#[derive(Clone, Debug)]
pub struct ExperimentRun {
    pub report: TransferReport,
    pub test_signals: TransferSignals,
}

/// simulate → estimate relative degrees → derive structure → identify (or
/// construct) → transfer on held-out data → report.
pub fn run_lti_experiment(cfg: &ExperimentConfig) -> Result<TransferReport> {
    run_lti_experiment_detailed(cfg).map(|run| run.report)
}

pub fn run_lti_experiment_detailed(cfg: &ExperimentConfig) -> Result<ExperimentRun> {
    let Prepared { g_s, g_t, source, target, props, train, test, mut warnings } = prepare(cfg)?;
    let opts = &cfg.identification;
    let map = match opts.map_source {
        MapSource::Identify => identify_map(
            &train.y_s,
            &train.y_t,
            &props,
            &IdentifySettings { ridge: opts.ridge, refine_iterations: opts.refine_iterations },
            &mut warnings,
        )
        .stage("identify")?,
        MapSource::Construct => {
            let (static_gain, _) = fit_static_gain(&train.y_s, &train.y_t).stage("identify")?;
            let g = analytic_map(&g_s, &g_t, &props, cfg.sample_period).stage("construct")?;
            if g.order() != props.map_order {
                warnings.push(format!(
                    "shared factors cancel: constructed map order {} against the structural order {}",
                    g.order(),
                    props.map_order
                ));
            }
            let model = ArxModel::from_rational(&g).stage("construct")?;
            let u = tailor_input(&train.y_s, &props, None).stage("tailor")?;
            let fit_train = free_run_report(&model, &u, &train.y_t).stage("construct")?;
            IdentifiedMap {
                map_properties: props.clone(),
                map_source: MapSource::Construct,
                model,
                static_gain,
                fit_train,
                fit_train_one_step: None,
                condition_number: None,
                refinement_iteration: 0,
            }
        }
    };
    let (train_metrics, _) = apply_map(&map, &train.y_s, &train.y_t).stage("transfer")?;
    let (test_metrics, test_signals) = apply_map(&map, &test.y_s, &test.y_t).stage("transfer")?;
    let mut report = TransferReport::assemble(
        &map,
        &test_metrics,
        Some(train_metrics),
        warnings,
        Provenance { config_hash: cfg.hash(), seed: Some(cfg.seed) },
    );
    report.source = Some(source);
    report.target = Some(target);
    Ok(ExperimentRun { report, test_signals })
}

/// Scores a stored map on new recordings.
pub fn evaluate_map(
    map: &IdentifiedMap,
    y_s: &Signal,
    y_t: &Signal,
    provenance: Provenance,
) -> Result<(TransferReport, TransferSignals)> {
    let (metrics, signals) = apply_map(map, y_s, y_t).stage("transfer")?;
    Ok((TransferReport::assemble(map, &metrics, None, Vec::new(), provenance), signals))
}
