//! Least-squares identification of transfer maps from paired signals.
//!
//! The headline quality measure is the free-run (simulation) fit: the model is
//! driven by the input alone and its output compared with the measurement.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mapprops::MapProperties;
use crate::polytf::{Domain, Polynomial, RationalTF};
use crate::simkit::{Signal, DIVERGENCE_LIMIT};

/// Condition number above which an unregularized regression is refused.
pub const MAX_CONDITION: f64 = 1e12;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    /// `100 · (1 - ‖y - ŷ‖ / ‖y - mean(y)‖)`.
    pub fit_percent: f64,
    /// `‖y - ŷ‖ / √n`.
    pub rms_error: f64,
    pub n_samples: usize,
}

fn fit_report(y: &[f64], yhat: &[f64]) -> Result<FitReport> {
    debug_assert_eq!(y.len(), yhat.len());
    let n = y.len();
    if n == 0 {
        return Err(Error::InvalidArgument("no samples to evaluate".into()));
    }
    let mean = y.iter().sum::<f64>() / n as f64;
    let spread = y.iter().map(|v| (v - mean).powi(2)).sum::<f64>().sqrt();
    if spread == 0.0 {
        return Err(Error::ConstantReference);
    }
    let err = y.iter().zip(yhat).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
    Ok(FitReport {
        fit_percent: 100.0 * (1.0 - err / spread),
        rms_error: err / (n as f64).sqrt(),
        n_samples: n,
    })
}

/// NRMSE fit of a model output against the reference.
pub fn evaluate_fit(y_true: &Signal, y_model: &Signal) -> Result<FitReport> {
    y_true.ensure_compatible(y_model)?;
    fit_report(y_true.values(), y_model.values())
}

/// Fit over samples `skip_front .. len - skip_back`.
pub fn evaluate_fit_window(
    y_true: &Signal,
    y_model: &Signal,
    skip_front: usize,
    skip_back: usize,
) -> Result<FitReport> {
    y_true.ensure_compatible(y_model)?;
    let n = y_true.len();
    if skip_front + skip_back >= n {
        return Err(Error::SignalTooShort { len: n, needed: skip_front + skip_back });
    }
    let range = skip_front..n - skip_back;
    fit_report(&y_true.values()[range.clone()], &y_model.values()[range])
}

/// Least-squares gain `⟨y_s, y_t⟩ / ⟨y_s, y_s⟩` and the fit of `gain · y_s`.
pub fn fit_static_gain(y_s: &Signal, y_t: &Signal) -> Result<(f64, FitReport)> {
    y_s.ensure_compatible(y_t)?;
    let ss: f64 = y_s.values().iter().map(|v| v * v).sum();
    if ss == 0.0 {
        return Err(Error::NoExcitation);
    }
    let st: f64 = y_s.values().iter().zip(y_t.values()).map(|(a, b)| a * b).sum();
    let gain = st / ss;
    let report = evaluate_fit(y_t, &y_s.scale(gain))?;
    Ok((gain, report))
}

/// `y(k) = Σ_{i=1..n} a_i y(k-i) + Σ_{j=r..n} b_j u(k-j)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ArxDocument", into = "ArxDocument")]
pub struct ArxModel {
    a: Vec<f64>,
    b: Vec<f64>,
    reldeg: usize,
    sample_period: f64,
}

impl ArxModel {
    /// `a` holds lags `1..=n`; `b` holds lags `reldeg..=n`.
    pub fn new(a: Vec<f64>, b: Vec<f64>, reldeg: usize, sample_period: f64) -> Result<Self> {
        let n = a.len();
        if n == 0 {
            return Err(Error::InvalidArgument("ARX order must be positive".into()));
        }
        if reldeg > n || b.len() != n - reldeg + 1 {
            return Err(Error::InvalidArgument(format!(
                "order {n} with relative degree {reldeg} needs {} input coefficients, got {}",
                (n + 1).saturating_sub(reldeg),
                b.len()
            )));
        }
        if !(sample_period > 0.0) {
            return Err(Error::InvalidArgument("sample period must be positive".into()));
        }
        Ok(ArxModel {
            a,
            b,
            reldeg,
            sample_period,
        })
    }

    pub fn order(&self) -> usize {
        self.a.len()
    }

    pub fn reldeg(&self) -> usize {
        self.reldeg
    }

    pub fn sample_period(&self) -> f64 {
        self.sample_period
    }

    /// Output-lag coefficients for lags `1..=order`.
    pub fn a(&self) -> &[f64] {
        &self.a
    }

    /// Input-lag coefficients for lags `reldeg..=order`.
    pub fn b(&self) -> &[f64] {
        &self.b
    }

    pub fn input_lags(&self) -> std::ops::RangeInclusive<usize> {
        self.reldeg..=self.order()
    }

    pub fn num_params(&self) -> usize {
        self.a.len() + self.b.len()
    }

    /// `den = z^n - a_1 z^(n-1) - … - a_n`, unnormalized.
    pub fn den_polynomial(&self) -> Polynomial {
        let mut den = vec![1.0];
        den.extend(self.a.iter().map(|a| -a));
        Polynomial::new(den)
    }

    /// `num = Σ b_j z^(n-j)`.
    pub fn num_polynomial(&self) -> Polynomial {
        let mut num = vec![0.0; self.order() + 1];
        for (j, b) in self.input_lags().zip(&self.b) {
            num[j] = *b;
        }
        Polynomial::new(num)
    }

    pub fn to_rational(&self) -> Result<RationalTF> {
        RationalTF::new(
            self.num_polynomial(),
            self.den_polynomial(),
            Domain::Discrete { sample_period: self.sample_period },
        )
    }

    /// Reads the coefficients of a causal discrete transfer function.
    pub fn from_rational(g: &RationalTF) -> Result<Self> {
        let Domain::Discrete { sample_period } = g.domain() else {
            return Err(Error::InvalidArgument("ARX models are discrete-time".into()));
        };
        if !g.is_causal() {
            return Err(Error::NonCausal(g.relative_degree()));
        }
        if g.is_zero() {
            return Err(Error::InvalidArgument("zero transfer function".into()));
        }
        let n = g.order();
        if n == 0 {
            // static gain k as y(k) = 0·y(k-1) + k·u(k) + 0·u(k-1)
            return ArxModel::new(vec![0.0], vec![g.num().coeff(0) / g.den().coeff(0), 0.0], 0, sample_period);
        }
        let r = g.relative_degree() as usize;
        let a = (1..=n).map(|i| -g.den().coeff(n - i)).collect();
        let b = (r..=n).map(|j| g.num().coeff(n - j)).collect();
        ArxModel::new(a, b, r, sample_period)
    }

    fn step(&self, k: usize, y: &[f64], u: &[f64]) -> f64 {
        let mut acc = 0.0;
        for (i, a) in self.a.iter().enumerate() {
            if k > i {
                acc += a * y[k - i - 1];
            }
        }
        for (j, b) in self.input_lags().zip(&self.b) {
            if k >= j {
                acc += b * u[k - j];
            }
        }
        acc
    }

    /// Free-run output from rest (zero pre-history).
    pub fn simulate(&self, u: &Signal) -> Result<Signal> {
        self.simulate_from(u, &[])
    }

    /// Free-run output whose first `y_init.len()` samples are given (at most
    /// the model order), continuing from the model's own past outputs.
    pub fn simulate_from(&self, u: &Signal, y_init: &[f64]) -> Result<Signal> {
        if y_init.len() > self.order() {
            return Err(Error::InvalidArgument("more initial outputs than the model order".into()));
        }
        let uv = u.values();
        let mut y = vec![0.0; uv.len()];
        let bound = DIVERGENCE_LIMIT * (1.0 + u.max_abs());
        for k in 0..uv.len() {
            y[k] = match y_init.get(k) {
                Some(&v) => v,
                None => self.step(k, &y, uv),
            };
            if !(y[k].abs() <= bound) {
                return Err(Error::ModelDiverged { index: k });
            }
        }
        Ok(u.replace_values(y))
    }

    /// One-step-ahead prediction using measured past outputs.
    pub fn predict(&self, u: &Signal, y: &Signal) -> Result<Signal> {
        u.ensure_compatible(y)?;
        let yv = y.values();
        Ok(y.replace_values((0..yv.len()).map(|k| self.step(k, yv, u.values())).collect()))
    }

    pub fn is_stable(&self) -> bool {
        self.den_polynomial()
            .roots()
            .into_iter()
            .all(|z| z.norm() < 1.0 - crate::polytf::STABILITY_MARGIN)
    }

    fn regressor_row(&self, k: usize, y: &[f64], u: &[f64], row: &mut [f64]) {
        let n = self.order();
        for i in 0..n {
            row[i] = y[k - i - 1];
        }
        for (c, j) in self.input_lags().enumerate() {
            row[n + c] = u[k - j];
        }
    }
}

#[derive(Serialize, Deserialize)]
struct LagCoeff {
    lag: usize,
    coeff: f64,
}

/// Serialized form with explicit lag annotations.
#[derive(Serialize, Deserialize)]
struct ArxDocument {
    order: usize,
    reldeg: usize,
    sample_period: f64,
    output_lags: Vec<LagCoeff>,
    input_lags: Vec<LagCoeff>,
}

impl From<ArxModel> for ArxDocument {
    fn from(m: ArxModel) -> Self {
        ArxDocument {
            order: m.order(),
            reldeg: m.reldeg,
            sample_period: m.sample_period,
            output_lags: m
                .a
                .iter()
                .enumerate()
                .map(|(i, &coeff)| LagCoeff { lag: i + 1, coeff })
                .collect(),
            input_lags: m
                .input_lags()
                .zip(&m.b)
                .map(|(lag, &coeff)| LagCoeff { lag, coeff })
                .collect(),
        }
    }
}

impl TryFrom<ArxDocument> for ArxModel {
    type Error = Error;

    fn try_from(doc: ArxDocument) -> Result<Self> {
        let expect_lags = |lags: &[LagCoeff], range: std::ops::RangeInclusive<usize>| {
            lags.len() == range.clone().count() && lags.iter().zip(range).all(|(l, k)| l.lag == k)
        };
        if !expect_lags(&doc.output_lags, 1..=doc.order)
            || !expect_lags(&doc.input_lags, doc.reldeg..=doc.order)
        {
            return Err(Error::Parse("ARX lags do not match order and reldeg".into()));
        }
        ArxModel::new(
            doc.output_lags.iter().map(|l| l.coeff).collect(),
            doc.input_lags.iter().map(|l| l.coeff).collect(),
            doc.reldeg,
            doc.sample_period,
        )
    }
}

/// Identified model with its diagnostics.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArxFit {
    pub model: ArxModel,
    /// Free-run fit on the training data.
    pub report: FitReport,
    pub one_step: FitReport,
    pub condition_number: f64,
}

/// Samples excluded from the end of a training window: held values appended by
/// a forward shift are not data.
fn usable_len(u: &Signal) -> usize {
    u.len() - u.shift()
}

/// Free-run fit seeded with the first `order` measured outputs, scored on the
/// remaining samples.
pub fn free_run_report(model: &ArxModel, u: &Signal, y: &Signal) -> Result<FitReport> {
    u.ensure_compatible(y)?;
    let n = model.order();
    let end = usable_len(u);
    if end <= n + 1 {
        return Err(Error::SignalTooShort { len: end, needed: n + 1 });
    }
    let sim = model.simulate_from(u, &y.values()[..n])?;
    fit_report(&y.values()[n..end], &sim.values()[n..end])
}

/// Least-squares ARX fit with the lag structure from `props`.
///
/// Rows start at `k = order` so every regressor is measured data. The solve
/// goes through the SVD of the regressor matrix; `ridge` adds
/// `ridge · trace(ΦᵀΦ) / p` to the normal-equation diagonal.
pub fn fit_arx(u: &Signal, y: &Signal, props: &MapProperties, ridge: f64) -> Result<ArxFit> {
    let n = props.map_order;
    let r = props.map_reldeg;
    fit_arx_structure(u, y, n, r, ridge)
}

pub fn fit_arx_structure(
    u: &Signal,
    y: &Signal,
    order: usize,
    reldeg: usize,
    ridge: f64,
) -> Result<ArxFit> {
    u.ensure_compatible(y)?;
    if !(ridge >= 0.0) {
        return Err(Error::InvalidArgument(format!("ridge must be nonnegative, got {ridge}")));
    }
    let template = ArxModel::new(
        vec![0.0; order],
        vec![0.0; (order + 1).saturating_sub(reldeg)],
        reldeg,
        u.sample_period(),
    )?;
    let p = template.num_params();
    let end = usable_len(u);
    if end <= 10 * p {
        return Err(Error::SignalTooShort { len: end, needed: 10 * p });
    }
    let rows = end - order;
    let (uv, yv) = (u.values(), y.values());
    let mut phi = DMatrix::<f64>::zeros(rows, p);
    let mut row = vec![0.0; p];
    for (i, k) in (order..end).enumerate() {
        template.regressor_row(k, yv, uv, &mut row);
        phi.row_mut(i).copy_from_slice(&row);
    }
    let target = DVector::from_column_slice(&yv[order..end]);

    // Householder QR first: a direct SVD of the tall regressor loses digits
    // on the small singular values, the SVD of the square factor does not
    let qr = phi.qr();
    let qt_target = qr.q().transpose() * &target;
    let svd = qr.r().svd(true, true);
    let sv = &svd.singular_values;
    let smax = sv.max();
    let smin = sv.min();
    let condition_number = if smin > 0.0 { smax / smin } else { f64::INFINITY };
    if ridge == 0.0 && !(condition_number <= MAX_CONDITION) {
        return Err(Error::RankDeficient { condition: condition_number });
    }
    let lambda = ridge * sv.iter().map(|s| s * s).sum::<f64>() / p as f64;
    let uu = svd.u.as_ref().expect("U requested");
    let vt = svd.v_t.as_ref().expect("V^T requested");
    let projected = uu.transpose() * &qt_target;
    let mut theta = DVector::<f64>::zeros(p);
    for i in 0..sv.len() {
        let s = sv[i];
        let denom = s * s + lambda;
        if denom > 0.0 {
            theta += vt.row(i).transpose() * (projected[i] * s / denom);
        }
    }
    let model = ArxModel::new(
        theta.as_slice()[..order].to_vec(),
        theta.as_slice()[order..].to_vec(),
        reldeg,
        u.sample_period(),
    )?;
    let report = free_run_report(&model, u, y)?;
    let predicted = model.predict(u, y)?;
    let one_step = fit_report(&yv[order..end], &predicted.values()[order..end])?;
    Ok(ArxFit {
        model,
        report,
        one_step,
        condition_number,
    })
}

/// Outcome of [`refine_prefilter`].
#[derive(Clone, Debug, PartialEq)]
pub struct Refinement {
    pub model: ArxModel,
    pub report: FitReport,
    /// 0 when the initial model was kept.
    pub best_iteration: usize,
    /// Set when an iterate had an unstable denominator and refinement stopped.
    pub stopped_unstable: bool,
}

fn filter_by_inverse_den(model: &ArxModel, sig: &Signal) -> Signal {
    let v = sig.values();
    let mut out = vec![0.0; v.len()];
    for k in 0..v.len() {
        let mut acc = v[k];
        for (i, a) in model.a().iter().enumerate() {
            if k > i {
                acc += a * out[k - i - 1];
            }
        }
        out[k] = acc;
    }
    sig.replace_values(out)
}

/// Iterative prefiltering: both signals are filtered through `1 / Â(z)` of the
/// previous iterate and the ARX fit is repeated. Returns the iterate with the
/// best free-run fit on the unfiltered data, never worse than `init`.
pub fn refine_prefilter(
    u: &Signal,
    y: &Signal,
    init: &ArxModel,
    iterations: usize,
) -> Result<Refinement> {
    if !init.is_stable() {
        return Err(Error::InvalidArgument("initial model must be stable".into()));
    }
    let mut best = Refinement {
        model: init.clone(),
        report: free_run_report(init, u, y)?,
        best_iteration: 0,
        stopped_unstable: false,
    };
    let mut current = init.clone();
    for it in 1..=iterations {
        let uf = filter_by_inverse_den(&current, u).with_shift(u.shift());
        let yf = filter_by_inverse_den(&current, y);
        let next = match fit_arx_structure(&uf, &yf, init.order(), init.reldeg(), 0.0) {
            Ok(fit) => fit.model,
            Err(Error::RankDeficient { .. }) | Err(Error::ModelDiverged { .. }) => break,
            Err(e) => return Err(e),
        };
        if !next.is_stable() {
            best.stopped_unstable = true;
            break;
        }
        if let Ok(report) = free_run_report(&next, u, y) {
            if report.fit_percent > best.report.fit_percent {
                best.model = next.clone();
                best.report = report;
                best.best_iteration = it;
            }
        }
        current = next;
    }
    Ok(best)
}
