//! Structural properties of the optimal transfer map (order, relative degree
//! and the training-input recipe) from the order and relative degree of the
//! source and target systems, plus the matching input tailoring.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::polytf::{Domain, Polynomial};
use crate::simkit::{differentiate, lowpass, shift_forward, Signal};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SystemFacts {
    pub order: usize,
    pub reldeg: usize,
    pub label: String,
}

impl SystemFacts {
    pub fn new(order: usize, reldeg: usize, label: impl Into<String>) -> Result<Self> {
        if order == 0 {
            return Err(Error::InvalidArgument("system order must be positive".into()));
        }
        if reldeg > order {
            return Err(Error::InvalidArgument(format!(
                "relative degree {reldeg} exceeds order {order}"
            )));
        }
        Ok(SystemFacts {
            order,
            reldeg,
            label: label.into(),
        })
    }

    pub fn source(order: usize, reldeg: usize) -> Result<Self> {
        Self::new(order, reldeg, "source")
    }

    pub fn target(order: usize, reldeg: usize) -> Result<Self> {
        Self::new(order, reldeg, "target")
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SignalDomain {
    Ct,
    Dt,
}

impl From<Domain> for SignalDomain {
    fn from(d: Domain) -> Self {
        if d.is_discrete() {
            SignalDomain::Dt
        } else {
            SignalDomain::Ct
        }
    }
}

/// How the source output is turned into the map's training input.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "recipe", rename_all = "snake_case")]
pub enum InputRecipe {
    RawSource,
    ShiftedSource { shift: usize },
    DerivativeSource { order: usize },
    /// `Σ p_i · y_s^(i)` for a stable polynomial `p` of degree `r_s - r_t`.
    PrefilteredSource { p: Polynomial },
}

impl InputRecipe {
    /// `r_s - r_t` for the tailored recipes, 0 for the raw source.
    pub fn gap(&self) -> usize {
        match self {
            InputRecipe::RawSource => 0,
            InputRecipe::ShiftedSource { shift } => *shift,
            InputRecipe::DerivativeSource { order } => *order,
            InputRecipe::PrefilteredSource { p } => p.degree().unwrap_or(0),
        }
    }

    pub fn input_name(&self) -> &'static str {
        match self {
            InputRecipe::RawSource => "y_s",
            _ => "y_s,mod",
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputData {
    #[default]
    TargetOutput,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MapProperties {
    pub map_order: usize,
    pub map_reldeg: usize,
    pub input_recipe: InputRecipe,
    pub output_data: OutputData,
}

/// Order, relative degree and input recipe of the optimal map.
///
/// With `r_s <= r_t` the map takes the raw source output and has order
/// `n_s + n_t - r_s` and relative degree `r_t - r_s`. Otherwise the input is
/// advanced by `r_s - r_t` samples (DT) or differentiated `r_s - r_t` times
/// (CT), and the map has order `n_s + n_t - r_t` and relative degree 0.
pub fn derive_map_properties(
    src: &SystemFacts,
    tgt: &SystemFacts,
    signal_domain: SignalDomain,
) -> MapProperties {
    let (ns, rs, nt, rt) = (src.order, src.reldeg, tgt.order, tgt.reldeg);
    if rs <= rt {
        MapProperties {
            map_order: ns + nt - rs,
            map_reldeg: rt - rs,
            input_recipe: InputRecipe::RawSource,
            output_data: OutputData::TargetOutput,
        }
    } else {
        let gap = rs - rt;
        MapProperties {
            map_order: ns + nt - rt,
            map_reldeg: 0,
            input_recipe: match signal_domain {
                SignalDomain::Dt => InputRecipe::ShiftedSource { shift: gap },
                SignalDomain::Ct => InputRecipe::DerivativeSource { order: gap },
            },
            output_data: OutputData::TargetOutput,
        }
    }
}

impl MapProperties {
    /// Swaps in another tailoring recipe for the same `r_s - r_t` gap.
    /// Prefilter polynomials must have all roots in the open left half plane.
    pub fn with_recipe(&self, recipe: InputRecipe) -> Result<MapProperties> {
        let gap = self.input_recipe.gap();
        if gap == 0 {
            return Err(Error::InvalidArgument(
                "the raw-source branch takes no tailored input".into(),
            ));
        }
        if recipe.gap() != gap || recipe == InputRecipe::RawSource {
            return Err(Error::InvalidArgument(format!(
                "recipe must bridge a relative-degree gap of {gap}"
            )));
        }
        if let InputRecipe::PrefilteredSource { p } = &recipe {
            if !p.roots().into_iter().all(|z| Domain::Continuous.root_is_stable(z)) {
                return Err(Error::InvalidArgument(
                    "prefilter polynomial must have all roots in the open left half plane".into(),
                ));
            }
        }
        Ok(MapProperties {
            input_recipe: recipe,
            ..self.clone()
        })
    }

    pub fn regressors(&self) -> RegressorSet {
        RegressorSet {
            output_lags: (1..=self.map_order).collect(),
            input_lags: (self.map_reldeg..=self.map_order).collect(),
            input_name: self.input_recipe.input_name(),
        }
    }
}

impl fmt::Display for MapProperties {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "order {}, relative degree {}, input ", self.map_order, self.map_reldeg)?;
        match &self.input_recipe {
            InputRecipe::RawSource => write!(f, "y_s"),
            InputRecipe::ShiftedSource { shift } => write!(f, "y_s shifted forward by {shift}"),
            InputRecipe::DerivativeSource { order } => write!(f, "d^{order} y_s / dt^{order}"),
            InputRecipe::PrefilteredSource { p } => write!(f, "P(d/dt) y_s, P(s) = {}", p.display_in('s')),
        }
    }
}

/// Builds the map's training input from the recorded source output.
///
/// `filter_cutoff_hz` low-passes the source output before differentiation
/// (derivative and prefilter recipes only).
pub fn tailor_input(
    y_s: &Signal,
    props: &MapProperties,
    filter_cutoff_hz: Option<f64>,
) -> Result<Signal> {
    let filtered = || match filter_cutoff_hz {
        Some(fc) => lowpass(y_s, fc),
        None => Ok(y_s.clone()),
    };
    match &props.input_recipe {
        InputRecipe::RawSource => Ok(y_s.clone()),
        InputRecipe::ShiftedSource { shift } => shift_forward(y_s, *shift),
        InputRecipe::DerivativeSource { order } => differentiate(&filtered()?, *order),
        InputRecipe::PrefilteredSource { p } => {
            let base = filtered()?;
            let n = p.degree().unwrap_or(0);
            let mut acc = base.scale(p.coeff(0));
            for i in 1..=n {
                acc = acc.add(&differentiate(&base, i)?.scale(p.coeff(i)))?;
            }
            Ok(acc)
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Regressor {
    Output { lag: usize },
    Input { lag: usize },
}

/// Regressors of a discrete-time map: past map outputs and current/past inputs.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RegressorSet {
    pub output_lags: Vec<usize>,
    pub input_lags: Vec<usize>,
    pub input_name: &'static str,
}

impl RegressorSet {
    pub fn regressors(&self) -> Vec<Regressor> {
        self.output_lags
            .iter()
            .map(|&lag| Regressor::Output { lag })
            .chain(self.input_lags.iter().map(|&lag| Regressor::Input { lag }))
            .collect()
    }

    pub fn tags(&self) -> Vec<String> {
        let lagged = |name: &str, lag: usize| {
            if lag == 0 {
                format!("{name}(k)")
            } else {
                format!("{name}(k-{lag})")
            }
        };
        self.regressors()
            .into_iter()
            .map(|r| match r {
                Regressor::Output { lag } => lagged("y_TL", lag),
                Regressor::Input { lag } => lagged(self.input_name, lag),
            })
            .collect()
    }

    pub fn len(&self) -> usize {
        self.output_lags.len() + self.input_lags.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Regressor design for discrete-time identification. Continuous-time maps are
/// identified after discretization, so `Ct` is rejected.
pub fn regressor_list(props: &MapProperties, domain: SignalDomain) -> Result<RegressorSet> {
    match domain {
        SignalDomain::Dt => Ok(props.regressors()),
        SignalDomain::Ct => Err(Error::InvalidArgument(
            "regressors are defined for discrete-time maps only; discretize first".into(),
        )),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn props(ns: usize, rs: usize, nt: usize, rt: usize, d: SignalDomain) -> MapProperties {
        derive_map_properties(
            &SystemFacts::source(ns, rs).unwrap(),
            &SystemFacts::target(nt, rt).unwrap(),
            d,
        )
    }

    #[test]
    fn equal_relative_degrees() {
        let p = props(2, 1, 2, 1, SignalDomain::Ct);
        assert_eq!((p.map_order, p.map_reldeg), (3, 0));
        assert_eq!(p.input_recipe, InputRecipe::RawSource);
    }

    #[test]
    fn higher_source_relative_degree_dt() {
        let p = props(5, 4, 3, 3, SignalDomain::Dt);
        assert_eq!((p.map_order, p.map_reldeg), (5, 0));
        assert_eq!(p.input_recipe, InputRecipe::ShiftedSource { shift: 1 });
    }

    #[test]
    fn higher_source_relative_degree_ct() {
        let p = props(3, 3, 2, 1, SignalDomain::Ct);
        assert_eq!((p.map_order, p.map_reldeg), (4, 0));
        assert_eq!(p.input_recipe, InputRecipe::DerivativeSource { order: 2 });
    }

    #[test]
    fn lower_source_relative_degree() {
        let p = props(1, 1, 2, 2, SignalDomain::Ct);
        assert_eq!((p.map_order, p.map_reldeg), (2, 1));
        assert_eq!(p.input_recipe, InputRecipe::RawSource);
    }

    #[test]
    fn facts_validation() {
        assert!(SystemFacts::source(0, 0).is_err());
        assert!(SystemFacts::source(2, 3).is_err());
        assert!(SystemFacts::source(2, 2).is_ok());
    }

    #[test]
    fn regressor_tags() {
        let mut p = props(2, 1, 2, 2, SignalDomain::Dt);
        assert_eq!((p.map_order, p.map_reldeg), (3, 1));
        assert_eq!(
            regressor_list(&p, SignalDomain::Dt).unwrap().tags(),
            ["y_TL(k-1)", "y_TL(k-2)", "y_TL(k-3)", "y_s(k-1)", "y_s(k-2)", "y_s(k-3)"]
        );

        p.map_order = 1;
        p.map_reldeg = 0;
        assert_eq!(p.regressors().tags(), ["y_TL(k-1)", "y_s(k)", "y_s(k-1)"]);

        let p = props(5, 4, 3, 3, SignalDomain::Dt);
        let tags = p.regressors().tags();
        assert_eq!(tags.len(), 11);
        assert_eq!(tags[4], "y_TL(k-5)");
        assert_eq!(tags[5], "y_s,mod(k)");
        assert_eq!(tags[10], "y_s,mod(k-5)");

        assert!(regressor_list(&p, SignalDomain::Ct).is_err());
    }

    #[test]
    fn tailoring() {
        let y = Signal::new(vec![1.0, 2.0, 3.0, 4.0], 1.0).unwrap();
        let raw = props(2, 1, 2, 1, SignalDomain::Dt);
        assert_eq!(tailor_input(&y, &raw, None).unwrap(), y);

        let shifted = props(2, 2, 2, 1, SignalDomain::Dt);
        assert_eq!(tailor_input(&y, &shifted, None).unwrap().values(), &[2.0, 3.0, 4.0, 4.0]);

        let ramp = Signal::from_fn(10, 0.5, |t| 2.0 * t).unwrap();
        let derivative = props(2, 2, 2, 1, SignalDomain::Ct);
        let d = tailor_input(&ramp, &derivative, None).unwrap();
        assert!(d.values().iter().all(|v| (v - 2.0).abs() < 1e-12));
    }

    #[test]
    fn prefilter_recipe_adds_derivative() {
        let base = props(2, 2, 2, 1, SignalDomain::Ct);
        let p = base
            .with_recipe(InputRecipe::PrefilteredSource { p: Polynomial::new(vec![1.0, 1.0]) })
            .unwrap();
        let y = Signal::from_fn(50, 0.1, |t| t * t).unwrap();
        let out = tailor_input(&y, &p, None).unwrap();
        for (k, v) in out.values().iter().enumerate() {
            let t = k as f64 * 0.1;
            assert!((v - (t * t + 2.0 * t)).abs() < 1e-9);
        }
    }

    #[test]
    fn prefilter_validation() {
        let base = props(2, 2, 2, 1, SignalDomain::Ct);
        let unstable = InputRecipe::PrefilteredSource { p: Polynomial::new(vec![1.0, -1.0]) };
        assert!(base.with_recipe(unstable).is_err());
        let wrong_degree = InputRecipe::PrefilteredSource { p: Polynomial::new(vec![1.0, 3.0, 2.0]) };
        assert!(base.with_recipe(wrong_degree).is_err());
        assert!(base.with_recipe(InputRecipe::ShiftedSource { shift: 1 }).is_ok());
        let raw = props(2, 1, 2, 1, SignalDomain::Ct);
        assert!(raw.with_recipe(InputRecipe::ShiftedSource { shift: 1 }).is_err());
    }

    #[test]
    fn serializes_with_recipe_tag() {
        let p = props(5, 4, 3, 3, SignalDomain::Dt);
        let json = serde_json::to_string(&p).unwrap();
        assert_eq!(
            json,
            r#"{"map_order":5,"map_reldeg":0,"input_recipe":{"recipe":"shifted_source","shift":1},"output_data":"target_output"}"#
        );
        let back: MapProperties = serde_json::from_str(&json).unwrap();
        assert_eq!(back, p);
    }
}
