//! The on-disk system description shared by every tool that reads or writes
//! transfer functions.
//!
//! ```json
//! { "domain": "dt", "num": [0.4, -0.2], "den": [1.0, -0.8], "sample_period": 0.1 }
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::polynomial::Polynomial;
use super::rational::{Domain, RationalTF};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SpecDomain {
    #[serde(rename = "ct")]
    Ct,
    #[serde(rename = "dt")]
    Dt,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemSpec {
    pub domain: SpecDomain,
    pub num: Vec<f64>,
    pub den: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sample_period: Option<f64>,
}

impl SystemSpec {
    pub fn to_rational(&self) -> Result<RationalTF> {
        let domain = match (self.domain, self.sample_period) {
            (SpecDomain::Ct, None) => Domain::Continuous,
            (SpecDomain::Dt, Some(sample_period)) => Domain::Discrete { sample_period },
            (SpecDomain::Ct, Some(_)) => {
                return Err(Error::Parse("sample_period is only valid for domain \"dt\"".into()))
            }
            (SpecDomain::Dt, None) => {
                return Err(Error::Parse("domain \"dt\" requires sample_period".into()))
            }
        };
        RationalTF::new(
            Polynomial::new(self.num.clone()),
            Polynomial::new(self.den.clone()),
            domain,
        )
    }

    pub fn from_rational(g: &RationalTF) -> Self {
        let coeffs = |p: &Polynomial| {
            if p.is_zero() {
                vec![0.0]
            } else {
                p.coeffs().to_vec()
            }
        };
        SystemSpec {
            domain: if g.domain().is_discrete() { SpecDomain::Dt } else { SpecDomain::Ct },
            num: coeffs(g.num()),
            den: coeffs(g.den()),
            sample_period: g.domain().sample_period(),
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse(format!("system spec: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("spec serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_both_domains() {
        let g = SystemSpec::parse(r#"{"domain":"ct","num":[1],"den":[1,1]}"#)
            .unwrap()
            .to_rational()
            .unwrap();
        assert_eq!(g.domain(), Domain::Continuous);
        assert_eq!(g.relative_degree(), 1);

        let g = SystemSpec::parse(r#"{"domain":"dt","num":[0.5],"den":[1,-0.5],"sample_period":0.1}"#)
            .unwrap()
            .to_rational()
            .unwrap();
        assert_eq!(g.domain(), Domain::Discrete { sample_period: 0.1 });
    }

    #[test]
    fn sample_period_must_match_domain() {
        let dt_missing = SystemSpec::parse(r#"{"domain":"dt","num":[1],"den":[1,1]}"#).unwrap();
        assert!(dt_missing.to_rational().is_err());
        let ct_extra =
            SystemSpec::parse(r#"{"domain":"ct","num":[1],"den":[1,1],"sample_period":1}"#).unwrap();
        assert!(ct_extra.to_rational().is_err());
        assert!(SystemSpec::parse(r#"{"domain":"xt","num":[1],"den":[1]}"#).is_err());
        assert!(SystemSpec::parse(r#"{"domain":"ct","num":[1],"den":[1],"gain":2}"#).is_err());
    }

    #[test]
    fn round_trips_through_json() {
        let g = RationalTF::discrete(&[0.4, -0.2], &[1.0, -0.8], 0.1).unwrap();
        let spec = SystemSpec::from_rational(&g);
        let back = SystemSpec::parse(&spec.to_json()).unwrap().to_rational().unwrap();
        assert_eq!(back, g);
    }
}
