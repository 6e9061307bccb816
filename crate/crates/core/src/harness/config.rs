use std::f64::consts::PI;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::polytf::SystemSpec;
use crate::simkit::Signal;

/// Reference input applied to both systems.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Excitation {
    /// Step from 0 to `amplitude` at `t = 0`.
    Step { amplitude: f64 },
    /// `Σ a_i sin(2π f_i t + φ_i)` with Schroeder phases; frequencies in Hz.
    MultiSine {
        frequencies: Vec<f64>,
        amplitudes: Vec<f64>,
    },
    /// Random ±amplitude levels that may switch every `1 / band_hz` seconds.
    Prbs { seed: u64, band_hz: f64, amplitude: f64 },
}

impl Excitation {
    pub fn validate(&self, sample_period: f64) -> Result<()> {
        let nyquist = 0.5 / sample_period;
        match self {
            Excitation::Step { amplitude } if !amplitude.is_finite() || *amplitude == 0.0 => {
                Err(Error::InvalidArgument("step amplitude must be finite and nonzero".into()))
            }
            Excitation::MultiSine { frequencies, amplitudes } => {
                if frequencies.is_empty() || frequencies.len() != amplitudes.len() {
                    return Err(Error::InvalidArgument(
                        "multi-sine needs matching, nonempty frequency and amplitude lists".into(),
                    ));
                }
                if let Some(f) = frequencies.iter().find(|f| !(**f > 0.0 && **f < nyquist)) {
                    return Err(Error::InvalidArgument(format!(
                        "multi-sine frequency {f} Hz outside (0, {nyquist}) Hz"
                    )));
                }
                if amplitudes.iter().any(|a| !a.is_finite()) {
                    return Err(Error::InvalidArgument("multi-sine amplitudes must be finite".into()));
                }
                Ok(())
            }
            Excitation::Prbs { band_hz, amplitude, .. } => {
                if !(*band_hz > 0.0 && *band_hz <= 1.0 / sample_period) {
                    return Err(Error::InvalidArgument(format!(
                        "PRBS band {band_hz} Hz outside (0, {}] Hz",
                        1.0 / sample_period
                    )));
                }
                if !amplitude.is_finite() || *amplitude == 0.0 {
                    return Err(Error::InvalidArgument("PRBS amplitude must be finite and nonzero".into()));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    /// Samples the excitation over `[0, duration]`.
    pub fn signal(&self, duration: f64, sample_period: f64) -> Result<Signal> {
        self.validate(sample_period)?;
        if !(duration > 0.0) {
            return Err(Error::InvalidArgument(format!("duration must be positive, got {duration}")));
        }
        let n = (duration / sample_period).round() as usize + 1;
        match self {
            Excitation::Step { amplitude } => Signal::constant(*amplitude, n, sample_period),
            Excitation::MultiSine { frequencies, amplitudes } => {
                let k = frequencies.len() as f64;
                let phases: Vec<f64> =
                    (1..=frequencies.len()).map(|i| -PI * (i * (i - 1)) as f64 / k).collect();
                Signal::from_fn(n, sample_period, |t| {
                    frequencies
                        .iter()
                        .zip(amplitudes)
                        .zip(&phases)
                        .map(|((f, a), p)| a * (2.0 * PI * f * t + p).sin())
                        .sum()
                })
            }
            Excitation::Prbs { seed, band_hz, amplitude } => {
                let hold = ((1.0 / (band_hz * sample_period)).round() as usize).max(1);
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                let mut level = *amplitude;
                let values = (0..n)
                    .map(|k| {
                        if k % hold == 0 {
                            level = if rng.gen::<bool>() { *amplitude } else { -*amplitude };
                        }
                        level
                    })
                    .collect();
                Signal::new(values, sample_period)
            }
        }
    }
}

/// Where the dynamic map comes from.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MapSource {
    /// Least-squares ARX fit on the training data.
    #[default]
    Identify,
    /// Analytic `G_t / G_s` of the sampled systems, no data fitting.
    Construct,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IdentOptions {
    pub ridge: f64,
    pub refine_iterations: usize,
    pub order_override: Option<usize>,
    pub map_source: MapSource,
}

impl Default for IdentOptions {
    fn default() -> Self {
        IdentOptions {
            ridge: 0.0,
            refine_iterations: 0,
            order_override: None,
            map_source: MapSource::Identify,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub source: SystemSpec,
    pub target: SystemSpec,
    pub train_excitation: Excitation,
    pub test_excitation: Excitation,
    pub train_duration: f64,
    pub test_duration: f64,
    pub sample_period: f64,
    pub seed: u64,
    /// Standard deviation of white noise added to every recorded output.
    #[serde(default)]
    pub noise_std: f64,
    #[serde(default)]
    pub identification: IdentOptions,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("train_duration", self.train_duration),
            ("test_duration", self.test_duration),
            ("sample_period", self.sample_period),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidArgument(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.noise_std >= 0.0 && self.noise_std.is_finite()) {
            return Err(Error::InvalidArgument("noise_std must be nonnegative".into()));
        }
        if !(self.identification.ridge >= 0.0) {
            return Err(Error::InvalidArgument("ridge must be nonnegative".into()));
        }
        if self.identification.order_override == Some(0) {
            return Err(Error::InvalidArgument("order override must be positive".into()));
        }
        self.train_excitation.validate(self.sample_period)?;
        self.test_excitation.validate(self.sample_period)?;
        if let (Excitation::MultiSine { .. }, Excitation::MultiSine { .. }) =
            (&self.train_excitation, &self.test_excitation)
        {
            if self.train_excitation == self.test_excitation {
                return Err(Error::InvalidArgument(
                    "test excitation must differ from the training excitation".into(),
                ));
            }
        }
        Ok(())
    }

    pub fn parse(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse(format!("experiment config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// SHA-256 of the compact JSON form.
    pub fn hash(&self) -> String {
        let text = serde_json::to_string(self).expect("config serializes");
        hex::encode(Sha256::digest(text.as_bytes()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::demo_config;

    #[test]
    fn multisine_is_sum_of_tones() {
        let e = Excitation::MultiSine { frequencies: vec![1.0], amplitudes: vec![2.0] };
        let s = e.signal(1.0, 0.125).unwrap();
        assert_eq!(s.len(), 9);
        assert!((s.values()[2] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn prbs_is_seeded_and_held() {
        let e = Excitation::Prbs { seed: 4, band_hz: 2.0, amplitude: 0.5 };
        let a = e.signal(10.0, 0.1).unwrap();
        assert_eq!(a, e.signal(10.0, 0.1).unwrap());
        assert!(a.values().iter().all(|v| v.abs() == 0.5));
        for w in a.values().chunks(5) {
            assert!(w.iter().all(|v| *v == w[0]));
        }
    }

    #[test]
    fn excitation_validation() {
        let above = Excitation::MultiSine { frequencies: vec![6.0], amplitudes: vec![1.0] };
        assert!(above.signal(1.0, 0.1).is_err());
        let ragged = Excitation::MultiSine { frequencies: vec![1.0], amplitudes: vec![] };
        assert!(ragged.validate(0.1).is_err());
    }

    #[test]
    fn config_rules() {
        let mut cfg = demo_config(1);
        cfg.validate().unwrap();
        cfg.test_excitation = cfg.train_excitation.clone();
        assert!(cfg.validate().is_err());
        let mut cfg = demo_config(1);
        cfg.test_duration = 0.0;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn json_round_trip_and_hash() {
        let cfg = demo_config(3);
        let back = ExperimentConfig::parse(&cfg.to_json()).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.hash(), cfg.hash());
        assert_ne!(demo_config(4).hash(), cfg.hash());
    }
}
