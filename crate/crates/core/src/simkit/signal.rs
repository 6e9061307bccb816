use std::fmt::Write as _;
use std::io::{BufRead, Write};
use std::path::Path;

use crate::error::{Error, Result};

/// A uniformly sampled scalar time series.
#[derive(Clone, Debug, PartialEq)]
pub struct Signal {
    values: Vec<f64>,
    sample_period: f64,
    start_time: f64,
    shift: usize,
}

impl Signal {
    pub fn new(values: Vec<f64>, sample_period: f64) -> Result<Self> {
        Self::with_start(values, sample_period, 0.0)
    }

    pub fn with_start(values: Vec<f64>, sample_period: f64, start_time: f64) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidArgument("signal must have at least one sample".into()));
        }
        if !(sample_period.is_finite() && sample_period > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "sample period must be positive, got {sample_period}"
            )));
        }
        Ok(Signal {
            values,
            sample_period,
            start_time,
            shift: 0,
        })
    }

    /// Samples `f(t)` at `t = k·h` for `k = 0..n`.
    pub fn from_fn(n: usize, sample_period: f64, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new((0..n).map(|k| f(k as f64 * sample_period)).collect(), sample_period)
    }

    pub fn constant(value: f64, n: usize, sample_period: f64) -> Result<Self> {
        Self::new(vec![value; n], sample_period)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn sample_period(&self) -> f64 {
        self.sample_period
    }

    pub fn start_time(&self) -> f64 {
        self.start_time
    }

    /// Number of samples this signal was advanced by [`super::shift_forward`].
    /// The last `shift` samples are held values, not data.
    pub fn shift(&self) -> usize {
        self.shift
    }

    pub(crate) fn with_shift(mut self, shift: usize) -> Self {
        self.shift = shift;
        self
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn time(&self, k: usize) -> f64 {
        self.start_time + k as f64 * self.sample_period
    }

    /// Same grid, new values.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Signal {
        Signal {
            values: self.values.iter().map(|&v| f(v)).collect(),
            ..self.clone()
        }
    }

    pub(crate) fn replace_values(&self, values: Vec<f64>) -> Signal {
        debug_assert_eq!(values.len(), self.values.len());
        Signal {
            values,
            ..self.clone()
        }
    }

    pub fn scale(&self, k: f64) -> Signal {
        self.map(|v| k * v)
    }

    pub fn ensure_compatible(&self, other: &Signal) -> Result<()> {
        if self.len() != other.len() {
            return Err(Error::SignalMismatch(format!(
                "lengths {} and {}",
                self.len(),
                other.len()
            )));
        }
        if (self.sample_period - other.sample_period).abs() > 1e-12 * self.sample_period {
            return Err(Error::SignalMismatch(format!(
                "sample periods {} and {}",
                self.sample_period, other.sample_period
            )));
        }
        Ok(())
    }

    fn zip_with(&self, other: &Signal, f: impl Fn(f64, f64) -> f64) -> Result<Signal> {
        self.ensure_compatible(other)?;
        Ok(self.replace_values(
            self.values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        ))
    }

    pub fn add(&self, other: &Signal) -> Result<Signal> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Signal) -> Result<Signal> {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.len() as f64
    }

    pub fn rms(&self) -> f64 {
        rms(&self.values)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// Samples `start..end` as a new signal starting at the matching time.
    pub fn slice(&self, start: usize, end: usize) -> Result<Signal> {
        if start >= end || end > self.len() {
            return Err(Error::InvalidArgument(format!(
                "slice {start}..{end} out of range for {} samples",
                self.len()
            )));
        }
        Signal::with_start(
            self.values[start..end].to_vec(),
            self.sample_period,
            self.time(start),
        )
    }

    /// Writes `t,value` rows with 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let mut out = String::with_capacity(self.len() * 48);
        out.push_str("t,value\n");
        for (k, v) in self.values.iter().enumerate() {
            writeln!(out, "{:.16e},{:.16e}", self.time(k), v).expect("write to string");
        }
        w.write_all(out.as_bytes())?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("write to memory");
        String::from_utf8(buf).expect("ascii output")
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        self.write_csv(std::io::BufWriter::new(std::fs::File::create(path)?))
    }

    /// Parses a `t,value` CSV. The period is inferred from the time column and
    /// every row must sit on the uniform grid within `1e-9` periods.
    pub fn read_csv<R: BufRead>(r: R) -> Result<Signal> {
        let mut lines = r.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Parse("empty CSV".into()))??;
        if header.trim() != "t,value" {
            return Err(Error::Parse(format!("expected header `t,value`, got `{}`", header.trim())));
        }
        let mut times = Vec::new();
        let mut values = Vec::new();
        for (i, line) in lines.enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let (t, v) = line
                .split_once(',')
                .ok_or_else(|| Error::Parse(format!("row {}: expected two columns", i + 2)))?;
            let parse = |s: &str| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|e| Error::Parse(format!("row {}: {e}", i + 2)))
            };
            times.push(parse(t)?);
            values.push(parse(v)?);
        }
        if times.len() < 2 {
            return Err(Error::Parse("need at least two rows to infer the sample period".into()));
        }
        let n = times.len();
        let period = (times[n - 1] - times[0]) / (n - 1) as f64;
        if !(period > 0.0) {
            return Err(Error::Parse("time column must be increasing".into()));
        }
        for (k, &t) in times.iter().enumerate() {
            let expected = times[0] + k as f64 * period;
            if (t - expected).abs() > 1e-9 * period {
                return Err(Error::Parse(format!(
                    "row {}: time {t} is off the uniform grid (expected {expected})",
                    k + 2
                )));
            }
        }
        Signal::with_start(values, period, times[0])
    }

    pub fn parse_csv(text: &str) -> Result<Signal> {
        Self::read_csv(text.as_bytes())
    }

    pub fn load_csv(path: &Path) -> Result<Signal> {
        Self::read_csv(std::io::BufReader::new(std::fs::File::open(path)?))
    }
}

pub(crate) fn rms(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    (values.iter().map(|v| v * v).sum::<f64>() / values.len() as f64).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_empty_and_bad_period() {
        assert!(Signal::new(vec![], 0.1).is_err());
        assert!(Signal::new(vec![1.0], 0.0).is_err());
        assert!(Signal::new(vec![1.0], f64::NAN).is_err());
    }

    #[test]
    fn arithmetic_requires_matching_grid() {
        let a = Signal::new(vec![1.0, 2.0], 0.1).unwrap();
        let b = Signal::new(vec![1.0, 2.0, 3.0], 0.1).unwrap();
        let c = Signal::new(vec![1.0, 2.0], 0.2).unwrap();
        assert!(matches!(a.add(&b), Err(Error::SignalMismatch(_))));
        assert!(matches!(a.sub(&c), Err(Error::SignalMismatch(_))));
        assert_eq!(a.add(&a).unwrap().values(), &[2.0, 4.0]);
    }

    #[test]
    fn csv_round_trip_is_bit_exact() {
        let s = Signal::with_start(vec![0.1, -1.0 / 3.0, 1e-300, 12345.678901234567], 0.01, -0.02)
            .unwrap();
        let text = s.to_csv_string();
        assert!(text.starts_with("t,value\n"));
        let back = Signal::parse_csv(&text).unwrap();
        assert_eq!(back.values(), s.values());
        assert!((back.sample_period() - 0.01).abs() < 1e-15);
        assert_eq!(back.start_time(), -0.02);
    }

    #[test]
    fn csv_rejects_jitter_and_bad_header() {
        assert!(Signal::parse_csv("t,value\n0,1\n0.1,2\n0.2000001,3\n").is_err());
        assert!(Signal::parse_csv("time,y\n0,1\n1,2\n").is_err());
        assert!(Signal::parse_csv("t,value\n0,1\n").is_err());
        assert!(Signal::parse_csv("t,value\n0,1\n0.1,2\n0.2,3\n").is_ok());
    }
}
