use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::polynomial::Polynomial;
use crate::error::{Error, Result};

/// Roots of numerator and denominator closer than this are cancelled.
pub const CANCELLATION_TOL: f64 = 1e-8;

/// Relative evaluation residual below which a root counts as shared.
pub const CANCELLATION_RESIDUAL: f64 = 1e-10;

/// Poles and zeros must clear the stability boundary by this much.
pub const STABILITY_MARGIN: f64 = 1e-9;

/// Continuous (Laplace `s`) or discrete (forward shift `z`) time.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Domain {
    Continuous,
    Discrete { sample_period: f64 },
}

impl Domain {
    pub fn is_discrete(&self) -> bool {
        matches!(self, Domain::Discrete { .. })
    }

    pub fn sample_period(&self) -> Option<f64> {
        match self {
            Domain::Continuous => None,
            Domain::Discrete { sample_period } => Some(*sample_period),
        }
    }

    pub fn variable(&self) -> char {
        match self {
            Domain::Continuous => 's',
            Domain::Discrete { .. } => 'z',
        }
    }

    pub(crate) fn validate(&self) -> Result<()> {
        if let Domain::Discrete { sample_period } = self {
            if !(sample_period.is_finite() && *sample_period > 0.0) {
                return Err(Error::InvalidArgument(format!(
                    "sample period must be positive, got {sample_period}"
                )));
            }
        }
        Ok(())
    }

    pub fn same_as(&self, other: &Domain) -> bool {
        match (self, other) {
            (Domain::Continuous, Domain::Continuous) => true,
            (Domain::Discrete { sample_period: a }, Domain::Discrete { sample_period: b }) => {
                (a - b).abs() <= 1e-12 * a.abs().max(b.abs())
            }
            _ => false,
        }
    }

    pub(crate) fn ensure_same(&self, other: &Domain) -> Result<()> {
        if self.same_as(other) {
            Ok(())
        } else {
            Err(Error::DomainMismatch(self.to_string(), other.to_string()))
        }
    }

    /// Whether a root lies strictly inside the stability region.
    pub fn root_is_stable(&self, root: Complex64) -> bool {
        match self {
            Domain::Continuous => root.re < -STABILITY_MARGIN,
            Domain::Discrete { .. } => root.norm() < 1.0 - STABILITY_MARGIN,
        }
    }
}

impl fmt::Display for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Domain::Continuous => write!(f, "continuous"),
            Domain::Discrete { sample_period } => write!(f, "discrete (T = {sample_period} s)"),
        }
    }
}

/// A SISO transfer function `num / den`.
///
/// Stored coprime (common roots within [`CANCELLATION_TOL`] are removed at
/// construction) with a monic denominator.
#[derive(Clone, Debug, PartialEq)]
pub struct RationalTF {
    num: Polynomial,
    den: Polynomial,
    domain: Domain,
}

impl RationalTF {
    pub fn new(num: Polynomial, den: Polynomial, domain: Domain) -> Result<Self> {
        if den.is_zero() {
            return Err(Error::ZeroDenominator);
        }
        domain.validate()?;
        if num.coeffs().iter().chain(den.coeffs()).any(|c| !c.is_finite()) {
            return Err(Error::InvalidArgument("non-finite coefficient".into()));
        }
        if num.is_zero() {
            return Ok(RationalTF {
                num,
                den: Polynomial::one(),
                domain,
            });
        }
        let (num, den) = cancel_common_roots(&num, &den);
        Ok(Self::from_coprime(num, den, domain))
    }

    pub fn from_coeffs(num: &[f64], den: &[f64], domain: Domain) -> Result<Self> {
        Self::new(Polynomial::new(num.to_vec()), Polynomial::new(den.to_vec()), domain)
    }

    pub fn continuous(num: &[f64], den: &[f64]) -> Result<Self> {
        Self::from_coeffs(num, den, Domain::Continuous)
    }

    pub fn discrete(num: &[f64], den: &[f64], sample_period: f64) -> Result<Self> {
        Self::from_coeffs(num, den, Domain::Discrete { sample_period })
    }

    pub fn gain(k: f64, domain: Domain) -> Result<Self> {
        Self::new(Polynomial::constant(k), Polynomial::one(), domain)
    }

    /// Pure delay `z^-k`.
    pub fn delay(k: usize, sample_period: f64) -> Result<Self> {
        Self::new(
            Polynomial::one(),
            Polynomial::monomial(k),
            Domain::Discrete { sample_period },
        )
    }

    /// Builds from polynomials already known to be coprime; only normalizes.
    fn from_coprime(num: Polynomial, den: Polynomial, domain: Domain) -> Self {
        let lead = den.leading();
        RationalTF {
            num: num.scale(1.0 / lead),
            den: den.scale(1.0 / lead),
            domain,
        }
    }

    pub fn num(&self) -> &Polynomial {
        &self.num
    }

    pub fn den(&self) -> &Polynomial {
        &self.den
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    /// Denominator degree (number of poles).
    pub fn order(&self) -> usize {
        self.den.degree().unwrap_or(0)
    }

    /// `deg(den) - deg(num)`. Negative for non-causal maps; `i32::MAX` for the
    /// zero transfer function, whose output never depends on the input.
    pub fn relative_degree(&self) -> i32 {
        match self.num.degree() {
            None => i32::MAX,
            Some(n) => self.order() as i32 - n as i32,
        }
    }

    pub fn is_causal(&self) -> bool {
        self.relative_degree() >= 0
    }

    pub fn is_zero(&self) -> bool {
        self.num.is_zero()
    }

    pub fn poles(&self) -> Vec<Complex64> {
        self.den.roots()
    }

    pub fn zeros(&self) -> Vec<Complex64> {
        self.num.roots()
    }

    /// Every pole strictly inside the stability region, margin included.
    pub fn is_bibo_stable(&self) -> bool {
        self.poles().into_iter().all(|p| self.domain.root_is_stable(p))
    }

    /// Stable with stable inverse: poles and finite zeros strictly stable.
    pub fn is_minimum_phase(&self) -> bool {
        self.is_bibo_stable() && self.zeros().into_iter().all(|z| self.domain.root_is_stable(z))
    }

    pub fn eval(&self, x: Complex64) -> Complex64 {
        self.num.eval_complex(x) / self.den.eval_complex(x)
    }

    /// Steady-state gain: value at `s = 0` or `z = 1`.
    pub fn dc_gain(&self) -> f64 {
        let x = match self.domain {
            Domain::Continuous => 0.0,
            Domain::Discrete { .. } => 1.0,
        };
        self.num.eval(x) / self.den.eval(x)
    }

    pub fn scale(&self, k: f64) -> Result<Self> {
        Self::new(self.num.scale(k), self.den.clone(), self.domain)
    }

    /// `1 / self`; errors on the zero transfer function.
    pub fn inverse(&self) -> Result<Self> {
        if self.num.is_zero() {
            return Err(Error::ZeroDenominator);
        }
        Ok(Self::from_coprime(self.den.clone(), self.num.clone(), self.domain))
    }

    /// Series connection `self · other`, with cross cancellation of common
    /// factors between each numerator and the other denominator.
    pub fn multiply(&self, other: &RationalTF) -> Result<Self> {
        self.domain.ensure_same(&other.domain)?;
        if self.is_zero() || other.is_zero() {
            return Ok(RationalTF {
                num: Polynomial::zero(),
                den: Polynomial::one(),
                domain: self.domain,
            });
        }
        let (n1, d2) = cancel_common_roots(&self.num, &other.den);
        let (n2, d1) = cancel_common_roots(&other.num, &self.den);
        Ok(Self::from_coprime(&n1 * &n2, &d1 * &d2, self.domain))
    }

    /// Largest coefficient discrepancy against `other`, relative to the
    /// largest coefficient magnitude of each of `other`'s polynomials.
    /// Infinite when degrees or domains differ.
    pub fn coefficient_distance(&self, other: &RationalTF) -> f64 {
        if !self.domain.same_as(&other.domain) {
            return f64::INFINITY;
        }
        let poly_dist = |a: &Polynomial, b: &Polynomial| -> f64 {
            if a.degree() != b.degree() {
                return f64::INFINITY;
            }
            let scale = b.coeffs().iter().fold(0.0f64, |m, c| m.max(c.abs())).max(f64::MIN_POSITIVE);
            a.coeffs()
                .iter()
                .zip(b.coeffs())
                .fold(0.0f64, |m, (x, y)| m.max((x - y).abs() / scale))
        };
        poly_dist(&self.num, &other.num).max(poly_dist(&self.den, &other.den))
    }
}

impl fmt::Display for RationalTF {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let v = self.domain.variable();
        write!(f, "({}) / ({})", self.num.display_in(v), self.den.display_in(v))
    }
}

/// Existence of a causal, stable map achieving zero transfer error from
/// `g_s` to `g_t`: both stable, source minimum-phase, and `r_s <= r_t`.
pub fn perfect_map_exists(g_s: &RationalTF, g_t: &RationalTF) -> Result<bool> {
    g_s.domain.ensure_same(&g_t.domain)?;
    if !g_s.is_bibo_stable() {
        return Err(Error::UnstableSystem("source"));
    }
    if !g_t.is_bibo_stable() {
        return Err(Error::UnstableSystem("target"));
    }
    if !g_s.is_minimum_phase() {
        return Err(Error::SourceNotMinimumPhase);
    }
    Ok(g_s.relative_degree() <= g_t.relative_degree())
}

/// The zero-error transfer map `G_T / G_S = (D_S·N_T) / (N_S·D_T)`, after
/// cancellation of common factors. Non-causal when `r_s > r_t`.
pub fn optimal_map(g_s: &RationalTF, g_t: &RationalTF) -> Result<RationalTF> {
    g_s.domain.ensure_same(&g_t.domain)?;
    if !g_s.is_minimum_phase() {
        return Err(Error::SourceNotMinimumPhase);
    }
    if !g_t.is_bibo_stable() {
        return Err(Error::UnstableTarget);
    }
    g_s.inverse()?.multiply(g_t)
}

/// Relative residual `|p(z)| / Σ |c_i| |z|^i`; zero for an exact root.
fn relative_residual(p: &Polynomial, z: Complex64) -> f64 {
    let scale: f64 = p.coeffs().iter().fold(0.0, |acc, c| acc * z.norm() + c.abs());
    if scale == 0.0 {
        0.0
    } else {
        p.eval_complex(z).norm() / scale
    }
}

/// Divides out the factors `a` and `b` share.
///
/// Candidates are the roots of the lower-degree operand. A candidate is
/// common when it lies within [`CANCELLATION_TOL`] of a root of the other
/// operand or leaves a relative residual below [`CANCELLATION_RESIDUAL`]
/// there. The residual test matters for clustered roots, whose computed
/// positions in a product polynomial scatter by about `sqrt(eps)`. The other
/// operand is deflated after each match so multiplicities are respected.
fn cancel_common_roots(a: &Polynomial, b: &Polynomial) -> (Polynomial, Polynomial) {
    let (da, db) = (a.degree().unwrap_or(0), b.degree().unwrap_or(0));
    if da == 0 || db == 0 {
        return (a.clone(), b.clone());
    }
    let (small, large) = if da <= db { (a, b) } else { (b, a) };
    let upper = |p: &Polynomial| -> Vec<Complex64> {
        p.roots().into_iter().filter(|z| z.im >= 0.0).collect()
    };
    let mut large_roots: Vec<Option<Complex64>> = upper(large).into_iter().map(Some).collect();
    let mut rest = large.clone();
    let mut common = Vec::new();
    for z in upper(small) {
        if rest.degree().unwrap_or(0) == 0 {
            break;
        }
        let nearest = large_roots
            .iter()
            .enumerate()
            .filter_map(|(i, w)| w.map(|w| (i, (w - z).norm())))
            .min_by(|x, y| x.1.total_cmp(&y.1))
            .filter(|(_, dist)| *dist < CANCELLATION_TOL);
        if nearest.is_none() && relative_residual(&rest, z) >= CANCELLATION_RESIDUAL {
            continue;
        }
        if let Some((i, _)) = nearest {
            large_roots[i] = None;
        }
        let (factor, roots) = if z.im == 0.0 {
            (Polynomial::new(vec![1.0, -z.re]), vec![z])
        } else {
            (Polynomial::new(vec![1.0, -2.0 * z.re, z.norm_sqr()]), vec![z, z.conj()])
        };
        if factor.degree() > rest.degree() {
            continue;
        }
        rest = rest.div_rem(&factor).0;
        common.extend(roots);
    }
    if common.is_empty() {
        return (a.clone(), b.clone());
    }
    // dividing by an operand's own coefficients avoids the root error
    let factor = if Some(common.len()) == small.degree() {
        small.monic()
    } else {
        Polynomial::from_roots(&common)
    };
    (a.div_rem(&factor).0, b.div_rem(&factor).0)
}
