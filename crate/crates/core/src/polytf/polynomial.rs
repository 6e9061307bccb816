//! Real polynomials stored as coefficient vectors, highest degree first.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// A real polynomial `c[0]·x^n + c[1]·x^(n-1) + … + c[n]`.
///
/// Leading zeros are stripped on construction, so the first stored
/// coefficient is nonzero. The zero polynomial has no coefficients and no
/// degree.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(from = "Vec<f64>", into = "Vec<f64>")]
pub struct Polynomial {
    coeffs: Vec<f64>,
}

impl From<Vec<f64>> for Polynomial {
    fn from(coeffs: Vec<f64>) -> Self {
        Polynomial::new(coeffs)
    }
}

impl From<Polynomial> for Vec<f64> {
    fn from(p: Polynomial) -> Self {
        p.coeffs
    }
}

impl Polynomial {
    pub fn new(coeffs: Vec<f64>) -> Self {
        let first = coeffs.iter().position(|&c| c != 0.0).unwrap_or(coeffs.len());
        Polynomial {
            coeffs: coeffs[first..].to_vec(),
        }
    }

    pub fn zero() -> Self {
        Polynomial { coeffs: Vec::new() }
    }

    pub fn constant(c: f64) -> Self {
        Polynomial::new(vec![c])
    }

    pub fn one() -> Self {
        Polynomial::constant(1.0)
    }

    /// `x^k`.
    pub fn monomial(k: usize) -> Self {
        let mut coeffs = vec![0.0; k + 1];
        coeffs[0] = 1.0;
        Polynomial { coeffs }
    }

    /// Monic polynomial with the given roots. Complex roots must come in
    /// conjugate pairs; imaginary parts of the expanded coefficients are dropped.
    pub fn from_roots(roots: &[Complex64]) -> Self {
        let mut acc = vec![Complex64::new(1.0, 0.0)];
        for &r in roots {
            let mut next = vec![Complex64::new(0.0, 0.0); acc.len() + 1];
            for (i, &c) in acc.iter().enumerate() {
                next[i] += c;
                next[i + 1] -= c * r;
            }
            acc = next;
        }
        Polynomial::new(acc.into_iter().map(|c| c.re).collect())
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// `None` for the zero polynomial.
    pub fn degree(&self) -> Option<usize> {
        self.coeffs.len().checked_sub(1)
    }

    pub fn leading(&self) -> f64 {
        self.coeffs.first().copied().unwrap_or(0.0)
    }

    /// Coefficient of `x^k`.
    pub fn coeff(&self, k: usize) -> f64 {
        match self.degree() {
            Some(n) if k <= n => self.coeffs[n - k],
            _ => 0.0,
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.coeffs.iter().fold(0.0, |acc, &c| acc * x + c)
    }

    pub fn eval_complex(&self, x: Complex64) -> Complex64 {
        self.coeffs
            .iter()
            .fold(Complex64::new(0.0, 0.0), |acc, &c| acc * x + c)
    }

    pub fn scale(&self, k: f64) -> Self {
        Polynomial::new(self.coeffs.iter().map(|c| c * k).collect())
    }

    pub fn monic(&self) -> Self {
        if self.is_zero() {
            return self.clone();
        }
        self.scale(1.0 / self.leading())
    }

    pub fn derivative(&self) -> Self {
        let Some(n) = self.degree() else {
            return Polynomial::zero();
        };
        Polynomial::new(
            self.coeffs[..n]
                .iter()
                .enumerate()
                .map(|(i, c)| c * (n - i) as f64)
                .collect(),
        )
    }

    /// Polynomial long division; returns `(quotient, remainder)`.
    ///
    /// Panics if `divisor` is the zero polynomial.
    pub fn div_rem(&self, divisor: &Polynomial) -> (Polynomial, Polynomial) {
        let dn = divisor.degree().expect("division by the zero polynomial");
        let Some(n) = self.degree() else {
            return (Polynomial::zero(), Polynomial::zero());
        };
        if n < dn {
            return (Polynomial::zero(), self.clone());
        }
        let lead = divisor.leading();
        let mut rem = self.coeffs.clone();
        let mut quot = vec![0.0; n - dn + 1];
        for i in 0..quot.len() {
            let q = rem[i] / lead;
            quot[i] = q;
            for (j, d) in divisor.coeffs.iter().enumerate() {
                rem[i + j] -= q * d;
            }
            rem[i] = 0.0;
        }
        (Polynomial::new(quot), Polynomial::new(rem[n - dn + 1..].to_vec()))
    }

    /// Number of roots at exactly zero (trailing zero coefficients).
    pub fn zero_root_multiplicity(&self) -> usize {
        self.coeffs.iter().rev().take_while(|&&c| c == 0.0).count()
    }

    /// All complex roots, computed as eigenvalues of the companion matrix and
    /// polished with a few Newton steps.
    ///
    /// Exact zero roots (trailing zero coefficients) are split off first and
    /// returned as exact zeros. Accuracy degrades for clustered or repeated
    /// roots and for degrees beyond roughly 20.
    pub fn roots(&self) -> Vec<Complex64> {
        let Some(n) = self.degree() else {
            return Vec::new();
        };
        let zeros = self.zero_root_multiplicity();
        let mut roots = vec![Complex64::new(0.0, 0.0); zeros];
        let reduced = &self.coeffs[..=n - zeros];
        let m = reduced.len() - 1;
        match m {
            0 => {}
            1 => roots.push(Complex64::new(-reduced[1] / reduced[0], 0.0)),
            _ => {
                let lead = reduced[0];
                let mut companion = DMatrix::<f64>::zeros(m, m);
                for j in 0..m {
                    companion[(0, j)] = -reduced[j + 1] / lead;
                }
                for i in 1..m {
                    companion[(i, i - 1)] = 1.0;
                }
                let reduced_poly = Polynomial::new(reduced.to_vec());
                let deriv = reduced_poly.derivative();
                for z in companion.complex_eigenvalues().iter() {
                    roots.push(polish_root(&reduced_poly, &deriv, *z));
                }
            }
        }
        roots
    }
}

fn polish_root(p: &Polynomial, dp: &Polynomial, mut z: Complex64) -> Complex64 {
    let mut residual = p.eval_complex(z).norm();
    for _ in 0..4 {
        let d = dp.eval_complex(z);
        if d.norm() == 0.0 || residual == 0.0 {
            break;
        }
        let candidate = z - p.eval_complex(z) / d;
        let r = p.eval_complex(candidate).norm();
        if !(r < residual) {
            break;
        }
        z = candidate;
        residual = r;
    }
    if z.im.abs() <= 1e-14 * z.norm().max(1.0) {
        z.im = 0.0;
    }
    z
}

impl Add for &Polynomial {
    type Output = Polynomial;
    fn add(self, rhs: &Polynomial) -> Polynomial {
        let n = self.coeffs.len().max(rhs.coeffs.len());
        let mut out = vec![0.0; n];
        for (i, c) in self.coeffs.iter().rev().enumerate() {
            out[n - 1 - i] += c;
        }
        for (i, c) in rhs.coeffs.iter().rev().enumerate() {
            out[n - 1 - i] += c;
        }
        Polynomial::new(out)
    }
}

impl Neg for &Polynomial {
    type Output = Polynomial;
    fn neg(self) -> Polynomial {
        self.scale(-1.0)
    }
}

impl Sub for &Polynomial {
    type Output = Polynomial;
    fn sub(self, rhs: &Polynomial) -> Polynomial {
        self + &(-rhs)
    }
}

impl Mul for &Polynomial {
    type Output = Polynomial;
    fn mul(self, rhs: &Polynomial) -> Polynomial {
        if self.is_zero() || rhs.is_zero() {
            return Polynomial::zero();
        }
        let mut out = vec![0.0; self.coeffs.len() + rhs.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            for (j, b) in rhs.coeffs.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        Polynomial::new(out)
    }
}

impl fmt::Display for Polynomial {
    /// Renders in the variable `x`; see [`Polynomial::display_in`].
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.display_in('x'))
    }
}

impl Polynomial {
    pub fn display_in(&self, var: char) -> String {
        let Some(n) = self.degree() else {
            return "0".to_string();
        };
        let mut out = String::new();
        for (i, &c) in self.coeffs.iter().enumerate() {
            if c == 0.0 {
                continue;
            }
            let power = n - i;
            let mag = c.abs();
            if out.is_empty() {
                if c < 0.0 {
                    out.push('-');
                }
            } else {
                out.push_str(if c < 0.0 { " - " } else { " + " });
            }
            let show_mag = power == 0 || mag != 1.0;
            if show_mag {
                out.push_str(&format!("{mag}"));
            }
            match power {
                0 => {}
                1 => out.push(var),
                _ => out.push_str(&format!("{var}^{power}")),
            }
        }
        out
    }
}
