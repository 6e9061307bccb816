use nalgebra::{DMatrix, DVector, RowDVector};

use super::polynomial::Polynomial;
use super::rational::{Domain, RationalTF};
use crate::error::{Error, Result};

/// `x' = A x + B u`, `y = C x + D u` with scalar input and output.
#[derive(Clone, Debug, PartialEq)]
pub struct StateSpace {
    a: DMatrix<f64>,
    b: DVector<f64>,
    c: RowDVector<f64>,
    d: f64,
    domain: Domain,
}

impl StateSpace {
    pub fn new(
        a: DMatrix<f64>,
        b: DVector<f64>,
        c: RowDVector<f64>,
        d: f64,
        domain: Domain,
    ) -> Result<Self> {
        let n = a.nrows();
        if n == 0 {
            return Err(Error::InvalidArgument("state dimension must be at least 1".into()));
        }
        for got in [a.ncols(), b.len(), c.len()] {
            if got != n {
                return Err(Error::DimensionMismatch { expected: n, got });
            }
        }
        domain.validate()?;
        Ok(StateSpace { a, b, c, d, domain })
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn b(&self) -> &DVector<f64> {
        &self.b
    }

    pub fn c(&self) -> &RowDVector<f64> {
        &self.c
    }

    /// Direct feedthrough.
    pub fn d(&self) -> f64 {
        self.d
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn order(&self) -> usize {
        self.a.nrows()
    }

    /// `C (xI - A)^-1 B + D`, via the Faddeev-LeVerrier recursion.
    pub fn transfer_function(&self) -> Result<RationalTF> {
        let n = self.order();
        let identity = DMatrix::<f64>::identity(n, n);
        // den = x^n + c[n-1] x^(n-1) + ... + c[0], stored highest first
        let mut den = vec![1.0; n + 1];
        let mut num = vec![0.0; n];
        let mut m = DMatrix::<f64>::zeros(n, n);
        for k in 1..=n {
            m = &self.a * &m + &identity * den[k - 1];
            num[k - 1] = (&self.c * &m * &self.b)[(0, 0)];
            den[k] = -(&self.a * &m).trace() / k as f64;
        }
        let den = Polynomial::new(den);
        let num = &Polynomial::new(num) + &den.scale(self.d);
        RationalTF::new(num, den, self.domain)
    }

    /// Zero-order-hold equivalent at period `h`, from the exponential of the
    /// augmented matrix `[[A, B], [0, 0]] h`.
    pub fn discretize_zoh(&self, h: f64) -> Result<StateSpace> {
        if self.domain.is_discrete() {
            return Err(Error::InvalidArgument("system is already discrete".into()));
        }
        if !(h.is_finite() && h > 0.0) {
            return Err(Error::InvalidArgument(format!("sample period must be positive, got {h}")));
        }
        let n = self.order();
        let mut aug = DMatrix::<f64>::zeros(n + 1, n + 1);
        aug.view_mut((0, 0), (n, n)).copy_from(&(&self.a * h));
        aug.view_mut((0, n), (n, 1)).copy_from(&(&self.b * h));
        let e = aug.exp();
        StateSpace::new(
            e.view((0, 0), (n, n)).into_owned(),
            e.view((0, n), (n, 1)).column(0).into_owned(),
            self.c.clone(),
            self.d,
            Domain::Discrete { sample_period: h },
        )
    }
}

/// Controllable canonical realization.
///
/// Biproper systems are split into a direct feedthrough plus a strictly proper
/// remainder. A static gain gets a single inert state.
pub fn realize(g: &RationalTF) -> Result<StateSpace> {
    let r = g.relative_degree();
    if r < 0 {
        return Err(Error::NonCausal(r));
    }
    let domain = g.domain();
    let n = g.order();
    if n == 0 || g.is_zero() {
        let d = if g.is_zero() { 0.0 } else { g.num().leading() / g.den().leading() };
        return StateSpace::new(
            DMatrix::zeros(1, 1),
            DVector::zeros(1),
            RowDVector::zeros(1),
            d,
            domain,
        );
    }
    let den = g.den(); // monic
    let (quot, rem) = g.num().div_rem(den);
    let d = quot.coeff(0);
    let mut a = DMatrix::<f64>::zeros(n, n);
    for i in 0..n - 1 {
        a[(i, i + 1)] = 1.0;
    }
    for j in 0..n {
        a[(n - 1, j)] = -den.coeff(j);
    }
    let mut b = DVector::<f64>::zeros(n);
    b[n - 1] = 1.0;
    let c = RowDVector::<f64>::from_fn(n, |_, j| rem.coeff(j));
    StateSpace::new(a, b, c, d, domain)
}

/// Zero-order-hold discretization of a continuous transfer function.
pub fn discretize_zoh(g: &RationalTF, h: f64) -> Result<RationalTF> {
    if g.domain().is_discrete() {
        return Err(Error::InvalidArgument("system is already discrete".into()));
    }
    realize(g)?.discretize_zoh(h)?.transfer_function()
}
