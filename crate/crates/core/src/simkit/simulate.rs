use std::fmt;
use std::sync::Arc;

use nalgebra::DVector;

use super::signal::Signal;
use crate::error::{Error, Result};
use crate::polytf::{realize, Domain, RationalTF, StateSpace};

/// States with a norm beyond this abort a simulation.
pub const DIVERGENCE_LIMIT: f64 = 1e12;

/// Default RK4 substeps per sample.
pub const DEFAULT_STEP_DIVISOR: usize = 10;

pub type VectorField = Arc<dyn Fn(&DVector<f64>) -> DVector<f64> + Send + Sync>;
pub type ScalarField = Arc<dyn Fn(&DVector<f64>) -> f64 + Send + Sync>;

/// `x' = f(x) + g(x) u`, `y = h(x)`, started from the operating point `x0`.
#[derive(Clone)]
pub struct ControlAffineSystem {
    f: VectorField,
    g: VectorField,
    h: ScalarField,
    x0: DVector<f64>,
}

impl fmt::Debug for ControlAffineSystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ControlAffineSystem")
            .field("n", &self.x0.len())
            .field("x0", &self.x0.as_slice())
            .finish_non_exhaustive()
    }
}

impl ControlAffineSystem {
    pub fn new(
        f: impl Fn(&DVector<f64>) -> DVector<f64> + Send + Sync + 'static,
        g: impl Fn(&DVector<f64>) -> DVector<f64> + Send + Sync + 'static,
        h: impl Fn(&DVector<f64>) -> f64 + Send + Sync + 'static,
        x0: DVector<f64>,
    ) -> Result<Self> {
        let n = x0.len();
        if n == 0 {
            return Err(Error::InvalidArgument("state dimension must be at least 1".into()));
        }
        let fx = f(&x0);
        let gx = g(&x0);
        for v in [&fx, &gx] {
            if v.len() != n {
                return Err(Error::DimensionMismatch { expected: n, got: v.len() });
            }
        }
        if !(fx.iter().chain(gx.iter()).all(|v| v.is_finite()) && h(&x0).is_finite()) {
            return Err(Error::InvalidArgument("vector fields are not finite at x0".into()));
        }
        Ok(ControlAffineSystem {
            f: Arc::new(f),
            g: Arc::new(g),
            h: Arc::new(h),
            x0,
        })
    }

    /// Linear system `f = A x`, `g = B`, `h = C x` around `x0 = 0`.
    /// Requires a continuous realization without feedthrough.
    pub fn from_state_space(ss: &StateSpace) -> Result<Self> {
        if ss.domain().is_discrete() {
            return Err(Error::InvalidArgument("control-affine systems are continuous-time".into()));
        }
        if ss.d() != 0.0 {
            return Err(Error::InvalidArgument(
                "direct feedthrough has no control-affine form".into(),
            ));
        }
        let a = ss.a().clone();
        let b = ss.b().clone();
        let c = ss.c().clone();
        let n = ss.order();
        Self::new(
            move |x| &a * x,
            move |_| b.clone(),
            move |x| (&c * x)[(0, 0)],
            DVector::zeros(n),
        )
    }

    pub fn dim(&self) -> usize {
        self.x0.len()
    }

    pub fn x0(&self) -> &DVector<f64> {
        &self.x0
    }

    pub fn f(&self, x: &DVector<f64>) -> DVector<f64> {
        (self.f)(x)
    }

    pub fn g(&self, x: &DVector<f64>) -> DVector<f64> {
        (self.g)(x)
    }

    pub fn h(&self, x: &DVector<f64>) -> f64 {
        (self.h)(x)
    }

    pub fn with_x0(&self, x0: DVector<f64>) -> Result<Self> {
        if x0.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: x0.len() });
        }
        Ok(ControlAffineSystem { x0, ..self.clone() })
    }
}

/// Simulates an LTI system on the input's sample grid.
///
/// Discrete systems must share the input's period. Continuous systems are
/// discretized with a zero-order hold at that period, so the result is exact
/// at the sample instants for piecewise-constant inputs.
pub fn simulate_lti(sys: &StateSpace, input: &Signal, x_init: &DVector<f64>) -> Result<Signal> {
    if x_init.len() != sys.order() {
        return Err(Error::DimensionMismatch { expected: sys.order(), got: x_init.len() });
    }
    let h = input.sample_period();
    let discrete = match sys.domain() {
        Domain::Continuous => sys.discretize_zoh(h)?,
        Domain::Discrete { sample_period } => {
            if (sample_period - h).abs() > 1e-12 * h {
                return Err(Error::SignalMismatch(format!(
                    "system period {sample_period} differs from signal period {h}"
                )));
            }
            sys.clone()
        }
    };
    let (a, b, c, d) = (discrete.a(), discrete.b(), discrete.c(), discrete.d());
    let mut x = x_init.clone();
    let mut out = Vec::with_capacity(input.len());
    for (k, &u) in input.values().iter().enumerate() {
        out.push((c * &x)[(0, 0)] + d * u);
        x = a * &x + b * u;
        if !x.iter().all(|v| v.is_finite()) || x.norm() > DIVERGENCE_LIMIT {
            return Err(Error::SimulationDiverged { index: k + 1 });
        }
    }
    Ok(input.replace_values(out))
}

/// Simulates a transfer function from rest.
pub fn simulate_tf(g: &RationalTF, input: &Signal) -> Result<Signal> {
    let ss = realize(g)?;
    simulate_lti(&ss, input, &DVector::zeros(ss.order()))
}

/// Fixed-step RK4 with `step_divisor` substeps per sample and the input held
/// over each sample. Output is `h(x)` at the sample instants, starting at `x0`.
pub fn simulate_affine(
    sys: &ControlAffineSystem,
    input: &Signal,
    step_divisor: usize,
) -> Result<Signal> {
    if step_divisor == 0 {
        return Err(Error::InvalidArgument("step_divisor must be at least 1".into()));
    }
    let dt = input.sample_period() / step_divisor as f64;
    let rhs = |x: &DVector<f64>, u: f64| sys.f(x) + sys.g(x) * u;
    let mut x = sys.x0().clone();
    let mut out = Vec::with_capacity(input.len());
    for (k, &u) in input.values().iter().enumerate() {
        out.push(sys.h(&x));
        for _ in 0..step_divisor {
            x = rk4_step(&rhs, &x, u, dt);
        }
        if !x.iter().all(|v| v.is_finite()) || x.norm() > DIVERGENCE_LIMIT {
            return Err(Error::SimulationDiverged { index: k + 1 });
        }
    }
    Ok(input.replace_values(out))
}

pub(crate) fn rk4_step(
    rhs: &impl Fn(&DVector<f64>, f64) -> DVector<f64>,
    x: &DVector<f64>,
    u: f64,
    dt: f64,
) -> DVector<f64> {
    let k1 = rhs(x, u);
    let k2 = rhs(&(x + &k1 * (dt / 2.0)), u);
    let k3 = rhs(&(x + &k2 * (dt / 2.0)), u);
    let k4 = rhs(&(x + &k3 * dt), u);
    x + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0)
}

/// Anything [`step_response`] can drive.
#[derive(Clone, Copy, Debug)]
pub enum Plant<'a> {
    StateSpace(&'a StateSpace),
    Rational(&'a RationalTF),
    Affine(&'a ControlAffineSystem),
}

impl<'a> From<&'a StateSpace> for Plant<'a> {
    fn from(s: &'a StateSpace) -> Self {
        Plant::StateSpace(s)
    }
}

impl<'a> From<&'a RationalTF> for Plant<'a> {
    fn from(g: &'a RationalTF) -> Self {
        Plant::Rational(g)
    }
}

impl<'a> From<&'a ControlAffineSystem> for Plant<'a> {
    fn from(s: &'a ControlAffineSystem) -> Self {
        Plant::Affine(s)
    }
}

/// Response to an input stepping from 0 to `amplitude` at `t = 0`, sampled
/// every `sample_period` over `[0, duration]`. LTI plants start at rest,
/// control-affine plants at `x0`. Discrete plants must use their own period.
pub fn step_response<'a>(
    plant: impl Into<Plant<'a>>,
    amplitude: f64,
    duration: f64,
    sample_period: f64,
) -> Result<Signal> {
    if !(duration > 0.0) {
        return Err(Error::InvalidArgument(format!("duration must be positive, got {duration}")));
    }
    let n = (duration / sample_period).round() as usize + 1;
    let input = Signal::constant(amplitude, n, sample_period)?;
    match plant.into() {
        Plant::StateSpace(ss) => simulate_lti(ss, &input, &DVector::zeros(ss.order())),
        Plant::Rational(g) => simulate_tf(g, &input),
        Plant::Affine(sys) => simulate_affine(sys, &input, DEFAULT_STEP_DIVISOR),
    }
}
