//! Periodic function handles with optional closed-form derivatives.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use super::flambda::FLambda;
use crate::dd::Dd;
use super::params::PerturbationParams;

/// A real function of one variable, periodic with period [`period`].
///
/// `derivative(k, x)` returns `Some` only when the k-th derivative is known in
/// closed form; callers fall back to finite differences otherwise.
///
/// [`period`]: PeriodicFunction::period
pub trait PeriodicFunction: Send + Sync + fmt::Debug {
    fn value(&self, x: f64) -> f64;

    fn derivative(&self, order: usize, x: f64) -> Option<f64>;

    /// Value in double-double precision; defaults to the rounded double.
    fn value_dd(&self, x: f64) -> Dd {
        Dd::new(self.value(x))
    }

    fn period(&self) -> f64 {
        1.0
    }

    /// Short identifier used in norm tables.
    fn id(&self) -> String;
}

pub type FunctionHandle = Arc<dyn PeriodicFunction>;

/// `d^k/dx^k cos(ω x)` without the phase-shift rounding of `cos(ωx + kπ/2)`.
pub(crate) fn cos_derivative(order: usize, omega: f64, x: f64) -> f64 {
    let (s, c) = (omega * x).sin_cos();
    let scale = omega.powi(order as i32);
    scale
        * match order % 4 {
            0 => c,
            1 => -s,
            2 => -c,
            _ => s,
        }
}

fn binomial(n: usize, k: usize) -> f64 {
    let mut acc = 1.0;
    for j in 0..k {
        acc = acc * (n - j) as f64 / (j + 1) as f64;
    }
    acc
}

#[derive(Debug, Clone, Copy)]
pub struct Zero;

impl PeriodicFunction for Zero {
    fn value(&self, _x: f64) -> f64 {
        0.0
    }
    fn derivative(&self, _order: usize, _x: f64) -> Option<f64> {
        Some(0.0)
    }
    fn id(&self) -> String {
        "zero".into()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Constant(pub f64);

impl PeriodicFunction for Constant {
    fn value(&self, _x: f64) -> f64 {
        self.0
    }
    fn derivative(&self, order: usize, _x: f64) -> Option<f64> {
        Some(if order == 0 { self.0 } else { 0.0 })
    }
    fn id(&self) -> String {
        format!("const({})", self.0)
    }
}

/// `amplitude · (1 - cos 2πx)`; the cosine well `u_n` has amplitude `n^{-a}`.
#[derive(Debug, Clone, Copy)]
pub struct CosineWell {
    pub amplitude: f64,
}

impl PeriodicFunction for CosineWell {
    fn value(&self, x: f64) -> f64 {
        self.amplitude * (1.0 - (2.0 * PI * x).cos())
    }
    fn value_dd(&self, x: f64) -> Dd {
        Dd::one_minus_cos_2pi(x).scale(self.amplitude)
    }
    fn derivative(&self, order: usize, x: f64) -> Option<f64> {
        Some(if order == 0 {
            self.value(x)
        } else {
            -self.amplitude * cos_derivative(order, 2.0 * PI, x)
        })
    }
    fn id(&self) -> String {
        "u".into()
    }
}

/// Finite trigonometric sum `c0 + Σ a_j cos(2π k_j x) + b_j sin(2π k_j x)`.
#[derive(Debug, Clone, Default)]
pub struct TrigPolynomial {
    pub constant: f64,
    /// `(frequency, cosine coefficient, sine coefficient)`.
    pub terms: Vec<(u32, f64, f64)>,
}

impl PeriodicFunction for TrigPolynomial {
    fn value(&self, x: f64) -> f64 {
        self.terms.iter().fold(self.constant, |acc, &(k, a, b)| {
            let (s, c) = (2.0 * PI * k as f64 * x).sin_cos();
            acc + a * c + b * s
        })
    }
    fn derivative(&self, order: usize, x: f64) -> Option<f64> {
        if order == 0 {
            return Some(self.value(x));
        }
        Some(self.terms.iter().fold(0.0, |acc, &(k, a, b)| {
            let omega = 2.0 * PI * k as f64;
            // sin(θ) = cos(θ - π/2): its k-th derivative is the (k+3)-th of cos.
            acc + a * cos_derivative(order, omega, x)
                + b * cos_derivative(order + 3, omega, x) / omega.powi(3)
        }))
    }
    fn id(&self) -> String {
        "trig".into()
    }
}

/// The Gevrey bump `v_{n,η}`: `n^{-a} f(w + d) f(w - d)` with `d` the signed
/// distance from `center` reduced to the nearest period, `w = 1/(8 n^{a/2})`.
/// `center = 1/2` gives `v_n`.
#[derive(Debug, Clone)]
pub struct GevreyBump {
    amplitude: f64,
    half_width: f64,
    center: f64,
    factor: Arc<FLambda>,
}

impl GevreyBump {
    pub fn new(params: &PerturbationParams, center: f64) -> Self {
        Self::with_factor(params, center, Arc::new(FLambda::new(params.alpha, params.lambda)))
    }

    pub fn with_factor(params: &PerturbationParams, center: f64, factor: Arc<FLambda>) -> Self {
        GevreyBump {
            amplitude: params.amplitude(),
            half_width: params.half_width(),
            center,
            factor,
        }
    }

    pub fn center(&self) -> f64 {
        self.center
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    /// Signed offset from the center, reduced to `[-1/2, 1/2]`.
    fn offset(&self, x: f64) -> f64 {
        let d = x - self.center;
        d - d.round()
    }
}

impl PeriodicFunction for GevreyBump {
    fn value(&self, x: f64) -> f64 {
        let d = self.offset(x);
        if d.abs() >= self.half_width {
            return 0.0;
        }
        let w = self.half_width;
        // Both factors in log space: their product underflows long before
        // either one does.
        let ln = self.factor.ln_value(w + d) + self.factor.ln_value(w - d);
        self.amplitude * ln.exp()
    }

    fn derivative(&self, order: usize, x: f64) -> Option<f64> {
        if order == 0 {
            return Some(self.value(x));
        }
        if order > self.factor.max_order() {
            return None;
        }
        let d = self.offset(x);
        if d.abs() >= self.half_width {
            return Some(0.0);
        }
        let w = self.half_width;
        let mut acc = 0.0;
        for i in 0..=order {
            let left = self.factor.derivative(i, w + d)?;
            let right = self.factor.derivative(order - i, w - d)?;
            let sign = if (order - i) % 2 == 0 { 1.0 } else { -1.0 };
            acc += binomial(order, i) * left * sign * right;
        }
        Some(self.amplitude * acc)
    }

    fn id(&self) -> String {
        if self.center == 0.5 {
            "v".into()
        } else {
            format!("v_eta({})", self.center)
        }
    }
}

#[derive(Debug, Clone)]
pub struct Sum(pub Vec<FunctionHandle>);

impl PeriodicFunction for Sum {
    fn value(&self, x: f64) -> f64 {
        self.0.iter().map(|f| f.value(x)).sum()
    }
    fn value_dd(&self, x: f64) -> Dd {
        self.0.iter().map(|f| f.value_dd(x)).sum()
    }
    fn derivative(&self, order: usize, x: f64) -> Option<f64> {
        self.0.iter().map(|f| f.derivative(order, x)).sum()
    }
    fn period(&self) -> f64 {
        self.0.iter().map(|f| f.period()).fold(0.0, f64::max).max(f64::MIN_POSITIVE)
    }
    fn id(&self) -> String {
        self.0.iter().map(|f| f.id()).collect::<Vec<_>>().join("+")
    }
}

#[derive(Debug, Clone)]
pub struct Scaled {
    pub factor: f64,
    pub inner: FunctionHandle,
}

impl PeriodicFunction for Scaled {
    fn value(&self, x: f64) -> f64 {
        self.factor * self.inner.value(x)
    }
    fn value_dd(&self, x: f64) -> Dd {
        self.inner.value_dd(x).scale(self.factor)
    }
    fn derivative(&self, order: usize, x: f64) -> Option<f64> {
        self.inner.derivative(order, x).map(|v| self.factor * v)
    }
    fn period(&self) -> f64 {
        self.inner.period()
    }
    fn id(&self) -> String {
        format!("{}*{}", self.factor, self.inner.id())
    }
}

/// Pointwise product; derivatives by the Leibniz rule.
#[derive(Debug, Clone)]
pub struct Product(pub FunctionHandle, pub FunctionHandle);

impl PeriodicFunction for Product {
    fn value(&self, x: f64) -> f64 {
        self.0.value(x) * self.1.value(x)
    }
    fn derivative(&self, order: usize, x: f64) -> Option<f64> {
        let mut acc = 0.0;
        for i in 0..=order {
            acc += binomial(order, i) * self.0.derivative(i, x)? * self.1.derivative(order - i, x)?;
        }
        Some(acc)
    }
    fn period(&self) -> f64 {
        self.0.period().max(self.1.period())
    }
    fn id(&self) -> String {
        format!("({})*({})", self.0.id(), self.1.id())
    }
}

/// `Q(x) = q^{-2} P(q x)`.
#[derive(Debug, Clone)]
pub struct Rescaled {
    pub inner: FunctionHandle,
    pub q: u32,
}

impl PeriodicFunction for Rescaled {
    fn value(&self, x: f64) -> f64 {
        let q = self.q as f64;
        self.inner.value(q * x) / (q * q)
    }
    fn value_dd(&self, x: f64) -> Dd {
        let q = self.q as f64;
        self.inner.value_dd(q * x).div_f64(q * q)
    }
    fn derivative(&self, order: usize, x: f64) -> Option<f64> {
        let q = self.q as f64;
        self.inner
            .derivative(order, q * x)
            .map(|v| v * q.powi(order as i32 - 2))
    }
    fn period(&self) -> f64 {
        self.inner.period() / self.q as f64
    }
    fn id(&self) -> String {
        format!("Q[q={}]({})", self.q, self.inner.id())
    }
}

/// Opaque closure with no closed-form derivatives.
pub struct Sampled {
    name: String,
    period: f64,
    f: Box<dyn Fn(f64) -> f64 + Send + Sync>,
}

impl Sampled {
    pub fn new(name: impl Into<String>, f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Sampled {
            name: name.into(),
            period: 1.0,
            f: Box::new(f),
        }
    }
}

impl fmt::Debug for Sampled {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Sampled").field("name", &self.name).finish()
    }
}

impl PeriodicFunction for Sampled {
    fn value(&self, x: f64) -> f64 {
        (self.f)(x)
    }
    fn derivative(&self, order: usize, x: f64) -> Option<f64> {
        (order == 0).then(|| (self.f)(x))
    }
    fn period(&self) -> f64 {
        self.period
    }
    fn id(&self) -> String {
        self.name.clone()
    }
}
