//! Generating functions `h(x,x') = ½(x-x')² + V(x')` for the integrable shear,
//! the cosine well `u_n`, and the Gevrey bump `v_n`, plus the induced twist map.

mod flambda;
mod functions;
mod params;

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use thiserror::Error;

pub use flambda::{FLambda, MAX_TABULATED_ORDER};
pub use functions::{
    Constant, CosineWell, FunctionHandle, GevreyBump, PeriodicFunction, Product, Rescaled,
    Sampled, Scaled, Sum, TrigPolynomial, Zero,
};
pub use params::PerturbationParams;

use crate::dd::Dd;
use crate::numfmt::fmt_num;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("unknown variant tag `{0}` (expected integrable, cosine-only, full, full-shifted)")]
    UnknownVariant(String),
    #[error("variant full-shifted needs an axis eta")]
    MissingEta,
    #[error("rescaling factor q must be a positive integer")]
    ZeroRescale,
}

/// The four members of the family addressed by the experiments.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Variant {
    /// `h_0`
    Integrable,
    /// `h̄_n = h_0 + u_n`
    CosineOnly,
    /// `h_n = h_0 + u_n + v_n`
    Full,
    /// `h_0 + u_n + v_{n,η}`
    FullShifted { eta: f64 },
}

impl Variant {
    pub fn tag(&self) -> &'static str {
        match self {
            Variant::Integrable => "integrable",
            Variant::CosineOnly => "cosine-only",
            Variant::Full => "full",
            Variant::FullShifted { .. } => "full-shifted",
        }
    }

    pub fn eta(&self) -> Option<f64> {
        match *self {
            Variant::FullShifted { eta } => Some(eta),
            _ => None,
        }
    }

    /// Parses a tag, attaching `eta` for the shifted variant.
    pub fn from_tag(tag: &str, eta: Option<f64>) -> Result<Self, ModelError> {
        match tag.trim() {
            "integrable" => Ok(Variant::Integrable),
            "cosine-only" => Ok(Variant::CosineOnly),
            "full" => Ok(Variant::Full),
            "full-shifted" => eta
                .map(|eta| Variant::FullShifted { eta })
                .ok_or(ModelError::MissingEta),
            other => Err(ModelError::UnknownVariant(other.to_string())),
        }
    }
}

impl FromStr for Variant {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Variant::from_tag(s, None)
    }
}

/// Reproducibility block written into every result file.
#[derive(Debug, Clone, PartialEq)]
pub struct FamilyDescriptor {
    pub params: PerturbationParams,
    pub variant: Variant,
    /// Set when the potential was rescaled by `Q(x) = q^{-2} P(qx)`.
    pub rescale_q: Option<u32>,
}

impl FamilyDescriptor {
    /// `key=value` lines, one per field.
    pub fn to_kv_block(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("alpha={}\n", fmt_num(self.params.alpha)));
        out.push_str(&format!("lambda={}\n", fmt_num(self.params.lambda)));
        out.push_str(&format!("a={}\n", fmt_num(self.params.a)));
        out.push_str(&format!("n={}\n", self.params.n));
        out.push_str(&format!("variant={}\n", self.variant.tag()));
        match self.variant.eta() {
            Some(eta) => out.push_str(&format!("eta={}\n", fmt_num(eta))),
            None => out.push_str("eta=none\n"),
        }
        if let Some(q) = self.rescale_q {
            out.push_str(&format!("rescale_q={}\n", q));
        }
        out
    }
}

impl fmt::Display for FamilyDescriptor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_kv_block())
    }
}

/// `h(x,x') = ½(x-x')² + V(x')` with a 1-periodic (or finer) potential `V`.
#[derive(Debug, Clone)]
pub struct GeneratingFunction {
    potential: FunctionHandle,
    descriptor: Option<FamilyDescriptor>,
}

impl GeneratingFunction {
    pub fn additive(potential: FunctionHandle) -> Self {
        GeneratingFunction {
            potential,
            descriptor: None,
        }
    }

    pub fn integrable() -> Self {
        Self::additive(Arc::new(Zero))
    }

    pub fn with_descriptor(mut self, descriptor: FamilyDescriptor) -> Self {
        self.descriptor = Some(descriptor);
        self
    }

    pub fn descriptor(&self) -> Option<&FamilyDescriptor> {
        self.descriptor.as_ref()
    }

    pub fn potential(&self) -> &FunctionHandle {
        &self.potential
    }

    /// Smallest period of `V`; fixed points of the heteroclinic problem sit at
    /// `0` and this value.
    pub fn period(&self) -> f64 {
        self.potential.period()
    }

    /// Descriptor block, or a placeholder for ad-hoc potentials.
    pub fn descriptor_block(&self) -> String {
        match &self.descriptor {
            Some(d) => d.to_kv_block(),
            None => format!("potential={}\n", self.potential.id()),
        }
    }

    pub fn potential_value(&self, x: f64) -> f64 {
        self.potential.value(x)
    }

    /// `V^{(k)}(x)`, closed form when available, else a sixth-order central
    /// difference.
    pub fn potential_derivative(&self, order: usize, x: f64) -> f64 {
        if let Some(v) = self.potential.derivative(order, x) {
            return v;
        }
        let h = 1e-3;
        let d = |t: f64| -> f64 {
            match order {
                1 => self.potential.value(t),
                _ => self.potential_derivative(order - 1, t),
            }
        };
        (-d(x - 3.0 * h) + 9.0 * d(x - 2.0 * h) - 45.0 * d(x - h) + 45.0 * d(x + h)
            - 9.0 * d(x + 2.0 * h)
            + d(x + 3.0 * h))
            / (60.0 * h)
    }

    pub fn h(&self, x: f64, xp: f64) -> f64 {
        let s = xp - x;
        0.5 * s * s + self.potential.value(xp)
    }

    /// `h(x,x')` in double-double precision.
    pub fn h_dd(&self, x: f64, xp: f64) -> Dd {
        Dd::diff(xp, x).square().scale(0.5) + self.potential.value_dd(xp)
    }

    pub fn d1(&self, x: f64, xp: f64) -> f64 {
        x - xp
    }

    pub fn d2(&self, x: f64, xp: f64) -> f64 {
        xp - x + self.potential_derivative(1, xp)
    }

    pub fn d11(&self, _x: f64, _xp: f64) -> f64 {
        1.0
    }

    pub fn d12(&self, _x: f64, _xp: f64) -> f64 {
        -1.0
    }

    pub fn d22(&self, _x: f64, xp: f64) -> f64 {
        1.0 + self.potential_derivative(2, xp)
    }
}

pub fn eval_h0(x: f64, xp: f64) -> f64 {
    0.5 * (x - xp) * (x - xp)
}

/// `u_n(x) = n^{-a}(1 - cos 2πx)`.
pub fn eval_u(params: &PerturbationParams, x: f64) -> f64 {
    CosineWell {
        amplitude: params.amplitude(),
    }
    .value(x)
}

/// `f_λ(x) = exp(-λ√2 x^{-1/(α-1)})` for `x > 0`, else 0.
pub fn eval_f_lambda(alpha: f64, lambda: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    (-lambda * std::f64::consts::SQRT_2 * x.powf(-1.0 / (alpha - 1.0))).exp()
}

/// `v_n(x)`, supported on `[1/2 - w, 1/2 + w]` mod 1.
pub fn eval_v(params: &PerturbationParams, x: f64) -> f64 {
    eval_v_shifted(params, 0.5, x)
}

/// `v_{n,η}(x) = v_n(x - (η - 1/2))`.
pub fn eval_v_shifted(params: &PerturbationParams, eta: f64, x: f64) -> f64 {
    GevreyBump::new(params, eta).value(x)
}

/// Builds one member of the family.
pub fn make_family(params: &PerturbationParams, variant: Variant) -> Result<GeneratingFunction, ModelError> {
    params.validate()?;
    let well: FunctionHandle = Arc::new(CosineWell {
        amplitude: params.amplitude(),
    });
    let potential: FunctionHandle = match variant {
        Variant::Integrable => Arc::new(Zero),
        Variant::CosineOnly => well,
        Variant::Full => Arc::new(Sum(vec![well, Arc::new(GevreyBump::new(params, 0.5))])),
        Variant::FullShifted { eta } => {
            if !eta.is_finite() {
                return Err(ModelError::InvalidParams(format!("eta must be finite, got {eta}")));
            }
            Arc::new(Sum(vec![well, Arc::new(GevreyBump::new(params, eta))]))
        }
    };
    Ok(GeneratingFunction::additive(potential).with_descriptor(FamilyDescriptor {
        params: *params,
        variant,
        rescale_q: None,
    }))
}

/// `Q(x) = q^{-2} P(qx)`.
pub fn rescale(potential: FunctionHandle, q: u32) -> Result<FunctionHandle, ModelError> {
    if q == 0 {
        return Err(ModelError::ZeroRescale);
    }
    Ok(Arc::new(Rescaled { inner: potential, q }))
}

/// `h_0 + Q_n` with `Q_n = q^{-2}(u_n + v_n)(q·)` and `n = q`.
pub fn rescaled_family(params: &PerturbationParams, q: u32) -> Result<GeneratingFunction, ModelError> {
    if q == 0 {
        return Err(ModelError::ZeroRescale);
    }
    let params = params.with_n(q);
    let full = make_family(&params, Variant::Full)?;
    let potential = rescale(full.potential().clone(), q)?;
    Ok(GeneratingFunction::additive(potential).with_descriptor(FamilyDescriptor {
        params,
        variant: Variant::Full,
        rescale_q: Some(q),
    }))
}

/// One step of the map generated by `h`: `x' = x + y`, `y' = y + V'(x')`.
pub fn induced_map_step(h: &GeneratingFunction, state: (f64, f64)) -> (f64, f64) {
    let (x, y) = state;
    let xp = x + y;
    (xp, y + h.potential_derivative(1, xp))
}

/// Jacobian determinant of [`induced_map_step`] at `state`.
pub fn induced_map_jacobian_det(h: &GeneratingFunction, state: (f64, f64)) -> f64 {
    let xp = state.0 + state.1;
    let v2 = h.potential_derivative(2, xp);
    // [[1, 1], [v2, 1 + v2]]
    (1.0 + v2) - v2
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn p(n: u32, a: f64) -> PerturbationParams {
        PerturbationParams::new(2.0, 1.0, a, n).unwrap()
    }

    #[test]
    fn h0_examples() {
        assert_eq!(eval_h0(0.0, 0.5), 0.125);
        assert_eq!(eval_h0(0.7, 0.7), 0.0);
        assert_eq!(eval_h0(0.5, 0.25), 0.03125);
    }

    #[test]
    fn u_examples() {
        assert_eq!(eval_u(&p(2, 1.0), 0.0), 0.0);
        assert_relative_eq!(eval_u(&p(2, 1.0), 0.5), 1.0, epsilon = 1e-15);
        assert_relative_eq!(eval_u(&p(1, 2.0), 0.25), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn f_lambda_examples() {
        assert_eq!(eval_f_lambda(2.0, 1.0, 0.0), 0.0);
        assert_eq!(eval_f_lambda(2.0, 1.0, -1.0), 0.0);
        assert_relative_eq!(eval_f_lambda(2.0, 1.0, 1.0), 0.243_116_734_434_214_2, max_relative = 1e-14);
        assert_relative_eq!(eval_f_lambda(3.0, 1.0, 4.0), 0.493_068_691_395_239_8, max_relative = 1e-14);
    }

    #[test]
    fn f_lambda_monotone() {
        let mut prev = 0.0;
        for i in 1..500 {
            let v = eval_f_lambda(1.5, 1.0, i as f64 * 0.01);
            assert!(v >= prev);
            prev = v;
        }
    }

    #[test]
    fn v_examples() {
        let params = p(1, 2.0);
        assert_eq!(eval_v(&params, 0.25), 0.0);
        // Oracle: two-factor product at the center, both arguments equal w.
        let w = params.half_width();
        let direct = eval_f_lambda(2.0, 1.0, w) * eval_f_lambda(2.0, 1.0, w);
        assert_relative_eq!(eval_v(&params, 0.5), direct, max_relative = 1e-12);
        assert_relative_eq!(eval_v(&params, 0.5), 1.489_490_227_124_265_5e-10, max_relative = 1e-12);
        assert_eq!(eval_v(&params, 0.5 + w), 0.0);
        assert_eq!(eval_v(&params, 0.5 - w), 0.0);
    }

    #[test]
    fn v_symmetric_and_periodic() {
        let params = p(3, 1.0);
        for i in 0..100 {
            let d = i as f64 * 0.001;
            assert_relative_eq!(eval_v(&params, 0.5 + d), eval_v(&params, 0.5 - d), max_relative = 1e-10);
            assert_relative_eq!(eval_v(&params, 1.5 + d), eval_v(&params, 0.5 + d), max_relative = 1e-12);
        }
    }

    #[test]
    fn shifted_bump_examples() {
        let params = p(1, 2.0);
        for i in 0..=50 {
            let x = i as f64 / 50.0;
            assert_eq!(eval_v_shifted(&params, 0.5, x), eval_v(&params, x));
        }
        assert_eq!(eval_v_shifted(&params, 0.4, 0.4), eval_v(&params, 0.5));
        assert_eq!(eval_v_shifted(&params, 0.4, 0.6), 0.0);
        // support straddling 0/1
        assert_eq!(eval_v_shifted(&params, 0.02, 0.02), eval_v(&params, 0.5));
        assert!(eval_v_shifted(&params, 0.02, 0.98) > 0.0);
    }

    #[test]
    fn family_examples() {
        let params = p(2, 1.0);
        let h0 = make_family(&params, Variant::Integrable).unwrap();
        assert_eq!(h0.h(0.0, 0.5), 0.125);
        let hbar = make_family(&params, Variant::CosineOnly).unwrap();
        assert_relative_eq!(hbar.h(0.0, 0.5), 1.125, epsilon = 1e-15);
        let full = make_family(&params, Variant::Full).unwrap();
        for i in 0..20 {
            let x = i as f64 * 0.05;
            assert_eq!(full.d12(x, x + 0.3), -1.0);
        }
        assert!(matches!(
            Variant::from_tag("bogus", None),
            Err(ModelError::UnknownVariant(_))
        ));
        assert_eq!(Variant::from_tag("full-shifted", None), Err(ModelError::MissingEta));
    }

    #[test]
    fn rescale_examples() {
        let well: FunctionHandle = Arc::new(CosineWell { amplitude: 1.0 });
        let q2 = rescale(well.clone(), 2).unwrap();
        assert_relative_eq!(q2.value(0.25), 0.5, epsilon = 1e-15);
        let q1 = rescale(well.clone(), 1).unwrap();
        for i in 0..30 {
            let x = i as f64 / 29.0;
            assert_eq!(q1.value(x), well.value(x));
        }
        assert_eq!(rescale(well.clone(), 0).err(), Some(ModelError::ZeroRescale));
        let q3 = rescale(well.clone(), 3).unwrap();
        let sup = |f: &FunctionHandle| (0..=3000).map(|i| f.value(i as f64 / 3000.0).abs()).fold(0.0, f64::max);
        assert_relative_eq!(sup(&q3), sup(&well) / 9.0, max_relative = 1e-12);
    }

    #[test]
    fn induced_map_examples() {
        let h0 = GeneratingFunction::integrable();
        assert_eq!(induced_map_step(&h0, (0.2, 0.3)), (0.5, 0.3));
        let full = make_family(&p(4, 1.0), Variant::Full).unwrap();
        assert_eq!(induced_map_step(&full, (0.0, 0.0)), (0.0, 0.0));
        let mut state = (0.0, 0.3);
        for _ in 0..100 {
            state = induced_map_step(&h0, state);
        }
        assert_relative_eq!(state.0 / 100.0, 0.3, epsilon = 1e-12);
    }

    #[test]
    fn induced_map_generating_equations() {
        let h = make_family(&p(3, 1.0), Variant::Full).unwrap();
        let mut state = (0.1, 0.37);
        for _ in 0..50 {
            let (xp, yp) = induced_map_step(&h, state);
            assert!((state.1 + h.d1(state.0, xp)).abs() < 1e-12);
            assert!((yp - h.d2(state.0, xp)).abs() < 1e-12);
            assert!((induced_map_jacobian_det(&h, state) - 1.0).abs() < 1e-8);
            state = (xp, yp);
        }
    }

    #[test]
    fn generating_function_invariants() {
        let params = p(2, 1.0);
        for variant in [
            Variant::Integrable,
            Variant::CosineOnly,
            Variant::Full,
            Variant::FullShifted { eta: 0.43 },
        ] {
            let h = make_family(&params, variant).unwrap();
            for i in 0..40 {
                let x = -0.5 + i as f64 * 0.05;
                let xp = x + 0.3 - i as f64 * 0.01;
                assert!((h.h(x + 1.0, xp + 1.0) - h.h(x, xp)).abs() < 1e-12);
                let e = 1e-6;
                let fd1 = (h.h(x + e, xp) - h.h(x - e, xp)) / (2.0 * e);
                let fd2 = (h.h(x, xp + e) - h.h(x, xp - e)) / (2.0 * e);
                assert!((fd1 - h.d1(x, xp)).abs() <= 1e-6 * h.d1(x, xp).abs().max(1.0));
                assert!((fd2 - h.d2(x, xp)).abs() <= 1e-6 * h.d2(x, xp).abs().max(1.0));
                let fd22 = (h.d2(x, xp + e) - h.d2(x, xp - e)) / (2.0 * e);
                assert!((fd22 - h.d22(x, xp)).abs() <= 1e-6 * h.d22(x, xp).abs().max(1.0));
            }
            assert_eq!(h.h(0.0, 0.0), 0.0);
            assert_eq!(h.potential_derivative(1, 0.0), 0.0);
        }
    }

    #[test]
    fn bump_is_flat_at_edges() {
        let params = p(1, 2.0);
        let bump = GevreyBump::new(&params, 0.5);
        let w = params.half_width();
        for k in 0..=6 {
            for x in [0.5 - w, 0.5 + w] {
                assert!(bump.derivative(k, x).unwrap().abs() < 1e-8);
                // approach from inside
                let inside = if x < 0.5 { x + 1e-3 } else { x - 1e-3 };
                assert!(bump.derivative(k, inside).unwrap().abs() < 1e-8, "k={k}");
            }
        }
    }

    #[test]
    fn max_value_law() {
        for n in [1, 2, 4] {
            let params = p(n, 1.0);
            assert_relative_eq!(eval_v(&params, 0.5), params.bump_peak(), max_relative = 1e-12);
            for i in 0..=1000 {
                assert!(eval_v(&params, i as f64 / 1000.0) <= eval_v(&params, 0.5));
            }
        }
    }

    #[test]
    fn descriptor_block() {
        let h = make_family(&p(4, 1.0), Variant::FullShifted { eta: 0.4 }).unwrap();
        let block = h.descriptor_block();
        assert!(block.contains("variant=full-shifted\n"));
        assert!(block.contains("n=4\n"));
        assert!(block.contains("eta=4.0000000000000002e-1\n"));
    }
}
