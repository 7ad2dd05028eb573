//! Derivative sups, truncated Gevrey norms, `C^r` norms, and numerical checks
//! of the Cauchy-type derivative bound for the flat factor.

use std::f64::consts::PI;

use thiserror::Error;

use crate::model::{rescaled_family, FLambda, FunctionHandle, PeriodicFunction, PerturbationParams};

/// Default number of grid points per period.
pub const DEFAULT_GRID: usize = 1 << 14;
/// Default truncation order of the Gevrey series.
pub const DEFAULT_K_MAX: usize = 12;
/// Relative disagreement allowed between the two finite-difference resolutions.
pub const FD_AGREEMENT: f64 = 0.05;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GevreyError {
    #[error("finite differences for derivative order {order} did not converge: coarse {coarse:e}, fine {fine:e}")]
    NonConvergent { order: usize, coarse: f64, fine: f64 },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DerivativeMethod {
    Analytic,
    /// Central stencil of the given accuracy order, Richardson-extrapolated once.
    FiniteDifference { accuracy: usize },
}

impl DerivativeMethod {
    pub fn label(&self) -> String {
        match self {
            DerivativeMethod::Analytic => "analytic".into(),
            DerivativeMethod::FiniteDifference { accuracy } => format!("fd{accuracy}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DerivativeSup {
    pub order: usize,
    pub sup_value: f64,
    /// Location of the sup within one period.
    pub argmax: f64,
    pub method: DerivativeMethod,
    pub grid_size: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NormEstimate {
    pub value: f64,
    pub truncation_order: usize,
    pub grid_size: usize,
    /// Geometric estimate of the discarded series tail; `inf` when the last
    /// term ratio is not below one.
    pub tail_bound: f64,
    /// Per-order derivative sups that fed the sum.
    pub sups: Vec<DerivativeSup>,
}

const FD_ACCURACY: usize = 8;

/// Fornberg weights for the `order`-th derivative on the integer offsets
/// `-half..=half`.
pub fn central_weights(order: usize, half: usize) -> Vec<f64> {
    let nodes: Vec<f64> = (-(half as i64)..=half as i64).map(|j| j as f64).collect();
    let n = nodes.len();
    let m = order;
    // c[j][k]: weight of node j for derivative k
    let mut c = vec![vec![0.0; m + 1]; n];
    c[0][0] = 1.0;
    let mut c1 = 1.0;
    let mut c4 = nodes[0];
    for i in 1..n {
        let mn = i.min(m);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = nodes[i];
        for j in 0..i {
            let c3 = nodes[i] - nodes[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[i][k] = c1 * (k as f64 * c[i - 1][k - 1] - c5 * c[i - 1][k]) / c2;
                }
                c[i][0] = -c1 * c5 * c[i - 1][0] / c2;
            }
            for k in (1..=mn).rev() {
                c[j][k] = (c4 * c[j][k] - k as f64 * c[j][k - 1]) / c3;
            }
            c[j][0] = c4 * c[j][0] / c3;
        }
        c1 = c2;
    }
    c.into_iter().map(|row| row[m]).collect()
}

fn stencil_half(order: usize) -> usize {
    (order + 1) / 2 + FD_ACCURACY / 2
}

/// Central-difference estimate of `f^{(order)}(x)` with step `h`,
/// Richardson-extrapolated against step `h/2`.
pub fn fd_derivative(f: &dyn Fn(f64) -> f64, order: usize, x: f64, h: f64) -> f64 {
    if order == 0 {
        return f(x);
    }
    let half = stencil_half(order);
    let w = central_weights(order, half);
    let raw = |step: f64| -> f64 {
        let mut acc = 0.0;
        for (j, wj) in w.iter().enumerate() {
            let off = j as f64 - half as f64;
            acc += wj * f(x + off * step);
        }
        acc / step.powi(order as i32)
    };
    let coarse = raw(h);
    let fine = raw(0.5 * h);
    let gain = 2f64.powi(FD_ACCURACY as i32);
    (gain * fine - coarse) / (gain - 1.0)
}

fn fd_step(order: usize, spacing: f64, period: f64) -> f64 {
    let floor = 0.25 * period * f64::EPSILON.powf(1.0 / (order + FD_ACCURACY) as f64);
    spacing.max(floor)
}

/// Golden-section refinement of `max |g|` on `[lo, hi]`.
fn refine_max(g: &dyn Fn(f64) -> f64, lo: f64, hi: f64) -> (f64, f64) {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (lo, hi);
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = g(c).abs();
    let mut fd = g(d).abs();
    for _ in 0..80 {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = g(c).abs();
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = g(d).abs();
        }
        if (b - a).abs() < 1e-15 * (1.0 + a.abs()) {
            break;
        }
    }
    if fc > fd { (c, fc) } else { (d, fd) }
}

/// Sup of `|g|` over one period: uniform grid, then a refinement pass around
/// the best grid point.
pub fn grid_sup(g: &dyn Fn(f64) -> f64, start: f64, period: f64, grid: usize) -> (f64, f64) {
    let spacing = period / grid as f64;
    let mut best = (start, g(start).abs());
    for i in 1..grid {
        let x = start + i as f64 * spacing;
        let v = g(x).abs();
        if v > best.1 {
            best = (x, v);
        }
    }
    let (x, v) = refine_max(g, best.0 - spacing, best.0 + spacing);
    if v > best.1 { (x, v) } else { best }
}

/// Sup of `|φ^{(k)}|` over one period.
pub fn derivative_sup(phi: &dyn PeriodicFunction, k: usize, grid: usize) -> Result<DerivativeSup, GevreyError> {
    if grid < 2 {
        return Err(GevreyError::InvalidArgument("grid must have at least 2 points".into()));
    }
    let period = phi.period();
    if phi.derivative(k, 0.0).is_some() {
        let g = |x: f64| phi.derivative(k, x).unwrap_or(f64::NAN);
        let (argmax, sup_value) = grid_sup(&g, 0.0, period, grid);
        return Ok(DerivativeSup {
            order: k,
            sup_value,
            argmax,
            method: DerivativeMethod::Analytic,
            grid_size: grid,
        });
    }
    let f = |x: f64| phi.value(x);
    let estimate = |n: usize, step: f64| -> (f64, f64) {
        let g = |x: f64| fd_derivative(&f, k, x, step);
        grid_sup(&g, 0.0, period, n)
    };
    let h = fd_step(k, period / grid as f64, period);
    let (_, coarse) = estimate(grid, h);
    let (argmax, fine) = estimate(2 * grid, 0.7 * h);
    // rounding level of the stencil: values below it carry no information
    let magnitude = (0..grid)
        .map(|i| phi.value(i as f64 * period / grid as f64).abs())
        .fold(0.0, f64::max);
    let weight_sum: f64 = central_weights(k, stencil_half(k)).iter().map(|w| w.abs()).sum();
    let noise = 1e3 * f64::EPSILON * magnitude * weight_sum / (0.35 * h).powi(k as i32);
    let scale = coarse.abs().max(fine.abs());
    if scale > noise && (coarse - fine).abs() > FD_AGREEMENT * scale {
        return Err(GevreyError::NonConvergent { order: k, coarse, fine });
    }
    Ok(DerivativeSup {
        order: k,
        sup_value: fine,
        argmax,
        method: DerivativeMethod::FiniteDifference { accuracy: FD_ACCURACY },
        grid_size: 2 * grid,
    })
}

fn ln_factorial(k: usize) -> f64 {
    (1..=k).map(|j| (j as f64).ln()).sum()
}

/// Truncated `Σ_{k ≤ K_max} L^{kα}/k!^α ‖∂^k φ‖_{C^0}` with a geometric tail estimate.
pub fn gevrey_norm(
    phi: &dyn PeriodicFunction,
    alpha: f64,
    big_l: f64,
    k_max: usize,
    grid: usize,
) -> Result<NormEstimate, GevreyError> {
    if !(big_l > 0.0) {
        return Err(GevreyError::InvalidArgument(format!("L must be > 0, got {big_l}")));
    }
    let mut value = 0.0;
    let mut sups = Vec::with_capacity(k_max + 1);
    let mut terms = Vec::with_capacity(k_max + 1);
    for k in 0..=k_max {
        let s = derivative_sup(phi, k, grid)?;
        let weight = (k as f64 * alpha * big_l.ln() - alpha * ln_factorial(k)).exp();
        let term = weight * s.sup_value;
        value += term;
        terms.push(term);
        sups.push(s);
    }
    let last = terms[k_max];
    let tail_bound = if last == 0.0 {
        0.0
    } else if k_max == 0 || terms[k_max - 1] == 0.0 {
        f64::INFINITY
    } else {
        let ratio = last / terms[k_max - 1];
        if ratio < 1.0 { last * ratio / (1.0 - ratio) } else { f64::INFINITY }
    };
    Ok(NormEstimate {
        value,
        truncation_order: k_max,
        grid_size: grid,
        tail_bound,
        sups,
    })
}

/// Smallest `λ` for which the Cauchy bound makes `‖f_λ‖_{α,L}` finite:
/// `(2 L^α / sin σ)^p / p`.
pub fn lambda_threshold(alpha: f64, big_l: f64) -> f64 {
    let p = 1.0 / (alpha - 1.0);
    let sigma = 0.25 * PI * 1f64.min(1.0 / p);
    (2.0 * big_l.powf(alpha) / sigma.sin()).powf(p) / p
}

pub fn is_gevrey_admissible(alpha: f64, lambda: f64, big_l: f64) -> bool {
    lambda > lambda_threshold(alpha, big_l)
}

/// Right-hand side of the Cauchy bound,
/// `(2/sin σ)^k (k/(λ p e))^{k/p} k!`.
pub fn cauchy_bound(alpha: f64, lambda: f64, k: usize) -> f64 {
    let p = 1.0 / (alpha - 1.0);
    let sigma = 0.25 * PI * 1f64.min(1.0 / p);
    let kf = k as f64;
    let power = if k == 0 {
        1.0
    } else {
        (kf / (lambda * p * std::f64::consts::E)).powf(kf / p)
    };
    (2.0 / sigma.sin()).powi(k as i32) * power * ln_factorial(k).exp()
}

#[derive(Debug, Clone, PartialEq)]
pub struct CauchyCheck {
    pub order: usize,
    pub holds: bool,
    pub observed_sup: f64,
    pub argmax: f64,
    pub bound: f64,
    /// `bound / observed_sup`.
    pub margin: f64,
}

/// Samples `|f_λ^{(k)}|` on `(0, 2]` and compares with [`cauchy_bound`].
pub fn verify_cauchy_bound(alpha: f64, lambda: f64, k: usize, grid: usize) -> Result<CauchyCheck, GevreyError> {
    if !(alpha > 1.0) || !(lambda > 0.0) {
        return Err(GevreyError::InvalidArgument(format!(
            "need alpha > 1 and lambda > 0, got alpha={alpha}, lambda={lambda}"
        )));
    }
    let f = FLambda::new(alpha, lambda);
    if k > f.max_order() {
        return Err(GevreyError::InvalidArgument(format!(
            "derivative order {k} exceeds tabulated order {}",
            f.max_order()
        )));
    }
    let g = |x: f64| f.derivative(k, x).unwrap_or(f64::NAN);
    let spacing = 2.0 / grid as f64;
    let (argmax, observed_sup) = grid_sup(&g, spacing, 2.0 - spacing, grid);
    let bound = cauchy_bound(alpha, lambda, k);
    Ok(CauchyCheck {
        order: k,
        holds: observed_sup <= bound,
        observed_sup,
        argmax,
        bound,
        margin: bound / observed_sup,
    })
}

/// `max_{k ≤ r} ‖φ^{(k)}‖_{C^0}`.
pub fn cr_norm(phi: &dyn PeriodicFunction, r: usize, grid: usize) -> Result<f64, GevreyError> {
    let mut best: f64 = 0.0;
    for k in 0..=r {
        best = best.max(derivative_sup(phi, k, grid)?.sup_value);
    }
    Ok(best)
}

/// `C^r` norm for real `r = m + β`, `0 < β < 1`: the integer `C^m` norm joined
/// with the interpolation seminorm `‖φ^{(m)}‖^{1-β} ‖φ^{(m+1)}‖^{β}`, which
/// scales exactly like the Hölder seminorm under `x ↦ qx`.
pub fn cr_norm_real(phi: &dyn PeriodicFunction, r: f64, grid: usize) -> Result<f64, GevreyError> {
    if !(r >= 0.0) || !r.is_finite() {
        return Err(GevreyError::InvalidArgument(format!("r must be finite and >= 0, got {r}")));
    }
    let m = r.floor() as usize;
    let beta = r - m as f64;
    let base = cr_norm(phi, m, grid)?;
    if beta == 0.0 {
        return Ok(base);
    }
    let low = derivative_sup(phi, m, grid)?.sup_value;
    let high = derivative_sup(phi, m + 1, grid)?.sup_value;
    Ok(base.max(low.powf(1.0 - beta) * high.powf(beta)))
}

#[derive(Debug, Clone, PartialEq)]
pub struct CrDecayRow {
    pub q: u32,
    pub r: f64,
    /// `‖Q_q‖_{C^r}`.
    pub norm: f64,
    /// `q^{a+2-r} ‖Q_q‖_{C^r}`, bounded when the decay law holds.
    pub scaled: f64,
}

/// `‖Q_q‖_{C^r}` for `Q_q = q^{-2}(u_q + v_q)(q·)`.
pub fn perturbation_cr_decay(
    q: u32,
    params: &PerturbationParams,
    r: f64,
    grid: usize,
) -> Result<CrDecayRow, GevreyError> {
    let h = rescaled_family(params, q).map_err(|e| GevreyError::InvalidArgument(e.to_string()))?;
    let potential: &FunctionHandle = h.potential();
    // sample the full unit interval, not just the minimal period
    let unit = UnitPeriod(potential.clone());
    let norm = cr_norm_real(&unit, r, grid)?;
    let qf = q as f64;
    Ok(CrDecayRow {
        q,
        r,
        norm,
        scaled: qf.powf(params.a + 2.0 - r) * norm,
    })
}

#[derive(Debug)]
struct UnitPeriod(FunctionHandle);

impl PeriodicFunction for UnitPeriod {
    fn value(&self, x: f64) -> f64 {
        self.0.value(x)
    }
    fn derivative(&self, order: usize, x: f64) -> Option<f64> {
        self.0.derivative(order, x)
    }
    fn id(&self) -> String {
        self.0.id()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Constant, CosineWell, GevreyBump, Sampled, Scaled, TrigPolynomial};
    use approx::assert_relative_eq;
    use std::sync::Arc;

    #[test]
    fn fornberg_weights_known() {
        let w = central_weights(1, 1);
        assert_relative_eq!(w[0], -0.5, epsilon = 1e-14);
        assert_relative_eq!(w[2], 0.5, epsilon = 1e-14);
        let w2 = central_weights(2, 1);
        assert_relative_eq!(w2[0], 1.0, epsilon = 1e-14);
        assert_relative_eq!(w2[1], -2.0, epsilon = 1e-14);
    }

    #[test]
    fn cosine_third_derivative() {
        let u = CosineWell { amplitude: 1.0 };
        let s = derivative_sup(&u, 3, DEFAULT_GRID).unwrap();
        assert_eq!(s.method, DerivativeMethod::Analytic);
        assert_relative_eq!(s.sup_value, (2.0 * PI).powi(3), max_relative = 1e-12);
        assert_relative_eq!(s.sup_value, 248.050, max_relative = 1e-5);
    }

    #[test]
    fn cosine_third_derivative_by_differences() {
        let u = Sampled::new("cos", |x| 1.0 - (2.0 * PI * x).cos());
        let s = derivative_sup(&u, 3, 1 << 12).unwrap();
        assert!(matches!(s.method, DerivativeMethod::FiniteDifference { .. }));
        assert_relative_eq!(s.sup_value, (2.0 * PI).powi(3), max_relative = 1e-6);
    }

    #[test]
    fn constant_has_zero_derivatives() {
        for k in 1..5 {
            assert_eq!(derivative_sup(&Constant(3.5), k, 256).unwrap().sup_value, 0.0);
            let sampled = Sampled::new("c", |_| 3.5);
            let s = derivative_sup(&sampled, k, 256).unwrap().sup_value;
            assert!(s < 1e-3, "k={k} s={s}");
        }
    }

    #[test]
    fn bump_first_derivative_fd_vs_analytic() {
        let params = PerturbationParams::new(2.0, 1.0, 2.0, 1).unwrap();
        let bump = GevreyBump::new(&params, 0.5);
        let analytic = derivative_sup(&bump, 1, 100_000).unwrap().sup_value;
        let opaque = Sampled::new("v", move |x| bump.value(x));
        let fd = derivative_sup(&opaque, 1, 1 << 14).unwrap().sup_value;
        assert!((fd - analytic).abs() <= 0.01 * analytic, "{fd} vs {analytic}");
    }

    #[test]
    fn gevrey_norm_of_cosine_converges_to_e_plus_one() {
        let u = CosineWell { amplitude: 1.0 };
        let target = std::f64::consts::E + 1.0;
        let mut prev = 0.0;
        for k_max in [2, 4, 8, 12, 16] {
            let est = gevrey_norm(&u, 1.0, 1.0 / (2.0 * PI), k_max, 4096).unwrap();
            assert!(est.value >= prev);
            assert!(est.value <= target + 1e-12);
            // remainder of the exponential series after K terms
            let remainder: f64 = (k_max + 1..40).map(|j| (-ln_factorial(j)).exp()).sum();
            assert_relative_eq!(est.value, target - remainder, max_relative = 1e-12);
            assert!(est.tail_bound >= 0.0);
            prev = est.value;
        }
        let est = gevrey_norm(&u, 1.0, 1.0 / (2.0 * PI), 16, 4096).unwrap();
        assert!((est.value - target).abs() < 1e-13);
    }

    #[test]
    fn gevrey_norm_of_zero() {
        let z = crate::model::Zero;
        let est = gevrey_norm(&z, 2.0, 0.5, DEFAULT_K_MAX, 256).unwrap();
        assert_eq!(est.value, 0.0);
        assert_eq!(est.tail_bound, 0.0);
    }

    #[test]
    fn gevrey_norm_homogeneous() {
        let base: FunctionHandle = Arc::new(TrigPolynomial {
            constant: 0.2,
            terms: vec![(1, 0.7, -0.1), (2, 0.0, 0.3)],
        });
        let n = gevrey_norm(base.as_ref(), 1.5, 0.3, 10, 2048).unwrap().value;
        for c in [2.0, -3.0] {
            let scaled = Scaled { factor: c, inner: base.clone() };
            let m = gevrey_norm(&scaled, 1.5, 0.3, 10, 2048).unwrap().value;
            assert_relative_eq!(m, c.abs() * n, max_relative = 1e-12);
        }
    }

    #[test]
    fn cauchy_bound_examples() {
        let zero = verify_cauchy_bound(2.0, 1.0, 0, 4096).unwrap();
        assert!(zero.holds);
        assert_eq!(zero.bound, 1.0);
        // alpha = 2, k = 1: observed sup is max_y sqrt2 y^2 e^{-sqrt2 y} = 4 sqrt2 e^{-2}/2 at y = sqrt2
        let one = verify_cauchy_bound(2.0, 1.0, 1, DEFAULT_GRID).unwrap();
        let closed = 2f64.sqrt() * 2.0 * (-2f64).exp();
        assert_relative_eq!(one.observed_sup, closed, max_relative = 1e-10);
        let expected_bound = (2.0 / (PI / 4.0).sin()) / std::f64::consts::E;
        assert_relative_eq!(one.bound, expected_bound, max_relative = 1e-12);
        assert!(one.holds);
        let three = verify_cauchy_bound(2.0, 1.0, 3, DEFAULT_GRID).unwrap();
        assert!(three.holds && three.margin > 1.0);
    }

    #[test]
    fn cr_norm_examples() {
        let u = CosineWell { amplitude: 1.0 };
        assert_relative_eq!(cr_norm(&u, 2, 4096).unwrap(), (2.0 * PI).powi(2), max_relative = 1e-12);
        assert_eq!(cr_norm(&Constant(-1.5), 3, 64).unwrap(), 1.5);
        let mut prev = 0.0;
        for r in 0..5 {
            let v = cr_norm(&u, r, 1024).unwrap();
            assert!(v >= prev);
            prev = v;
        }
    }

    #[test]
    fn real_cr_norm_interpolates() {
        let u = CosineWell { amplitude: 1.0 };
        let v = cr_norm_real(&u, 2.5, 4096).unwrap();
        assert_relative_eq!(v, (2.0 * PI).powf(2.5), max_relative = 1e-10);
        assert_eq!(cr_norm_real(&u, 2.0, 4096).unwrap(), cr_norm(&u, 2, 4096).unwrap());
    }

    #[test]
    fn cr_decay_cosine_part() {
        let params = PerturbationParams::new(2.0, 1.0, 1.0, 1).unwrap();
        let row = perturbation_cr_decay(1, &params, 0.0, 4096).unwrap();
        let full = crate::model::make_family(&params, crate::model::Variant::Full).unwrap();
        assert_eq!(row.norm, cr_norm(full.potential().as_ref(), 0, 4096).unwrap());
        // cosine part alone, r = 2
        for q in [2u32, 3, 5] {
            let well: FunctionHandle = Arc::new(CosineWell {
                amplitude: (q as f64).powf(-params.a),
            });
            let qwell = crate::model::rescale(well, q).unwrap();
            let v = cr_norm(&UnitPeriod(qwell), 2, 4096).unwrap();
            let qf = q as f64;
            let exact = qf.powi(-2) * qf.powf(-params.a) * (2.0 * PI).powi(2) * qf.powi(2);
            assert_relative_eq!(v, exact, max_relative = 1e-12);
        }
    }

    #[test]
    fn lambda_threshold_examples() {
        // alpha = 2: p = 1, sigma = pi/4
        let t = lambda_threshold(2.0, 0.5);
        assert_relative_eq!(t, 2.0 * 0.25 / (PI / 4.0).sin(), max_relative = 1e-14);
        assert!(is_gevrey_admissible(2.0, 1.0, 0.5));
        assert!(!is_gevrey_admissible(2.0, 0.5, 0.5));
    }
}
