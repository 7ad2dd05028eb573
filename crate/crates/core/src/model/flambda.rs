//! The flat Gevrey factor `f(s) = exp(-λ√2 s^{-p})`, `p = 1/(α-1)`, and its
//! derivatives of any order.
//!
//! Writing `f = exp(g)` with `g(s) = -c s^{-p}`, every derivative has the form
//! `f^{(k)} = f · R_k` where `R_k` is a finite sum of monomials `s^{-(i p + m)}`.
//! The recursion `R_{k+1} = R_k' + g' R_k` is carried out exactly on the
//! coefficient table, and evaluation happens in log space so the product of a
//! vanishing exponential and a blowing-up monomial never overflows.

use std::collections::BTreeMap;

/// Highest derivative order tabulated by [`FLambda::new`].
pub const MAX_TABULATED_ORDER: usize = 24;

#[derive(Debug, Clone)]
struct Monomial {
    /// Number of `g'` factors absorbed (exponent contribution `-i p`).
    i: u32,
    /// Number of plain `1/s` factors (exponent contribution `-m`).
    m: u32,
    coef: f64,
}

#[derive(Debug, Clone)]
pub struct FLambda {
    alpha: f64,
    lambda: f64,
    p: f64,
    c: f64,
    tables: Vec<Vec<Monomial>>,
}

impl FLambda {
    pub fn new(alpha: f64, lambda: f64) -> Self {
        Self::with_order(alpha, lambda, MAX_TABULATED_ORDER)
    }

    pub fn with_order(alpha: f64, lambda: f64, max_order: usize) -> Self {
        assert!(alpha > 1.0, "f_lambda needs alpha > 1");
        let p = 1.0 / (alpha - 1.0);
        let c = lambda * std::f64::consts::SQRT_2;
        let mut tables = Vec::with_capacity(max_order + 1);
        tables.push(vec![Monomial { i: 0, m: 0, coef: 1.0 }]);
        for k in 0..max_order {
            let mut next: BTreeMap<(u32, u32), f64> = BTreeMap::new();
            for t in &tables[k] {
                // d/ds s^{-(ip+m)}
                let e = -(t.i as f64 * p + t.m as f64);
                if e != 0.0 {
                    *next.entry((t.i, t.m + 1)).or_insert(0.0) += t.coef * e;
                }
                // g'(s) = c p s^{-p-1}
                *next.entry((t.i + 1, t.m + 1)).or_insert(0.0) += t.coef * c * p;
            }
            tables.push(
                next.into_iter()
                    .filter(|&(_, coef)| coef != 0.0)
                    .map(|((i, m), coef)| Monomial { i, m, coef })
                    .collect(),
            );
        }
        FLambda {
            alpha,
            lambda,
            p,
            c,
            tables,
        }
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// `p = 1/(α-1)`.
    pub fn exponent(&self) -> f64 {
        self.p
    }

    pub fn max_order(&self) -> usize {
        self.tables.len() - 1
    }

    pub fn value(&self, s: f64) -> f64 {
        if s <= 0.0 {
            0.0
        } else {
            (-self.c * s.powf(-self.p)).exp()
        }
    }

    /// `f^{(k)}(s)`, or `None` when `k` exceeds the tabulated order.
    pub fn derivative(&self, k: usize, s: f64) -> Option<f64> {
        let table = self.tables.get(k)?;
        if s <= 0.0 {
            return Some(0.0);
        }
        let g = -self.c * s.powf(-self.p);
        let ln_s = s.ln();
        let mut acc = 0.0;
        for t in table {
            let e = -(t.i as f64 * self.p + t.m as f64);
            acc += t.coef * (g + e * ln_s).exp();
        }
        Some(acc)
    }

    /// Natural log of `f(s)`; `-inf` for `s <= 0`.
    pub fn ln_value(&self, s: f64) -> f64 {
        if s <= 0.0 {
            f64::NEG_INFINITY
        } else {
            -self.c * s.powf(-self.p)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn central_diff(f: &FLambda, k: usize, s: f64, h: f64) -> f64 {
        let d = |x: f64| f.derivative(k - 1, x).unwrap();
        (d(s - 2.0 * h) - 8.0 * d(s - h) + 8.0 * d(s + h) - d(s + 2.0 * h)) / (12.0 * h)
    }

    #[test]
    fn values_match_closed_form() {
        let f = FLambda::new(2.0, 1.0);
        assert!((f.value(1.0) - (-(2f64).sqrt()).exp()).abs() < 1e-15);
        assert_eq!(f.value(0.0), 0.0);
        assert_eq!(f.value(-3.0), 0.0);
        let g = FLambda::new(3.0, 1.0);
        assert!((g.value(4.0) - (-(2f64).sqrt() / 2.0).exp()).abs() < 1e-15);
    }

    #[test]
    fn first_derivative_closed_form() {
        // alpha = 2: f'(s) = sqrt2/s^2 exp(-sqrt2/s)
        let f = FLambda::new(2.0, 1.0);
        for &s in &[0.05, 0.3, 1.0, 1.7] {
            let exact = 2f64.sqrt() / (s * s) * (-(2f64).sqrt() / s).exp();
            let got = f.derivative(1, s).unwrap();
            assert!((got - exact).abs() <= 1e-13 * exact.abs().max(1e-300), "{s}");
        }
    }

    #[test]
    fn recursion_consistent_with_differences() {
        for &alpha in &[1.5, 2.0, 3.0] {
            let f = FLambda::new(alpha, 1.0);
            for k in 1..=6 {
                for &s in &[0.4, 0.9, 1.6] {
                    let fd = central_diff(&f, k, s, 1e-4);
                    let an = f.derivative(k, s).unwrap();
                    assert!(
                        (fd - an).abs() <= 1e-6 * an.abs().max(1.0),
                        "alpha={alpha} k={k} s={s}: {fd} vs {an}"
                    );
                }
            }
        }
    }

    #[test]
    fn beyond_table_is_none() {
        let f = FLambda::with_order(2.0, 1.0, 3);
        assert!(f.derivative(3, 0.5).is_some());
        assert!(f.derivative(4, 0.5).is_none());
    }
}
