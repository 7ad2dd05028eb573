//! Independent oracles for the integration tests: they use only `h` and the
//! potential derivatives, never the solvers under test.

#![allow(dead_code)]

use rayon::prelude::*;
use twistlab_core::model::GeneratingFunction;

/// Central difference of `f` in coordinate `i`.
pub fn central_difference(f: &dyn Fn(&[f64]) -> f64, x: &[f64], i: usize, step: f64) -> f64 {
    let mut xp = x.to_vec();
    let mut xm = x.to_vec();
    xp[i] += step;
    xm[i] -= step;
    (f(&xp) - f(&xm)) / (2.0 * step)
}

/// `n^{-a} exp(-2√2 λ (8 n^{a/2})^{1/(α-1)})`.
pub fn bump_peak_closed_form(alpha: f64, lambda: f64, a: f64, n: u32) -> f64 {
    let n = n as f64;
    n.powf(-a) * (-2.0 * 2f64.sqrt() * lambda * (8.0 * n.powf(a / 2.0)).powf(1.0 / (alpha - 1.0))).exp()
}

/// Action of one period of a `p/q` configuration, `x_q = x_0 + p`.
pub fn periodic_action(h: &GeneratingFunction, p: i64, x: &[f64]) -> f64 {
    let q = x.len();
    (0..q)
        .map(|i| {
            let next = if i + 1 == q { x[0] + p as f64 } else { x[i + 1] };
            h.h(x[i], next)
        })
        .sum()
}

fn periodic_gradient_hessian(h: &GeneratingFunction, p: i64, x: &[f64]) -> (Vec<f64>, Vec<Vec<f64>>) {
    let q = x.len();
    let mut g = vec![0.0; q];
    let mut hess = vec![vec![0.0; q]; q];
    for i in 0..q {
        let j = (i + 1) % q;
        let next = x[j] + if i + 1 == q { p as f64 } else { 0.0 };
        let d = x[i] - next;
        // h = ½ d² + V(next)
        g[i] += d;
        g[j] += -d + h.potential_derivative(1, next);
        hess[i][i] += 1.0;
        hess[j][j] += 1.0 + h.potential_derivative(2, next);
        hess[i][j] -= 1.0;
        hess[j][i] -= 1.0;
    }
    (g, hess)
}

fn dense_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for c in 0..n {
        let piv = (c..n).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs()))?;
        if a[piv][c].abs() < 1e-300 {
            return None;
        }
        a.swap(c, piv);
        b.swap(c, piv);
        for r in c + 1..n {
            let f = a[r][c] / a[c][c];
            for k in c..n {
                a[r][k] -= f * a[c][k];
            }
            b[r] -= f * b[c];
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|k| a[r][k] * x[k]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    Some(x)
}

/// Plain Newton on the periodic action; returns the polished point and the
/// final gradient norm.
pub fn newton_polish(h: &GeneratingFunction, p: i64, x0: &[f64]) -> (Vec<f64>, f64) {
    let mut x = x0.to_vec();
    let mut gnorm = f64::INFINITY;
    for _ in 0..50 {
        let (g, hess) = periodic_gradient_hessian(h, p, &x);
        gnorm = g.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if gnorm < 1e-14 {
            break;
        }
        let Some(dx) = dense_solve(hess, g) else { break };
        for (xi, d) in x.iter_mut().zip(&dx) {
            *xi -= d;
        }
    }
    (x, gnorm)
}

/// Exhaustive search of the `p/q` periodic action for `q ≤ 3` on a lattice of
/// spacing `1/m`: `x_0` ranges over one period, each further coordinate over
/// `m` points centred on `x_0 + ip/q`. Min-plus sweeps over the chain; returns
/// the best lattice configuration.
pub fn brute_force_periodic(h: &GeneratingFunction, p: i64, q: usize, m: usize) -> Vec<f64> {
    assert!((1..=3).contains(&q) && m % 6 == 0, "lattice must contain ip/q");
    let s = 1.0 / m as f64;
    let vtab: Vec<f64> = (0..m).map(|k| h.potential_value(k as f64 * s)).collect();
    let vat = |k: i64| vtab[k.rem_euclid(m as i64) as usize];
    let half = (m / 2) as i64;
    // coordinates are integers on the lattice: x = k/m
    let link = |a: i64, b: i64| {
        let d = (a - b) as f64 * s;
        0.5 * d * d + vat(b)
    };
    let shift = |i: usize| (i as i64 * p * m as i64) / q as i64;
    let best = (0..m as i64)
        .into_par_iter()
        .map(|k0| {
            let close = k0 + p * m as i64;
            match q {
                1 => (link(k0, close), vec![k0]),
                2 => {
                    let c1 = k0 + shift(1);
                    let (v, k1) = (-half..half)
                        .map(|o| {
                            let k1 = c1 + o;
                            (link(k0, k1) + link(k1, close), k1)
                        })
                        .min_by(|a, b| a.0.total_cmp(&b.0))
                        .unwrap();
                    (v, vec![k0, k1])
                }
                _ => {
                    let (c1, c2) = (k0 + shift(1), k0 + shift(2));
                    let first: Vec<f64> = (-half..half).map(|o| link(k0, c1 + o)).collect();
                    let mut best = (f64::INFINITY, vec![]);
                    for o2 in -half..half {
                        let k2 = c2 + o2;
                        let tail = link(k2, close);
                        let (v, o1) = (-half..half)
                            .map(|o1| (first[(o1 + half) as usize] + link(c1 + o1, k2), o1))
                            .min_by(|a, b| a.0.total_cmp(&b.0))
                            .unwrap();
                        if v + tail < best.0 {
                            best = (v + tail, vec![k0, c1 + o1, k2]);
                        }
                    }
                    best
                }
            }
        })
        .min_by(|a, b| a.0.total_cmp(&b.0))
        .unwrap();
    best.1.iter().map(|&k| k as f64 * s).collect()
}

/// Points of a periodic orbit reduced mod 1 and sorted.
pub fn orbit_mod_one(x: &[f64]) -> Vec<f64> {
    let mut v: Vec<f64> = x.iter().map(|t| t.rem_euclid(1.0)).collect();
    v.sort_by(f64::total_cmp);
    v
}

/// Largest circular distance between two sorted point sets mod 1, minimized
/// over cyclic alignments.
pub fn circle_set_distance(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let circ = |u: f64, v: f64| {
        let d = (u - v).rem_euclid(1.0);
        d.min(1.0 - d)
    };
    (0..b.len())
        .map(|r| (0..a.len()).map(|i| circ(a[i], b[(i + r) % b.len()])).fold(0.0, f64::max))
        .fold(f64::INFINITY, f64::min)
}
