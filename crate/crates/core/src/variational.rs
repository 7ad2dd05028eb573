//! Configurations, actions, and minimizers.
//!
//! Every solve is a damped Newton iteration on the nearest-neighbour action.
//! The Hessian is tridiagonal (cyclic for periodic orbits); it is shifted by a
//! multiple of the identity until its Cholesky factorization succeeds, which
//! turns each step into a descent direction, and steps are accepted by an
//! Armijo test on the action evaluated in double-double precision.

use std::fmt;
use std::fmt::Write as _;

use num_integer::Integer;
use thiserror::Error;

use crate::dd::Dd;
use crate::model::{GeneratingFunction, PerturbationParams};
use crate::numfmt::fmt_num;

/// Default residual tolerance for stationarity.
pub const DEFAULT_TOL: f64 = 1e-10;
/// Default tolerance for action comparisons.
pub const ACTION_TOL: f64 = 1e-8;
pub const HETEROCLINIC_START_WINDOW: usize = 64;
pub const HETEROCLINIC_WINDOW_CAP: usize = 1 << 15;
/// Near-edge distance to the limits required of heteroclinic windows.
pub const TAIL_TOL: f64 = 1e-12;

const MAX_ITER: usize = 500;
const MAX_STEP: f64 = 0.25;
const PERIODIC_PHASES: usize = 8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolveError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("p/q = {p}/{q} is not in lowest terms")]
    NotCoprime { p: i64, q: usize },
    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },
    #[error("heteroclinic window cap {window} reached (edge gap {edge_gap:e})")]
    WindowCap { window: usize, edge_gap: f64 },
    #[error("no gap of clearance > {half_width} inside [3/8, 5/8]")]
    NoGap { half_width: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub fn symbol(&self) -> char {
        match self {
            Sign::Plus => '+',
            Sign::Minus => '-',
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RotationSymbol {
    Irrational(f64),
    Rational { p: i64, q: usize },
    RationalPlus { p: i64, q: usize },
    RationalMinus { p: i64, q: usize },
}

impl RotationSymbol {
    pub fn rational(p: i64, q: usize, sign: Option<Sign>) -> Result<Self, SolveError> {
        check_coprime(p, q)?;
        Ok(match sign {
            None => RotationSymbol::Rational { p, q },
            Some(Sign::Plus) => RotationSymbol::RationalPlus { p, q },
            Some(Sign::Minus) => RotationSymbol::RationalMinus { p, q },
        })
    }

    /// `(p, q, sign)` for rational tags.
    pub fn parts(&self) -> Option<(i64, usize, Option<Sign>)> {
        match *self {
            RotationSymbol::Irrational(_) => None,
            RotationSymbol::Rational { p, q } => Some((p, q, None)),
            RotationSymbol::RationalPlus { p, q } => Some((p, q, Some(Sign::Plus))),
            RotationSymbol::RationalMinus { p, q } => Some((p, q, Some(Sign::Minus))),
        }
    }

    pub fn value(&self) -> f64 {
        match *self {
            RotationSymbol::Irrational(w) => w,
            _ => {
                let (p, q, _) = self.parts().unwrap();
                p as f64 / q as f64
            }
        }
    }
}

impl fmt::Display for RotationSymbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            RotationSymbol::Irrational(w) => write!(f, "{w}"),
            RotationSymbol::Rational { p, q } => write!(f, "{p}/{q}"),
            RotationSymbol::RationalPlus { p, q } => write!(f, "{p}/{q}+"),
            RotationSymbol::RationalMinus { p, q } => write!(f, "{p}/{q}-"),
        }
    }
}

impl std::str::FromStr for RotationSymbol {
    type Err = SolveError;

    /// `p/q`, `p/q+`, `p/q-`, the shorthands `0+`/`0-`, or a decimal.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let bad = || SolveError::InvalidInput(format!("bad rotation symbol `{s}`"));
        let (body, sign) = match s.chars().last() {
            Some('+') => (&s[..s.len() - 1], Some(Sign::Plus)),
            Some('-') => (&s[..s.len() - 1], Some(Sign::Minus)),
            _ => (s, None),
        };
        if let Some((p, q)) = body.split_once('/') {
            let p: i64 = p.trim().parse().map_err(|_| bad())?;
            let q: usize = q.trim().parse().map_err(|_| bad())?;
            return RotationSymbol::rational(p, q, sign);
        }
        if sign.is_some() {
            let p: i64 = body.parse().map_err(|_| bad())?;
            return RotationSymbol::rational(p, 1, sign);
        }
        body.parse::<f64>().map(RotationSymbol::Irrational).map_err(|_| bad())
    }
}

fn check_coprime(p: i64, q: usize) -> Result<(), SolveError> {
    if q == 0 {
        return Err(SolveError::InvalidInput("q must be >= 1".into()));
    }
    if p.gcd(&(q as i64)) != 1 {
        return Err(SolveError::NotCoprime { p, q });
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Boundary {
    /// First and last values are pinned.
    Fixed,
    /// One period `x_0..x_{q-1}`, extended by `x_{i+q} = x_i + p`.
    Periodic { p: i64, q: usize },
    /// Pinned edges equal to the limits of a connecting orbit.
    Heteroclinic { left: f64, right: f64 },
}

impl fmt::Display for Boundary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Boundary::Fixed => write!(f, "fixed"),
            Boundary::Periodic { p, q } => write!(f, "periodic({p},{q})"),
            Boundary::Heteroclinic { left, right } => {
                write!(f, "heteroclinic({},{})", fmt_num(left), fmt_num(right))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Configuration {
    /// Index of `values[0]`.
    pub start: i64,
    pub values: Vec<f64>,
    pub boundary: Boundary,
    pub symbol: Option<RotationSymbol>,
}

impl Configuration {
    pub fn fixed(values: Vec<f64>) -> Self {
        Configuration {
            start: 0,
            values,
            boundary: Boundary::Fixed,
            symbol: None,
        }
    }

    pub fn periodic(p: i64, q: usize, values: Vec<f64>) -> Result<Self, SolveError> {
        check_coprime(p, q)?;
        if values.len() != q {
            return Err(SolveError::InvalidInput(format!(
                "periodic configuration needs {q} values, got {}",
                values.len()
            )));
        }
        Ok(Configuration {
            start: 0,
            values,
            boundary: Boundary::Periodic { p, q },
            symbol: Some(RotationSymbol::Rational { p, q }),
        })
    }

    /// `x_i = phase + i p/q`.
    pub fn rigid_rotation(p: i64, q: usize, phase: f64) -> Result<Self, SolveError> {
        let values = (0..q).map(|i| phase + i as f64 * p as f64 / q as f64).collect();
        Self::periodic(p, q, values)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Last stored index.
    pub fn end(&self) -> i64 {
        self.start + self.values.len() as i64 - 1
    }

    /// `x_i`, extended periodically for periodic configurations.
    pub fn value_at(&self, i: i64) -> Option<f64> {
        match self.boundary {
            Boundary::Periodic { p, q } => {
                let (k, r) = (i - self.start).div_mod_floor(&(q as i64));
                Some(self.values[r as usize] + (k * p) as f64)
            }
            _ => {
                if i < self.start || i > self.end() {
                    None
                } else {
                    Some(self.values[(i - self.start) as usize])
                }
            }
        }
    }

    /// Strictly monotone in either direction (periodic: across one period and the wrap).
    pub fn is_monotone(&self) -> bool {
        let seq: Vec<f64> = match self.boundary {
            Boundary::Periodic { q, .. } => (0..=q as i64).map(|i| self.value_at(self.start + i).unwrap()).collect(),
            _ => self.values.clone(),
        };
        if seq.len() < 2 {
            return true;
        }
        let inc = seq.windows(2).all(|w| w[1] > w[0]);
        let dec = seq.windows(2).all(|w| w[1] < w[0]);
        let constant = seq.windows(2).all(|w| w[1] == w[0]);
        inc || dec || constant
    }

    /// CSV with a `#`-prefixed header block and `index,value` rows.
    pub fn to_csv(&self, report: Option<&SolveReport>, descriptor_block: &str) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# boundary={}", self.boundary);
        let _ = writeln!(
            out,
            "# symbol={}",
            self.symbol.map(|s| s.to_string()).unwrap_or_else(|| "none".into())
        );
        if let Some(r) = report {
            let _ = writeln!(out, "# residual={}", fmt_num(r.residual));
            let _ = writeln!(out, "# action={}", fmt_num(r.action));
            let _ = writeln!(out, "# iterations={}", r.iterations);
            let _ = writeln!(out, "# window={}", r.window);
            let _ = writeln!(out, "# monotone={}", r.monotone);
        }
        for line in descriptor_block.lines() {
            let _ = writeln!(out, "# {line}");
        }
        out.push_str("index,value\n");
        for (k, v) in self.values.iter().enumerate() {
            let _ = writeln!(out, "{},{}", self.start + k as i64, fmt_num(*v));
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SolveReport {
    pub iterations: usize,
    /// Sup norm of the gradient over free coordinates.
    pub residual: f64,
    pub action: f64,
    pub monotone: bool,
    pub window: usize,
}

// ---------------------------------------------------------------------------
// chains

#[derive(Clone, Copy)]
enum Topology {
    Open,
    Cyclic { shift: f64 },
}

struct Chain<'a> {
    h: &'a GeneratingFunction,
    topo: Topology,
    pinned: Vec<bool>,
}

impl<'a> Chain<'a> {
    fn open(h: &'a GeneratingFunction, n: usize, extra_pins: &[usize]) -> Self {
        let mut pinned = vec![false; n];
        pinned[0] = true;
        pinned[n - 1] = true;
        for &j in extra_pins {
            pinned[j] = true;
        }
        Chain {
            h,
            topo: Topology::Open,
            pinned,
        }
    }

    fn cyclic(h: &'a GeneratingFunction, q: usize, p: i64) -> Self {
        Chain {
            h,
            topo: Topology::Cyclic { shift: p as f64 },
            pinned: vec![false; q],
        }
    }

    fn links(&self, x: &[f64]) -> impl Iterator<Item = (f64, f64)> + '_ {
        let n = x.len();
        let count = match self.topo {
            Topology::Open => n - 1,
            Topology::Cyclic { .. } => n,
        };
        let shift = match self.topo {
            Topology::Cyclic { shift } => shift,
            Topology::Open => 0.0,
        };
        let x = x.to_vec();
        (0..count).map(move |i| {
            if i + 1 < n {
                (x[i], x[i + 1])
            } else {
                (x[i], x[0] + shift)
            }
        })
    }

    fn action_dd(&self, x: &[f64]) -> Dd {
        self.links(x).map(|(a, b)| self.h.h_dd(a, b)).sum()
    }

    fn neighbours(&self, x: &[f64], i: usize) -> (Option<f64>, Option<f64>) {
        let n = x.len();
        match self.topo {
            Topology::Open => (
                if i > 0 { Some(x[i - 1]) } else { None },
                if i + 1 < n { Some(x[i + 1]) } else { None },
            ),
            Topology::Cyclic { shift } => (
                Some(if i > 0 { x[i - 1] } else { x[n - 1] - shift }),
                Some(if i + 1 < n { x[i + 1] } else { x[0] + shift }),
            ),
        }
    }

    fn raw_gradient(&self, x: &[f64], i: usize) -> f64 {
        let (prev, next) = self.neighbours(x, i);
        prev.map_or(0.0, |a| self.h.d2(a, x[i])) + next.map_or(0.0, |b| self.h.d1(x[i], b))
    }

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        (0..x.len())
            .map(|i| if self.pinned[i] { 0.0 } else { self.raw_gradient(x, i) })
            .collect()
    }

    /// Diagonal and coupling `off[i]` between `i` and `i+1` (cyclically for the last).
    fn hessian(&self, x: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let n = x.len();
        let mut diag = vec![0.0; n];
        for (i, d) in diag.iter_mut().enumerate() {
            let (prev, next) = self.neighbours(x, i);
            *d = prev.map_or(0.0, |a| self.h.d22(a, x[i])) + next.map_or(0.0, |b| self.h.d11(x[i], b));
        }
        let links: Vec<(f64, f64)> = self.links(x).collect();
        let off = links.iter().map(|&(a, b)| self.h.d12(a, b)).collect();
        (diag, off)
    }

    /// Solves `(H + σI) d = rhs` restricted to free coordinates, or `None`
    /// when the shifted matrix is not positive definite.
    fn shifted_solve(&self, diag: &[f64], off: &[f64], sigma: f64, rhs: &[f64]) -> Option<Vec<f64>> {
        let n = diag.len();
        let mut a: Vec<f64> = diag.iter().map(|d| d + sigma).collect();
        let mut b = off.to_vec();
        let mut r = rhs.to_vec();
        for i in 0..n {
            if self.pinned[i] {
                a[i] = 1.0;
                r[i] = 0.0;
                if i < b.len() {
                    b[i] = 0.0;
                }
                if i > 0 {
                    b[i - 1] = 0.0;
                } else if let Topology::Cyclic { .. } = self.topo {
                    let last = b.len() - 1;
                    b[last] = 0.0;
                }
            }
        }
        match self.topo {
            Topology::Open => tridiagonal_cholesky_solve(&a, &b[..n - 1], &r),
            Topology::Cyclic { .. } => cyclic_cholesky_solve(&a, &b, &r),
        }
    }
}

fn tridiagonal_cholesky_solve(a: &[f64], b: &[f64], r: &[f64]) -> Option<Vec<f64>> {
    let n = a.len();
    let mut l = vec![0.0; n];
    let mut m = vec![0.0; n.saturating_sub(1)];
    for i in 0..n {
        let rad = a[i] - if i > 0 { m[i - 1] * m[i - 1] } else { 0.0 };
        if !(rad > 1e-300) {
            return None;
        }
        l[i] = rad.sqrt();
        if i + 1 < n {
            m[i] = b[i] / l[i];
        }
    }
    let mut y = vec![0.0; n];
    for i in 0..n {
        y[i] = (r[i] - if i > 0 { m[i - 1] * y[i - 1] } else { 0.0 }) / l[i];
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        x[i] = (y[i] - if i + 1 < n { m[i] * x[i + 1] } else { 0.0 }) / l[i];
    }
    Some(x)
}

/// Cholesky for a symmetric cyclic tridiagonal matrix: `off[i]` couples `i`
/// and `i+1 mod n`. The factor is bidiagonal plus a dense last row.
fn cyclic_cholesky_solve(a: &[f64], off: &[f64], r: &[f64]) -> Option<Vec<f64>> {
    let n = a.len();
    match n {
        1 => {
            let d = a[0] + 2.0 * off[0];
            if !(d > 1e-300) {
                return None;
            }
            return Some(vec![r[0] / d]);
        }
        2 => {
            let c = off[0] + off[1];
            let det = a[0] * a[1] - c * c;
            if !(a[0] > 1e-300 && det > 1e-300) {
                return None;
            }
            return Some(vec![(a[1] * r[0] - c * r[1]) / det, (a[0] * r[1] - c * r[0]) / det]);
        }
        _ => {}
    }
    let mut l = vec![0.0; n];
    let mut m = vec![0.0; n - 2]; // L[i+1][i] for i < n-2
    let mut last = vec![0.0; n - 1]; // L[n-1][j]
    for i in 0..n - 1 {
        let rad = a[i] - if i > 0 { m[i - 1] * m[i - 1] } else { 0.0 };
        if !(rad > 1e-300) {
            return None;
        }
        l[i] = rad.sqrt();
        if i < n - 2 {
            m[i] = off[i] / l[i];
        }
        let target = if i == 0 { off[n - 1] } else { 0.0 } + if i == n - 2 { off[n - 2] } else { 0.0 };
        let carry = if i > 0 { last[i - 1] * m[i - 1] } else { 0.0 };
        last[i] = (target - carry) / l[i];
    }
    let rad = a[n - 1] - last.iter().map(|v| v * v).sum::<f64>();
    if !(rad > 1e-300) {
        return None;
    }
    l[n - 1] = rad.sqrt();
    let mut y = vec![0.0; n];
    for i in 0..n - 1 {
        y[i] = (r[i] - if i > 0 { m[i - 1] * y[i - 1] } else { 0.0 }) / l[i];
    }
    y[n - 1] = (r[n - 1] - last.iter().zip(&y).map(|(a, b)| a * b).sum::<f64>()) / l[n - 1];
    let mut x = vec![0.0; n];
    x[n - 1] = y[n - 1] / l[n - 1];
    for i in (0..n - 1).rev() {
        let below = if i < n - 2 { m[i] * x[i + 1] } else { 0.0 };
        x[i] = (y[i] - below - last[i] * x[n - 1]) / l[i];
    }
    Some(x)
}

fn sup_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn is_psd(chain: &Chain, x: &[f64]) -> bool {
    let (diag, off) = chain.hessian(x);
    let probe = vec![0.0; x.len()];
    chain.shifted_solve(&diag, &off, 1e-9, &probe).is_some()
}

/// Damped Newton from `x`; returns (iterations, residual).
fn newton(chain: &Chain, x: &mut Vec<f64>, tol: f64) -> Result<(usize, f64), SolveError> {
    let mut iterations = 0;
    loop {
        let g = chain.gradient(x);
        let res = sup_norm(&g);
        if res <= tol {
            return Ok((iterations, polish(chain, x, res)));
        }
        if iterations >= MAX_ITER {
            return Err(SolveError::NotConverged { iterations, residual: res });
        }
        iterations += 1;
        let (diag, off) = chain.hessian(x);
        let rhs: Vec<f64> = g.iter().map(|v| -v).collect();
        let mut sigma = 0.0;
        let mut step = None;
        for _ in 0..80 {
            if let Some(d) = chain.shifted_solve(&diag, &off, sigma, &rhs) {
                step = Some(d);
                break;
            }
            let min_diag = diag.iter().cloned().fold(f64::INFINITY, f64::min);
            sigma = (2.0 * sigma).max(1e-8).max(1e-3 - min_diag);
        }
        let base = chain.action_dd(x);
        let mut accepted = false;
        let newton_dir = step.unwrap_or_else(|| rhs.clone());
        for dir in [newton_dir, rhs.clone()] {
            let mut d = dir;
            let len = sup_norm(&d);
            if len > MAX_STEP {
                d.iter_mut().for_each(|v| *v *= MAX_STEP / len);
            }
            let slope = dot(&g, &d);
            if !(slope < 0.0) {
                continue;
            }
            let mut t = 1.0;
            for _ in 0..60 {
                let trial: Vec<f64> = x.iter().zip(&d).map(|(a, b)| a + t * b).collect();
                let change = (chain.action_dd(&trial) - base).to_f64();
                if change <= 1e-4 * t * slope {
                    *x = trial;
                    accepted = true;
                    break;
                }
                t *= 0.5;
            }
            if accepted {
                break;
            }
        }
        if !accepted {
            return Err(SolveError::NotConverged { iterations, residual: res });
        }
    }
}

/// A few extra pure Newton steps past tolerance; kept only while they help.
fn polish(chain: &Chain, x: &mut Vec<f64>, mut res: f64) -> f64 {
    for _ in 0..3 {
        let g = chain.gradient(x);
        let (diag, off) = chain.hessian(x);
        let rhs: Vec<f64> = g.iter().map(|v| -v).collect();
        let Some(d) = chain.shifted_solve(&diag, &off, 0.0, &rhs) else {
            break;
        };
        let trial: Vec<f64> = x.iter().zip(&d).map(|(a, b)| a + b).collect();
        let new_res = sup_norm(&chain.gradient(&trial));
        let worse = (chain.action_dd(&trial) - chain.action_dd(x)).to_f64() > 0.0;
        if new_res < 0.5 * res && !worse {
            *x = trial;
            res = new_res;
        } else {
            break;
        }
    }
    res
}

// ---------------------------------------------------------------------------
// public operations

/// Sum of two-point energies along the stored window (one period for periodic
/// configurations).
pub fn action(h: &GeneratingFunction, config: &Configuration) -> f64 {
    action_dd(h, config).to_f64()
}

/// [`action`] accumulated in double-double precision.
pub fn action_dd(h: &GeneratingFunction, config: &Configuration) -> Dd {
    chain_for(h, config, &[]).action_dd(&config.values)
}

fn chain_for<'a>(h: &'a GeneratingFunction, config: &Configuration, pins: &[usize]) -> Chain<'a> {
    match config.boundary {
        Boundary::Periodic { p, q } => Chain::cyclic(h, q, p),
        _ => Chain::open(h, config.len(), pins),
    }
}

/// `∂2h(x_{i-1},x_i) + ∂1h(x_i,x_{i+1})` at every free coordinate: entry `k`
/// belongs to `values[k+1]` for pinned-edge windows and to `values[k]` for
/// periodic configurations.
pub fn action_gradient(h: &GeneratingFunction, config: &Configuration) -> Vec<f64> {
    let chain = chain_for(h, config, &[]);
    let g = chain.gradient(&config.values);
    match config.boundary {
        Boundary::Periodic { .. } => g,
        _ => g[1..g.len() - 1].to_vec(),
    }
}

/// Sup norm of [`action_gradient`].
pub fn residual(h: &GeneratingFunction, config: &Configuration) -> f64 {
    sup_norm(&action_gradient(h, config))
}

fn validate_tol(tol: f64) -> Result<(), SolveError> {
    if !(tol > 0.0) {
        return Err(SolveError::InvalidInput(format!("tolerance must be > 0, got {tol}")));
    }
    Ok(())
}

fn report_for(h: &GeneratingFunction, config: &Configuration, iterations: usize, residual: f64) -> SolveReport {
    SolveReport {
        iterations,
        residual,
        action: action(h, config),
        monotone: config.is_monotone(),
        window: config.len(),
    }
}

/// Minimizes the action over segments of `window` points with pinned ends.
pub fn minimize_segment(
    h: &GeneratingFunction,
    endpoints: (f64, f64),
    window: usize,
    init: Option<&[f64]>,
    tol: f64,
) -> Result<(Configuration, SolveReport), SolveError> {
    validate_tol(tol)?;
    if window < 3 {
        return Err(SolveError::InvalidInput(format!("window must be >= 3, got {window}")));
    }
    let mut x: Vec<f64> = match init {
        Some(v) => {
            if v.len() != window || v[0] != endpoints.0 || v[window - 1] != endpoints.1 {
                return Err(SolveError::InvalidInput("init must match window and endpoints".into()));
            }
            v.to_vec()
        }
        None => (0..window)
            .map(|i| endpoints.0 + (endpoints.1 - endpoints.0) * i as f64 / (window - 1) as f64)
            .collect(),
    };
    let chain = Chain::open(h, window, &[]);
    let (iterations, res) = newton(&chain, &mut x, tol)?;
    let config = Configuration::fixed(x);
    let report = report_for(h, &config, iterations, res);
    Ok((config, report))
}

/// Minimizes the action of `config` with extra coordinates pinned to given
/// values (edges stay pinned as stored).
pub fn minimize_pinned(
    h: &GeneratingFunction,
    config: &Configuration,
    pins: &[(i64, f64)],
    tol: f64,
) -> Result<(Configuration, SolveReport), SolveError> {
    validate_tol(tol)?;
    if matches!(config.boundary, Boundary::Periodic { .. }) {
        return Err(SolveError::InvalidInput("pinning applies to windowed configurations".into()));
    }
    let mut x = config.values.clone();
    let mut idx = Vec::with_capacity(pins.len());
    for &(i, v) in pins {
        if i <= config.start || i >= config.end() {
            return Err(SolveError::InvalidInput(format!("pin index {i} outside the interior")));
        }
        let k = (i - config.start) as usize;
        x[k] = v;
        idx.push(k);
    }
    let chain = Chain::open(h, x.len(), &idx);
    let (iterations, res) = newton(&chain, &mut x, tol)?;
    let out = Configuration {
        values: x,
        ..config.clone()
    };
    let report = report_for(h, &out, iterations, res);
    Ok((out, report))
}

/// Minimal `(p, q)`-periodic configuration.
///
/// Multi-start over rigid rotations plus `init`; among minimizers whose actions
/// agree to `1e-12`, the one nearest `init` wins.
pub fn minimize_periodic(
    h: &GeneratingFunction,
    p: i64,
    q: usize,
    init: Option<&Configuration>,
    tol: f64,
) -> Result<(Configuration, SolveReport), SolveError> {
    validate_tol(tol)?;
    check_coprime(p, q)?;
    let reference = match init {
        Some(c) => {
            if c.boundary != (Boundary::Periodic { p, q }) {
                return Err(SolveError::InvalidInput("init has the wrong boundary".into()));
            }
            c.values.clone()
        }
        None => Configuration::rigid_rotation(p, q, 0.0)?.values,
    };
    let chain = Chain::cyclic(h, q, p);
    let mut seeds = vec![reference.clone()];
    for k in 0..PERIODIC_PHASES {
        let phase = k as f64 / (PERIODIC_PHASES * q) as f64;
        seeds.push(Configuration::rigid_rotation(p, q, phase)?.values);
    }
    let mut best: Option<(Vec<f64>, Dd, usize, f64)> = None;
    let mut last_err = None;
    for seed in seeds {
        match solve_periodic_seed(&chain, seed, tol) {
            Ok((x, iters, res)) => {
                let a = chain.action_dd(&x);
                let better = match &best {
                    None => true,
                    Some((bx, ba, _, _)) => {
                        let diff = (a - *ba).to_f64();
                        diff < -1e-12 || (diff.abs() <= 1e-12 && distance(&x, &reference) < distance(bx, &reference))
                    }
                };
                if better {
                    best = Some((x, a, iters, res));
                }
            }
            Err(e) => last_err = Some(e),
        }
    }
    let Some((x, _, iterations, res)) = best else {
        return Err(last_err.unwrap_or(SolveError::NotConverged {
            iterations: 0,
            residual: f64::NAN,
        }));
    };
    let config = Configuration::periodic(p, q, x)?;
    let report = report_for(h, &config, iterations, res);
    Ok((config, report))
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

/// Newton from one seed, nudged off saddles until the Hessian is PSD.
fn solve_periodic_seed(chain: &Chain, seed: Vec<f64>, tol: f64) -> Result<(Vec<f64>, usize, f64), SolveError> {
    let mut x = seed;
    let mut total = 0;
    for attempt in 0..4 {
        let (iters, res) = newton(chain, &mut x, tol)?;
        total += iters;
        if is_psd(chain, &x) {
            return Ok((x, total, res));
        }
        let kick = 1e-3 * (attempt + 1) as f64;
        for (i, v) in x.iter_mut().enumerate() {
            *v += kick * ((i as f64 + 1.0) * 1.618).sin();
        }
    }
    Err(SolveError::NotConverged {
        iterations: total,
        residual: f64::NAN,
    })
}

/// Connecting orbit on a pinned window: limit `lower` at `-∞` and `upper` at
/// `+∞` for [`Sign::Plus`], reversed for [`Sign::Minus`]. Both limits are
/// periodic minimizers (or any periodic configurations).
///
/// The window starts at [`HETEROCLINIC_START_WINDOW`] points and doubles until
/// the near-edge values are within [`TAIL_TOL`] of the limits and the
/// normalised action changes by less than `0.1 tol`.
pub fn minimize_connecting(
    h: &GeneratingFunction,
    lower: &Configuration,
    upper: &Configuration,
    sign: Sign,
    tol: f64,
) -> Result<(Configuration, SolveReport), SolveError> {
    validate_tol(tol)?;
    for c in [lower, upper] {
        if !matches!(c.boundary, Boundary::Periodic { .. }) {
            return Err(SolveError::InvalidInput("limits must be periodic configurations".into()));
        }
    }
    let (left, right) = match sign {
        Sign::Plus => (lower, upper),
        Sign::Minus => (upper, lower),
    };
    let mut window = HETEROCLINIC_START_WINDOW;
    let mut previous: Option<(Configuration, f64)> = None;
    loop {
        let start = -(window as i64) / 2;
        let mut best: Option<(Vec<f64>, Dd, usize, f64)> = None;
        let chain = Chain::open(h, window, &[]);
        let mut seeds: Vec<Vec<f64>> = [0.25, 0.75]
            .iter()
            .map(|&c| arctan_seed(left, right, start, window, c))
            .collect();
        if let Some((prev, _)) = &previous {
            seeds.insert(0, pad_seed(prev, left, right, start, window));
        }
        let mut last_err = None;
        for mut x in seeds {
            match newton(&chain, &mut x, tol) {
                Ok((iters, res)) => {
                    let a = chain.action_dd(&x);
                    if best.as_ref().is_none_or(|(_, ba, _, _)| (a - *ba).to_f64() < -1e-15) {
                        best = Some((x, a, iters, res));
                    }
                }
                Err(e) => last_err = Some(e),
            }
        }
        let Some((x, _, iterations, res)) = best else {
            return Err(last_err.unwrap());
        };
        let config = Configuration {
            start,
            values: x,
            boundary: Boundary::Fixed,
            symbol: None,
        };
        let edge_gap = (config.values[1] - left.value_at(start + 1).unwrap())
            .abs()
            .max((config.values[window - 2] - right.value_at(start + window as i64 - 2).unwrap()).abs());
        let k = normalised_connecting_action(h, &config, left, right);
        let settled = previous.as_ref().is_some_and(|(_, kp)| (k - kp).abs() < 0.1 * tol);
        if edge_gap <= TAIL_TOL && (settled || edge_gap == 0.0) {
            let config = trim_to_limits(config, left, right);
            let report = report_for(h, &config, iterations, res);
            return Ok((config, report));
        }
        if window * 2 > HETEROCLINIC_WINDOW_CAP {
            return Err(SolveError::WindowCap { window, edge_gap });
        }
        previous = Some((config, k));
        window *= 2;
    }
}

/// Drops interior points that have rounded onto their limit; the stationarity
/// equations of the remaining points are unchanged.
fn trim_to_limits(mut config: Configuration, left: &Configuration, right: &Configuration) -> Configuration {
    let on_left = |c: &Configuration, k: usize| c.values[k] == left.value_at(c.start + k as i64).unwrap();
    let mut drop_left = 0;
    while drop_left + 3 < config.len() && on_left(&config, drop_left + 1) {
        drop_left += 1;
    }
    config.values.drain(..drop_left);
    config.start += drop_left as i64;
    let on_right = |c: &Configuration, k: usize| c.values[k] == right.value_at(c.start + k as i64).unwrap();
    while config.len() > 3 && on_right(&config, config.len() - 2) {
        config.values.pop();
    }
    config
}

fn arctan_seed(left: &Configuration, right: &Configuration, start: i64, n: usize, centre: f64) -> Vec<f64> {
    (0..n)
        .map(|k| {
            let i = start + k as i64;
            let (l, r) = (left.value_at(i).unwrap(), right.value_at(i).unwrap());
            if k == 0 {
                l
            } else if k == n - 1 {
                r
            } else {
                let s = 0.5 + ((i as f64 - centre).atan()) / std::f64::consts::PI;
                l + (r - l) * s
            }
        })
        .collect()
}

fn pad_seed(prev: &Configuration, left: &Configuration, right: &Configuration, start: i64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|k| {
            let i = start + k as i64;
            if i <= prev.start {
                left.value_at(i).unwrap()
            } else if i >= prev.end() {
                right.value_at(i).unwrap()
            } else {
                prev.value_at(i).unwrap()
            }
        })
        .collect()
}

/// `Σ h(x_i,x_{i+1}) - h(l_i,l_{i+1})` on the left half and the same with the
/// right limit on the right half; converges as the window grows.
pub fn normalised_connecting_action(
    h: &GeneratingFunction,
    config: &Configuration,
    left: &Configuration,
    right: &Configuration,
) -> f64 {
    let mut acc = Dd::ZERO;
    for i in config.start..config.end() {
        let (a, b) = (config.value_at(i).unwrap(), config.value_at(i + 1).unwrap());
        let lim = if i < 0 { left } else { right };
        let (la, lb) = (lim.value_at(i).unwrap(), lim.value_at(i + 1).unwrap());
        acc = acc + h.h_dd(a, b) - h.h_dd(la, lb);
    }
    acc.to_f64()
}

/// `0±` heteroclinic between the fixed points `0` and one period of `V`.
pub fn minimize_heteroclinic(
    h: &GeneratingFunction,
    sign: Sign,
    tol: f64,
) -> Result<(Configuration, SolveReport), SolveError> {
    let period = h.period();
    let lower = Configuration::periodic(0, 1, vec![0.0])?;
    let upper = Configuration::periodic(0, 1, vec![period])?;
    let (mut config, report) = minimize_connecting(h, &lower, &upper, sign, tol)?;
    let (left, right) = match sign {
        Sign::Plus => (0.0, period),
        Sign::Minus => (period, 0.0),
    };
    config.boundary = Boundary::Heteroclinic { left, right };
    config.symbol = Some(match sign {
        Sign::Plus => RotationSymbol::RationalPlus { p: 0, q: 1 },
        Sign::Minus => RotationSymbol::RationalMinus { p: 0, q: 1 },
    });
    Ok((config, report))
}

/// Exact `p/q` for periodic configurations, `0` for heteroclinics, and the
/// mean step across the window otherwise.
pub fn rotation_number(config: &Configuration) -> f64 {
    match config.boundary {
        Boundary::Periodic { p, q } => p as f64 / q as f64,
        Boundary::Heteroclinic { .. } => 0.0,
        Boundary::Fixed => {
            if config.len() < 2 {
                return 0.0;
            }
            (config.values[config.len() - 1] - config.values[0]) / (config.len() - 1) as f64
        }
    }
}

/// Sign changes of `c1 - c2` over the common index window; touches without a
/// sign change do not count.
pub fn crossing_count(c1: &Configuration, c2: &Configuration) -> usize {
    let (lo, hi) = match (c1.boundary, c2.boundary) {
        (Boundary::Periodic { q: q1, .. }, Boundary::Periodic { q: q2, .. }) => (0, (q1.lcm(&q2)) as i64),
        (Boundary::Periodic { .. }, _) => (c2.start, c2.end()),
        (_, Boundary::Periodic { .. }) => (c1.start, c1.end()),
        _ => (c1.start.max(c2.start), c1.end().min(c2.end())),
    };
    let mut count = 0;
    let mut last_sign = 0.0;
    for i in lo..=hi {
        let (Some(a), Some(b)) = (c1.value_at(i), c2.value_at(i)) else {
            continue;
        };
        let d = a - b;
        if d == 0.0 {
            continue;
        }
        let s = d.signum();
        if last_sign != 0.0 && s != last_sign {
            count += 1;
        }
        last_sign = s;
    }
    count
}

/// Centre `η ∈ [3/8, 5/8]` of a bump of half-width `w` that misses every point
/// of `config` (mod 1), chosen as the gap midpoint with the largest clearance.
pub fn gap_search(config: &Configuration, params: &PerturbationParams) -> Result<f64, SolveError> {
    let w = params.half_width();
    let (lo, hi) = (0.375, 0.625);
    let mut pts: Vec<f64> = config.values.iter().map(|x| x - x.floor()).collect();
    pts.sort_by(f64::total_cmp);
    let clearance = |eta: f64| {
        pts.iter().fold(f64::INFINITY, |m, x| {
            let d = (x - eta).abs();
            m.min(d.min(1.0 - d))
        })
    };
    let mut candidates = vec![lo, hi];
    for pair in pts.windows(2) {
        let mid = 0.5 * (pair[0] + pair[1]);
        if pair[1] >= lo && pair[0] <= hi {
            candidates.push(mid.clamp(lo, hi));
        }
    }
    let (eta, c) = candidates
        .into_iter()
        .map(|e| (e, clearance(e)))
        .fold((f64::NAN, f64::NEG_INFINITY), |best, cur| if cur.1 > best.1 { cur } else { best });
    if c > w {
        Ok(eta)
    } else {
        Err(SolveError::NoGap { half_width: w })
    }
}
