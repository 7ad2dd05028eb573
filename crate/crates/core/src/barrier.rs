//! Peierls barriers for rational and one-sided rotation symbols.
//!
//! Two independent formulations are provided. [`peierls_rational`] minimizes
//! Mather's relative action `G` over the box `Π[x_i^-, x_i^+]` spanned by the
//! two minimal configurations bracketing `ξ`, by clamped coordinate descent
//! followed by a Newton polish. [`peierls_zero_plus`] pins one coordinate of
//! the `0+` heteroclinic and subtracts the unconstrained action on the same
//! window. Both accumulate actions in double-double precision.

use std::sync::OnceLock;

use rayon::prelude::*;
use thiserror::Error;

use crate::dd::Dd;
use crate::model::{eval_v_shifted, make_family, GeneratingFunction, ModelError, PerturbationParams, Variant};
use crate::variational::{
    gap_search, minimize_connecting, minimize_heteroclinic, minimize_periodic, minimize_pinned, Boundary,
    Configuration, RotationSymbol, Sign, SolveError,
};

/// Barriers below this are read as "ξ lies on a minimal configuration".
pub const ZERO_FLOOR: f64 = 1e-13;
const DESCENT_SWEEPS: usize = 20_000;
const LINE_SAMPLES: usize = 16;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BarrierError {
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("bracket construction failed: {0}")]
    Bracket(String),
    #[error("{0}")]
    Unsupported(String),
}

/// Complementary interval `(ξ^-, ξ^+)` and its two bounding minimal configurations.
#[derive(Debug, Clone, PartialEq)]
pub struct GapBracket {
    pub xi_minus: f64,
    pub xi_plus: f64,
    pub lower: Configuration,
    pub upper: Configuration,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BarrierSample {
    pub xi: f64,
    pub value: f64,
    pub converged: bool,
    pub iterations: usize,
    pub window: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BarrierProfile {
    pub symbol: RotationSymbol,
    pub samples: Vec<BarrierSample>,
    pub tol: f64,
}

impl BarrierProfile {
    pub fn max(&self) -> Option<&BarrierSample> {
        self.samples
            .iter()
            .filter(|s| s.converged)
            .max_by(|a, b| a.value.total_cmp(&b.value))
    }

    pub fn min_value(&self) -> f64 {
        self.samples
            .iter()
            .filter(|s| s.converged)
            .map(|s| s.value)
            .fold(f64::INFINITY, f64::min)
    }

    /// `xi,P,converged,iterations,window` rows.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("xi,P,converged,iterations,window\n");
        for s in &self.samples {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                crate::numfmt::fmt_num(s.xi),
                crate::numfmt::fmt_num(s.value),
                s.converged,
                s.iterations,
                s.window
            ));
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Destroyed,
    Inconclusive,
}

impl Verdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            Verdict::Destroyed => "destroyed",
            Verdict::Inconclusive => "inconclusive",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Certificate {
    pub verdict: Verdict,
    pub symbol: RotationSymbol,
    pub max_barrier: f64,
    pub argmax: f64,
    /// `10 tol`.
    pub threshold: f64,
    pub failed_samples: usize,
    pub profile: BarrierProfile,
}

// ---------------------------------------------------------------------------
// relative action on a pinned window

/// `Σ_{i} h(x_i,x_{i+1}) - h(r_i,r_{i+1})` over stored links.
fn relative_action(h: &GeneratingFunction, x: &[f64], reference: &[f64]) -> Dd {
    let mut acc = Dd::ZERO;
    for i in 0..x.len() - 1 {
        acc = acc + h.h_dd(x[i], x[i + 1]) - h.h_dd(reference[i], reference[i + 1]);
    }
    acc
}

/// Global minimum of `t ↦ h(a,t) + h(t,b)` on `[lo, hi]`: sampling, golden
/// section around the best sample, then safeguarded Newton.
fn line_minimum(h: &GeneratingFunction, a: f64, b: f64, lo: f64, hi: f64, current: f64) -> f64 {
    if hi <= lo {
        return lo;
    }
    let f = |t: f64| h.h(a, t) + h.h(t, b);
    let mut best = current.clamp(lo, hi);
    let mut fbest = f(best);
    let step = (hi - lo) / LINE_SAMPLES as f64;
    for k in 0..=LINE_SAMPLES {
        let t = lo + k as f64 * step;
        let ft = f(t);
        if ft < fbest {
            best = t;
            fbest = ft;
        }
    }
    let (mut l, mut r) = ((best - step).max(lo), (best + step).min(hi));
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = r - g * (r - l);
    let mut d = l + g * (r - l);
    let (mut fc, mut fd) = (f(c), f(d));
    while r - l > 1e-9 * (1.0 + best.abs()) {
        if fc < fd {
            r = d;
            d = c;
            fd = fc;
            c = r - g * (r - l);
            fc = f(c);
        } else {
            l = c;
            c = d;
            fc = fd;
            d = l + g * (r - l);
            fd = f(d);
        }
    }
    let mut t = 0.5 * (l + r);
    for _ in 0..8 {
        let g1 = h.d2(a, t) + h.d1(t, b);
        let g2 = h.d22(a, t) + h.d11(t, b);
        if !(g2 > 0.0) {
            break;
        }
        let next = (t - g1 / g2).clamp(lo, hi);
        if (next - t).abs() <= 1e-16 * (1.0 + t.abs()) {
            t = next;
            break;
        }
        t = next;
    }
    if f(t) <= fbest {
        t
    } else {
        best
    }
}

struct BoxSolve {
    value: Dd,
    iterations: usize,
    converged: bool,
    /// Minimizer; read by the clamping test.
    #[cfg_attr(not(test), allow(dead_code))]
    x: Vec<f64>,
}

/// Minimizes `G` over `lo ≤ x ≤ hi` with pinned coordinates held fixed.
fn box_minimize(
    h: &GeneratingFunction,
    lo: &[f64],
    hi: &[f64],
    pins: &[(usize, f64)],
    reference: &[f64],
    tol: f64,
) -> Result<BoxSolve, BarrierError> {
    let n = lo.len();
    let mut pinned = vec![false; n];
    pinned[0] = true;
    pinned[n - 1] = true;
    let mut x: Vec<f64> = lo.to_vec();
    let (j0, xi) = pins[0];
    let theta = if hi[j0] > lo[j0] {
        ((xi - lo[j0]) / (hi[j0] - lo[j0])).clamp(0.0, 1.0)
    } else {
        0.0
    };
    for i in 1..n - 1 {
        x[i] = lo[i] + theta * (hi[i] - lo[i]);
    }
    for &(j, v) in pins {
        pinned[j] = true;
        x[j] = v;
    }
    let mut sweeps = 0;
    let mut converged = false;
    while sweeps < DESCENT_SWEEPS {
        sweeps += 1;
        let mut change: f64 = 0.0;
        for i in 1..n - 1 {
            if pinned[i] {
                continue;
            }
            let t = line_minimum(h, x[i - 1], x[i + 1], lo[i], hi[i], x[i]);
            change = change.max((t - x[i]).abs());
            x[i] = t;
        }
        if change <= 1e-13 {
            converged = true;
            break;
        }
    }
    let mut value = relative_action(h, &x, reference);
    // Newton polish when no clamp is active
    let interior = (1..n - 1).all(|i| pinned[i] || (x[i] > lo[i] && x[i] < hi[i]));
    let mut iterations = sweeps;
    if interior {
        let window = Configuration::fixed(x.clone());
        let pin_list: Vec<(i64, f64)> = pins
            .iter()
            .filter(|&&(j, _)| j > 0 && j < n - 1)
            .map(|&(j, v)| (j as i64, v))
            .collect();
        if let Ok((polished, report)) = minimize_pinned(h, &window, &pin_list, tol) {
            let inside = (0..n).all(|i| polished.values[i] >= lo[i] - 1e-12 && polished.values[i] <= hi[i] + 1e-12);
            let pv = relative_action(h, &polished.values, reference);
            if inside && (pv - value).to_f64() <= 1e-15 {
                value = pv;
                x = polished.values;
                iterations += report.iterations;
                converged = true;
            }
        }
    }
    Ok(BoxSolve {
        value,
        iterations,
        converged,
        x,
    })
}

// ---------------------------------------------------------------------------
// rational symbols

/// Minimal periodic orbit and helpers for locating the lifts around `ξ`.
struct PeriodicData {
    p: i64,
    q: usize,
    orbit: Configuration,
}

impl PeriodicData {
    fn new(h: &GeneratingFunction, p: i64, q: usize, tol: f64) -> Result<Self, BarrierError> {
        let (orbit, _) = minimize_periodic(h, p, q, None, tol)?;
        Ok(PeriodicData { p, q, orbit })
    }

    /// `(value, j, k)` of the largest lift `orbit_j - k ≤ ξ` and of the
    /// smallest lift `> ξ`.
    fn lifts(&self, xi: f64) -> Result<((f64, usize, f64), (f64, usize, f64)), BarrierError> {
        let mut below: Option<(f64, usize, f64)> = None;
        let mut above: Option<(f64, usize, f64)> = None;
        for j in 0..self.q {
            let m = self.orbit.values[j];
            for t in [-1.0, 0.0, 1.0] {
                let k = (m - xi).floor() - t;
                let v = m - k;
                if v <= xi && below.is_none_or(|b| v > b.0) {
                    below = Some((v, j, k));
                }
                if v > xi && above.is_none_or(|a| v < a.0) {
                    above = Some((v, j, k));
                }
            }
        }
        match (below, above) {
            (Some(b), Some(a)) => Ok((b, a)),
            _ => Err(BarrierError::Bracket(format!("no lifts around {xi}"))),
        }
    }

    fn bracket(&self, xi: f64) -> Result<GapBracket, BarrierError> {
        let (b, a) = self.lifts(xi)?;
        Ok(GapBracket {
            xi_minus: b.0,
            xi_plus: a.0,
            lower: self.lift(b.1, b.2)?,
            upper: self.lift(a.1, a.2)?,
        })
    }

    fn lift(&self, j: usize, k: f64) -> Result<Configuration, BarrierError> {
        let values = (0..self.q)
            .map(|i| self.orbit.value_at((i + j) as i64).unwrap() - k)
            .collect();
        Ok(Configuration::periodic(self.p, self.q, values)?)
    }

    /// Unsigned barrier: box minimization over one period with `x_0 = ξ`.
    fn barrier(&self, h: &GeneratingFunction, xi: f64, tol: f64) -> Result<BarrierSample, BarrierError> {
        let br = self.bracket(xi)?;
        let q = self.q;
        if (xi - br.xi_minus).abs() <= 1e-14 {
            return Ok(sample(xi, 0.0, true, 0, q + 1));
        }
        let p = self.p as f64;
        let lo: Vec<f64> = (0..=q as i64).map(|i| br.lower.value_at(i).unwrap()).collect();
        let hi: Vec<f64> = (0..=q as i64).map(|i| br.upper.value_at(i).unwrap()).collect();
        if q == 1 {
            let v = h.h_dd(xi, xi + p) - h.h_dd(lo[0], lo[1]);
            return Ok(sample(xi, v.to_f64(), true, 0, 2));
        }
        let mut lo_pinned = lo.clone();
        lo_pinned[0] = xi;
        lo_pinned[q] = xi + p;
        let mut hi_pinned = hi.clone();
        hi_pinned[0] = xi;
        hi_pinned[q] = xi + p;
        let solve = box_minimize(h, &lo_pinned, &hi_pinned, &[(0, xi), (q, xi + p)], &lo, tol)?;
        Ok(sample(xi, solve.value.to_f64(), solve.converged, solve.iterations, q + 1))
    }
}

fn sample(xi: f64, value: f64, converged: bool, iterations: usize, window: usize) -> BarrierSample {
    BarrierSample {
        xi,
        value,
        converged,
        iterations,
        window,
    }
}

/// Connecting orbit between two neighbouring periodic minimizers.
struct ConnectingData {
    periodic: PeriodicData,
    sign: Sign,
    tol: f64,
    /// Connecting orbit between the orbit itself (lift `(0, 0)`) and its upper
    /// neighbour; solved on first use, since integrable cases never need it.
    orbit: OnceLock<Result<Configuration, BarrierError>>,
}

impl ConnectingData {
    fn new(h: &GeneratingFunction, p: i64, q: usize, sign: Sign, tol: f64) -> Result<Self, BarrierError> {
        Ok(ConnectingData {
            periodic: PeriodicData::new(h, p, q, tol)?,
            sign,
            tol,
            orbit: OnceLock::new(),
        })
    }

    fn orbit(&self, h: &GeneratingFunction) -> Result<&Configuration, BarrierError> {
        self.orbit
            .get_or_init(|| {
                let (lower, upper) = self.periodic.lifts(self.periodic.orbit.values[0])?;
                if (lower.1, lower.2) != (0, 0.0) {
                    return Err(BarrierError::Bracket("canonical lift not found".into()));
                }
                let lo = self.periodic.lift(0, 0.0)?;
                let up = self.periodic.lift(upper.1, upper.2)?;
                Ok(minimize_connecting(h, &lo, &up, self.sign, self.tol)?.0)
            })
            .as_ref()
            .map_err(Clone::clone)
    }

    /// Barrier at `ξ` relative to the two consecutive shifts of the
    /// connecting orbit that bracket it.
    fn barrier(&self, h: &GeneratingFunction, xi: f64, tol: f64) -> Result<BarrierSample, BarrierError> {
        let unsigned = self.periodic.barrier(h, xi, tol)?;
        if unsigned.value.abs() <= ZERO_FLOOR {
            return Ok(BarrierSample { value: 0.0, ..unsigned });
        }
        let orbit = self.orbit(h)?;
        let (below, _) = self.periodic.lifts(xi)?;
        let br = self.periodic.bracket(xi)?;
        let (j, k) = (below.1 as i64, below.2);
        let (p, q) = (self.periodic.p, self.periodic.q as i64);
        let (left_lim, right_lim) = match self.sign {
            Sign::Plus => (&br.lower, &br.upper),
            Sign::Minus => (&br.upper, &br.lower),
        };
        // the canonical orbit re-indexed onto the lifts around ξ
        let z = |i: i64| -> f64 {
            match orbit.value_at(i + j) {
                Some(v) => v - k,
                None if i + j < orbit.start => left_lim.value_at(i).unwrap(),
                None => right_lim.value_at(i).unwrap(),
            }
        };
        // shifts z^(s)_i = z_{i+sq} - sp are ordered in s
        let shifted = |s: i64, i: i64| z(i + s * q) - (s * p) as f64;
        let span = orbit.len() as i64 / q + 2;
        let step = if matches!(self.sign, Sign::Plus) { 1 } else { -1 };
        let mut s = -step * span;
        while shifted(s + step, 0) <= xi && s.abs() <= span {
            s += step;
        }
        let (s_lo, s_hi) = (s, s + step);
        if !(shifted(s_lo, 0) <= xi && shifted(s_hi, 0) > xi) {
            return Err(BarrierError::Bracket(format!("no connecting shifts bracket {xi}")));
        }
        if shifted(s_lo, 0) == xi {
            return Ok(sample(xi, 0.0, true, 0, 0));
        }
        let half = orbit.len() as i64 / 2 + q * (s_lo.abs().max(s_hi.abs()) + 1);
        let lo: Vec<f64> = (-half..=half).map(|i| shifted(s_lo, i)).collect();
        let mut hi: Vec<f64> = (-half..=half).map(|i| shifted(s_hi, i)).collect();
        let n = lo.len();
        let centre = half as usize;
        let mut lo_box = lo.clone();
        lo_box[centre] = xi;
        hi[centre] = xi;
        // edges pinned to the lower bracket
        hi[0] = lo[0];
        hi[n - 1] = lo[n - 1];
        let solve = box_minimize(h, &lo_box, &hi, &[(centre, xi)], &lo, tol)?;
        Ok(sample(xi, solve.value.to_f64(), solve.converged, solve.iterations, n))
    }
}

/// Peierls barrier `P_{p/q}(ξ)` (unsigned) or `P_{p/q±}(ξ)`.
pub fn peierls_rational(
    h: &GeneratingFunction,
    p: i64,
    q: usize,
    sign: Option<Sign>,
    xi: f64,
    tol: f64,
) -> Result<f64, BarrierError> {
    Ok(RationalBarrier::new(h, p, q, sign, tol)?.sample(h, xi, tol)?.value)
}

/// Cached minimizers for repeated barrier samples at one rational symbol.
pub struct RationalBarrier {
    inner: RationalInner,
}

enum RationalInner {
    Unsigned(PeriodicData),
    Signed(ConnectingData),
}

impl RationalBarrier {
    pub fn new(h: &GeneratingFunction, p: i64, q: usize, sign: Option<Sign>, tol: f64) -> Result<Self, BarrierError> {
        let inner = match sign {
            None => RationalInner::Unsigned(PeriodicData::new(h, p, q, tol)?),
            Some(s) => RationalInner::Signed(ConnectingData::new(h, p, q, s, tol)?),
        };
        Ok(RationalBarrier { inner })
    }

    pub fn sample(&self, h: &GeneratingFunction, xi: f64, tol: f64) -> Result<BarrierSample, BarrierError> {
        match &self.inner {
            RationalInner::Unsigned(d) => d.barrier(h, xi, tol),
            RationalInner::Signed(d) => d.barrier(h, xi, tol),
        }
    }

    /// Bracket of `ξ` between lifts of the periodic minimizer.
    pub fn bracket(&self, xi: f64) -> Result<GapBracket, BarrierError> {
        match &self.inner {
            RationalInner::Unsigned(d) => d.bracket(xi),
            RationalInner::Signed(d) => d.periodic.bracket(xi),
        }
    }

    pub fn periodic_minimizer(&self) -> &Configuration {
        match &self.inner {
            RationalInner::Unsigned(d) => &d.orbit,
            RationalInner::Signed(d) => &d.periodic.orbit,
        }
    }
}

/// Connecting orbit from the minimal `p/q` orbit to its upper neighbouring
/// lift (`+`), or the reverse (`-`).
pub fn connecting_minimizer(
    h: &GeneratingFunction,
    p: i64,
    q: usize,
    sign: Sign,
    tol: f64,
) -> Result<(Configuration, crate::variational::SolveReport), BarrierError> {
    if (p, q) == (0, 1) {
        return Ok(minimize_heteroclinic(h, sign, tol)?);
    }
    let data = PeriodicData::new(h, p, q, tol)?;
    let (_, upper) = data.lifts(data.orbit.values[0])?;
    let lo = data.lift(0, 0.0)?;
    let up = data.lift(upper.1, upper.2)?;
    Ok(minimize_connecting(h, &lo, &up, sign, tol)?)
}

// ---------------------------------------------------------------------------
// the 0+ barrier by pinned heteroclinics

/// Unconstrained `0+` heteroclinic and its action, reused across samples.
pub struct ZeroPlusBarrier {
    heteroclinic: Configuration,
    action: Dd,
    v_min: f64,
}

impl ZeroPlusBarrier {
    pub fn new(h: &GeneratingFunction, tol: f64) -> Result<Self, BarrierError> {
        let period = h.period();
        let v_min = (0..1024)
            .map(|k| h.potential_value(period * k as f64 / 1024.0))
            .fold(h.potential_value(0.0), f64::min);
        let (heteroclinic, _) = match minimize_heteroclinic(h, Sign::Plus, tol) {
            Ok(v) => v,
            Err(e) if v_min_everywhere(h, v_min) => {
                // V is constant: every point is a fixed point, no heteroclinic needed
                let _ = e;
                let c = Configuration {
                    start: 0,
                    values: vec![0.0, period],
                    boundary: Boundary::Heteroclinic { left: 0.0, right: period },
                    symbol: None,
                };
                (c, Default::default())
            }
            Err(e) => return Err(e.into()),
        };
        let action = crate::variational::action_dd(h, &heteroclinic);
        Ok(ZeroPlusBarrier {
            heteroclinic,
            action,
            v_min,
        })
    }

    pub fn heteroclinic(&self) -> &Configuration {
        &self.heteroclinic
    }

    pub fn sample(&self, h: &GeneratingFunction, eta: f64, tol: f64) -> Result<BarrierSample, BarrierError> {
        let period = h.period();
        let r = eta - (eta / period).floor() * period;
        if h.potential_value(r) - self.v_min <= ZERO_FLOOR {
            return Ok(sample(eta, 0.0, true, 0, self.heteroclinic.len()));
        }
        let z = &self.heteroclinic;
        let Some(pos) = z.values.windows(2).position(|w| w[0] <= r && r <= w[1]) else {
            return Err(BarrierError::Bracket(format!("{eta} outside the heteroclinic range")));
        };
        if z.values[pos] == r || z.values[pos + 1] == r {
            return Ok(sample(eta, 0.0, true, 0, z.len()));
        }
        let mut best: Option<(Dd, usize)> = None;
        let mut last_err = None;
        for k in [pos, pos + 1] {
            if k == 0 || k == z.len() - 1 {
                continue;
            }
            let idx = z.start + k as i64;
            match minimize_pinned(h, z, &[(idx, r)], tol) {
                Ok((c, report)) => {
                    let a = crate::variational::action_dd(h, &c);
                    if best.is_none_or(|(b, _)| (a - b).to_f64() < 0.0) {
                        best = Some((a, report.iterations));
                    }
                }
                Err(e) => last_err = Some(e),
            }
        }
        match best {
            Some((a, iterations)) => Ok(sample(eta, (a - self.action).to_f64(), true, iterations, z.len())),
            None => Err(last_err
                .map(BarrierError::from)
                .unwrap_or_else(|| BarrierError::Bracket("no interior pin".into()))),
        }
    }
}

fn v_min_everywhere(h: &GeneratingFunction, v_min: f64) -> bool {
    let period = h.period();
    (0..1024).all(|k| h.potential_value(period * k as f64 / 1024.0) - v_min <= ZERO_FLOOR)
}

/// `P_{0+}(η) = K(η) - K` with both actions on the identical window.
pub fn peierls_zero_plus(h: &GeneratingFunction, eta: f64, tol: f64) -> Result<f64, BarrierError> {
    Ok(ZeroPlusBarrier::new(h, tol)?.sample(h, eta, tol)?.value)
}

// ---------------------------------------------------------------------------
// profiles and certificates

enum Sampler {
    ZeroPlus(ZeroPlusBarrier),
    Rational(RationalBarrier),
}

impl Sampler {
    fn new(h: &GeneratingFunction, symbol: RotationSymbol, tol: f64) -> Result<Self, BarrierError> {
        match symbol {
            RotationSymbol::Irrational(w) => Err(BarrierError::Unsupported(format!(
                "irrational symbol {w}: pass rational convergents instead"
            ))),
            RotationSymbol::RationalPlus { p: 0, q: 1 } => Ok(Sampler::ZeroPlus(ZeroPlusBarrier::new(h, tol)?)),
            other => {
                let (p, q, sign) = other.parts().unwrap();
                Ok(Sampler::Rational(RationalBarrier::new(h, p, q, sign, tol)?))
            }
        }
    }

    fn sample(&self, h: &GeneratingFunction, xi: f64, tol: f64) -> Result<BarrierSample, BarrierError> {
        match self {
            Sampler::ZeroPlus(z) => z.sample(h, xi, tol),
            Sampler::Rational(r) => r.sample(h, xi, tol),
        }
    }
}

/// Barrier samples at `ξ_k = k/grid`, `k < grid`; failed samples are flagged.
pub fn barrier_profile(
    h: &GeneratingFunction,
    symbol: RotationSymbol,
    grid: usize,
    tol: f64,
) -> Result<BarrierProfile, BarrierError> {
    if grid == 0 {
        return Err(BarrierError::Unsupported("grid must be >= 1".into()));
    }
    let sampler = Sampler::new(h, symbol, tol)?;
    let samples = (0..grid)
        .into_par_iter()
        .map(|k| {
            let xi = k as f64 / grid as f64;
            sampler.sample(h, xi, tol).unwrap_or(BarrierSample {
                xi,
                value: f64::NAN,
                converged: false,
                iterations: 0,
                window: 0,
            })
        })
        .collect();
    Ok(BarrierProfile { symbol, samples, tol })
}

/// "destroyed" iff some converged sample exceeds `10 tol`.
pub fn destruction_certificate(
    h: &GeneratingFunction,
    symbol: RotationSymbol,
    grid: usize,
    tol: f64,
) -> Result<Certificate, BarrierError> {
    let profile = barrier_profile(h, symbol, grid, tol)?;
    let threshold = 10.0 * tol;
    let (max_barrier, argmax) = profile.max().map_or((f64::NAN, f64::NAN), |s| (s.value, s.xi));
    let verdict = if max_barrier > threshold {
        Verdict::Destroyed
    } else {
        Verdict::Inconclusive
    };
    Ok(Certificate {
        verdict,
        symbol,
        max_barrier,
        argmax,
        threshold,
        failed_samples: profile.samples.iter().filter(|s| !s.converged).count(),
        profile,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModulusRow {
    pub q: usize,
    /// `P_{0/1+}(η)` by box minimization for `Q = 1`, `P_{1/Q}(η)` otherwise.
    pub rational: f64,
    pub zero_plus: f64,
    pub difference: f64,
}

/// `|P_{1/Q} - P_{0+}|(η)` along `Q_list`.
pub fn modulus_experiment(
    h: &GeneratingFunction,
    eta: f64,
    q_list: &[usize],
    tol: f64,
) -> Result<Vec<ModulusRow>, BarrierError> {
    if q_list.windows(2).any(|w| w[1] <= w[0]) {
        return Err(BarrierError::Unsupported("Q list must be increasing".into()));
    }
    let zero_plus = peierls_zero_plus(h, eta, tol)?;
    q_list
        .par_iter()
        .map(|&q| {
            let rational = if q == 1 {
                peierls_rational(h, 0, 1, Some(Sign::Plus), eta, tol)?
            } else {
                peierls_rational(h, 1, q, None, eta, tol)?
            };
            Ok(ModulusRow {
                q,
                rational,
                zero_plus,
                difference: (rational - zero_plus).abs(),
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LowerBound {
    pub n: u32,
    pub eta: f64,
    pub barrier: f64,
    /// `v_{n,η}(η)`.
    pub bump_peak: f64,
    pub margin: f64,
    pub holds: bool,
}

/// Places the bump with `gap_search` on the `h̄_n` heteroclinic, then checks
/// `P_{0+}^{h_n}(η) ≥ v_{n,η}(η)` for `h_n = h_0 + u_n + v_{n,η}`.
pub fn lower_bound_check(params: &PerturbationParams, tol: f64) -> Result<LowerBound, BarrierError> {
    let hbar = make_family(params, Variant::CosineOnly)?;
    let (z, _) = minimize_heteroclinic(&hbar, Sign::Plus, tol)?;
    let eta = gap_search(&z, params)?;
    let hn = make_family(params, Variant::FullShifted { eta })?;
    let barrier = peierls_zero_plus(&hn, eta, tol)?;
    let bump_peak = eval_v_shifted(params, eta, eta);
    Ok(LowerBound {
        n: params.n,
        eta,
        barrier,
        bump_peak,
        margin: barrier - bump_peak,
        holds: barrier >= bump_peak,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::variational::DEFAULT_TOL;

    fn params(n: u32) -> PerturbationParams {
        PerturbationParams::new(2.0, 1.0, 1.0, n).unwrap()
    }

    #[test]
    fn box_solution_respects_clamps() {
        // G is increasing on [0.1, 0.2] for h̄_4, so the lower clamp is active
        let h = make_family(&params(4), Variant::CosineOnly).unwrap();
        let lo = [0.0, 0.1, 1.0];
        let hi = [0.0, 0.2, 1.0];
        let reference = [0.0, 0.5, 1.0];
        let s = box_minimize(&h, &lo, &hi, &[(0, 0.0)], &reference, DEFAULT_TOL).unwrap();
        assert!(s.converged);
        assert!(s.x[1] >= lo[1] && s.x[1] <= hi[1]);
        assert_eq!(s.x[1], lo[1]);
    }

    fn hbar(n: u32) -> GeneratingFunction {
        make_family(&params(n), Variant::CosineOnly).unwrap()
    }

    #[test]
    fn integrable_barriers_vanish() {
        let h0 = GeneratingFunction::integrable();
        for (p, q, sign) in [(1, 3, None), (1, 2, Some(Sign::Plus)), (0, 1, Some(Sign::Plus))] {
            for xi in [0.0, 0.13, 0.5, 0.77] {
                let v = peierls_rational(&h0, p, q, sign, xi, DEFAULT_TOL).unwrap();
                assert!(v.abs() <= 1e-8, "{p}/{q} {sign:?} xi={xi} v={v}");
            }
        }
        assert_eq!(peierls_zero_plus(&h0, 0.4, DEFAULT_TOL).unwrap(), 0.0);
    }

    #[test]
    fn fixed_point_has_zero_barrier() {
        let h = hbar(4);
        assert_eq!(peierls_rational(&h, 0, 1, None, 0.0, DEFAULT_TOL).unwrap(), 0.0);
        assert_eq!(peierls_rational(&h, 0, 1, Some(Sign::Plus), 0.0, DEFAULT_TOL).unwrap(), 0.0);
    }

    #[test]
    fn cross_method_at_half() {
        let h = hbar(4);
        let a = peierls_rational(&h, 0, 1, Some(Sign::Plus), 0.5, DEFAULT_TOL).unwrap();
        let b = peierls_zero_plus(&h, 0.5, DEFAULT_TOL).unwrap();
        assert!(a > 0.0);
        assert!((a - b).abs() < 1e-6, "a={a} b={b}");
    }

    #[test]
    fn symmetric_potential_symmetric_barrier() {
        let h = hbar(4);
        let zp = ZeroPlusBarrier::new(&h, DEFAULT_TOL).unwrap();
        for eta in [0.2, 0.31, 0.45] {
            let a = zp.sample(&h, eta, DEFAULT_TOL).unwrap().value;
            let b = zp.sample(&h, 1.0 - eta, DEFAULT_TOL).unwrap().value;
            assert!((a - b).abs() < 1e-8, "eta={eta} {a} {b}");
        }
    }

    #[test]
    fn profile_shape() {
        let prof = barrier_profile(&hbar(4), RotationSymbol::RationalPlus { p: 0, q: 1 }, 16, DEFAULT_TOL).unwrap();
        assert!(prof.samples.iter().all(|s| s.converged));
        assert!(prof.min_value() >= -1e-9);
        assert_eq!(prof.samples[0].value, 0.0);
        let m = prof.max().unwrap();
        assert!((m.xi - 0.5).abs() <= 0.125, "argmax {}", m.xi);
        let single = barrier_profile(&hbar(4), RotationSymbol::Rational { p: 1, q: 2 }, 1, DEFAULT_TOL).unwrap();
        assert_eq!(single.samples.len(), 1);
    }

    #[test]
    fn certificates() {
        let h0 = GeneratingFunction::integrable();
        let c = destruction_certificate(&h0, RotationSymbol::RationalPlus { p: 0, q: 1 }, 8, DEFAULT_TOL).unwrap();
        assert_eq!(c.verdict, Verdict::Inconclusive);
        let hn = make_family(&params(4), Variant::Full).unwrap();
        for tol in [DEFAULT_TOL, DEFAULT_TOL / 2.0] {
            let c = destruction_certificate(&hn, RotationSymbol::RationalPlus { p: 0, q: 1 }, 8, tol).unwrap();
            assert_eq!(c.verdict, Verdict::Destroyed);
        }
        assert!(barrier_profile(&h0, RotationSymbol::Irrational(0.6), 4, DEFAULT_TOL).is_err());
    }

    #[test]
    fn barrier_vanishes_towards_minimizer() {
        let h = hbar(4);
        let rb = RationalBarrier::new(&h, 1, 2, None, DEFAULT_TOL).unwrap();
        let x0 = rb.periodic_minimizer().values[0];
        let x0 = x0 - x0.floor();
        let vals: Vec<f64> = [0.1, 0.01, 0.001]
            .iter()
            .map(|d| rb.sample(&h, x0 + d, DEFAULT_TOL).unwrap().value)
            .collect();
        assert!(vals[0] > vals[1] && vals[1] > vals[2] && vals[2] >= -1e-12, "{vals:?}");
    }

    #[test]
    fn clamped_solution_stays_in_box() {
        let h = hbar(4);
        let rb = RationalBarrier::new(&h, 1, 3, None, DEFAULT_TOL).unwrap();
        let br = rb.bracket(0.3).unwrap();
        assert!(br.xi_minus <= 0.3 && 0.3 < br.xi_plus);
        for i in 0..3 {
            assert!(br.lower.values[i] <= br.upper.values[i]);
        }
        assert!(rb.sample(&h, 0.3, DEFAULT_TOL).unwrap().value > 0.0);
    }
}
