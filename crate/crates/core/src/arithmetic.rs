//! Rotation-number arithmetic: continued fractions, convergents, witnesses of
//! `μ`-approximation, Liouville partial sums, and the exponent budget that
//! links `α`, `μ`, the amplitude exponent `a`, and the topology `C^r`.
//!
//! Convergents of quadratic surds are generated with exact integer arithmetic
//! so that witness checks stay meaningful at large `q`; approximation errors
//! `|qω - p|` are evaluated without cancellation through the conjugate.

use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_integer::{Integer, Roots};
use num_traits::{One, Signed, ToPrimitive, Zero};
use thiserror::Error;

/// Default continued-fraction depth for plain `f64` inputs.
pub const DEFAULT_FLOAT_DEPTH: usize = 12;

/// Largest denominator a double expansion may close on and still be called rational.
const RATIONAL_DENOMINATOR_CAP: f64 = 1e6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ArithmeticError {
    #[error("working precision exhausted after {0} partial quotients")]
    PrecisionExhausted(usize),
    #[error("omega must lie in (0, 1), got {0}")]
    OutOfRange(f64),
    #[error("invalid rotation number spec `{0}`")]
    InvalidSpec(String),
    #[error("quadratic surd needs a non-square radicand and nonzero denominator")]
    DegenerateSurd,
    #[error("liouville samples support 1..=4 terms, got {0}")]
    TooManyTerms(usize),
    #[error("parameters give a non-positive amplitude exponent a = {0}")]
    NonPositiveExponent(f64),
}

/// A rotation number, stored symbolically when possible.
#[derive(Debug, Clone, PartialEq)]
pub enum Omega {
    /// `(a + b√d)/c` with `d` not a perfect square.
    Surd { a: i64, b: i64, d: u64, c: i64 },
    /// `Σ_{k≥1} 10^{-k!}`.
    Liouville,
    /// A bare double; only shallow expansions are trustworthy.
    Float(f64),
}

impl Omega {
    /// `(√5 - 1)/2`.
    pub fn golden_mean() -> Self {
        Omega::Surd { a: -1, b: 1, d: 5, c: 2 }
    }

    /// `√2 - 1`.
    pub fn sqrt2_minus_one() -> Self {
        Omega::Surd { a: -1, b: 1, d: 2, c: 1 }
    }

    pub fn value(&self) -> f64 {
        match *self {
            Omega::Surd { a, b, d, c } => (a as f64 + b as f64 * (d as f64).sqrt()) / c as f64,
            Omega::Liouville => (1..=4).map(|k| 10f64.powi(-(factorial(k) as i32))).sum(),
            Omega::Float(x) => x,
        }
    }
}

impl FromStr for Omega {
    type Err = ArithmeticError;

    /// Accepts `golden`, `sqrt2-1`, `liouville`, `surd:a,b,d,c`, or a decimal.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        match s {
            "golden" | "golden-mean" => return Ok(Omega::golden_mean()),
            "sqrt2-1" => return Ok(Omega::sqrt2_minus_one()),
            "liouville" => return Ok(Omega::Liouville),
            _ => {}
        }
        if let Some(rest) = s.strip_prefix("surd:") {
            let parts: Vec<i64> = rest
                .split(',')
                .map(|p| p.trim().parse::<i64>())
                .collect::<Result<_, _>>()
                .map_err(|_| ArithmeticError::InvalidSpec(s.to_string()))?;
            if parts.len() != 4 || parts[2] < 0 {
                return Err(ArithmeticError::InvalidSpec(s.to_string()));
            }
            return Ok(Omega::Surd {
                a: parts[0],
                b: parts[1],
                d: parts[2] as u64,
                c: parts[3],
            });
        }
        s.parse::<f64>()
            .map(Omega::Float)
            .map_err(|_| ArithmeticError::InvalidSpec(s.to_string()))
    }
}

impl fmt::Display for Omega {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Omega::Surd { a: -1, b: 1, d: 5, c: 2 } => write!(f, "golden"),
            Omega::Surd { a: -1, b: 1, d: 2, c: 1 } => write!(f, "sqrt2-1"),
            Omega::Surd { a, b, d, c } => write!(f, "surd:{a},{b},{d},{c}"),
            Omega::Liouville => write!(f, "liouville"),
            Omega::Float(x) => write!(f, "{x}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContinuedFraction {
    /// Partial quotients `a_1, a_2, ...` (the integer part is dropped).
    pub quotients: Vec<u64>,
    /// The expansion ended exactly: the input is rational.
    pub terminated: bool,
}

/// Regular continued fraction of a double in `(0, 1)`, tracking the
/// propagated rounding error and refusing to emit quotients it cannot trust.
pub fn continued_fraction(omega: f64, depth: usize) -> Result<ContinuedFraction, ArithmeticError> {
    if !(omega > 0.0 && omega < 1.0) {
        return Err(ArithmeticError::OutOfRange(omega));
    }
    let mut quotients = Vec::with_capacity(depth);
    let mut x = omega;
    let mut err = f64::EPSILON * omega;
    while quotients.len() < depth {
        let y = 1.0 / x;
        let err_y = err / (x * x) + f64::EPSILON * y;
        let a = y.floor();
        let frac = y - a;
        if frac == 0.0 && err_y < 0.5 {
            quotients.push(a as u64);
            return Ok(ContinuedFraction {
                quotients,
                terminated: true,
            });
        }
        if frac <= err_y || 1.0 - frac <= err_y || a >= 2f64.powi(52) {
            // Either the input is a small-denominator rational or the digits ran out.
            let mut closing = quotients.clone();
            closing.push(y.round() as u64);
            if let Some((p, q)) = convergents_from_quotients(&closing).pop() {
                let (p, q) = (p.to_f64().unwrap(), q.to_f64().unwrap());
                if q <= RATIONAL_DENOMINATOR_CAP && (p / q - omega).abs() <= 4.0 * f64::EPSILON * omega {
                    return Ok(ContinuedFraction {
                        quotients: closing,
                        terminated: true,
                    });
                }
            }
            return Err(ArithmeticError::PrecisionExhausted(quotients.len()));
        }
        quotients.push(a as u64);
        x = frac;
        err = err_y;
    }
    Ok(ContinuedFraction {
        quotients,
        terminated: false,
    })
}

/// Exact expansion of `(a + b√d)/c` (the integer part is dropped).
pub fn surd_continued_fraction(a: i64, b: i64, d: u64, c: i64, depth: usize) -> Result<Vec<u64>, ArithmeticError> {
    let root = d.sqrt();
    if c == 0 || b == 0 || root * root == d {
        return Err(ArithmeticError::DegenerateSurd);
    }
    // normalise to (P + √D)/Q with Q | D - P²
    let (mut p, mut q, big_d) = {
        let (a, b, c) = if b < 0 { (-a, -b, -c) } else { (a, b, c) };
        let mut p = BigInt::from(a);
        let mut q = BigInt::from(c);
        let mut big_d = BigInt::from(b) * BigInt::from(b) * BigInt::from(d);
        if !(&big_d - &p * &p).is_multiple_of(&q) {
            let qa = q.abs();
            p *= &qa;
            big_d *= &q * &q;
            q *= &qa;
        }
        (p, q, big_d)
    };
    let s = big_d.sqrt();
    let mut out = Vec::with_capacity(depth + 1);
    while out.len() < depth + 1 {
        let a_k = if q.is_positive() {
            (&p + &s).div_floor(&q)
        } else {
            (&p + &s + BigInt::one()).div_floor(&q)
        };
        out.push(a_k.clone());
        p = &a_k * &q - &p;
        q = (&big_d - &p * &p) / &q;
    }
    out.remove(0);
    out.into_iter()
        .map(|v| v.to_u64().ok_or(ArithmeticError::DegenerateSurd))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Convergent {
    /// Index in the convergent sequence (`k = 1` is `1/a_1`).
    pub k: usize,
    pub p: BigInt,
    pub q: BigInt,
    /// `|qω - p|`, possibly underflowed to zero for Liouville witnesses.
    pub error: f64,
    /// `log10 |qω - p|`, valid even where `error` underflows.
    pub log10_error: f64,
}

impl Convergent {
    pub fn q_f64(&self) -> f64 {
        self.q.to_f64().unwrap_or(f64::INFINITY)
    }

    pub fn log10_q(&self) -> f64 {
        big_log10(&self.q)
    }
}

fn big_log10(v: &BigInt) -> f64 {
    let digits = v.abs().to_string();
    let lead: f64 = digits[..digits.len().min(17)].parse().unwrap_or(0.0);
    lead.log10() + (digits.len() - digits.len().min(17)) as f64
}

fn factorial(k: u32) -> u64 {
    (1..=k as u64).product()
}

fn convergents_from_quotients(quotients: &[u64]) -> Vec<(BigInt, BigInt)> {
    let (mut p_prev, mut q_prev) = (BigInt::one(), BigInt::zero());
    let (mut p, mut q) = (BigInt::zero(), BigInt::one());
    let mut out = Vec::with_capacity(quotients.len());
    for &a in quotients {
        let a = BigInt::from(a);
        let p_next = &a * &p + &p_prev;
        let q_next = &a * &q + &q_prev;
        p_prev = std::mem::replace(&mut p, p_next);
        q_prev = std::mem::replace(&mut q, q_next);
        out.push((p.clone(), q.clone()));
    }
    out
}

/// `|qω - p|` for `ω = (a + b√d)/c` through `|s + t√d| = |s² - t²d| / |s - t√d|`.
fn surd_error(a: i64, b: i64, d: u64, c: i64, p: &BigInt, q: &BigInt) -> (f64, f64) {
    let s = q * BigInt::from(a) - p * BigInt::from(c);
    let t = q * BigInt::from(b);
    let numerator = (&s * &s - &t * &t * BigInt::from(d)).abs();
    let sf = s.to_f64().unwrap_or(f64::INFINITY);
    let tf = t.to_f64().unwrap_or(f64::INFINITY);
    let conj = (sf - tf * (d as f64).sqrt()).abs();
    let log10 = big_log10(&numerator) - conj.log10() - (c.abs() as f64).log10();
    (10f64.powf(log10), log10)
}

fn liouville_witness(k: u32) -> Convergent {
    let kf = factorial(k);
    let q = BigInt::from(10).pow(kf as u32);
    let mut p = BigInt::zero();
    for j in 1..=k {
        p += BigInt::from(10).pow((kf - factorial(j)) as u32);
    }
    // q Σ_{j>k} 10^{-j!} = 10^{k! - (k+1)!} (1 + 10^{(k+1)! - (k+2)!} + ...)
    let lead = kf as f64 - factorial(k + 1) as f64;
    let next = factorial(k + 1) as f64 - factorial(k + 2) as f64;
    let log10_error = lead + (1.0 + 10f64.powf(next)).log10();
    Convergent {
        k: k as usize,
        p,
        q,
        error: 10f64.powf(log10_error),
        log10_error,
    }
}

/// The first `count` convergents `p_k/q_k`, `k >= 1`.
pub fn convergents(omega: &Omega, count: usize) -> Result<Vec<Convergent>, ArithmeticError> {
    match *omega {
        Omega::Surd { a, b, d, c } => {
            let quotients = surd_continued_fraction(a, b, d, c, count)?;
            Ok(convergents_from_quotients(&quotients)
                .into_iter()
                .enumerate()
                .map(|(i, (p, q))| {
                    let (error, log10_error) = surd_error(a, b, d, c, &p, &q);
                    Convergent {
                        k: i + 1,
                        p,
                        q,
                        error,
                        log10_error,
                    }
                })
                .collect())
        }
        Omega::Liouville => {
            if count > 4 {
                return Err(ArithmeticError::TooManyTerms(count));
            }
            Ok((1..=count as u32).map(liouville_witness).collect())
        }
        Omega::Float(x) => {
            let cf = continued_fraction(x, count)?;
            Ok(convergents_from_quotients(&cf.quotients)
                .into_iter()
                .enumerate()
                .map(|(i, (p, q))| {
                    let error = (q.to_f64().unwrap() * x - p.to_f64().unwrap()).abs();
                    Convergent {
                        k: i + 1,
                        p,
                        q,
                        error,
                        log10_error: error.log10(),
                    }
                })
                .collect())
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Witness {
    pub convergent: Convergent,
    /// `log10(C q^{-1-μ})`.
    pub log10_bound: f64,
    pub qualifies: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ApproximationClass {
    pub mu: f64,
    pub c: f64,
    /// Every candidate examined, qualifying or not.
    pub candidates: Vec<Witness>,
}

impl ApproximationClass {
    pub fn witnesses(&self) -> impl Iterator<Item = &Witness> {
        self.candidates.iter().filter(|w| w.qualifies)
    }

    pub fn qualifying(&self) -> usize {
        self.witnesses().count()
    }
}

/// Checks `|qω - p| < C q^{-1-μ}` on the first `count` convergents.
pub fn mu_witness_check(omega: &Omega, mu: f64, c: f64, count: usize) -> Result<ApproximationClass, ArithmeticError> {
    let candidates = convergents(omega, count)?
        .into_iter()
        .map(|conv| {
            let log10_bound = c.log10() - (1.0 + mu) * conv.log10_q();
            Witness {
                qualifies: conv.log10_error < log10_bound,
                log10_bound,
                convergent: conv,
            }
        })
        .collect();
    Ok(ApproximationClass { mu, c, candidates })
}

#[derive(Debug, Clone, PartialEq)]
pub struct LiouvilleSample {
    /// Partial sum `Σ_{k ≤ terms} 10^{-k!}`.
    pub value: f64,
    /// Upper bound on `ω - value`.
    pub tail_bound: f64,
    pub witnesses: Vec<Convergent>,
}

/// Partial sum of the Liouville constant with its factorial-index witnesses.
pub fn liouville_sample(terms: usize) -> Result<LiouvilleSample, ArithmeticError> {
    if terms == 0 || terms > 4 {
        return Err(ArithmeticError::TooManyTerms(terms));
    }
    let value = (1..=terms as u32).map(|k| 10f64.powi(-(factorial(k) as i32))).sum();
    let tail_bound = 2.0 * 10f64.powf(-(factorial(terms as u32 + 1) as f64));
    Ok(LiouvilleSample {
        value,
        tail_bound,
        witnesses: (1..=terms as u32).map(liouville_witness).collect(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Budget {
    pub alpha: f64,
    pub mu: f64,
    pub delta: f64,
    /// `2δ(α-1)/α`.
    pub epsilon: f64,
    /// Amplitude exponent `(2 - 2/α)(1+μ) - ε`.
    pub a: f64,
    /// Topology exponent `a + 2 - ε`.
    pub r: f64,
    /// Supremum `2 + (2 - 2/α)(1+μ)` of admissible `r`.
    pub r_sup: f64,
}

/// Exponent choice that makes the destruction pipeline close.
pub fn pipeline_budget(alpha: f64, mu: f64, delta: f64) -> Result<Budget, ArithmeticError> {
    let gain = (2.0 - 2.0 / alpha) * (1.0 + mu);
    let epsilon = 2.0 * delta * (alpha - 1.0) / alpha;
    let a = gain - epsilon;
    if !(a > 0.0) {
        return Err(ArithmeticError::NonPositiveExponent(a));
    }
    Ok(Budget {
        alpha,
        mu,
        delta,
        epsilon,
        a,
        r: a + 2.0 - epsilon,
        r_sup: 2.0 + gain,
    })
}
