//! Experiment pipelines behind the `twistlab` binary.
//!
//! A run reads a plain `key=value` config, writes one output directory with a
//! verbatim `config.txt`, one CSV per artifact, and a versioned `report.json`.
//! Work items fan out over rayon; every table is assembled in input order, so
//! CSV bodies do not depend on the worker count.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::arithmetic::{continued_fraction, mu_witness_check, pipeline_budget, Omega};
use crate::barrier::{connecting_minimizer, destruction_certificate, lower_bound_check, Certificate};
use crate::gevrey::{
    cr_norm, derivative_sup, gevrey_norm, perturbation_cr_decay, verify_cauchy_bound, DEFAULT_GRID,
};
use crate::model::{
    make_family, rescaled_family, CosineWell, FunctionHandle, GeneratingFunction, GevreyBump, PerturbationParams,
    Variant,
};
use crate::numfmt::fmt_num;
use crate::variational::{minimize_periodic, Configuration, RotationSymbol, SolveReport, DEFAULT_TOL};

pub const SCHEMA: u32 = 1;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config error: {0}")]
    Config(String),
    #[error("cannot write {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl HarnessError {
    /// `2` for usage and plumbing errors.
    pub fn exit_code(&self) -> i32 {
        2
    }
}

fn config_err(msg: impl Into<String>) -> HarnessError {
    HarnessError::Config(msg.into())
}

// ---------------------------------------------------------------------------
// config

const KEYS: &[&str] = &[
    "alpha", "lambda", "a", "n", "family", "symbols", "q_list", "omega", "mu", "delta", "c", "r", "r_list",
    "convergents", "grid", "norm_grid", "k_max", "big_l", "tol", "out",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    Integrable,
    Cosine,
    Full,
}

impl Family {
    pub fn as_str(&self) -> &'static str {
        match self {
            Family::Integrable => "integrable",
            Family::Cosine => "cosine",
            Family::Full => "full",
        }
    }

    pub fn variant(&self) -> Variant {
        match self {
            Family::Integrable => Variant::Integrable,
            Family::Cosine => Variant::CosineOnly,
            Family::Full => Variant::Full,
        }
    }
}

/// Parsed run parameters. `source` is the text exactly as read; everything
/// else is the effective value, default or not.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    source: String,
    explicit: BTreeSet<String>,
    pub alpha: f64,
    pub lambda: f64,
    pub a: f64,
    pub n_list: Vec<u32>,
    pub family: Family,
    pub symbols: Vec<RotationSymbol>,
    /// Overrides the convergent denominators in `destroy`.
    pub q_list: Option<Vec<u32>>,
    pub omega: String,
    pub mu: f64,
    pub delta: f64,
    /// Constant of the `μ`-approximation witness check.
    pub c: f64,
    /// Smoothness of the decay chain in `destroy`; the budget value when unset.
    pub r: Option<f64>,
    /// Integer orders of the `C^r` table in `norms`.
    pub r_list: Vec<usize>,
    pub convergents: usize,
    /// Barrier profile points.
    pub grid: usize,
    pub norm_grid: usize,
    pub k_max: usize,
    pub big_l: f64,
    pub tol: f64,
    pub out: Option<String>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            source: String::new(),
            explicit: BTreeSet::new(),
            alpha: 2.0,
            lambda: 1.0,
            a: 1.0,
            n_list: vec![4],
            family: Family::Full,
            symbols: vec![RotationSymbol::RationalPlus { p: 0, q: 1 }],
            q_list: None,
            omega: "golden".into(),
            mu: 0.0,
            delta: 0.05,
            c: 1.0,
            r: None,
            r_list: vec![0, 1, 2],
            convergents: 9,
            grid: 32,
            norm_grid: DEFAULT_GRID,
            k_max: 6,
            big_l: 0.5,
            tol: DEFAULT_TOL,
            out: None,
        }
    }
}

fn parse_f64(key: &str, v: &str) -> Result<f64, HarnessError> {
    v.parse::<f64>()
        .ok()
        .filter(|x| x.is_finite())
        .ok_or_else(|| config_err(format!("{key}: expected a finite number, got `{v}`")))
}

fn parse_uint<T: std::str::FromStr>(key: &str, v: &str) -> Result<T, HarnessError> {
    v.parse::<T>()
        .map_err(|_| config_err(format!("{key}: expected a non-negative integer, got `{v}`")))
}

fn parse_list<T>(key: &str, v: &str, f: impl Fn(&str, &str) -> Result<T, HarnessError>) -> Result<Vec<T>, HarnessError> {
    let items: Vec<T> = v
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| f(key, s))
        .collect::<Result<_, _>>()?;
    if items.is_empty() {
        return Err(config_err(format!("{key}: empty list")));
    }
    Ok(items)
}

impl ExperimentConfig {
    /// Parses `key=value` lines; blank lines and `#` comments are skipped.
    pub fn parse(text: &str) -> Result<Self, HarnessError> {
        let mut cfg = ExperimentConfig {
            source: text.to_string(),
            ..Default::default()
        };
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| config_err(format!("line {}: expected key=value, got `{line}`", lineno + 1)))?;
            let (key, value) = (key.trim(), value.trim());
            if !KEYS.contains(&key) {
                return Err(config_err(format!("line {}: unknown key `{key}`", lineno + 1)));
            }
            if !cfg.explicit.insert(key.to_string()) {
                return Err(config_err(format!("line {}: duplicate key `{key}`", lineno + 1)));
            }
            cfg.set(key, value)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn set(&mut self, key: &str, v: &str) -> Result<(), HarnessError> {
        match key {
            "alpha" => self.alpha = parse_f64(key, v)?,
            "lambda" => self.lambda = parse_f64(key, v)?,
            "a" => self.a = parse_f64(key, v)?,
            "n" => self.n_list = parse_list(key, v, parse_uint::<u32>)?,
            "family" => {
                self.family = match v {
                    "integrable" => Family::Integrable,
                    "cosine" => Family::Cosine,
                    "full" => Family::Full,
                    _ => return Err(config_err(format!("family: expected integrable|cosine|full, got `{v}`"))),
                }
            }
            "symbols" => {
                self.symbols = parse_list(key, v, |k, s| {
                    let sym: RotationSymbol = s.parse().map_err(|e| config_err(format!("{k}: {e}")))?;
                    if matches!(sym, RotationSymbol::Irrational(_)) {
                        return Err(config_err(format!("{k}: irrational symbol `{s}` is out of numerical scope")));
                    }
                    Ok(sym)
                })?
            }
            "q_list" => self.q_list = Some(parse_list(key, v, parse_uint::<u32>)?),
            "omega" => self.omega = v.to_string(),
            "mu" => self.mu = parse_f64(key, v)?,
            "delta" => self.delta = parse_f64(key, v)?,
            "c" => self.c = parse_f64(key, v)?,
            "r" => self.r = Some(parse_f64(key, v)?),
            "r_list" => self.r_list = parse_list(key, v, parse_uint::<usize>)?,
            "convergents" => self.convergents = parse_uint(key, v)?,
            "grid" => self.grid = parse_uint(key, v)?,
            "norm_grid" => self.norm_grid = parse_uint(key, v)?,
            "k_max" => self.k_max = parse_uint(key, v)?,
            "big_l" => self.big_l = parse_f64(key, v)?,
            "tol" => self.tol = parse_f64(key, v)?,
            "out" => self.out = Some(v.to_string()),
            _ => unreachable!("key list checked by caller"),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        if !(self.alpha > 1.0) {
            return Err(config_err(format!("alpha must be > 1, got {}", self.alpha)));
        }
        if !(self.lambda > 0.0) {
            return Err(config_err(format!("lambda must be > 0, got {}", self.lambda)));
        }
        if !(self.a > 0.0) {
            return Err(config_err(format!("a must be > 0, got {}", self.a)));
        }
        if self.n_list.contains(&0) {
            return Err(config_err("n entries must be >= 1"));
        }
        if let Some(q) = &self.q_list {
            if q.contains(&0) {
                return Err(config_err("q_list entries must be >= 1 (q=0 is not a period)"));
            }
        }
        if !(self.tol > 0.0) {
            return Err(config_err(format!("tol must be > 0, got {}", self.tol)));
        }
        if self.grid == 0 || self.norm_grid < 16 {
            return Err(config_err("grid must be >= 1 and norm_grid >= 16"));
        }
        if self.convergents == 0 {
            return Err(config_err("convergents must be >= 1"));
        }
        if !(self.c > 0.0) || !(self.big_l > 0.0) {
            return Err(config_err("c and big_l must be > 0"));
        }
        Ok(())
    }

    /// The config text exactly as it was read.
    pub fn to_text(&self) -> &str {
        &self.source
    }

    pub fn is_explicit(&self, key: &str) -> bool {
        self.explicit.contains(key)
    }

    /// Command-line override of the tolerance.
    pub fn set_tol(&mut self, tol: f64) -> Result<(), HarnessError> {
        self.tol = tol;
        self.validate()
    }

    pub fn params(&self, n: u32) -> Result<PerturbationParams, HarnessError> {
        PerturbationParams::new(self.alpha, self.lambda, self.a, n).map_err(|e| config_err(e.to_string()))
    }

    /// Every effective parameter, defaults included.
    pub fn effective(&self) -> BTreeMap<String, String> {
        let join = |v: Vec<String>| v.join(",");
        let mut m = BTreeMap::new();
        m.insert("alpha".into(), fmt_num(self.alpha));
        m.insert("lambda".into(), fmt_num(self.lambda));
        m.insert("a".into(), fmt_num(self.a));
        m.insert("n".into(), join(self.n_list.iter().map(|n| n.to_string()).collect()));
        m.insert("family".into(), self.family.as_str().into());
        m.insert("symbols".into(), join(self.symbols.iter().map(|s| s.to_string()).collect()));
        m.insert(
            "q_list".into(),
            self.q_list
                .as_ref()
                .map_or("convergents".into(), |q| join(q.iter().map(|v| v.to_string()).collect())),
        );
        m.insert("omega".into(), self.omega.clone());
        m.insert("mu".into(), fmt_num(self.mu));
        m.insert("delta".into(), fmt_num(self.delta));
        m.insert("c".into(), fmt_num(self.c));
        m.insert("r".into(), self.r.map_or("budget".into(), fmt_num));
        m.insert("r_list".into(), join(self.r_list.iter().map(|r| r.to_string()).collect()));
        m.insert("convergents".into(), self.convergents.to_string());
        m.insert("grid".into(), self.grid.to_string());
        m.insert("norm_grid".into(), self.norm_grid.to_string());
        m.insert("k_max".into(), self.k_max.to_string());
        m.insert("big_l".into(), fmt_num(self.big_l));
        m.insert("tol".into(), fmt_num(self.tol));
        m.insert("out".into(), self.out.clone().unwrap_or_else(|| "none".into()));
        m
    }
}

// ---------------------------------------------------------------------------
// report

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct Check {
    pub name: String,
    /// Producing `module::operation`.
    pub source: String,
    pub tol: f64,
    pub passed: bool,
    pub measured: BTreeMap<String, f64>,
    pub detail: String,
}

impl Check {
    fn new(name: impl Into<String>, source: &str, tol: f64) -> Self {
        Check {
            name: name.into(),
            source: source.into(),
            tol,
            passed: true,
            measured: BTreeMap::new(),
            detail: String::new(),
        }
    }

    fn measure(mut self, key: &str, value: f64) -> Self {
        self.measured.insert(key.into(), value);
        self
    }

    fn verdict(mut self, passed: bool, detail: impl Into<String>) -> Self {
        self.passed = passed;
        self.detail = detail.into();
        self
    }

    fn failed(name: impl Into<String>, source: &str, tol: f64, err: impl std::fmt::Display) -> Self {
        Check::new(name, source, tol).verdict(false, format!("error: {err}"))
    }
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct Report {
    pub schema: u32,
    pub command: String,
    pub parameters: BTreeMap<String, String>,
    pub flags: Vec<String>,
    pub checks: Vec<Check>,
    /// Seconds per stage.
    pub runtimes: BTreeMap<String, f64>,
    pub artifacts: Vec<String>,
    pub passed: bool,
}

impl Report {
    fn new(command: &str, cfg: &ExperimentConfig) -> Self {
        Report {
            schema: SCHEMA,
            command: command.into(),
            parameters: cfg.effective(),
            flags: Vec::new(),
            checks: Vec::new(),
            runtimes: BTreeMap::new(),
            artifacts: Vec::new(),
            passed: true,
        }
    }

    /// `0` when every check passed, `1` otherwise.
    pub fn exit_code(&self) -> i32 {
        if self.passed {
            0
        } else {
            1
        }
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    fn finish(&mut self) {
        self.passed = self.checks.iter().all(|c| c.passed);
    }
}

/// Output directory of one run; the only writer of its files.
struct RunDir {
    root: Option<PathBuf>,
}

impl RunDir {
    fn open(cfg: &ExperimentConfig) -> Result<Self, HarnessError> {
        let root = cfg.out.as_ref().map(PathBuf::from);
        if let Some(dir) = &root {
            fs::create_dir_all(dir).map_err(|source| HarnessError::Io {
                path: dir.clone(),
                source,
            })?;
        }
        let run = RunDir { root };
        run.write_raw("config.txt", cfg.to_text())?;
        Ok(run)
    }

    fn write_raw(&self, name: &str, body: &str) -> Result<(), HarnessError> {
        if let Some(dir) = &self.root {
            let path = dir.join(name);
            fs::write(&path, body).map_err(|source| HarnessError::Io { path, source })?;
        }
        Ok(())
    }

    fn write(&self, report: &mut Report, name: &str, body: &str) -> Result<(), HarnessError> {
        self.write_raw(name, body)?;
        if let Some(dir) = &self.root {
            report.artifacts.push(dir.join(name).display().to_string());
        }
        Ok(())
    }

    fn finish(&self, report: &mut Report) -> Result<(), HarnessError> {
        report.finish();
        let json = serde_json::to_string_pretty(report).expect("report serializes");
        self.write_raw("report.json", &(json + "\n"))
    }
}

/// `1/3+` becomes `1_3p`, for file names.
fn symbol_tag(s: &RotationSymbol) -> String {
    s.to_string().replace('/', "_").replace('+', "p").replace('-', "m")
}

fn family_for(cfg: &ExperimentConfig, n: u32) -> Result<(PerturbationParams, GeneratingFunction), HarnessError> {
    let params = cfg.params(n)?;
    let h = make_family(&params, cfg.family.variant()).map_err(|e| config_err(e.to_string()))?;
    Ok((params, h))
}

/// The integrable family does not depend on `n`; solve it once.
fn effective_n_list(cfg: &ExperimentConfig) -> Vec<u32> {
    match cfg.family {
        Family::Integrable => vec![cfg.n_list[0]],
        _ => cfg.n_list.clone(),
    }
}

// ---------------------------------------------------------------------------
// orbit

/// Smallest step whose segment meets `[1/4, 3/4]`, and the number of such steps.
pub fn middle_step_check(config: &Configuration) -> (f64, usize) {
    let mut smallest = f64::INFINITY;
    let mut checked = 0;
    for w in config.values.windows(2) {
        if w[1] >= 0.25 && w[0] <= 0.75 {
            smallest = smallest.min(w[1] - w[0]);
            checked += 1;
        }
    }
    (smallest, checked)
}

fn solve_symbol(
    h: &GeneratingFunction,
    symbol: RotationSymbol,
    tol: f64,
) -> Result<(Configuration, SolveReport), String> {
    match symbol.parts() {
        Some((p, q, None)) => minimize_periodic(h, p, q, None, tol).map_err(|e| e.to_string()),
        Some((p, q, Some(sign))) => connecting_minimizer(h, p, q, sign, tol).map_err(|e| e.to_string()),
        None => Err("irrational symbols are out of numerical scope".into()),
    }
}

/// Solves every requested orbit and writes one configuration CSV each.
pub fn cmd_orbit(cfg: &ExperimentConfig) -> Result<Report, HarnessError> {
    let mut report = Report::new("orbit", cfg);
    let run = RunDir::open(cfg)?;
    let mut items = Vec::new();
    for n in effective_n_list(cfg) {
        let (params, h) = family_for(cfg, n)?;
        for &symbol in &cfg.symbols {
            items.push((n, params, h.clone(), symbol));
        }
    }
    let start = Instant::now();
    let solved: Vec<_> = items
        .par_iter()
        .map(|(_, _, h, symbol)| solve_symbol(h, *symbol, cfg.tol))
        .collect();
    report.runtimes.insert("solve".into(), start.elapsed().as_secs_f64());
    for ((n, _, h, symbol), result) in items.iter().zip(solved) {
        let label = format!("n={n} {symbol}");
        let source = if symbol.parts().is_some_and(|p| p.2.is_some()) {
            "variational::minimize_connecting"
        } else {
            "variational::minimize_periodic"
        };
        let (config, solve) = match result {
            Ok(v) => v,
            Err(e) => {
                report.checks.push(Check::failed(format!("solve {label}"), source, cfg.tol, e));
                continue;
            }
        };
        let file = format!("orbit_n{n}_{}.csv", symbol_tag(symbol));
        run.write(&mut report, &file, &config.to_csv(Some(&solve), &h.descriptor_block()))?;
        report.checks.push(
            Check::new(format!("solve {label}"), source, cfg.tol)
                .measure("residual", solve.residual)
                .measure("action", solve.action)
                .measure("window", solve.window as f64)
                .verdict(solve.residual <= cfg.tol && config.is_monotone(), format!("monotone={}", config.is_monotone())),
        );
        let heteroclinic = symbol.parts().is_some_and(|(p, q, s)| (p, q) == (0, 1) && s.is_some());
        if heteroclinic && cfg.family != Family::Integrable {
            let bound = 0.5 * (*n as f64).powf(-cfg.a / 2.0);
            let (smallest, checked) = middle_step_check(&config);
            report.checks.push(
                Check::new(format!("middle steps {label}"), "variational::minimize_heteroclinic", 0.0)
                    .measure("smallest_step", smallest)
                    .measure("bound", bound)
                    .measure("steps_checked", checked as f64)
                    .verdict(checked > 0 && smallest >= bound, "steps meeting [1/4,3/4] >= n^{-a/2}/2"),
            );
        }
    }
    run.finish(&mut report)?;
    Ok(report)
}

// ---------------------------------------------------------------------------
// barrier

fn certificate_row(prefix: &str, c: &Certificate) -> String {
    format!(
        "{prefix},{},{},{},{},{},{}\n",
        c.symbol,
        c.verdict.as_str(),
        fmt_num(c.max_barrier),
        fmt_num(c.argmax),
        fmt_num(c.threshold),
        c.failed_samples
    )
}

/// Barrier profiles, certificates, and for the full family at `0+` the
/// lower bound by the bump height.
pub fn cmd_barrier(cfg: &ExperimentConfig) -> Result<Report, HarnessError> {
    let mut report = Report::new("barrier", cfg);
    let run = RunDir::open(cfg)?;
    let mut certificates = String::from("n,symbol,verdict,max_barrier,argmax,threshold,failed_samples\n");
    let start = Instant::now();
    for n in effective_n_list(cfg) {
        let (params, h) = family_for(cfg, n)?;
        for &symbol in &cfg.symbols {
            let name = format!("certificate n={n} {symbol}");
            match destruction_certificate(&h, symbol, cfg.grid, cfg.tol) {
                Ok(c) => {
                    let file = format!("profile_n{n}_{}.csv", symbol_tag(&symbol));
                    run.write(&mut report, &file, &c.profile.to_csv())?;
                    certificates.push_str(&certificate_row(&n.to_string(), &c));
                    report.checks.push(
                        Check::new(name, "barrier::destruction_certificate", cfg.tol)
                            .measure("max_barrier", c.max_barrier)
                            .measure("argmax", c.argmax)
                            .measure("threshold", c.threshold)
                            .measure("failed_samples", c.failed_samples as f64)
                            .verdict(c.failed_samples == 0, c.verdict.as_str()),
                    );
                }
                Err(e) => report
                    .checks
                    .push(Check::failed(name, "barrier::destruction_certificate", cfg.tol, e)),
            }
            if cfg.family == Family::Full && symbol == (RotationSymbol::RationalPlus { p: 0, q: 1 }) {
                let name = format!("lower bound n={n}");
                match lower_bound_check(&params, cfg.tol) {
                    Ok(lb) => report.checks.push(
                        Check::new(name, "barrier::lower_bound_check", 0.0)
                            .measure("eta", lb.eta)
                            .measure("barrier", lb.barrier)
                            .measure("bump_peak", lb.bump_peak)
                            .measure("margin", lb.margin)
                            .verdict(lb.holds, "P_{0+}(eta) >= v_{n,eta}(eta)"),
                    ),
                    Err(e) => report.checks.push(Check::failed(name, "barrier::lower_bound_check", 0.0, e)),
                }
            }
        }
    }
    report.runtimes.insert("barrier".into(), start.elapsed().as_secs_f64());
    run.write(&mut report, "certificates.csv", &certificates)?;
    run.finish(&mut report)?;
    Ok(report)
}

// ---------------------------------------------------------------------------
// destroy

/// `Some((p, q))` when the omega text names a rational number.
fn rational_omega(spec: &str) -> Result<Option<(i64, i64)>, HarnessError> {
    if let Some((p, q)) = spec.split_once('/') {
        let p: i64 = p.trim().parse().map_err(|_| config_err(format!("omega: bad fraction `{spec}`")))?;
        let q: i64 = q.trim().parse().map_err(|_| config_err(format!("omega: bad fraction `{spec}`")))?;
        if q <= 0 {
            return Err(config_err(format!("omega: denominator must be >= 1 in `{spec}`")));
        }
        return Ok(Some((p, q)));
    }
    let omega: Omega = spec.parse().map_err(|e| config_err(format!("omega: {e}")))?;
    if let Omega::Float(x) = omega {
        if x.fract() == 0.0 {
            return Ok(Some((x as i64, 1)));
        }
        if let Ok(cf) = continued_fraction(x.fract().abs(), 64) {
            if cf.terminated {
                // fold [0; a_1, ..., a_k] from the back
                let (mut p, mut q) = (0i64, 1i64);
                for &a in cf.quotients.iter().rev() {
                    (p, q) = (q, a as i64 * q + p);
                }
                return Ok(Some((p + x.floor() as i64 * q, q)));
            }
        }
    }
    Ok(None)
}

/// The destruction pipeline along the convergent denominators of `ω`: `C^r`
/// decay of the rescaled perturbations and a `0+` certificate for each `h_q`.
pub fn cmd_destroy(cfg: &ExperimentConfig) -> Result<Report, HarnessError> {
    let mut report = Report::new("destroy", cfg);
    let run = RunDir::open(cfg)?;
    if let Some((p, q)) = rational_omega(&cfg.omega)? {
        report
            .flags
            .push(format!("rational: destroyed by analytic perturbation, out of numerical scope (omega={p}/{q})"));
        run.finish(&mut report)?;
        return Ok(report);
    }
    let omega: Omega = cfg.omega.parse().map_err(|e| config_err(format!("omega: {e}")))?;

    let budget = pipeline_budget(cfg.alpha, cfg.mu, cfg.delta).map_err(|e| config_err(format!("budget: {e}")))?;
    let a = if cfg.is_explicit("a") { cfg.a } else { budget.a };
    let r = cfg.r.unwrap_or(budget.r);
    for (k, v) in [
        ("budget.epsilon", budget.epsilon),
        ("budget.a", budget.a),
        ("budget.r", budget.r),
        ("budget.r_sup", budget.r_sup),
        ("effective.a", a),
        ("effective.r", r),
    ] {
        report.parameters.insert(k.into(), fmt_num(v));
    }
    let no_decay = r >= a + 2.0;
    if no_decay {
        report.flags.push(format!("no decay expected: r = {r} >= a + 2 = {}", a + 2.0));
    }

    let start = Instant::now();
    let class = mu_witness_check(&omega, cfg.mu, cfg.c, cfg.convergents);
    let q_list: Vec<u32> = match (&cfg.q_list, &class) {
        (Some(q), _) => q.clone(),
        (None, Ok(class)) => {
            let mut qs: Vec<u32> = class
                .candidates
                .iter()
                .filter_map(|w| u32::try_from(&w.convergent.q).ok())
                .collect();
            qs.dedup();
            qs
        }
        (None, Err(e)) => return Err(config_err(format!("omega: {e}"))),
    };
    match &class {
        Ok(class) => {
            let mut csv = String::from("k,p,q,error,bound,qualifies\n");
            for w in class.witnesses() {
                csv.push_str(&format!(
                    "{},{},{},{},{},{}\n",
                    w.convergent.k,
                    w.convergent.p,
                    w.convergent.q,
                    fmt_num(w.convergent.error),
                    fmt_num(10f64.powf(w.log10_bound)),
                    w.qualifies
                ));
            }
            run.write(&mut report, "witnesses.csv", &csv)?;
            report.checks.push(
                Check::new("witnesses", "arithmetic::mu_witness_check", 0.0)
                    .measure("candidates", class.candidates.len() as f64)
                    .measure("qualifying", class.qualifying() as f64)
                    .verdict(true, format!("|q omega - p| < c q^(-1-mu), c={}", cfg.c)),
            );
        }
        Err(e) => report
            .checks
            .push(Check::failed("witnesses", "arithmetic::mu_witness_check", 0.0, e)),
    }
    report.runtimes.insert("arithmetic".into(), start.elapsed().as_secs_f64());

    let base = PerturbationParams::new(cfg.alpha, cfg.lambda, a, 1).map_err(|e| config_err(e.to_string()))?;
    let start = Instant::now();
    let rows: Vec<_> = q_list
        .par_iter()
        .map(|&q| {
            let norm = perturbation_cr_decay(q, &base, r, cfg.norm_grid).map_err(|e| format!("norm q={q}: {e}"));
            let cert = make_family(&base.with_n(q), Variant::Full)
                .map_err(|e| e.to_string())
                .and_then(|h| {
                    destruction_certificate(&h, RotationSymbol::RationalPlus { p: 0, q: 1 }, cfg.grid, cfg.tol)
                        .map_err(|e| e.to_string())
                })
                .map_err(|e| format!("certificate q={q}: {e}"));
            (q, norm, cert)
        })
        .collect();
    report.runtimes.insert("pipeline".into(), start.elapsed().as_secs_f64());

    let mut norms_csv = String::from("q,r,norm,scaled\n");
    let mut cert_csv = String::from("q,symbol,verdict,max_barrier,argmax,threshold,failed_samples\n");
    let mut norms = Vec::new();
    let mut destroyed = 0;
    let mut stage_errors = Vec::new();
    for (q, norm, cert) in &rows {
        match norm {
            Ok(row) => {
                norms_csv.push_str(&format!("{q},{},{},{}\n", fmt_num(row.r), fmt_num(row.norm), fmt_num(row.scaled)));
                norms.push(row.norm);
            }
            Err(e) => stage_errors.push(format!("gevrey::perturbation_cr_decay: {e}")),
        }
        match cert {
            Ok(c) => {
                cert_csv.push_str(&certificate_row(&q.to_string(), c));
                destroyed += usize::from(c.verdict == crate::barrier::Verdict::Destroyed);
            }
            Err(e) => stage_errors.push(format!("barrier::destruction_certificate: {e}")),
        }
    }
    run.write(&mut report, "decay.csv", &norms_csv)?;
    run.write(&mut report, "certificates.csv", &cert_csv)?;

    let decreasing = norms.len() == q_list.len() && norms.windows(2).all(|w| w[1] < w[0]);
    let mut decay = Check::new("norm decay", "gevrey::perturbation_cr_decay", 0.0)
        .measure("r", r)
        .measure("a", a)
        .measure("exponent", r - a - 2.0);
    if let (Some(first), Some(last)) = (norms.first(), norms.last()) {
        decay = decay.measure("first", *first).measure("last", *last);
    }
    report.checks.push(if no_decay {
        decay.verdict(true, format!("not asserted (no decay expected); strictly decreasing={decreasing}"))
    } else {
        decay.verdict(decreasing, "||Q_q||_{C^r} strictly decreasing along q_list")
    });
    report.checks.push(
        Check::new("certificates", "barrier::destruction_certificate", cfg.tol)
            .measure("destroyed", destroyed as f64)
            .measure("total", q_list.len() as f64)
            .verdict(destroyed == q_list.len(), "every h_q certificate at 0+ reads destroyed"),
    );
    if !stage_errors.is_empty() {
        report
            .checks
            .push(Check::new("stages", "harness::cmd_destroy", 0.0).verdict(false, stage_errors.join("; ")));
    }
    run.finish(&mut report)?;
    Ok(report)
}

// ---------------------------------------------------------------------------
// norms

/// Derivative sup tables for `u_n`, `v_n`, `Q_n`, `C^r` norms, and Cauchy
/// bound rows for the flat factor.
pub fn cmd_norms(cfg: &ExperimentConfig) -> Result<Report, HarnessError> {
    let mut report = Report::new("norms", cfg);
    let run = RunDir::open(cfg)?;
    let grid = cfg.norm_grid;
    let start = Instant::now();

    let mut functions: Vec<(String, u32, FunctionHandle)> = Vec::new();
    for &n in &cfg.n_list {
        let params = cfg.params(n)?;
        functions.push((format!("u_{n}"), n, Arc::new(CosineWell { amplitude: params.amplitude() })));
        functions.push((format!("v_{n}"), n, Arc::new(GevreyBump::new(&params, 0.5))));
        let q = rescaled_family(&params, n).map_err(|e| config_err(e.to_string()))?;
        functions.push((format!("Q_{n}"), n, q.potential().clone()));
    }

    let tables: Vec<_> = functions
        .par_iter()
        .map(|(_, _, phi)| {
            let sups: Vec<_> = (0..=cfg.k_max).map(|k| derivative_sup(phi.as_ref(), k, grid)).collect();
            let tail = gevrey_norm(phi.as_ref(), cfg.alpha, cfg.big_l, cfg.k_max, grid).map(|g| g.tail_bound);
            let cr: Vec<_> = cfg.r_list.iter().map(|&r| cr_norm(phi.as_ref(), r, grid)).collect();
            (sups, tail, cr)
        })
        .collect();

    let mut norms_csv = String::from("function_id,k,sup,method,grid,tail_bound\n");
    let mut cr_csv = String::from("function_id,n,r,norm\n");
    let mut failed_rows = 0;
    let mut u_worst: f64 = 0.0;
    for ((id, n, _), (sups, tail, cr)) in functions.iter().zip(&tables) {
        let tail = tail.as_ref().map_or(f64::NAN, |t| *t);
        for (k, s) in sups.iter().enumerate() {
            match s {
                Ok(s) => {
                    norms_csv.push_str(&format!(
                        "{id},{k},{},{},{},{}\n",
                        fmt_num(s.sup_value),
                        s.method.label(),
                        s.grid_size,
                        fmt_num(tail)
                    ));
                    if id.starts_with("u_") {
                        let amp = (*n as f64).powf(-cfg.a);
                        let exact = if k == 0 { 2.0 * amp } else { (2.0 * std::f64::consts::PI).powi(k as i32) * amp };
                        u_worst = u_worst.max(((s.sup_value - exact) / exact).abs());
                    }
                }
                Err(e) => {
                    failed_rows += 1;
                    norms_csv.push_str(&format!("{id},{k},nan,failed: {},{grid},{}\n", e.to_string().replace(',', ";"), fmt_num(tail)));
                }
            }
        }
        for (&r, v) in cfg.r_list.iter().zip(cr) {
            match v {
                Ok(v) => cr_csv.push_str(&format!("{id},{n},{r},{}\n", fmt_num(*v))),
                Err(_) => {
                    failed_rows += 1;
                    cr_csv.push_str(&format!("{id},{n},{r},nan\n"));
                }
            }
        }
    }
    run.write(&mut report, "norms.csv", &norms_csv)?;
    run.write(&mut report, "cr_norms.csv", &cr_csv)?;
    report.checks.push(
        Check::new("u_n analytic sups", "gevrey::derivative_sup", 1e-6)
            .measure("worst_relative_error", u_worst)
            .verdict(u_worst <= 1e-6, "sup |u_n^(k)| = (2 pi)^k n^-a"),
    );
    report.checks.push(
        Check::new("extrapolation", "gevrey::derivative_sup", 0.0)
            .measure("failed_rows", failed_rows as f64)
            .verdict(failed_rows == 0, "rows marked failed in norms.csv / cr_norms.csv"),
    );

    let cauchy: Vec<_> = (0..=cfg.k_max)
        .into_par_iter()
        .map(|k| verify_cauchy_bound(cfg.alpha, cfg.lambda, k, grid))
        .collect();
    let mut cauchy_csv = String::from("alpha,lambda,k,observed_sup,argmax,bound,margin,holds\n");
    let mut all_hold = true;
    let mut min_margin = f64::INFINITY;
    for (k, c) in cauchy.iter().enumerate() {
        match c {
            Ok(c) => {
                cauchy_csv.push_str(&format!(
                    "{},{},{k},{},{},{},{},{}\n",
                    fmt_num(cfg.alpha),
                    fmt_num(cfg.lambda),
                    fmt_num(c.observed_sup),
                    fmt_num(c.argmax),
                    fmt_num(c.bound),
                    fmt_num(c.margin),
                    c.holds
                ));
                all_hold &= c.holds;
                min_margin = min_margin.min(c.margin);
            }
            Err(_) => {
                all_hold = false;
                cauchy_csv.push_str(&format!("{},{},{k},nan,nan,nan,nan,false\n", fmt_num(cfg.alpha), fmt_num(cfg.lambda)));
            }
        }
    }
    run.write(&mut report, "cauchy.csv", &cauchy_csv)?;
    report.checks.push(
        Check::new("cauchy bound", "gevrey::verify_cauchy_bound", 0.0)
            .measure("min_margin", min_margin)
            .verdict(all_hold, format!("k <= {}", cfg.k_max)),
    );
    report.runtimes.insert("norms".into(), start.elapsed().as_secs_f64());
    run.finish(&mut report)?;
    Ok(report)
}

/// Reads a config file, or the defaults when no path is given.
pub fn load_config(path: Option<&Path>) -> Result<ExperimentConfig, HarnessError> {
    match path {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| config_err(format!("cannot read {}: {e}", p.display())))?;
            ExperimentConfig::parse(&text)
        }
        None => Ok(ExperimentConfig::default()),
    }
}
