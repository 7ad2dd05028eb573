//! Acceptance criteria, one line each. Runs as a plain binary so the verdict
//! lines always reach the test log; exits nonzero if any criterion fails.

mod common;

use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use twistlab_core::barrier::{barrier_profile, lower_bound_check, modulus_experiment};
use twistlab_core::gevrey::{perturbation_cr_decay, verify_cauchy_bound, DEFAULT_GRID};
use twistlab_core::harness::{cmd_destroy, middle_step_check, ExperimentConfig};
use twistlab_core::model::{eval_u, eval_v, make_family, rescaled_family, PerturbationParams, Variant};
use twistlab_core::variational::{
    action, action_gradient, minimize_heteroclinic, minimize_periodic, residual, Configuration, RotationSymbol,
    Sign, DEFAULT_TOL,
};

use common::*;

type Outcome = (bool, String);

fn params(a: f64, n: u32) -> PerturbationParams {
    PerturbationParams::new(2.0, 1.0, a, n).unwrap()
}

fn within(t: Instant, limit: Duration) -> (bool, f64) {
    let e = t.elapsed();
    (e < limit, e.as_secs_f64())
}

fn integrable_baseline() -> Outcome {
    let t = Instant::now();
    let h = make_family(&params(1.0, 1), Variant::Integrable).unwrap();
    let mut worst: f64 = 0.0;
    let mut failed = 0;
    for s in ["0+", "1/2+", "1/2-", "1/3"] {
        let symbol: RotationSymbol = s.parse().unwrap();
        match barrier_profile(&h, symbol, 32, DEFAULT_TOL) {
            Ok(p) => {
                for x in &p.samples {
                    if !x.converged {
                        failed += 1;
                    }
                    worst = worst.max(x.value.abs());
                }
            }
            Err(_) => failed += 32,
        }
    }
    let (fast, secs) = within(t, Duration::from_secs(10));
    (
        failed == 0 && worst <= 1e-8 && fast,
        format!("max |P| = {worst:e} over 4 symbols x 32 points, failed samples {failed}, {secs:.2}s"),
    )
}

fn gradient_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst: f64 = 0.0;
    for trial in 0..50 {
        let n = rng.gen_range(1..=8);
        let h = make_family(&params(1.0, n), Variant::Full).unwrap();
        let config = if trial % 2 == 0 {
            let q = rng.gen_range(1..=5usize);
            let p = 1;
            let vals: Vec<f64> = (0..q).map(|i| (i as f64 + rng.gen_range(-0.3..0.3)) / q as f64).collect();
            Configuration::periodic(p, q, vals).unwrap()
        } else {
            let len = rng.gen_range(3..12);
            let mut x = rng.gen_range(-1.0..1.0);
            let vals = (0..len)
                .map(|_| {
                    x += rng.gen_range(0.0..0.6);
                    x
                })
                .collect();
            Configuration::fixed(vals)
        };
        let g = action_gradient(&h, &config);
        let f = |v: &[f64]| {
            let mut c = config.clone();
            c.values = v.to_vec();
            action(&h, &c)
        };
        let scale = g.iter().fold(1e-3f64, |m, v| m.max(v.abs()));
        // windows report interior coordinates only
        let offset = usize::from(trial % 2 == 1);
        for (k, gi) in g.iter().enumerate() {
            let fd = central_difference(&f, &config.values, k + offset, 1e-5);
            worst = worst.max((gi - fd).abs() / scale);
        }
    }
    (worst < 1e-6, format!("worst relative gradient error {worst:e} over 50 configurations"))
}

fn brute_force_equivalence() -> Outcome {
    let t = Instant::now();
    let h = make_family(&params(1.0, 4), Variant::CosineOnly).unwrap();
    let mut worst: f64 = 0.0;
    let mut action_gap: f64 = 0.0;
    for (p, q) in [(0i64, 1usize), (1, 2), (1, 3)] {
        let grid = brute_force_periodic(&h, p, q, 1002);
        let (polished, _) = newton_polish(&h, p, &grid);
        let (solved, _) = minimize_periodic(&h, p, q, None, DEFAULT_TOL).unwrap();
        let a = orbit_mod_one(&polished);
        let mirror: Vec<f64> = polished.iter().map(|v| -v).collect();
        let b = orbit_mod_one(&solved.values);
        let d = circle_set_distance(&a, &b).min(circle_set_distance(&orbit_mod_one(&mirror), &b));
        worst = worst.max(d);
        action_gap = action_gap.max((periodic_action(&h, p, &polished) - periodic_action(&h, p, &solved.values)).abs());
    }
    let (fast, secs) = within(t, Duration::from_secs(60));
    (
        worst <= 1e-6 && fast,
        format!("max coordinate distance {worst:e}, action gap {action_gap:e}, {secs:.2}s"),
    )
}

fn heteroclinics() -> Vec<(u32, Configuration)> {
    [4u32, 8, 16]
        .iter()
        .map(|&n| {
            let h = make_family(&params(1.0, n), Variant::CosineOnly).unwrap();
            (n, minimize_heteroclinic(&h, Sign::Plus, DEFAULT_TOL).unwrap().0)
        })
        .collect()
}

fn middle_steps(orbits: &[(u32, Configuration)]) -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for (n, z) in orbits {
        let bound = 0.5 * (*n as f64).powf(-0.5);
        // literal reading: steps starting inside [1/4, 3/4]
        let inside: Vec<f64> = z
            .values
            .windows(2)
            .filter(|w| (0.25..=0.75).contains(&w[0]))
            .map(|w| w[1] - w[0])
            .collect();
        let (smallest, checked) = middle_step_check(z);
        ok &= inside.iter().all(|s| *s >= bound) && checked > 0 && smallest >= bound;
        parts.push(format!("n={n}: {} inside, {checked} crossing, min {smallest:.4} vs {bound:.4}", inside.len()));
    }
    (ok, parts.join("; "))
}

fn uwith(orbits: &[(u32, Configuration)]) -> Outcome {
    let mut worst = f64::INFINITY;
    for (n, z) in orbits {
        let p = params(1.0, *n);
        for w in z.values.windows(3) {
            worst = worst.min(w[2] - w[0] - 2.0 * eval_u(&p, w[1]).sqrt());
        }
    }
    (worst >= -1e-10, format!("min of x_(i+1) - x_(i-1) - 2 sqrt(u_n(x_i)) = {worst:e}"))
}

fn lower_bound() -> Outcome {
    let t = Instant::now();
    let mut ok = true;
    let mut parts = Vec::new();
    for n in [3u32, 4, 6] {
        match lower_bound_check(&params(1.0, n), DEFAULT_TOL) {
            Ok(lb) => {
                ok &= lb.barrier >= lb.bump_peak;
                parts.push(format!("n={n}: P={:.6e} >= v={:.3e} at eta={}", lb.barrier, lb.bump_peak, lb.eta));
            }
            Err(e) => {
                ok = false;
                parts.push(format!("n={n}: {e}"));
            }
        }
    }
    let (fast, secs) = within(t, Duration::from_secs(120));
    (ok && fast, format!("{}; {secs:.2}s", parts.join("; ")))
}

fn max_value_law() -> Outcome {
    let mut worst: f64 = 0.0;
    for n in [1u32, 2, 4] {
        let p = params(1.0, n);
        let m = 1usize << 16;
        let observed = (0..m).map(|k| eval_v(&p, k as f64 / m as f64)).fold(0.0, f64::max);
        let expect = bump_peak_closed_form(2.0, 1.0, 1.0, n);
        worst = worst.max(((observed - expect) / expect).abs());
    }
    (worst <= 1e-6, format!("worst relative error {worst:e} for n in 1,2,4"))
}

fn cr_decay() -> Outcome {
    let base = params(1.0, 1);
    let scaled: Vec<f64> = [2u32, 4, 8, 16]
        .iter()
        .map(|&q| perturbation_cr_decay(q, &base, 2.0, DEFAULT_GRID).unwrap().scaled)
        .collect();
    let hi = scaled.iter().cloned().fold(f64::MIN, f64::max);
    let lo = scaled.iter().cloned().fold(f64::MAX, f64::min);
    (hi / lo < 2.0, format!("q^(a+2-r)||Q_q||_C2 in [{lo:.6}, {hi:.6}], ratio {:.6}", hi / lo))
}

/// Stationary windows of `h_q`, divided by `q`, must be stationary for `h_0 + Q_q`.
fn conjugacy() -> Outcome {
    let mut worst: f64 = 0.0;
    for q in [2u32, 3] {
        let p = params(1.0, q);
        let hn = make_family(&p, Variant::Full).unwrap();
        let scaled_family = rescaled_family(&params(1.0, 1), q).unwrap();
        let (periodic, _) = minimize_periodic(&hn, 1, 2, None, DEFAULT_TOL).unwrap();
        let periodic_window: Vec<f64> = (-4..=4).map(|i| periodic.value_at(i).unwrap()).collect();
        let (hetero, _) = minimize_heteroclinic(&hn, Sign::Plus, DEFAULT_TOL).unwrap();
        for window in [periodic_window, hetero.values.clone()] {
            let before = residual(&hn, &Configuration::fixed(window.clone()));
            let scaled = Configuration::fixed(window.iter().map(|z| z / q as f64).collect());
            let after = residual(&scaled_family, &scaled);
            worst = worst.max(after).max(before / q as f64);
        }
    }
    (worst < 1e-10, format!("worst scaled residual {worst:e} for q in 2,3, periodic and heteroclinic"))
}

fn modulus() -> Outcome {
    let p = params(1.0, 4);
    let h = make_family(&p, Variant::Full).unwrap();
    let eta = lower_bound_check(&p, DEFAULT_TOL).map(|lb| lb.eta).unwrap_or(0.5);
    let rows = match modulus_experiment(&h, eta, &[2, 4, 8, 16, 32], DEFAULT_TOL) {
        Ok(r) => r,
        Err(e) => return (false, format!("error: {e}")),
    };
    let d: Vec<f64> = rows.iter().map(|r| r.difference).collect();
    // below this the two barriers agree to the last double bit
    let floor = 4.0 * f64::EPSILON * rows[0].zero_plus.abs();
    let monotone = d.windows(2).all(|w| w[1] < w[0] || (w[0] <= floor && w[1] <= floor));
    let last = *d.last().unwrap();
    let listing: Vec<String> = rows.iter().map(|r| format!("Q={}: {:.3e}", r.q, r.difference)).collect();
    (
        monotone && last < 1e-4,
        format!("{} (resolution floor {floor:.1e})", listing.join(", ")),
    )
}

fn cauchy() -> Outcome {
    let mut min_margin = f64::INFINITY;
    let mut ok = true;
    for alpha in [1.5, 2.0, 3.0] {
        for k in 0..=6 {
            match verify_cauchy_bound(alpha, 1.0, k, DEFAULT_GRID) {
                Ok(c) => {
                    ok &= c.holds && c.margin >= 1.0;
                    min_margin = min_margin.min(c.margin);
                }
                Err(_) => ok = false,
            }
        }
    }
    (ok, format!("k <= 6, alpha in 1.5,2,3: min margin {min_margin:.4}"))
}

fn destroy_pipeline() -> Outcome {
    let t = Instant::now();
    let cfg = ExperimentConfig::parse("omega=golden\nalpha=2\nmu=0\ndelta=0.05\n").unwrap();
    let report = match cmd_destroy(&cfg) {
        Ok(r) => r,
        Err(e) => return (false, format!("error: {e}")),
    };
    let decay = report.check("norm decay").map_or(false, |c| c.passed);
    let certs = report.check("certificates").map_or(false, |c| c.passed);
    let (fast, secs) = within(t, Duration::from_secs(600));
    let a = report.parameters.get("effective.a").cloned().unwrap_or_default();
    let r = report.parameters.get("effective.r").cloned().unwrap_or_default();
    (
        decay && certs && report.passed && fast,
        format!("a={a}, r={r}: norms decreasing={decay}, all destroyed={certs}, {secs:.2}s"),
    )
}

fn main() -> ExitCode {
    let orbits = heteroclinics();
    let criteria: Vec<(&str, Box<dyn Fn() -> Outcome>)> = vec![
        ("integrable baseline", Box::new(integrable_baseline)),
        ("gradient oracle", Box::new(gradient_oracle)),
        ("brute-force equivalence", Box::new(brute_force_equivalence)),
        ("middle step bound", Box::new(|| middle_steps(&orbits))),
        ("step inequality uwith", Box::new(|| uwith(&orbits))),
        ("barrier lower bound", Box::new(lower_bound)),
        ("bump max-value law", Box::new(max_value_law)),
        ("C^r decay chain", Box::new(cr_decay)),
        ("rescaling conjugacy", Box::new(conjugacy)),
        ("rational to 0+ continuity", Box::new(modulus)),
        ("Cauchy bound", Box::new(cauchy)),
        ("destroy pipeline", Box::new(destroy_pipeline)),
    ];
    let mut failures = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let (ok, detail) = run();
        failures += usize::from(!ok);
        println!("criterion {:>2} {} {name}: {detail}", i + 1, if ok { "PASS" } else { "FAIL" });
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failures, criteria.len());
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
