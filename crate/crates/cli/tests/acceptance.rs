//! Acceptance criteria, one pass/fail line each. Runs without the test
//! harness so the lines always print, in order.

#[path = "../../core/tests/common/mod.rs"]
mod common;

use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use common::{folded_oracle, normal_set, random_instance, simpson};
use nmwl::families::reduce_two_sample;
use nmwl::mcverify::{complexity_convergence, misleading_evidence_rate};
use nmwl::nmwl::{nmwl_log_density, parametric_complexity_exact, profile_log_wlik};
use nmwl::noncentral_t::{folded_log_pdf, folded_log_pdf_quadrature};
use nmwl::weights::single_observation_weights;
use nmwl::wlik::{weighted_mle, OptimConfig};
use nmwl::{Comparisons, Error, EvidenceEngine, Family, Mode, Observation, Settings, SimulationConfig, Space, WeightScheme, Weights};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

const SCHOOLS: &str = include_str!("../data/schools.csv");
const SEED: u64 = 20240611;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: impl Into<String>) -> Outcome {
    Outcome { passed, detail: detail.into() }
}

fn schools() -> Comparisons {
    let (mut t, mut s) = (Vec::new(), Vec::new());
    for line in SCHOOLS.lines().skip(1).filter(|l| !l.trim().is_empty()) {
        let f: Vec<&str> = line.split(',').collect();
        t.push(f[1].parse::<f64>().unwrap());
        s.push(f[2].parse::<f64>().unwrap());
    }
    normal_set(&t, &s)
}

fn nmwl_cli(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_nmwl")).args(args).output().expect("run nmwl")
}

fn bits(nats: f64) -> f64 {
    nats / std::f64::consts::LN_2
}

/// Exact NMWL regret on the bundled normal data over 101 quantile-spaced
/// focus values, against the log-complexity at the observed data.
fn regret_constancy() -> Outcome {
    let start = Instant::now();
    let obs = schools();
    let s = Settings::default();
    let space = Space::Punctured { excluded: 0.0 };
    let mut worst: f64 = 0.0;
    for i in 0..obs.len() {
        let row = single_observation_weights(i, 1, obs.len()).unwrap();
        let c0 = parametric_complexity_exact(i, &space, &row, &obs, &s).unwrap().log_complexity;
        let theta_hat = common::weighted_mle(&row, &obs);
        let fam = obs.observations()[i].family;
        for j in 0..101 {
            let t = fam.quantile(theta_hat, (j as f64 + 0.5) / 101.0).unwrap();
            let moved = obs.with_statistic(i, t).unwrap();
            let profile = profile_log_wlik(i, t, &space, &row, &moved, &s.optim).unwrap();
            let predictive = nmwl_log_density(i, &space, &row, &moved, Mode::Exact, &s).unwrap();
            worst = worst.max(bits((profile - predictive - c0).abs()));
        }
    }
    let took = start.elapsed();
    outcome(
        worst <= 1e-6 && took < Duration::from_secs(30),
        format!("max |regret - log C| = {worst:.3e} bits over 8 x 101 points in {took:.1?}"),
    )
}

fn closed_form_oracles() -> Outcome {
    let obs = schools();
    let numeric = Settings { optim: OptimConfig { normal_closed_form: false, ..OptimConfig::default() }, ..Settings::default() };
    let (mut singleton, mut full): (f64, f64) = (0.0, 0.0);
    for i in 0..obs.len() {
        let row = single_observation_weights(i, 1, obs.len()).unwrap();
        for theta0 in [0.0, 4.0] {
            let got = nmwl_log_density(i, &Space::Singleton { theta0 }, &row, &obs, Mode::Exact, &Settings::default()).unwrap();
            let want = common::nmwl_singleton(obs.observations()[i].statistic, theta0, &row, &obs);
            singleton = singleton.max((got - want).exp_m1().abs());
        }
        for s in [Settings::default(), numeric] {
            let got = parametric_complexity_exact(i, &Space::FullLine, &row, &obs, &s).unwrap().log_complexity;
            full = full.max((got - common::log_complexity_full_line(&row, &obs)).exp_m1().abs());
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut mle: f64 = 0.0;
    for _ in 0..100 {
        let (row, o) = random_instance(&mut rng);
        let got = weighted_mle(&Space::FullLine, &row, &o, &numeric.optim).unwrap().theta_hat;
        mle = mle.max((got - common::weighted_mle(&row, &o)).abs());
    }
    outcome(
        singleton <= 1e-8 && full <= 1e-6 && mle <= 1e-8,
        format!("singleton density rel {singleton:.1e}, full-line complexity rel {full:.1e}, weighted MLE {mle:.1e} on 100 instances"),
    )
}

fn divergence_detection() -> Outcome {
    let obs = schools();
    let s = Settings::default();
    let spaces = [Space::FullLine, Space::Punctured { excluded: 0.0 }, Space::HalfLineNonneg, Space::Singleton { theta0: 0.0 }];
    let mut divergent = 0;
    let mut finite = 0;
    let mut total = 0;
    for i in 0..obs.len() {
        let mut w = vec![0.0; obs.len()];
        w[i] = 1.0;
        let unweighted = Weights::from_parts(i, w, None, None).unwrap();
        for space in &spaces[..3] {
            total += 1;
            if matches!(parametric_complexity_exact(i, space, &unweighted, &obs, &s), Err(Error::DivergentComplexity { .. })) {
                divergent += 1;
            }
        }
        let row = single_observation_weights(i, 1, obs.len()).unwrap();
        for space in &spaces {
            if parametric_complexity_exact(i, space, &row, &obs, &s).map(|c| c.log_complexity.is_finite()).unwrap_or(false) {
                finite += 1;
            }
        }
    }
    outcome(
        divergent == total && finite == obs.len() * spaces.len(),
        format!("unweighted: {divergent}/{total} divergent; single-observation weights: {finite}/{} finite", obs.len() * spaces.len()),
    )
}

fn misleading_bound() -> Outcome {
    let start = Instant::now();
    let base = |family, n_comparisons, weight_scheme| SimulationConfig {
        family,
        theta_true: 0.0,
        n_comparisons,
        replicates: 10_000,
        seed: SEED,
        weight_scheme,
        thresholds: vec![10.0, 100.0],
        mode: Mode::Exact,
        settings: Settings::default(),
    };
    let runs = [
        ("normal sites N=8", base(Family::normal(1.0).unwrap(), 8, WeightScheme::Sites), Space::Punctured { excluded: 0.0 }),
        ("folded t m=n=10 null", base(Family::folded_t(10, 10).unwrap(), 1, WeightScheme::Null), Space::HalfLineNonneg),
    ];
    let mut passed = true;
    let mut parts = Vec::new();
    for (name, cfg, alt) in runs {
        let r = misleading_evidence_rate(&cfg, 0.0, &alt).unwrap();
        passed &= r.passed;
        let rates: Vec<String> = r.thresholds.iter().map(|t| format!("k={}: {:.4} <= {:.4}", t.k, t.rate, t.limit)).collect();
        parts.push(format!("{name} [{}]", rates.join(", ")));
    }
    let took = start.elapsed();
    outcome(passed && took < Duration::from_secs(600), format!("{} in {took:.1?}", parts.join("; ")))
}

fn approximation_convergence() -> Outcome {
    let cfg = SimulationConfig {
        family: Family::normal(1.0).unwrap(),
        theta_true: 0.0,
        n_comparisons: 5,
        replicates: 1000,
        seed: SEED,
        weight_scheme: WeightScheme::Sites,
        thresholds: vec![1.0],
        mode: Mode::Exact,
        settings: Settings::default(),
    };
    let r = complexity_convergence(&cfg, &[5, 50]).unwrap();
    let g = &r.complexity_gaps;
    outcome(
        r.passed,
        format!("mean gap {:.4} (SE {:.4}) at N=5 -> {:.4} (SE {:.4}) nats at N=50", g[0].mean_gap, g[0].se, g[1].mean_gap, g[1].se),
    )
}

/// The full `schools` run through the binary, both schemes and both modes.
fn schools_reproduction() -> Outcome {
    let start = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("schools");
    let o = nmwl_cli(&["schools", "--out", out.to_str().unwrap()]);
    let took = start.elapsed();
    if o.status.code() != Some(0) {
        return outcome(false, format!("exit {:?}: {}", o.status.code(), String::from_utf8_lossy(&o.stderr)));
    }
    let v: serde_json::Value = serde_json::from_slice(&std::fs::read(out.join("report.json")).unwrap()).unwrap();
    let mut worst: f64 = 0.0;
    let mut agree = 0;
    let mut rows = 0;
    for p in v["paired"].as_array().unwrap() {
        rows += 1;
        worst = worst.max((p["di_bits_a"].as_f64().unwrap() - p["di_bits_b"].as_f64().unwrap()).abs());
        agree += usize::from(p["grades_agree"].as_bool().unwrap());
    }
    outcome(
        rows == 16 && worst < 0.5 && agree == rows && took < Duration::from_secs(60),
        format!("max |DI sites - DI null| = {worst:.3} bits, grades agree {agree}/{rows} (8 sites x exact, approx) in {took:.1?}"),
    )
}

/// Twenty synthetic two-sample features, ten null and ten with effects
/// spread up to 2.5, reduced and analysed under both schemes.
fn synthetic_grades(m: usize, rng: &mut ChaCha8Rng) -> (usize, Vec<String>) {
    let features: Vec<Observation> = (0..20)
        .map(|j| {
            let theta = if j < 10 { 0.0 } else { 0.25 * (j - 9) as f64 };
            let case: Vec<f64> = (0..m).map(|_| theta + rng.sample::<f64, _>(StandardNormal)).collect();
            let control: Vec<f64> = (0..m).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
            reduce_two_sample(format!("p{j:02}"), &case, &control).unwrap()
        })
        .collect();
    let obs = Comparisons::new(features).unwrap();
    let engine = EvidenceEngine::new(Settings::default()).unwrap();
    let (alt, null) = (Space::HalfLineNonneg, Space::Singleton { theta0: 0.0 });
    let a = engine.analyze(&obs, &WeightScheme::Sites, &alt, &null, 0.0, Mode::Exact);
    let b = engine.analyze(&obs, &WeightScheme::Null, &alt, &null, 0.0, Mode::Exact);
    let mut differing = Vec::new();
    for (x, y) in a.into_iter().zip(b) {
        let (x, y) = (x.unwrap(), y.unwrap());
        if (x.grade, x.favors) != (y.grade, y.favors) {
            differing.push(format!("{} ({:.2} vs {:.2} bits)", x.id, x.di_bits, y.di_bits));
        }
    }
    (20 - differing.len(), differing)
}

fn proteomics_analogue() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let (agree10, differ10) = synthetic_grades(10, &mut rng);
    let (_, differ2) = synthetic_grades(2, &mut rng);
    let took = start.elapsed();
    let list = |d: &[String]| if d.is_empty() { "none".to_string() } else { d.join(", ") };
    outcome(
        agree10 * 100 >= 95 * 20 && differ2.len() <= 3,
        format!(
            "m=n=10: {agree10}/20 grades agree [{}]; m=n=2: {} of 20 differ [{}] in {took:.1?}",
            list(&differ10),
            differ2.len(),
            list(&differ2)
        ),
    )
}

/// Total mass of the exact NMWL over the focus support.
fn total_mass(i: usize, space: &Space, row: &Weights, obs: &Comparisons, s: &Settings) -> f64 {
    let c = parametric_complexity_exact(i, space, row, obs, s).unwrap().log_complexity;
    let dens = |t: f64| (profile_log_wlik(i, t, space, row, &obs.with_statistic(i, t).unwrap(), &s.optim).unwrap() - c).exp();
    match obs.observations()[i].family {
        Family::NormalKnownScale { scale } => {
            let mid = obs.observations()[i].statistic;
            simpson(dens, mid - 60.0 * scale, mid + 60.0 * scale, 4000)
        }
        Family::FoldedNoncentralT { .. } => {
            simpson(|u: f64| if u >= 1.0 { 0.0 } else { dens(u / (1.0 - u)) / (1.0 - u).powi(2) }, 0.0, 1.0, 4000)
        }
    }
}

fn density_validity() -> Outcome {
    let s = Settings::default();
    let mut worst_mass: f64 = 0.0;
    let mut checked = 0;
    let obs = schools();
    let normal_spaces = [
        Space::FullLine,
        Space::Punctured { excluded: 0.0 },
        Space::HalfLineNonneg,
        Space::Singleton { theta0: 0.0 },
        Space::BoundedInterval { lo: -5.0, hi: 10.0 },
    ];
    for i in 0..obs.len() {
        let row = single_observation_weights(i, 1, obs.len()).unwrap();
        for space in &normal_spaces {
            worst_mass = worst_mass.max((total_mass(i, space, &row, &obs, &s) - 1.0).abs());
            checked += 1;
        }
    }
    let fam = Family::folded_t(4, 4).unwrap();
    let folded =
        Comparisons::new([0.4, 1.9, 3.2].iter().enumerate().map(|(k, &t)| Observation::new(format!("f{k}"), t, fam).unwrap()).collect())
            .unwrap();
    for i in 0..folded.len() {
        let row = single_observation_weights(i, 8, folded.len()).unwrap();
        for space in [Space::HalfLineNonneg, Space::Singleton { theta0: 0.0 }, Space::BoundedInterval { lo: 0.0, hi: 1.5 }] {
            worst_mass = worst_mass.max((total_mass(i, &space, &row, &folded, &s) - 1.0).abs());
            checked += 1;
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut worst_rel: f64 = 0.0;
    for _ in 0..20 {
        let df = rng.random_range(2..=40) as f64;
        let ncp: f64 = rng.random_range(0.0..6.0);
        let t: f64 = rng.random_range(0.05..8.0);
        let want = folded_oracle(t, df, ncp);
        for got in [folded_log_pdf(t, df, ncp).unwrap(), folded_log_pdf_quadrature(t, df, ncp).unwrap()] {
            worst_rel = worst_rel.max((got.exp() - want).abs() / want);
        }
    }
    outcome(
        worst_mass <= 1e-6 && worst_rel <= 1e-8,
        format!("max |mass - 1| = {worst_mass:.1e} over {checked} densities; folded t rel error {worst_rel:.1e} on 20 triples"),
    )
}

fn determinism() -> Outcome {
    let runs: Vec<Vec<u8>> = [["1"], ["4"], ["4"]]
        .iter()
        .map(|w| nmwl_cli(&["simulate", "--seed", "7", "--workers", w[0]]))
        .map(|o| if o.status.code() == Some(0) { o.stdout } else { Vec::new() })
        .collect();
    let same = !runs[0].is_empty() && runs.iter().all(|r| *r == runs[0]);
    outcome(same, format!("3 runs (workers 1, 4, 4), {} bytes each, identical: {same}", runs[0].len()))
}

fn main() -> ExitCode {
    type Criterion = (&'static str, fn() -> Outcome);
    let criteria: [Criterion; 9] = [
        ("regret constancy", regret_constancy),
        ("closed-form oracles", closed_form_oracles),
        ("divergence detection", divergence_detection),
        ("misleading-evidence bound", misleading_bound),
        ("approximation convergence", approximation_convergence),
        ("eight-sites reproduction", schools_reproduction),
        ("synthetic folded-t grades", proteomics_analogue),
        ("density validity", density_validity),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (k, (name, run)) in criteria.iter().enumerate() {
        let r = run();
        failed += usize::from(!r.passed);
        println!("criterion {} {name}: {} ({})", k + 1, if r.passed { "PASS" } else { "FAIL" }, r.detail);
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} of {} criteria failed", criteria.len());
        ExitCode::FAILURE
    }
}
