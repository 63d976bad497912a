mod common;

use common::normal_set;
use nmwl::evidence::mle_baseline;
use nmwl::mcverify::{binomial_se, complexity_convergence, misleading_evidence_rate, regret_sweep, regret_sweep_with, replicate_rng};
use nmwl::nmwl::{parametric_complexity_approx, parametric_complexity_exact};
use nmwl::weights::single_observation_weights;
use nmwl::{Family, Mode, Settings, SimulationConfig, Space, WeightScheme};
use rand::Rng;

fn normal_cfg(replicates: usize, seed: u64) -> SimulationConfig {
    SimulationConfig {
        family: Family::normal(1.0).unwrap(),
        theta_true: 0.0,
        n_comparisons: 6,
        replicates,
        seed,
        weight_scheme: WeightScheme::Sites,
        thresholds: vec![2.0, 10.0],
        mode: Mode::Exact,
        settings: Settings::default(),
    }
}

#[test]
fn identical_statistics_close_the_approximation_gap() {
    // with every statistic equal the incidental data sit where the focus does
    let s = Settings::default();
    for n in [2, 5, 12] {
        let obs = normal_set(&vec![0.7; n], &vec![1.3; n]);
        let row = single_observation_weights(0, 1, n).unwrap();
        let exact = parametric_complexity_exact(0, &Space::FullLine, &row, &obs, &s).unwrap().log_complexity;
        let approx = parametric_complexity_approx(&Space::FullLine, &obs, row.weights[0], &s).unwrap().log_complexity;
        assert!((exact - approx).abs() < 1e-8, "N={n}: {exact} vs {approx}");
    }
}

#[test]
fn reports_are_identical_across_pools() {
    let space = Space::Punctured { excluded: 0.0 };
    let run = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| {
            let a = misleading_evidence_rate(&normal_cfg(400, 9), 0.0, &space).unwrap();
            let b = complexity_convergence(&SimulationConfig { replicates: 100, ..normal_cfg(100, 9) }, &[3, 6]).unwrap();
            (a, b)
        })
    };
    assert_eq!(run(1), run(3));
    assert_eq!(run(1), run(1));
}

#[test]
fn misleading_rate_respects_the_bound() {
    let r = misleading_evidence_rate(&normal_cfg(2000, 5), 0.0, &Space::Punctured { excluded: 0.0 }).unwrap();
    assert!(r.passed, "{r:?}");
    assert_eq!(r.replicates, 2000);
    // exceedance can only fall as k grows
    assert!(r.thresholds[1].exceedances <= r.thresholds[0].exceedances);
    for t in &r.thresholds {
        assert_eq!(t.se, binomial_se(t.rate, 2000));
    }
}

#[test]
fn null_draws_must_come_from_the_null() {
    let cfg = SimulationConfig { theta_true: 1.0, ..normal_cfg(100, 1) };
    assert!(misleading_evidence_rate(&cfg, 0.0, &Space::Punctured { excluded: 0.0 }).is_err());
    assert!(misleading_evidence_rate(&normal_cfg(99, 1), 0.0, &Space::FullLine).is_err());
}

#[test]
fn binomial_standard_error() {
    assert!((binomial_se(0.1, 100) - 0.03).abs() < 1e-15);
    assert_eq!(binomial_se(0.0, 10), 0.0);
}

#[test]
fn replicate_streams_differ() {
    let draws: Vec<u64> = (0..50).map(|r| replicate_rng(11, r).random()).collect();
    let mut sorted = draws.clone();
    sorted.sort_unstable();
    sorted.dedup();
    assert_eq!(sorted.len(), draws.len());
}

#[test]
fn point_fit_regret_is_not_constant() {
    let obs = normal_set(&[28.0, 8.0, -3.0, 7.0, -1.0, 1.0, 18.0, 12.0], &[15.0, 10.0, 16.0, 11.0, 9.0, 11.0, 10.0, 18.0]);
    let s = Settings::default();
    let row = single_observation_weights(0, 1, 8).unwrap();
    let space = Space::Punctured { excluded: 0.0 };
    let b = mle_baseline(&obs).unwrap();
    let fam = obs.observations()[0].family;
    let spread = regret_sweep_with(0, &space, &row, &obs, 101, &s, |t| fam.log_density(b.theta_alt, t)).unwrap();
    assert!(spread > 1.0, "{spread}");
    let exact = regret_sweep(0, &space, &row, &obs, 101, &s).unwrap();
    assert!(exact <= 1e-6, "{exact}");
}
