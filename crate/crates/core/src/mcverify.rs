//! Monte Carlo checks of the method's probabilistic properties.
//!
//! Every replicate draws from its own ChaCha stream (root seed, stream =
//! replicate index), and results are aggregated in replicate order, so a
//! report depends only on its configuration and not on thread count.
//!
//! Finite-replicate checks can only show trends consistent with the
//! almost-sure limits, not prove them.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evidence::{EvidenceEngine, WeightScheme};
use crate::families::{ComparisonSet, FamilyInstance, ReducedObservation};
use crate::nmwl::{
    asymptotic_complexity_normal, parametric_complexity_approx, parametric_complexity_exact, profile_log_wlik, Mode, NmwlSettings,
};
use crate::scalar::{to_bits, Real};
use crate::weights::{single_observation_weights, WeightRow};
use crate::wlik::{Objective, ParameterSpace};

pub const MIN_REPLICATES: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct SimulationConfig<T> {
    pub family: FamilyInstance<T>,
    pub theta_true: T,
    pub n_comparisons: usize,
    pub replicates: usize,
    pub seed: u64,
    pub weight_scheme: WeightScheme<T>,
    /// Likelihood-ratio thresholds `k` for `2^DI ≥ k`.
    pub thresholds: Vec<T>,
    pub mode: Mode,
    #[serde(default)]
    pub settings: NmwlSettings<T>,
}

impl<T: Real> SimulationConfig<T> {
    pub fn validate(&self) -> Result<()> {
        self.family.validate()?;
        self.settings.validate()?;
        if self.replicates < MIN_REPLICATES {
            return Err(Error::InvalidConfig(format!("replicates must be at least {MIN_REPLICATES}, got {}", self.replicates)));
        }
        if self.n_comparisons == 0 {
            return Err(Error::InvalidConfig("n_comparisons must be at least 1".into()));
        }
        validate_thresholds(&self.thresholds)?;
        if matches!(self.weight_scheme, WeightScheme::Custom(_)) {
            return Err(Error::InvalidConfig("simulations use the sites, null or blended scheme".into()));
        }
        Ok(())
    }
}

fn validate_thresholds<T: Real>(ks: &[T]) -> Result<()> {
    if ks.is_empty() {
        return Err(Error::InvalidConfig("at least one threshold is required".into()));
    }
    if let Some(k) = ks.iter().find(|k| !(**k >= T::one()) || !k.is_finite()) {
        return Err(Error::InvalidConfig(format!("thresholds must be finite and at least 1, got {}", k)));
    }
    Ok(())
}

/// Binomial standard error `√(r(1−r)/n)`.
pub fn binomial_se(rate: f64, n: usize) -> f64 {
    (rate * (1.0 - rate) / n as f64).sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdResult {
    pub k: f64,
    pub exceedances: usize,
    pub rate: f64,
    pub se: f64,
    /// `1/k + 3·SE`.
    pub limit: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapResult {
    pub n_comparisons: usize,
    /// Mean `|exact − approx|` log-complexity, in nats.
    pub mean_gap: f64,
    pub se: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrendPoint {
    pub n: u64,
    pub value: f64,
    pub se: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct VerificationReport {
    pub kind: String,
    pub seed: u64,
    pub replicates: usize,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub thresholds: Vec<ThresholdResult>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub complexity_gaps: Vec<GapResult>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub trend: Vec<TrendPoint>,
    pub checks: Vec<Check>,
    pub passed: bool,
    pub note: String,
}

impl VerificationReport {
    fn finish(mut self) -> Self {
        self.passed = self.checks.iter().all(|c| c.passed);
        self
    }
}

const TREND_NOTE: &str = "finite-replicate trend evidence, not a proof of almost-sure limits";

/// Independent generator for replicate `r`.
pub fn replicate_rng(seed: u64, r: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(r as u64);
    rng
}

fn draw_set<T: Real>(family: &FamilyInstance<T>, thetas: &[T], rng: &mut ChaCha8Rng) -> Result<ComparisonSet<T>> {
    let obs = thetas
        .iter()
        .enumerate()
        .map(|(j, &th)| ReducedObservation::new(format!("sim{j}"), family.sample(th, rng)?, *family))
        .collect::<Result<Vec<_>>>()?;
    ComparisonSet::new(obs)
}

/// Discrimination information (bits) of comparison 0 in each replicate.
fn null_di_draws<T: Real>(cfg: &SimulationConfig<T>, theta0: T, theta1: &ParameterSpace<T>) -> Result<Vec<T>> {
    let engine = EvidenceEngine::new(cfg.settings)?;
    let null = ParameterSpace::Singleton { theta0 };
    let thetas = vec![cfg.theta_true; cfg.n_comparisons];
    let out: Vec<Result<T>> = (0..cfg.replicates)
        .into_par_iter()
        .map(|r| {
            let mut rng = replicate_rng(cfg.seed, r);
            let obs = draw_set(&cfg.family, &thetas, &mut rng)?;
            let row = cfg.weight_scheme.row(0, &obs, theta0)?;
            Ok(engine.discrimination_information(0, theta1, &null, &row, &obs, cfg.mode, cfg.weight_scheme.label())?.di_bits)
        })
        .collect();
    out.into_iter().collect()
}

/// Fraction of null replicates with `2^DI ≥ k`, for each threshold.
pub fn misleading_evidence_rate<T: Real>(
    cfg: &SimulationConfig<T>,
    theta0: T,
    theta1_space: &ParameterSpace<T>,
) -> Result<VerificationReport> {
    cfg.validate()?;
    if cfg.theta_true != theta0 {
        return Err(Error::InvalidConfig("misleading evidence is simulated under the null: theta_true must equal theta0".into()));
    }
    let di = null_di_draws(cfg, theta0, theta1_space)?;
    let n = di.len();
    let mut report = VerificationReport {
        kind: "misleading_evidence".into(),
        seed: cfg.seed,
        replicates: n,
        note: TREND_NOTE.into(),
        ..Default::default()
    };
    for &k in &cfg.thresholds {
        let cut = k.ln() / T::LN_2();
        let exceed = di.iter().filter(|&&d| d >= cut).count();
        let rate = exceed as f64 / n as f64;
        let se = binomial_se(rate, n);
        let limit = 1.0 / k.as_f64() + 3.0 * se;
        let passed = rate <= limit;
        report.checks.push(Check {
            name: format!("bound_k_{}", k.as_f64()),
            passed,
            detail: format!("rate {rate:.6} vs 1/k + 3 SE = {limit:.6}"),
        });
        report.thresholds.push(ThresholdResult { k: k.as_f64(), exceedances: exceed, rate, se, limit, passed });
    }
    Ok(report.finish())
}

/// Mean `|exact − approx|` log-complexity of comparison 0 for each `N`,
/// with statistics drawn from a 50/50 mixture of `θ = 0` and `θ = 1`.
pub fn complexity_convergence<T: Real>(cfg: &SimulationConfig<T>, ns: &[usize]) -> Result<VerificationReport> {
    cfg.validate()?;
    if ns.is_empty() || ns.iter().any(|&n| n < 2) {
        return Err(Error::InvalidConfig("every N must be at least 2".into()));
    }
    let space = ParameterSpace::FullLine;
    let mut report = VerificationReport {
        kind: "complexity_convergence".into(),
        seed: cfg.seed,
        replicates: cfg.replicates,
        note: TREND_NOTE.into(),
        ..Default::default()
    };
    for (g, &n) in ns.iter().enumerate() {
        let gaps: Vec<Result<f64>> = (0..cfg.replicates)
            .into_par_iter()
            .map(|r| {
                let mut rng = replicate_rng(cfg.seed ^ ((g as u64 + 1) << 48), r);
                let thetas: Vec<T> = (0..n).map(|_| if rand::Rng::random::<bool>(&mut rng) { T::one() } else { T::zero() }).collect();
                let obs = draw_set(&cfg.family, &thetas, &mut rng)?;
                let row = single_observation_weights(0, obs.observations()[0].sample_size, n)?;
                let exact = parametric_complexity_exact(0, &space, &row, &obs, &cfg.settings)?;
                let approx = parametric_complexity_approx(&space, &obs, row.weights[0], &cfg.settings)?;
                Ok((exact.log_complexity - approx.log_complexity).abs().as_f64())
            })
            .collect();
        let gaps: Vec<f64> = gaps.into_iter().collect::<Result<_>>()?;
        let mean = gaps.iter().sum::<f64>() / gaps.len() as f64;
        let var = gaps.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (gaps.len() as f64 - 1.0);
        report.complexity_gaps.push(GapResult { n_comparisons: n, mean_gap: mean, se: (var / gaps.len() as f64).sqrt() });
    }
    for w in report.complexity_gaps.windows(2) {
        let slack = 2.0 * (w[0].se.powi(2) + w[1].se.powi(2)).sqrt();
        report.checks.push(Check {
            name: format!("non_increasing_{}_{}", w[0].n_comparisons, w[1].n_comparisons),
            passed: w[1].mean_gap <= w[0].mean_gap + slack,
            detail: format!("{:.6} -> {:.6} (2 SE = {:.6})", w[0].mean_gap, w[1].mean_gap, slack),
        });
    }
    let last = report.complexity_gaps.last().expect("non-empty");
    report.checks.push(Check {
        name: format!("gap_below_0.05_at_{}", last.n_comparisons),
        passed: last.mean_gap < 0.05,
        detail: format!("{:.6} nats", last.mean_gap),
    });
    Ok(report.finish())
}

/// Family with sample size `n` behind each statistic: folded t uses
/// `m = n`, the normal family shrinks its scale by `√n`.
pub fn family_at_size<T: Real>(template: &FamilyInstance<T>, n: u64) -> Result<(FamilyInstance<T>, u64)> {
    match *template {
        FamilyInstance::NormalKnownScale { scale } => Ok((FamilyInstance::normal(scale / T::from_count(n).sqrt())?, n)),
        FamilyInstance::FoldedNoncentralT { .. } => {
            let g = u32::try_from(n).map_err(|_| Error::InvalidConfig("group size too large".into()))?;
            let f = FamilyInstance::folded_t(g, g)?;
            Ok((f, f.default_sample_size()))
        }
    }
}

/// Misleading-evidence rate at threshold `k` as the sample size grows.
pub fn interpretability_trend<T: Real>(cfg: &SimulationConfig<T>, theta0: T, n_grid: &[u64], k: T) -> Result<VerificationReport> {
    validate_thresholds(&[k])?;
    if n_grid.is_empty() {
        return Err(Error::InvalidConfig("n_grid is empty".into()));
    }
    let theta1 = match cfg.family {
        FamilyInstance::NormalKnownScale { .. } => ParameterSpace::Punctured { excluded: theta0 },
        FamilyInstance::FoldedNoncentralT { .. } => ParameterSpace::HalfLineNonneg,
    };
    let mut report = VerificationReport {
        kind: "interpretability_trend".into(),
        seed: cfg.seed,
        replicates: cfg.replicates,
        note: TREND_NOTE.into(),
        ..Default::default()
    };
    let cut = k.ln() / T::LN_2();
    for &n in n_grid {
        let (family, size) = family_at_size(&cfg.family, n)?;
        let sub = SimulationConfig { family, thresholds: vec![k], ..cfg.clone() };
        sub.validate()?;
        let di = sized_null_draws(&sub, theta0, &theta1, size)?;
        let rate = di.iter().filter(|&&d| d >= cut).count() as f64 / di.len() as f64;
        report.trend.push(TrendPoint { n, value: rate, se: binomial_se(rate, di.len()) });
    }
    for w in report.trend.windows(2) {
        let slack = 2.0 * (w[0].se.powi(2) + w[1].se.powi(2)).sqrt();
        report.checks.push(Check {
            name: format!("non_increasing_{}_{}", w[0].n, w[1].n),
            passed: w[1].value <= w[0].value + slack,
            detail: format!("{:.6} -> {:.6} (2 SE = {:.6})", w[0].value, w[1].value, slack),
        });
    }
    Ok(report.finish())
}

fn sized_null_draws<T: Real>(cfg: &SimulationConfig<T>, theta0: T, theta1: &ParameterSpace<T>, size: u64) -> Result<Vec<T>> {
    let engine = EvidenceEngine::new(cfg.settings)?;
    let null = ParameterSpace::Singleton { theta0 };
    let out: Vec<Result<T>> = (0..cfg.replicates)
        .into_par_iter()
        .map(|r| {
            let mut rng = replicate_rng(cfg.seed, r);
            let obs = (0..cfg.n_comparisons)
                .map(|j| {
                    ReducedObservation::new(format!("sim{j}"), cfg.family.sample(theta0, &mut rng)?, cfg.family)?.with_sample_size(size)
                })
                .collect::<Result<Vec<_>>>()?;
            let obs = ComparisonSet::new(obs)?;
            let row = cfg.weight_scheme.row(0, &obs, theta0)?;
            Ok(engine.discrimination_information(0, theta1, &null, &row, &obs, cfg.mode, cfg.weight_scheme.label())?.di_bits)
        })
        .collect();
    out.into_iter().collect()
}

/// Spread (max − min, bits) over a grid of focus values of the regret of a
/// predictive density. The grid holds `grid_size` quantiles, at
/// `(j + ½)/grid_size`, of the focus family under `θ̂` at the observed data.
pub fn regret_sweep_with<T: Real, P>(
    i: usize,
    space: &ParameterSpace<T>,
    row: &WeightRow<T>,
    obs: &ComparisonSet<T>,
    grid_size: usize,
    settings: &NmwlSettings<T>,
    predictive: P,
) -> Result<T>
where
    P: Fn(T) -> Result<T> + Sync,
{
    if grid_size == 0 {
        return Err(Error::InvalidConfig("grid_size must be at least 1".into()));
    }
    let mut obj = Objective::new(row, obs)?;
    obj.set_focus_statistic(obs.observations()[i].statistic);
    let theta_hat = obj.maximize(space, &settings.optim, None)?.theta_hat;
    let family = obj.focus_family();
    let grid: Vec<T> = (0..grid_size)
        .map(|j| family.quantile(theta_hat, (T::from_count(j as u64) + T::lit(0.5)) / T::from_count(grid_size as u64)))
        .collect::<Result<_>>()?;
    let regrets: Vec<Result<T>> =
        grid.par_iter().map(|&t| Ok(to_bits(profile_log_wlik(i, t, space, row, obs, &settings.optim)? - predictive(t)?))).collect();
    let regrets: Vec<T> = regrets.into_iter().collect::<Result<_>>()?;
    let hi = regrets.iter().copied().fold(T::neg_infinity(), T::max);
    let lo = regrets.iter().copied().fold(T::infinity(), T::min);
    Ok(hi - lo)
}

/// [`regret_sweep_with`] for the exact NMWL itself, whose complexity is
/// recomputed (uncached) with `t_i` replaced by each grid value.
pub fn regret_sweep<T: Real>(
    i: usize,
    space: &ParameterSpace<T>,
    row: &WeightRow<T>,
    obs: &ComparisonSet<T>,
    grid_size: usize,
    settings: &NmwlSettings<T>,
) -> Result<T> {
    regret_sweep_with(i, space, row, obs, grid_size, settings, |t| {
        let moved = obs.with_statistic(i, t)?;
        let num = profile_log_wlik(i, t, space, row, &moved, &settings.optim)?;
        Ok(num - parametric_complexity_exact(i, space, row, &moved, settings)?.log_complexity)
    })
}

/// Gap between the exact unweighted complexity of the normal family over a
/// bounded interval and its large-sample formula, for each `n`.
pub fn asymptotic_trend<T: Real>(
    sigma: T,
    space: &ParameterSpace<T>,
    n_grid: &[u64],
    settings: &NmwlSettings<T>,
) -> Result<VerificationReport> {
    let mut report = VerificationReport { kind: "asymptotic_complexity".into(), note: TREND_NOTE.into(), ..Default::default() };
    for &n in n_grid {
        let family = FamilyInstance::normal(sigma / T::from_count(n).sqrt())?;
        let (lo, hi) = space.bounds(&family)?;
        let obs = ComparisonSet::new(vec![ReducedObservation::new("x", (lo + hi) * T::lit(0.5), family)?.with_sample_size(n)?])?;
        let row = WeightRow { focus_index: 0, weights: vec![T::one()], pseudo: None };
        let exact = parametric_complexity_exact(0, space, &row, &obs, settings)?.log_complexity;
        let asym = asymptotic_complexity_normal(space, n, sigma)?;
        report.trend.push(TrendPoint { n, value: (exact - asym).abs().as_f64(), se: 0.0 });
    }
    for w in report.trend.windows(2) {
        report.checks.push(Check {
            name: format!("gap_shrinks_{}_{}", w[0].n, w[1].n),
            passed: w[1].value < w[0].value,
            detail: format!("{:.6} -> {:.6}", w[0].value, w[1].value),
        });
    }
    Ok(report.finish())
}
