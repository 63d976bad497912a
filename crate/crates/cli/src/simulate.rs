//! Monte Carlo verification runs driven by the `[simulate]` config section.

use nmwl::mcverify::{complexity_convergence, interpretability_trend, misleading_evidence_rate, VerificationReport};
use nmwl::{Family, Settings, SimulationConfig, Space, WeightScheme};
use serde::Serialize;

use crate::analysis::ModeChoice;
use crate::config::{SimRun, SimulateSection};
use crate::error::{CliError, CliResult};

pub const DEFAULT_CONFIG: &str = include_str!("../data/simulate_default.toml");

#[derive(Debug, Serialize)]
pub struct RunResult {
    pub name: String,
    pub report: VerificationReport,
}

#[derive(Debug, Serialize)]
pub struct SimulationOutput {
    pub seed: u64,
    pub passed: bool,
    pub runs: Vec<RunResult>,
}

fn family(run: &SimRun) -> CliResult<Family> {
    match run.family.as_str() {
        "normal" => Ok(Family::normal(run.scale)?),
        "folded-t" => {
            let (Some(m), Some(n)) = (run.m, run.n) else {
                return Err(CliError::Input("a folded-t run needs m and n".into()));
            };
            Ok(Family::folded_t(m, n)?)
        }
        other => Err(CliError::Input(format!("family must be normal or folded-t, got {other:?}"))),
    }
}

fn scheme(run: &SimRun) -> CliResult<WeightScheme> {
    match run.weights.as_str() {
        "sites" => Ok(WeightScheme::Sites),
        "null" => Ok(WeightScheme::Null),
        "blended" => Ok(WeightScheme::Blended),
        other => Err(CliError::Input(format!("simulation weights must be sites, null or blended, got {other:?}"))),
    }
}

/// Runs every configured check in order.
pub fn run(section: &SimulateSection, seed: u64, settings: Settings) -> CliResult<SimulationOutput> {
    if section.runs.is_empty() {
        return Err(CliError::Input("[simulate] has no runs".into()));
    }
    let mut runs = Vec::new();
    for (idx, r) in section.runs.iter().enumerate() {
        let fam = family(r)?;
        let mode = match ModeChoice::parse(&r.mode)? {
            ModeChoice::Exact => nmwl::Mode::Exact,
            ModeChoice::Approx => nmwl::Mode::Approximate,
            ModeChoice::Both => return Err(CliError::Input("a simulation run uses one mode".into())),
        };
        let cfg = SimulationConfig {
            family: fam,
            theta_true: r.theta0,
            n_comparisons: r.n_comparisons,
            replicates: r.replicates.unwrap_or(section.replicates),
            seed,
            weight_scheme: scheme(r)?,
            thresholds: r.thresholds.clone(),
            mode,
            settings,
        };
        let alt = match fam {
            Family::NormalKnownScale { .. } => Space::Punctured { excluded: r.theta0 },
            Family::FoldedNoncentralT { .. } => Space::HalfLineNonneg,
        };
        let report = match r.check.as_str() {
            "misleading" => misleading_evidence_rate(&cfg, r.theta0, &alt),
            "convergence" => complexity_convergence(&cfg, &r.ns),
            "trend" => interpretability_trend(&cfg, r.theta0, &r.n_grid, r.k),
            other => return Err(CliError::Input(format!("run {idx}: check must be misleading, convergence or trend, got {other:?}"))),
        };
        let report = report.map_err(|e| match e.root() {
            nmwl::Error::InvalidConfig(_) | nmwl::Error::InvalidParameter(_) => CliError::Input(format!("run {idx}: {e}")),
            _ => CliError::Numerical { id: format!("simulation run {idx}"), message: e.to_string() },
        })?;
        runs.push(RunResult { name: format!("{}_{}_{}", r.check, r.family, r.weights), report });
    }
    let passed = runs.iter().all(|r| r.report.passed);
    Ok(SimulationOutput { seed, passed, runs })
}

/// `x,y` series per run: thresholds against rates, sizes against rates or
/// gaps.
pub fn plot_series(out: &SimulationOutput) -> Vec<(String, Vec<(f64, f64)>)> {
    let mut series = Vec::new();
    for (i, r) in out.runs.iter().enumerate() {
        let stem = format!("run{i}_{}", r.name);
        let rep = &r.report;
        if !rep.thresholds.is_empty() {
            series.push((stem.clone() + "_rate_vs_k", rep.thresholds.iter().map(|t| (t.k, t.rate)).collect()));
        }
        if !rep.complexity_gaps.is_empty() {
            series.push((stem.clone() + "_gap_vs_n", rep.complexity_gaps.iter().map(|g| (g.n_comparisons as f64, g.mean_gap)).collect()));
        }
        if !rep.trend.is_empty() {
            series.push((stem + "_rate_vs_n", rep.trend.iter().map(|p| (p.n as f64, p.value)).collect()));
        }
    }
    series
}
