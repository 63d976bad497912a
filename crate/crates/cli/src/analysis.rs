//! Evaluating every comparison under each requested weight scheme and mode,
//! and writing the results.

use std::fs;
use std::path::Path;

use nmwl::evidence::{mle_baseline, MleBaseline};
use nmwl::{Comparisons, EvidenceEngine, Grade, Mode, Report, Settings, Side, Space, WeightScheme};
use serde::Serialize;

use crate::error::{io_err, CliError, CliResult};
use crate::input::FamilyChoice;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum AltChoice {
    #[value(name = "two-sided")]
    TwoSided,
    Nonneg,
}

impl AltChoice {
    pub fn parse(s: &str) -> CliResult<Self> {
        match s {
            "two-sided" => Ok(AltChoice::TwoSided),
            "nonneg" => Ok(AltChoice::Nonneg),
            other => Err(CliError::Input(format!("alt must be two-sided or nonneg, got {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum ModeChoice {
    Exact,
    Approx,
    Both,
}

impl ModeChoice {
    pub fn parse(s: &str) -> CliResult<Self> {
        match s {
            "exact" => Ok(ModeChoice::Exact),
            "approx" => Ok(ModeChoice::Approx),
            "both" => Ok(ModeChoice::Both),
            other => Err(CliError::Input(format!("mode must be exact, approx or both, got {other:?}"))),
        }
    }

    pub fn modes(self) -> Vec<Mode> {
        match self {
            ModeChoice::Exact => vec![Mode::Exact],
            ModeChoice::Approx => vec![Mode::Approximate],
            ModeChoice::Both => vec![Mode::Exact, Mode::Approximate],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

impl Format {
    pub fn parse(s: &str) -> CliResult<Self> {
        match s {
            "json" => Ok(Format::Json),
            "csv" => Ok(Format::Csv),
            other => Err(CliError::Input(format!("format must be json or csv, got {other:?}"))),
        }
    }
}

/// Parses a comma-separated scheme list such as `sites,null`.
pub fn parse_schemes(s: &str, custom: impl Fn() -> CliResult<WeightScheme>) -> CliResult<Vec<WeightScheme>> {
    let mut out: Vec<WeightScheme> = Vec::new();
    for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let scheme = match part {
            "sites" => WeightScheme::Sites,
            "null" => WeightScheme::Null,
            "blended" => WeightScheme::Blended,
            "custom" => custom()?,
            other => return Err(CliError::Input(format!("unknown weight scheme {other:?} (expected sites, null, blended or custom)"))),
        };
        if out.iter().any(|o| o.label() == scheme.label()) {
            return Err(CliError::Input(format!("weight scheme {part} listed twice")));
        }
        out.push(scheme);
    }
    if out.is_empty() {
        return Err(CliError::Input("no weight scheme given".into()));
    }
    Ok(out)
}

pub struct Plan {
    pub family: FamilyChoice,
    pub schemes: Vec<WeightScheme>,
    pub modes: Vec<Mode>,
    pub null_point: f64,
    pub alt: AltChoice,
    pub settings: Settings,
    pub baseline: bool,
}

impl Plan {
    pub fn alternative(&self) -> Space {
        match self.alt {
            AltChoice::TwoSided => Space::Punctured { excluded: self.null_point },
            AltChoice::Nonneg => Space::HalfLineNonneg,
        }
    }

    pub fn null(&self) -> Space {
        Space::Singleton { theta0: self.null_point }
    }
}

#[derive(Debug, Serialize)]
pub struct SchemeResult {
    pub scheme: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub exact: Option<Report>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub approx: Option<Report>,
}

impl SchemeResult {
    /// The exact report when present, otherwise the approximate one.
    pub fn primary(&self) -> &Report {
        self.exact.as_ref().or(self.approx.as_ref()).expect("at least one mode")
    }
}

#[derive(Debug, Serialize)]
pub struct ComparisonResult {
    pub id: String,
    pub statistic: f64,
    pub sample_size: u64,
    pub schemes: Vec<SchemeResult>,
}

#[derive(Debug, Serialize)]
pub struct PairedRow {
    pub id: String,
    pub mode: Mode,
    pub scheme_a: String,
    pub scheme_b: String,
    pub di_bits_a: f64,
    pub di_bits_b: f64,
    pub grade_a: Grade,
    pub grade_b: Grade,
    pub favors_a: Side,
    pub favors_b: Side,
    pub grades_agree: bool,
}

#[derive(Debug, Serialize)]
pub struct AnalysisOutput {
    pub family: String,
    pub alternative: String,
    pub null: String,
    pub null_point: f64,
    pub modes: Vec<Mode>,
    pub schemes: Vec<String>,
    pub comparisons: Vec<ComparisonResult>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub paired: Vec<PairedRow>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mle_baseline: Option<MleBaseline<f64>>,
}

/// Runs the plan. The first failing comparison (in input order) aborts
/// the run.
pub fn run(obs: &Comparisons, plan: &Plan) -> CliResult<AnalysisOutput> {
    let engine = EvidenceEngine::new(plan.settings)?;
    let (alt, null) = (plan.alternative(), plan.null());
    let n = obs.len();
    let mut per: Vec<Vec<SchemeResult>> = (0..n).map(|_| Vec::new()).collect();
    for scheme in &plan.schemes {
        for slot in per.iter_mut() {
            slot.push(SchemeResult { scheme: scheme.label().to_string(), exact: None, approx: None });
        }
        for &mode in &plan.modes {
            let reports = engine.analyze(obs, scheme, &alt, &null, plan.null_point, mode);
            for (i, r) in reports.into_iter().enumerate() {
                let id = &obs.observations()[i].id;
                let r = r.map_err(|e| CliError::from_comparison(id, e))?;
                let slot = per[i].last_mut().expect("scheme slot");
                match mode {
                    Mode::Exact => slot.exact = Some(r),
                    Mode::Approximate => slot.approx = Some(r),
                }
            }
        }
    }
    let comparisons: Vec<ComparisonResult> = obs
        .iter()
        .zip(per)
        .map(|(o, schemes)| ComparisonResult { id: o.id.clone(), statistic: o.statistic, sample_size: o.sample_size, schemes })
        .collect();
    let paired = paired_rows(&comparisons, &plan.modes);
    let mle_baseline = if plan.baseline { Some(mle_baseline(obs).map_err(CliError::from)?) } else { None };
    Ok(AnalysisOutput {
        family: plan.family.name().to_string(),
        alternative: alt.label(),
        null: null.label(),
        null_point: plan.null_point,
        modes: plan.modes.clone(),
        schemes: plan.schemes.iter().map(|s| s.label().to_string()).collect(),
        comparisons,
        paired,
        mle_baseline,
    })
}

/// Every pair of schemes, compared on the grade each assigns.
fn paired_rows(comparisons: &[ComparisonResult], modes: &[Mode]) -> Vec<PairedRow> {
    let mut rows = Vec::new();
    let k = comparisons.first().map_or(0, |c| c.schemes.len());
    for a in 0..k {
        for b in a + 1..k {
            for &mode in modes {
                for c in comparisons {
                    let pick = |s: &SchemeResult| match mode {
                        Mode::Exact => s.exact.clone(),
                        Mode::Approximate => s.approx.clone(),
                    };
                    let (Some(ra), Some(rb)) = (pick(&c.schemes[a]), pick(&c.schemes[b])) else { continue };
                    rows.push(PairedRow {
                        id: c.id.clone(),
                        mode,
                        scheme_a: ra.weight_scheme.clone(),
                        scheme_b: rb.weight_scheme.clone(),
                        di_bits_a: ra.di_bits,
                        di_bits_b: rb.di_bits,
                        grade_a: ra.grade,
                        grade_b: rb.grade,
                        favors_a: ra.favors,
                        favors_b: rb.favors,
                        grades_agree: ra.grade == rb.grade,
                    });
                }
            }
        }
    }
    rows
}

fn opt(v: Option<f64>) -> String {
    v.map_or(String::new(), |x| x.to_string())
}

/// The flat report: one row per comparison and scheme.
pub fn report_csv(out: &AnalysisOutput) -> CliResult<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let err = |e: csv::Error| CliError::Io(e.to_string());
    w.write_record(["id", "di_bits_exact", "di_bits_approx", "grade", "favors", "regret_bits", "scheme"]).map_err(err)?;
    for c in &out.comparisons {
        for s in &c.schemes {
            let p = s.primary();
            w.write_record([
                c.id.clone(),
                opt(s.exact.as_ref().map(|r| r.di_bits)),
                opt(s.approx.as_ref().map(|r| r.di_bits)),
                p.grade.to_string(),
                p.favors.to_string(),
                p.regret_bits.to_string(),
                s.scheme.clone(),
            ])
            .map_err(err)?;
        }
    }
    w.into_inner().map_err(|e| CliError::Io(e.to_string()))
}

pub fn paired_csv(rows: &[PairedRow]) -> CliResult<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let err = |e: csv::Error| CliError::Io(e.to_string());
    w.write_record([
        "id",
        "mode",
        "scheme_a",
        "scheme_b",
        "di_bits_a",
        "di_bits_b",
        "grade_a",
        "grade_b",
        "favors_a",
        "favors_b",
        "grades_agree",
    ])
    .map_err(err)?;
    for r in rows {
        w.write_record([
            r.id.clone(),
            r.mode.to_string(),
            r.scheme_a.clone(),
            r.scheme_b.clone(),
            r.di_bits_a.to_string(),
            r.di_bits_b.to_string(),
            r.grade_a.to_string(),
            r.grade_b.to_string(),
            r.favors_a.to_string(),
            r.favors_b.to_string(),
            r.grades_agree.to_string(),
        ])
        .map_err(err)?;
    }
    w.into_inner().map_err(|e| CliError::Io(e.to_string()))
}

/// Two-column `x,y` series for external plotting, keyed by file stem.
pub fn plot_series(out: &AnalysisOutput) -> Vec<(String, Vec<(f64, f64)>)> {
    let mut series = Vec::new();
    let k = out.schemes.len();
    for (s, name) in out.schemes.iter().enumerate() {
        for &mode in &out.modes {
            let pts = out
                .comparisons
                .iter()
                .filter_map(|c| {
                    let r = match mode {
                        Mode::Exact => c.schemes[s].exact.as_ref(),
                        Mode::Approximate => c.schemes[s].approx.as_ref(),
                    }?;
                    Some((c.statistic, r.di_bits))
                })
                .collect();
            series.push((format!("di_vs_statistic_{name}_{mode}"), pts));
        }
        if out.modes.len() == 2 {
            let pts = out
                .comparisons
                .iter()
                .filter_map(|c| Some((c.schemes[s].exact.as_ref()?.di_bits, c.schemes[s].approx.as_ref()?.di_bits)))
                .collect();
            series.push((format!("exact_vs_approx_{name}"), pts));
        }
    }
    for a in 0..k {
        for b in a + 1..k {
            for &mode in &out.modes {
                let pts = out
                    .paired
                    .iter()
                    .filter(|r| r.mode == mode && r.scheme_a == out.schemes[a] && r.scheme_b == out.schemes[b])
                    .map(|r| (r.di_bits_a, r.di_bits_b))
                    .collect();
                series.push((format!("{}_vs_{}_{mode}", out.schemes[a], out.schemes[b]), pts));
            }
        }
    }
    if let Some(b) = &out.mle_baseline {
        let pts = out.comparisons.iter().zip(&b.log2_ratios).map(|(c, &r)| (c.statistic, r)).collect();
        series.push(("mle_log2_ratio_vs_statistic".into(), pts));
    }
    series
}

pub fn pairs_csv(points: &[(f64, f64)]) -> CliResult<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let err = |e: csv::Error| CliError::Io(e.to_string());
    w.write_record(["x", "y"]).map_err(err)?;
    for (x, y) in points {
        w.write_record([x.to_string(), y.to_string()]).map_err(err)?;
    }
    w.into_inner().map_err(|e| CliError::Io(e.to_string()))
}

pub fn json_bytes<V: Serialize>(v: &V) -> CliResult<Vec<u8>> {
    let mut b = serde_json::to_vec_pretty(v).map_err(|e| CliError::Io(e.to_string()))?;
    b.push(b'\n');
    Ok(b)
}

fn write(path: &Path, bytes: &[u8]) -> CliResult<()> {
    fs::write(path, bytes).map_err(|e| io_err(path, e))
}

/// Writes the report (stdout when `dir` is `None`), plus the paired table
/// and plot series when a directory is given.
pub fn emit(out: &AnalysisOutput, format: Format, dir: Option<&Path>) -> CliResult<()> {
    let report = match format {
        Format::Json => json_bytes(out)?,
        Format::Csv => report_csv(out)?,
    };
    let Some(dir) = dir else {
        use std::io::Write;
        return std::io::stdout().write_all(&report).map_err(|e| CliError::Io(e.to_string()));
    };
    let plots = dir.join("plots");
    fs::create_dir_all(&plots).map_err(|e| io_err(&plots, e))?;
    let name = match format {
        Format::Json => "report.json",
        Format::Csv => "report.csv",
    };
    write(&dir.join(name), &report)?;
    if !out.paired.is_empty() {
        write(&dir.join("paired.csv"), &paired_csv(&out.paired)?)?;
    }
    for (stem, pts) in plot_series(out) {
        write(&plots.join(format!("{stem}.csv")), &pairs_csv(&pts)?)?;
    }
    Ok(())
}

/// Short human-readable table for the terminal.
pub fn summary(out: &AnalysisOutput) -> String {
    let mut s = String::new();
    for c in &out.comparisons {
        for r in &c.schemes {
            let p = r.primary();
            s.push_str(&format!("{:<12} {:<8} {:>10.4} bits  {} ({})", c.id, r.scheme, p.di_bits, p.grade, p.favors));
            if let (Some(_), Some(a)) = (&r.exact, &r.approx) {
                s.push_str(&format!("  approx {:.4}", a.di_bits));
            }
            s.push('\n');
        }
    }
    let agree = out.paired.iter().filter(|r| r.grades_agree).count();
    if !out.paired.is_empty() {
        s.push_str(&format!("grades agree on {agree} of {} paired rows\n", out.paired.len()));
    }
    s
}
