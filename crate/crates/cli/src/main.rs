//! `nmwl`: evidence for an alternative over a null hypothesis, in bits.
//!
//! Exit codes: 0 success, 1 output could not be written, 2 invalid input
//! or configuration, 3 numerical failure (the comparison is named), 4 a
//! simulation check failed.

mod analysis;
mod config;
mod error;
mod input;
mod simulate;

use std::fs::File;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use analysis::{AltChoice, Format, ModeChoice, Plan};
use config::FileConfig;
use error::{io_err, CliError, CliResult};
use input::FamilyChoice;

const SCHOOLS: &str = include_str!("../data/schools.csv");

#[derive(Parser)]
#[command(name = "nmwl", version, about = "Evidence for an alternative over a null hypothesis, in bits")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// TOML key = value file of tolerances and defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Worker threads (defaults to all cores). Results do not depend on it.
    #[arg(long)]
    workers: Option<usize>,
    /// Output directory; the report goes to stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
}

#[derive(Args, Clone)]
struct AnalysisArgs {
    /// Sampling family; detected from the header when omitted.
    #[arg(long, value_enum)]
    family: Option<FamilyChoice>,
    /// Comma-separated weight schemes: sites, null, blended, custom.
    #[arg(long)]
    weights: Option<String>,
    #[arg(long, value_enum)]
    mode: Option<ModeChoice>,
    /// Null parameter value θ₀.
    #[arg(long, allow_negative_numbers = true)]
    null: Option<f64>,
    /// Alternative parameter space.
    #[arg(long, value_enum)]
    alt: Option<AltChoice>,
    /// Also fit the two-point mixture maximum-likelihood baseline.
    #[arg(long)]
    baseline: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Discrimination information for each row of a statistic file
    /// (`id,t,sigma[,n_i]` or `id,t,m,n[,n_i]`).
    Analyze {
        input: PathBuf,
        #[command(flatten)]
        analysis: AnalysisArgs,
        #[command(flatten)]
        common: Common,
    },
    /// Two-sample t statistics from `feature_id,group,value` measurements.
    Reduce {
        input: PathBuf,
        /// Statistic file to write; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// The eight-schools coaching data under both weight schemes and modes.
    Schools {
        /// Alternative data file with the same columns.
        #[arg(long)]
        data: Option<PathBuf>,
        #[command(flatten)]
        analysis: AnalysisArgs,
        #[command(flatten)]
        common: Common,
    },
    /// Monte Carlo checks from the `[simulate]` config section.
    Simulate {
        #[arg(long)]
        seed: Option<u64>,
        #[command(flatten)]
        common: Common,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn dispatch(cmd: Command) -> CliResult<()> {
    match cmd {
        Command::Analyze { input, analysis, common } => {
            let cfg = FileConfig::load(common.config.as_deref())?;
            let file = File::open(&input).map_err(|e| CliError::Input(format!("{}: {e}", input.display())))?;
            analyze(file, &input.display().to_string(), &analysis, &common, &cfg, None)
        }
        Command::Reduce { input, out } => reduce(&input, out.as_deref()),
        Command::Schools { data, analysis, common } => {
            let cfg = FileConfig::load(common.config.as_deref())?;
            let defaults = Defaults { weights: "sites,null", mode: ModeChoice::Both, alt: AltChoice::TwoSided };
            match data {
                Some(p) => {
                    let file = File::open(&p).map_err(|e| CliError::Input(format!("{}: {e}", p.display())))?;
                    analyze(file, &p.display().to_string(), &analysis, &common, &cfg, Some(defaults))
                }
                None => analyze(SCHOOLS.as_bytes(), "schools.csv", &analysis, &common, &cfg, Some(defaults)),
            }
        }
        Command::Simulate { seed, common } => simulate(seed, &common),
    }
}

fn init_workers(flag: Option<usize>, cfg: &FileConfig) -> CliResult<()> {
    let Some(n) = flag.or(cfg.workers) else { return Ok(()) };
    if n == 0 {
        return Err(CliError::Input("--workers must be at least 1".into()));
    }
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| CliError::Input(format!("cannot start {n} workers: {e}")))
}

fn format_of(flag: Option<Format>, cfg: &FileConfig) -> CliResult<Format> {
    match (flag, &cfg.format) {
        (Some(f), _) => Ok(f),
        (None, Some(s)) => Format::parse(s),
        (None, None) => Ok(Format::Json),
    }
}

struct Defaults {
    weights: &'static str,
    mode: ModeChoice,
    alt: AltChoice,
}

fn analyze<R: std::io::Read>(
    src: R,
    label: &str,
    a: &AnalysisArgs,
    common: &Common,
    cfg: &FileConfig,
    defaults: Option<Defaults>,
) -> CliResult<()> {
    init_workers(common.workers, cfg)?;
    let format = format_of(common.format, cfg)?;
    let family = match (a.family, &cfg.family) {
        (Some(f), _) => Some(f),
        (None, Some(s)) => Some(FamilyChoice::parse(s)?),
        (None, None) => None,
    };
    let (obs, family) = input::read_statistics(src, label, family, cfg.sample_size)?;
    let ids: Vec<String> = obs.iter().map(|o| o.id.clone()).collect();

    let default_weights = match &defaults {
        Some(d) => d.weights,
        None if obs.len() >= 2 => "sites,null",
        None => "null",
    };
    let weights = a.weights.clone().or(cfg.weights.clone()).unwrap_or_else(|| default_weights.to_string());
    let schemes = analysis::parse_schemes(&weights, || Ok(nmwl::WeightScheme::Custom(cfg.custom_rows(&ids)?)))?;
    let mode = match (a.mode, &cfg.mode) {
        (Some(m), _) => m,
        (None, Some(s)) => ModeChoice::parse(s)?,
        (None, None) => defaults.as_ref().map_or(ModeChoice::Both, |d| d.mode),
    };
    let alt = match (a.alt, &cfg.alt) {
        (Some(x), _) => x,
        (None, Some(s)) => AltChoice::parse(s)?,
        (None, None) => match (&defaults, family) {
            (Some(d), _) => d.alt,
            (None, FamilyChoice::Normal) => AltChoice::TwoSided,
            (None, FamilyChoice::FoldedT) => AltChoice::Nonneg,
        },
    };
    let null_point = a.null.or(cfg.null).unwrap_or(0.0);
    if !null_point.is_finite() {
        return Err(CliError::Input("--null must be finite".into()));
    }
    let plan = Plan { family, schemes, modes: mode.modes(), null_point, alt, settings: cfg.settings()?, baseline: a.baseline };
    let out = analysis::run(&obs, &plan)?;
    analysis::emit(&out, format, common.out.as_deref())?;
    if common.out.is_some() {
        eprint!("{}", analysis::summary(&out));
    }
    Ok(())
}

fn reduce(input: &Path, out: Option<&Path>) -> CliResult<()> {
    let file = File::open(input).map_err(|e| CliError::Input(format!("{}: {e}", input.display())))?;
    let groups = input::read_raw(file, &input.display().to_string())?;
    let obs = input::reduce(&groups)?;
    let mut w = csv::Writer::from_writer(Vec::new());
    let err = |e: csv::Error| CliError::Io(e.to_string());
    w.write_record(["id", "t", "m", "n"]).map_err(err)?;
    for (o, (case, control)) in obs.iter().zip(groups.values()) {
        w.write_record([o.id.clone(), o.statistic.to_string(), case.len().to_string(), control.len().to_string()]).map_err(err)?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Io(e.to_string()))?;
    match out {
        Some(p) => std::fs::write(p, bytes).map_err(|e| io_err(p, e)),
        None => {
            use std::io::Write;
            std::io::stdout().write_all(&bytes).map_err(|e| CliError::Io(e.to_string()))
        }
    }
}

fn simulate(seed: Option<u64>, common: &Common) -> CliResult<()> {
    let cfg = match &common.config {
        Some(p) => FileConfig::load(Some(p))?,
        None => FileConfig::parse(simulate::DEFAULT_CONFIG).map_err(CliError::Input)?,
    };
    init_workers(common.workers, &cfg)?;
    if format_of(common.format, &cfg)? == Format::Csv {
        return Err(CliError::Input("simulate writes JSON; plot series go to --out as CSV".into()));
    }
    let Some(section) = &cfg.simulate else {
        return Err(CliError::Input("config has no [simulate] section".into()));
    };
    let seed = seed.or(section.seed).or(cfg.seed).unwrap_or(0);
    let out = simulate::run(section, seed, cfg.settings()?)?;
    let bytes = analysis::json_bytes(&out)?;
    match &common.out {
        Some(dir) => {
            let plots = dir.join("plots");
            std::fs::create_dir_all(&plots).map_err(|e| io_err(&plots, e))?;
            let p = dir.join("simulation.json");
            std::fs::write(&p, &bytes).map_err(|e| io_err(&p, e))?;
            for (stem, pts) in simulate::plot_series(&out) {
                let p = plots.join(format!("{stem}.csv"));
                std::fs::write(&p, analysis::pairs_csv(&pts)?).map_err(|e| io_err(&p, e))?;
            }
        }
        None => {
            use std::io::Write;
            std::io::stdout().write_all(&bytes).map_err(|e| CliError::Io(e.to_string()))?;
        }
    }
    if out.passed {
        Ok(())
    } else {
        let failed: Vec<String> = out
            .runs
            .iter()
            .flat_map(|r| r.report.checks.iter().filter(|c| !c.passed).map(move |c| format!("{}: {} ({})", r.name, c.name, c.detail)))
            .collect();
        Err(CliError::Verification(format!("verification failed: {}", failed.join("; "))))
    }
}
