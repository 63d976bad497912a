//! TOML key = value configuration. Every key is optional; flags given on
//! the command line win over the file.

use std::path::Path;

use nmwl::weights::WeightRow;
use nmwl::{ApproxPolicy, Settings};
use serde::Deserialize;

use crate::error::{CliError, CliResult};

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub rel_tol: Option<f64>,
    pub abs_tol: Option<f64>,
    pub truncation_mass: Option<f64>,
    pub max_subdivisions: Option<usize>,
    pub theta_tol: Option<f64>,
    pub max_expansions: Option<usize>,
    pub grid_points: Option<usize>,
    pub normal_closed_form: Option<bool>,
    /// `strict` or `per_focus_family`.
    pub approx_policy: Option<String>,

    pub family: Option<String>,
    pub weights: Option<String>,
    pub mode: Option<String>,
    pub null: Option<f64>,
    pub alt: Option<String>,
    pub format: Option<String>,
    pub workers: Option<usize>,
    pub seed: Option<u64>,
    /// Sample size behind rows without an `n_i` column (normal family).
    pub sample_size: Option<u64>,

    #[serde(default)]
    pub custom_weights: Vec<CustomRow>,
    pub simulate: Option<SimulateSection>,
}

/// One explicit weight row, used with `--weights custom`.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CustomRow {
    /// Comparison id the row focuses on.
    pub id: String,
    pub weights: Vec<f64>,
    pub pseudo_weight: Option<f64>,
    pub pseudo_statistic: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateSection {
    pub seed: Option<u64>,
    #[serde(default = "default_replicates")]
    pub replicates: usize,
    #[serde(default)]
    pub runs: Vec<SimRun>,
}

fn default_replicates() -> usize {
    1000
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimRun {
    /// `misleading`, `convergence` or `trend`.
    pub check: String,
    #[serde(default = "default_family")]
    pub family: String,
    #[serde(default = "one")]
    pub scale: f64,
    pub m: Option<u32>,
    pub n: Option<u32>,
    #[serde(default)]
    pub theta0: f64,
    #[serde(default = "default_comparisons")]
    pub n_comparisons: usize,
    pub replicates: Option<usize>,
    #[serde(default = "default_scheme")]
    pub weights: String,
    #[serde(default = "default_mode")]
    pub mode: String,
    #[serde(default = "default_thresholds")]
    pub thresholds: Vec<f64>,
    /// Comparison counts for `convergence`.
    #[serde(default)]
    pub ns: Vec<usize>,
    /// Sample sizes for `trend`.
    #[serde(default)]
    pub n_grid: Vec<u64>,
    #[serde(default = "default_k")]
    pub k: f64,
}

fn default_family() -> String {
    "normal".into()
}
fn one() -> f64 {
    1.0
}
fn default_comparisons() -> usize {
    8
}
fn default_scheme() -> String {
    "sites".into()
}
fn default_mode() -> String {
    "exact".into()
}
fn default_thresholds() -> Vec<f64> {
    vec![10.0, 100.0]
}
fn default_k() -> f64 {
    8.0
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> CliResult<Self> {
        let Some(path) = path else { return Ok(FileConfig::default()) };
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
    }

    pub fn parse(text: &str) -> Result<Self, String> {
        toml::from_str(text).map_err(|e| e.to_string())
    }

    /// Numerical settings with the file's overrides applied. The approximate
    /// denominator defaults to one per focus family, so heterogeneous data
    /// such as the schools can be analysed in both modes.
    pub fn settings(&self) -> CliResult<Settings> {
        let mut s = Settings { approx_policy: ApproxPolicy::PerFocusFamily, ..Settings::default() };
        let q = &mut s.quadrature;
        set(&mut q.rel_tol, self.rel_tol);
        set(&mut q.abs_tol, self.abs_tol);
        set(&mut q.truncation_mass, self.truncation_mass);
        set(&mut q.max_subdivisions, self.max_subdivisions);
        let o = &mut s.optim;
        set(&mut o.theta_tol, self.theta_tol);
        set(&mut o.max_expansions, self.max_expansions);
        set(&mut o.grid_points, self.grid_points);
        set(&mut o.normal_closed_form, self.normal_closed_form);
        if let Some(p) = &self.approx_policy {
            s.approx_policy = match p.as_str() {
                "strict" => ApproxPolicy::Strict,
                "per_focus_family" => ApproxPolicy::PerFocusFamily,
                other => return Err(CliError::Input(format!("approx_policy must be strict or per_focus_family, got {other:?}"))),
            };
        }
        s.validate()?;
        Ok(s)
    }

    /// Custom rows ordered like `ids`.
    pub fn custom_rows(&self, ids: &[String]) -> CliResult<Vec<WeightRow<f64>>> {
        if self.custom_weights.is_empty() {
            return Err(CliError::Input("--weights custom needs [[custom_weights]] rows in the config file".into()));
        }
        ids.iter()
            .enumerate()
            .map(|(i, id)| {
                let c = self
                    .custom_weights
                    .iter()
                    .find(|c| &c.id == id)
                    .ok_or_else(|| CliError::Input(format!("no custom weight row for comparison {id}")))?;
                if c.weights.len() != ids.len() {
                    return Err(CliError::Input(format!(
                        "custom weight row {id} has {} weights for {} comparisons",
                        c.weights.len(),
                        ids.len()
                    )));
                }
                WeightRow::from_parts(i, c.weights.clone(), c.pseudo_weight, c.pseudo_statistic)
                    .map_err(|v| CliError::Input(format!("custom weight row {id} rejected: {v:?}")))
            })
            .collect()
    }
}

fn set<V>(slot: &mut V, v: Option<V>) {
    if let Some(v) = v {
        *slot = v;
    }
}
