//! Discrimination information between two hypothesis sets, evidence grades,
//! generalized regret and the two-point mixture MLE baseline.

use std::collections::HashMap;
use std::hash::{Hash, Hasher};
use std::sync::RwLock;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, Side};
use crate::families::{null_pseudo_statistic, ComparisonSet, FamilyKind};
use crate::nmwl::{profile_log_wlik, ApproxShape, ComplexityResult, Mode, NmwlSettings};
use crate::optimize::{maximize, Settings};
use crate::scalar::{to_bits, Real};
use crate::weights::{blended_weights, null_pseudo_weights, single_observation_weights, validate_weights, WeightRow};
use crate::wlik::{Objective, ParameterSpace};

/// Which hypothesis the evidence points to.
pub type Favors = Side;

/// Heuristic evidence grades for `|DI|` in bits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Grade {
    Negligible,
    Weak,
    Moderate,
    Strong,
    VeryStrong,
    Overwhelming,
}

impl std::fmt::Display for Grade {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Grade::Negligible => "negligible",
            Grade::Weak => "weak",
            Grade::Moderate => "moderate",
            Grade::Strong => "strong",
            Grade::VeryStrong => "very_strong",
            Grade::Overwhelming => "overwhelming",
        })
    }
}

/// Maps `|di_bits|` to its grade: below 1 negligible, [1,2) weak, [2,3)
/// moderate, [3,5) strong, [5,7) very strong, 7 and above overwhelming.
/// Negative values favor the null; zero counts as favoring the alternative.
pub fn grade<T: Real>(di_bits: T) -> (Grade, Favors) {
    let a = di_bits.abs().as_f64();
    let g = if a < 1.0 {
        Grade::Negligible
    } else if a < 2.0 {
        Grade::Weak
    } else if a < 3.0 {
        Grade::Moderate
    } else if a < 5.0 {
        Grade::Strong
    } else if a < 7.0 {
        Grade::VeryStrong
    } else {
        Grade::Overwhelming
    };
    let favors = if di_bits < T::zero() { Side::Null } else { Side::Alternative };
    (g, favors)
}

/// How the weight row of each comparison is built.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", bound = "T: Real")]
pub enum WeightScheme<T> {
    /// Single-observation weights over the other comparisons.
    Sites,
    /// One observation's weight on the null expectation `E[T | θ₀]`.
    Null,
    /// The null pseudo-statistic weighted like each incidental comparison.
    Blended,
    /// One explicit row per comparison.
    Custom(Vec<WeightRow<T>>),
}

impl<T: Real> WeightScheme<T> {
    pub fn label(&self) -> &'static str {
        match self {
            WeightScheme::Sites => "sites",
            WeightScheme::Null => "null",
            WeightScheme::Blended => "blended",
            WeightScheme::Custom(_) => "custom",
        }
    }

    /// The row for comparison `i`; `theta0` fixes the pseudo-statistic.
    pub fn row(&self, i: usize, obs: &ComparisonSet<T>, theta0: T) -> Result<WeightRow<T>> {
        let o = obs.get(i).ok_or(Error::DimensionMismatch { expected: obs.len(), got: i + 1 })?;
        let n = obs.len();
        match self {
            WeightScheme::Sites => single_observation_weights(i, o.sample_size, n),
            WeightScheme::Null => {
                let t0 = null_pseudo_statistic(&o.family, theta0)?;
                null_pseudo_weights(o.sample_size, t0)?.embedded(i, n)
            }
            WeightScheme::Blended => blended_weights(i, o.sample_size, n, null_pseudo_statistic(&o.family, theta0)?),
            WeightScheme::Custom(rows) => {
                let row = rows.get(i).ok_or(Error::DimensionMismatch { expected: n, got: rows.len() })?;
                if row.focus_index != i || row.len() != n {
                    return Err(Error::InvalidConfig(format!("custom weight row {} does not focus on comparison {} of {}", i, i, n)));
                }
                let v = validate_weights(row);
                if !v.is_empty() {
                    return Err(Error::InvalidWeights(v));
                }
                Ok(row.clone())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvidenceDiagnostics<T> {
    pub theta_hat_alt: T,
    pub theta_hat_null: T,
    pub alt_at_boundary: bool,
    pub quadrature_error_alt: T,
    pub quadrature_error_null: T,
    pub nodes_alt: usize,
    pub nodes_null: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvidenceReport<T> {
    pub id: String,
    pub di_bits: T,
    pub grade: Grade,
    pub favors: Favors,
    /// Regret of the alternative's predictive density at the observed data.
    pub regret_bits: T,
    pub log_numerator_alt: T,
    pub log_numerator_null: T,
    pub log_complexity_alt: T,
    pub log_complexity_null: T,
    pub mode: Mode,
    pub weight_scheme: String,
    pub diagnostics: EvidenceDiagnostics<T>,
}

fn hash_row<T: Real, H: Hasher>(row: &WeightRow<T>, h: &mut H) {
    row.focus_index.hash(h);
    for w in &row.weights {
        w.as_f64().to_bits().hash(h);
    }
    if let Some(p) = row.pseudo {
        (p.weight.as_f64().to_bits(), p.statistic.as_f64().to_bits()).hash(h);
    }
}

/// Evaluates discrimination information, caching complexities by
/// (space, weights, mode, data).
#[derive(Debug)]
pub struct EvidenceEngine<T> {
    pub settings: NmwlSettings<T>,
    cache: RwLock<HashMap<String, ComplexityResult<T>>>,
}

impl<T: Real> EvidenceEngine<T> {
    pub fn new(settings: NmwlSettings<T>) -> Result<Self> {
        settings.validate()?;
        Ok(EvidenceEngine { settings, cache: RwLock::new(HashMap::new()) })
    }

    pub fn cached_complexities(&self) -> usize {
        self.cache.read().expect("cache lock").len()
    }

    fn key(&self, i: usize, space: &ParameterSpace<T>, row: &WeightRow<T>, obs: &ComparisonSet<T>, mode: Mode) -> Result<String> {
        let mut h = std::collections::hash_map::DefaultHasher::new();
        Ok(match mode {
            Mode::Exact => {
                hash_row(row, &mut h);
                format!("exact|{}|{:016x}|{:016x}", space.label(), h.finish(), obs.content_hash(Some(i)))
            }
            Mode::Approximate => {
                let shape = ApproxShape::from_row(row, obs, self.settings.approx_policy)?;
                format!("approx|{}|{}|{:016x}", space.label(), shape.key(), obs.content_hash(None))
            }
        })
    }

    /// Log-complexity of comparison `i`, from the cache when possible.
    pub fn complexity(
        &self,
        i: usize,
        space: &ParameterSpace<T>,
        row: &WeightRow<T>,
        obs: &ComparisonSet<T>,
        mode: Mode,
    ) -> Result<ComplexityResult<T>> {
        let key = self.key(i, space, row, obs, mode)?;
        if let Some(c) = self.cache.read().expect("cache lock").get(&key) {
            return Ok(*c);
        }
        let c = crate::nmwl::parametric_complexity(i, space, row, obs, mode, &self.settings)?;
        self.cache.write().expect("cache lock").insert(key, c);
        Ok(c)
    }

    fn side(
        &self,
        i: usize,
        space: &ParameterSpace<T>,
        row: &WeightRow<T>,
        obs: &ComparisonSet<T>,
        mode: Mode,
    ) -> Result<(T, ComplexityResult<T>, T, bool)> {
        let mut obj = Objective::new(row, obs)?;
        obj.set_focus_statistic(obs.observations()[i].statistic);
        let m = obj.maximize(space, &self.settings.optim, None)?;
        let c = self.complexity(i, space, row, obs, mode)?;
        Ok((m.max_log_wlik, c, m.theta_hat, m.at_boundary))
    }

    /// `Ī_i(Θ₁, Θ₀)` (or its approximation) in bits.
    #[allow(clippy::too_many_arguments)]
    pub fn discrimination_information(
        &self,
        i: usize,
        theta1: &ParameterSpace<T>,
        theta0: &ParameterSpace<T>,
        row: &WeightRow<T>,
        obs: &ComparisonSet<T>,
        mode: Mode,
        scheme_label: &str,
    ) -> Result<EvidenceReport<T>> {
        if i >= obs.len() || row.focus_index != i {
            return Err(Error::DimensionMismatch { expected: obs.len(), got: i + 1 });
        }
        let (na, ca, tha, bnd) = self.side(i, theta1, row, obs, mode).map_err(|e| e.on_side(Side::Alternative))?;
        let (nn, cn, thn, _) = self.side(i, theta0, row, obs, mode).map_err(|e| e.on_side(Side::Null))?;
        let di_nats = (na - ca.log_complexity) - (nn - cn.log_complexity);
        let di_bits = to_bits(di_nats);
        if !di_bits.is_finite() {
            return Err(Error::NumericalFailure(format!("non-finite discrimination information for {}", obs.observations()[i].id)));
        }
        let (g, favors) = grade(di_bits);
        Ok(EvidenceReport {
            id: obs.observations()[i].id.clone(),
            di_bits,
            grade: g,
            favors,
            regret_bits: to_bits(ca.log_complexity),
            log_numerator_alt: na,
            log_numerator_null: nn,
            log_complexity_alt: ca.log_complexity,
            log_complexity_null: cn.log_complexity,
            mode,
            weight_scheme: scheme_label.to_string(),
            diagnostics: EvidenceDiagnostics {
                theta_hat_alt: tha,
                theta_hat_null: thn,
                alt_at_boundary: bnd,
                quadrature_error_alt: ca.quadrature_error_estimate,
                quadrature_error_null: cn.quadrature_error_estimate,
                nodes_alt: ca.nodes_used,
                nodes_null: cn.nodes_used,
            },
        })
    }

    /// Reports for every comparison, in input order. Shared approximate
    /// denominators are filled before the per-comparison map.
    pub fn analyze(
        &self,
        obs: &ComparisonSet<T>,
        scheme: &WeightScheme<T>,
        theta1: &ParameterSpace<T>,
        theta0: &ParameterSpace<T>,
        null_point: T,
        mode: Mode,
    ) -> Vec<Result<EvidenceReport<T>>> {
        let rows: Vec<Result<WeightRow<T>>> = (0..obs.len()).map(|i| scheme.row(i, obs, null_point)).collect();
        if mode == Mode::Approximate {
            let mut seen: HashMap<String, (usize, WeightRow<T>, ParameterSpace<T>)> = HashMap::new();
            for (i, row) in rows.iter().enumerate() {
                let Ok(row) = row else { continue };
                for space in [theta1, theta0] {
                    if let Ok(k) = self.key(i, space, row, obs, mode) {
                        seen.entry(k).or_insert((i, row.clone(), *space));
                    }
                }
            }
            let mut todo: Vec<_> = seen.into_values().collect();
            todo.sort_by_key(|(i, _, s)| (*i, s.label()));
            // Errors resurface, with their side, in the per-comparison pass.
            todo.par_iter().for_each(|(i, row, space)| {
                let _ = self.complexity(*i, space, row, obs, mode);
            });
        }
        (0..obs.len())
            .into_par_iter()
            .map(|i| {
                let row = rows[i].clone()?;
                self.discrimination_information(i, theta1, theta0, &row, obs, mode, scheme.label())
            })
            .collect()
    }
}

/// `Ī_i(Θ₁, Θ₀)` without a shared cache.
pub fn discrimination_information<T: Real>(
    i: usize,
    theta1: &ParameterSpace<T>,
    theta0: &ParameterSpace<T>,
    row: &WeightRow<T>,
    obs: &ComparisonSet<T>,
    mode: Mode,
    settings: &NmwlSettings<T>,
) -> Result<EvidenceReport<T>> {
    EvidenceEngine::new(*settings)?.discrimination_information(i, theta1, theta0, row, obs, mode, "custom")
}

/// Regret, in bits, of a predictive density at `t`: the profile at `t` minus
/// the predictive log-density there.
pub fn generalized_regret<T: Real>(
    i: usize,
    t: T,
    space: &ParameterSpace<T>,
    predictive_log_density_at_t: T,
    row: &WeightRow<T>,
    obs: &ComparisonSet<T>,
    settings: &NmwlSettings<T>,
) -> Result<T> {
    Ok(to_bits(profile_log_wlik(i, t, space, row, obs, &settings.optim)? - predictive_log_density_at_t))
}

/// Two-point mixture fit `θ ∈ {0, θ_alt}` and the per-comparison log ratios
/// it implies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MleBaseline<T> {
    pub theta_alt: T,
    pub mixing_proportion: T,
    pub mixture_log_likelihood: T,
    /// The fit put all mass on one component.
    pub degenerate_fit: bool,
    /// `log₂(g_{θ_alt}(t_i) / g_0(t_i))` per comparison.
    pub log2_ratios: Vec<T>,
}

struct PointLogs<T> {
    alt: Vec<T>,
    null: Vec<T>,
}

fn point_logs<T: Real>(obs: &ComparisonSet<T>, theta: T) -> Result<PointLogs<T>> {
    let mut alt = Vec::with_capacity(obs.len());
    let mut null = Vec::with_capacity(obs.len());
    for o in obs.iter() {
        alt.push(o.family.log_density(theta, o.statistic)?);
        null.push(o.family.log_density(T::zero(), o.statistic)?);
    }
    Ok(PointLogs { alt, null })
}

fn mixture_loglik<T: Real>(l: &PointLogs<T>, p: T) -> T {
    l.alt
        .iter()
        .zip(&l.null)
        .map(|(&a, &b)| {
            let m = a.max(b);
            m + (p * (a - m).exp() + (T::one() - p) * (b - m).exp()).ln()
        })
        .sum()
}

/// Maximizes the concave mixture log-likelihood over `p ∈ [0, 1]` by
/// bisection on its derivative.
fn best_proportion<T: Real>(l: &PointLogs<T>) -> (T, T) {
    let deriv = |p: T| -> T {
        l.alt
            .iter()
            .zip(&l.null)
            .map(|(&a, &b)| {
                let m = a.max(b);
                let (ea, eb) = ((a - m).exp(), (b - m).exp());
                (ea - eb) / (p * ea + (T::one() - p) * eb)
            })
            .sum()
    };
    let p = if deriv(T::zero()) <= T::zero() {
        T::zero()
    } else if deriv(T::one()) >= T::zero() {
        T::one()
    } else {
        let (mut lo, mut hi) = (T::zero(), T::one());
        for _ in 0..200 {
            let mid = (lo + hi) * T::lit(0.5);
            if deriv(mid) > T::zero() {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo < T::lit(1e-14) {
                break;
            }
        }
        (lo + hi) * T::lit(0.5)
    };
    (p, mixture_loglik(l, p))
}

/// Fits the two-point mixture over a log-spaced grid of 64 `θ_alt` values,
/// then refines between the neighbours of the best grid point.
pub fn mle_baseline<T: Real>(obs: &ComparisonSet<T>) -> Result<MleBaseline<T>> {
    let kind = obs.observations()[0].family.kind();
    if obs.iter().any(|o| o.family.kind() != kind) {
        return Err(Error::InvalidParameter("the mixture baseline needs one family kind".into()));
    }
    let scale = obs.iter().map(|o| o.family.theta_scale()).fold(T::zero(), T::max);
    let reach = obs
        .iter()
        .map(|o| match kind {
            FamilyKind::NormalKnownScale => o.statistic.abs(),
            FamilyKind::FoldedNoncentralT => o.family.theta_from_noncentrality(o.statistic).unwrap_or(o.statistic),
        })
        .fold(T::zero(), T::max);
    let lo = T::lit(1e-2) * scale;
    let hi = (T::lit(10.0) * scale).max(T::lit(2.0) * reach);
    let k = 64;
    let grid: Vec<T> = (0..k).map(|j| lo * (hi / lo).powf(T::from_count(j as u64) / T::from_count((k - 1) as u64))).collect();
    let profile = |theta: T| -> Result<T> { Ok(best_proportion(&point_logs(obs, theta)?).1) };
    let mut best = (0usize, T::neg_infinity());
    for (j, &g) in grid.iter().enumerate() {
        let v = profile(g)?;
        if v > best.1 {
            best = (j, v);
        }
    }
    let a = grid[best.0.saturating_sub(1)];
    let b = grid[(best.0 + 1).min(k - 1)];
    let settings = Settings { tol: T::lit(1e-9) * scale, max_expansions: 60, grid_points: 0, restart_margin: T::lit(1e-9) };
    let opt = maximize(profile, a, b, grid[best.0], (b - a) * T::lit(0.25), &settings)?;
    let theta = if opt.fx >= best.1 { opt.x } else { grid[best.0] };
    let logs = point_logs(obs, theta)?;
    let (p, ll) = best_proportion(&logs);
    let eps = T::lit(1e-9);
    Ok(MleBaseline {
        theta_alt: theta,
        mixing_proportion: p,
        mixture_log_likelihood: ll,
        degenerate_fit: p <= eps || p >= T::one() - eps,
        log2_ratios: logs.alt.iter().zip(&logs.null).map(|(&a, &b)| to_bits(a - b)).collect(),
    })
}

/// Mixture log-likelihood of the baseline model at `(p, θ_alt)`.
pub fn mixture_log_likelihood<T: Real>(obs: &ComparisonSet<T>, p: T, theta_alt: T) -> Result<T> {
    Ok(mixture_loglik(&point_logs(obs, theta_alt)?, p))
}
