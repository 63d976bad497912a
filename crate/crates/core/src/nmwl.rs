//! Normalized maximum weighted likelihood.
//!
//! The exact NMWL of comparison `i` divides the profiled weighted likelihood
//! `L̄_i(θ̂_i(t); t)` by its integral over the focus statistic, all other
//! statistics held at their observed values. The log of that integral is the
//! parametric complexity, and it is the same for every value of `t_i`.
//!
//! The approximate NMWL keeps the numerator but shares one denominator among
//! all comparisons: the focus weight sits on a free appended coordinate and
//! the rest is spread evenly over all `N` observed statistics.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::families::{ComparisonSet, FamilyInstance, ReducedObservation};
use crate::quadrature::{integrate_log_windowed, WindowOptions};
use crate::scalar::Real;
use crate::weights::{PseudoTerm, WeightRow};
use crate::wlik::{Objective, OptimConfig, ParameterSpace};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Exact,
    Approximate,
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Mode::Exact => "exact",
            Mode::Approximate => "approx",
        })
    }
}

/// How strictly the approximate denominator enforces the equal weight
/// conditions (one family, one sample size, equal focus and incidental
/// weights for every comparison).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ApproxPolicy {
    /// Reject data that break the conditions.
    Strict,
    /// Let the free coordinate follow the focus comparison's family, so one
    /// denominator is shared per distinct family rather than overall.
    PerFocusFamily,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, bound = "T: Real")]
pub struct QuadratureConfig<T> {
    pub rel_tol: T,
    pub abs_tol: T,
    pub truncation_mass: T,
    pub max_subdivisions: usize,
}

impl<T: Real> Default for QuadratureConfig<T> {
    fn default() -> Self {
        QuadratureConfig { rel_tol: T::lit(1e-8), abs_tol: T::lit(1e-12), truncation_mass: T::lit(1e-12), max_subdivisions: 2000 }
    }
}

impl<T: Real> QuadratureConfig<T> {
    pub fn validate(&self) -> Result<()> {
        let pos = |x: T| x > T::zero() && x.is_finite();
        if !(pos(self.rel_tol) && pos(self.abs_tol) && pos(self.truncation_mass)) || self.max_subdivisions == 0 {
            return Err(Error::InvalidConfig("quadrature tolerances must be positive".into()));
        }
        if !(self.truncation_mass < T::lit(1e-6)) {
            return Err(Error::InvalidConfig("truncation_mass must be below 1e-6".into()));
        }
        Ok(())
    }

    fn window(&self) -> WindowOptions<T> {
        WindowOptions {
            rel_tol: self.rel_tol,
            abs_tol: self.abs_tol,
            truncation_mass: self.truncation_mass,
            max_subdivisions: self.max_subdivisions,
            divergence_run: 6,
            max_doublings: 200,
        }
    }
}

/// Numerical settings shared by every NMWL computation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, bound = "T: Real")]
pub struct NmwlSettings<T> {
    pub quadrature: QuadratureConfig<T>,
    pub optim: OptimConfig<T>,
    pub approx_policy: ApproxPolicy,
}

impl<T: Real> Default for NmwlSettings<T> {
    fn default() -> Self {
        NmwlSettings { quadrature: QuadratureConfig::default(), optim: OptimConfig::default(), approx_policy: ApproxPolicy::Strict }
    }
}

impl<T: Real> NmwlSettings<T> {
    pub fn validate(&self) -> Result<()> {
        self.quadrature.validate()?;
        self.optim.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComplexityResult<T> {
    /// Log of the normalizing integral, in nats.
    pub log_complexity: T,
    pub mode: Mode,
    /// Relative error estimate of the integral (quadrature plus truncation).
    pub quadrature_error_estimate: T,
    pub nodes_used: usize,
}

fn check_focus<T: Real>(i: usize, row: &WeightRow<T>, obs: &ComparisonSet<T>) -> Result<()> {
    if i >= obs.len() {
        return Err(Error::DimensionMismatch { expected: obs.len(), got: i + 1 });
    }
    if row.focus_index != i {
        return Err(Error::InvalidParameter(format!("weight row focuses on {}, not {}", row.focus_index, i)));
    }
    Ok(())
}

/// `log L̄_i(θ̂_i(t_i(t)); t_i(t))`: the weighted log-likelihood maximized over
/// `space` after substituting `t` for the `i`-th statistic.
pub fn profile_log_wlik<T: Real>(
    i: usize,
    t: T,
    space: &ParameterSpace<T>,
    row: &WeightRow<T>,
    obs: &ComparisonSet<T>,
    optim: &OptimConfig<T>,
) -> Result<T> {
    check_focus(i, row, obs)?;
    let mut obj = Objective::new(row, obs)?;
    if !obj.focus_family().in_support(t) {
        return Err(Error::OutOfSupport { t: t.as_f64() });
    }
    obj.set_focus_statistic(t);
    Ok(obj.maximize(space, optim, None)?.max_log_wlik)
}

/// Integrates `exp` of the profile over the focus support. The window
/// starts around the focus family's mean under `θ̂` at `t_start`.
fn integrate_profile<T: Real>(
    mut obj: Objective<T>,
    t_start: T,
    space: &ParameterSpace<T>,
    settings: &NmwlSettings<T>,
    mode: Mode,
) -> Result<ComplexityResult<T>> {
    settings.validate()?;
    let family = obj.focus_family();
    let (lo, hi) = family.support();
    obj.set_focus_statistic(t_start);
    let start = obj.maximize(space, &settings.optim, None)?;
    let center = family.mean(start.theta_hat).unwrap_or(t_start).max(lo).min(hi);
    let w = obj.focus_weight().max(T::lit(1e-3));
    let half_width = T::lit(4.0) * family.statistic_scale() / w.sqrt();

    let mut last = Some(start.theta_hat);
    let h = |t: T| -> Result<T> {
        obj.set_focus_statistic(t);
        let r = obj.maximize(space, &settings.optim, last)?;
        last = Some(r.theta_hat);
        Ok(r.max_log_wlik)
    };
    let r = integrate_log_windowed(h, lo, hi, center, half_width, &settings.quadrature.window())?;
    Ok(ComplexityResult { log_complexity: r.log_value, mode, quadrature_error_estimate: r.relative_error, nodes_used: r.evaluations })
}

/// Exact parametric complexity of comparison `i`: the log of
/// `∫ L̄_i(θ̂_i(t_i(t)); t_i(t)) dt`.
pub fn parametric_complexity_exact<T: Real>(
    i: usize,
    space: &ParameterSpace<T>,
    row: &WeightRow<T>,
    obs: &ComparisonSet<T>,
    settings: &NmwlSettings<T>,
) -> Result<ComplexityResult<T>> {
    check_focus(i, row, obs)?;
    let obj = Objective::new(row, obs)?;
    // Start from the other terms so the result does not depend on t_i even
    // at rounding level.
    let family = obj.focus_family();
    let (lo, _) = family.support();
    let start = obj.non_focus_center().unwrap_or(if lo.is_finite() { lo } else { T::zero() });
    integrate_profile(obj, start, space, settings, Mode::Exact)
}

/// The structure of an approximate weighted likelihood: focus weight on the
/// free coordinate, optional pseudo term, and the remainder spread evenly
/// over the `N` observed statistics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ApproxShape<T> {
    pub family: FamilyInstance<T>,
    pub focus_weight: T,
    pub pseudo: Option<PseudoTerm<T>>,
}

impl<T: Real> ApproxShape<T> {
    /// Reads the shape off row `i`, enforcing the equal weight conditions as
    /// far as `policy` asks.
    pub fn from_row(row: &WeightRow<T>, obs: &ComparisonSet<T>, policy: ApproxPolicy) -> Result<Self> {
        if row.len() != obs.len() {
            return Err(Error::DimensionMismatch { expected: obs.len(), got: row.len() });
        }
        let i = row.focus_index;
        let focus = obs.get(i).ok_or(Error::DimensionMismatch { expected: obs.len(), got: i + 1 })?;
        let mut incidental = row.weights.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, &w)| w);
        if let Some(first) = incidental.next() {
            let tol = T::lit(1e-12);
            if incidental.any(|w| (w - first).abs() > tol) {
                return Err(Error::EqualWeightViolation("incidental weights differ within the row".into()));
            }
        }
        if policy == ApproxPolicy::Strict {
            check_equal_weight_conditions(obs)?;
        }
        Ok(ApproxShape { family: focus.family, focus_weight: row.weights[i], pseudo: row.pseudo })
    }

    /// Cache key of the shared denominator.
    pub fn key(&self) -> String {
        let fam = match self.family {
            FamilyInstance::NormalKnownScale { scale } => format!("normal({:e})", scale.as_f64()),
            FamilyInstance::FoldedNoncentralT { m, n } => format!("folded_t({m},{n})"),
        };
        let pseudo = self.pseudo.map_or(String::from("none"), |p| format!("{:e}@{:e}", p.weight.as_f64(), p.statistic.as_f64()));
        format!("{fam}|w={:e}|pseudo={pseudo}", self.focus_weight.as_f64())
    }
}

/// One family, one sample size and one sample space for all comparisons.
pub fn check_equal_weight_conditions<T: Real>(obs: &ComparisonSet<T>) -> Result<()> {
    let first = &obs.observations()[0];
    for o in obs.iter() {
        if o.family != first.family {
            return Err(Error::EqualWeightViolation(format!("comparison {} has a different family from {}", o.id, first.id)));
        }
        if o.sample_size != first.sample_size {
            return Err(Error::EqualWeightViolation(format!("comparison {} has a different sample size from {}", o.id, first.id)));
        }
    }
    Ok(())
}

fn approx_objective<T: Real>(obs: &ComparisonSet<T>, shape: &ApproxShape<T>) -> Result<(Objective<T>, T)> {
    let n = obs.len();
    let w0 = shape.pseudo.map_or(T::zero(), |p| p.weight);
    let mut spread = (T::one() - shape.focus_weight - w0) / T::from_count(n as u64);
    if spread < T::zero() {
        if spread > -T::lit(1e-14) {
            spread = T::zero();
        } else {
            return Err(Error::InvalidParameter("focus and pseudo weights exceed 1".into()));
        }
    }
    let (lo, _) = shape.family.support();
    let seed = if lo.is_finite() { lo } else { T::zero() };
    let mut observations = obs.observations().to_vec();
    observations.push(ReducedObservation::new("(free)", seed, shape.family)?);
    let extended = ComparisonSet::new(observations)?;
    let mut weights = vec![spread; n + 1];
    weights[n] = shape.focus_weight;
    let row = WeightRow { focus_index: n, weights, pseudo: shape.pseudo };
    let obj = Objective::new(&row, &extended)?;

    let mut in_family: Vec<T> = obs.iter().filter(|o| o.family == shape.family).map(|o| o.statistic).collect();
    if in_family.is_empty() {
        in_family = obs.statistics().into_iter().filter(|&t| shape.family.in_support(t)).collect();
    }
    in_family.sort_by(|a, b| a.partial_cmp(b).expect("finite statistics"));
    let start = in_family.get(in_family.len() / 2).copied().unwrap_or(seed);
    Ok((obj, start))
}

/// Approximate parametric complexity shared by all comparisons, from the
/// common focus weight `w11`. Fails unless the equal weight conditions hold.
pub fn parametric_complexity_approx<T: Real>(
    space: &ParameterSpace<T>,
    obs: &ComparisonSet<T>,
    w11: T,
    settings: &NmwlSettings<T>,
) -> Result<ComplexityResult<T>> {
    check_equal_weight_conditions(obs)?;
    let shape = ApproxShape { family: obs.observations()[0].family, focus_weight: w11, pseudo: None };
    parametric_complexity_approx_shape(space, obs, &shape, settings)
}

/// Approximate parametric complexity for an explicit [`ApproxShape`].
pub fn parametric_complexity_approx_shape<T: Real>(
    space: &ParameterSpace<T>,
    obs: &ComparisonSet<T>,
    shape: &ApproxShape<T>,
    settings: &NmwlSettings<T>,
) -> Result<ComplexityResult<T>> {
    if !(shape.focus_weight > T::zero() && shape.focus_weight <= T::one()) {
        return Err(Error::InvalidParameter(format!("focus weight {} not in (0, 1]", shape.focus_weight)));
    }
    let (obj, start) = approx_objective(obs, shape)?;
    integrate_profile(obj, start, space, settings, Mode::Approximate)
}

/// Complexity of comparison `i` in either mode.
pub fn parametric_complexity<T: Real>(
    i: usize,
    space: &ParameterSpace<T>,
    row: &WeightRow<T>,
    obs: &ComparisonSet<T>,
    mode: Mode,
    settings: &NmwlSettings<T>,
) -> Result<ComplexityResult<T>> {
    match mode {
        Mode::Exact => parametric_complexity_exact(i, space, row, obs, settings),
        Mode::Approximate => {
            check_focus(i, row, obs)?;
            let shape = ApproxShape::from_row(row, obs, settings.approx_policy)?;
            parametric_complexity_approx_shape(space, obs, &shape, settings)
        }
    }
}

/// `log ḡ_i(t_i)` (exact) or `log g̃_i(t_i)` (approximate): the profile at
/// the observed data minus the log-complexity.
pub fn nmwl_log_density<T: Real>(
    i: usize,
    space: &ParameterSpace<T>,
    row: &WeightRow<T>,
    obs: &ComparisonSet<T>,
    mode: Mode,
    settings: &NmwlSettings<T>,
) -> Result<T> {
    let t = obs.get(i).ok_or(Error::DimensionMismatch { expected: obs.len(), got: i + 1 })?.statistic;
    let num = profile_log_wlik(i, t, space, row, obs, &settings.optim)?;
    let c = parametric_complexity(i, space, row, obs, mode, settings)?;
    Ok(num - c.log_complexity)
}

/// Large-sample complexity of the normal family over a bounded `Θ′`:
/// `½ log(n/2π) + log ∫_{Θ′} √I dθ` with per-observation information
/// `1/σ²`. Diagnostic only.
pub fn asymptotic_complexity_normal<T: Real>(space: &ParameterSpace<T>, n_i: u64, sigma: T) -> Result<T> {
    let ParameterSpace::BoundedInterval { lo, hi } = *space else {
        return Err(Error::InvalidParameter("asymptotic complexity needs a bounded interval".into()));
    };
    space.validate()?;
    if !(sigma > T::zero()) || n_i == 0 {
        return Err(Error::InvalidParameter("sigma and n must be positive".into()));
    }
    let n = T::from_count(n_i);
    let half = T::lit(0.5);
    Ok(half * (n / (T::lit(2.0) * T::PI())).ln() + ((hi - lo) * (T::one() / (n * sigma * sigma)).sqrt() * n.sqrt()).ln())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::weights::{null_pseudo_weights, single_observation_weights};

    fn normal_set(ts: &[f64], sigmas: &[f64]) -> ComparisonSet<f64> {
        ComparisonSet::new(
            ts.iter()
                .zip(sigmas)
                .enumerate()
                .map(|(k, (&t, &s))| ReducedObservation::new(format!("c{k}"), t, FamilyInstance::normal(s).unwrap()).unwrap())
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn singleton_null_is_a_shrunk_normal() {
        let obs = normal_set(&[1.7], &[2.0]);
        let row = null_pseudo_weights(3, 0.0).unwrap();
        let s = NmwlSettings::default();
        let space = ParameterSpace::Singleton { theta0: 0.0 };
        let got = nmwl_log_density(0, &space, &row, &obs, Mode::Exact, &s).unwrap();
        let w: f64 = 0.75;
        let sd = 2.0 / w.sqrt();
        let want = FamilyInstance::normal(sd).unwrap().log_density(0.0, 1.7).unwrap();
        assert!((got - want).abs() < 1e-9 * want.abs().max(1.0), "{got} vs {want}");
    }

    #[test]
    fn unweighted_normal_nml_diverges() {
        let obs = normal_set(&[0.4], &[1.0]);
        let row = WeightRow { focus_index: 0, weights: vec![1.0], pseudo: None };
        let r = parametric_complexity_exact(0, &ParameterSpace::FullLine, &row, &obs, &NmwlSettings::default());
        assert!(matches!(r, Err(Error::DivergentComplexity { .. })), "{r:?}");
    }

    #[test]
    fn complexity_ignores_the_focus_statistic() {
        let obs = normal_set(&[0.3, -1.0, 2.0], &[1.0, 1.5, 0.7]);
        let row = single_observation_weights(0, 1, 3).unwrap();
        let s = NmwlSettings::default();
        let a = parametric_complexity_exact(0, &ParameterSpace::FullLine, &row, &obs, &s).unwrap();
        let b = parametric_complexity_exact(0, &ParameterSpace::FullLine, &row, &obs.with_statistic(0, 5.0).unwrap(), &s).unwrap();
        assert!((a.log_complexity - b.log_complexity).abs() < 1e-8);
    }

    #[test]
    fn approx_reduces_to_exact_without_incidentals() {
        let obs = normal_set(&[0.9], &[1.0]);
        let row = null_pseudo_weights(2, 0.0).unwrap();
        let s = NmwlSettings::default();
        let e = parametric_complexity(0, &ParameterSpace::FullLine, &row, &obs, Mode::Exact, &s).unwrap();
        let a = parametric_complexity(0, &ParameterSpace::FullLine, &row, &obs, Mode::Approximate, &s).unwrap();
        assert!((e.log_complexity - a.log_complexity).abs() < 1e-8);
    }

    #[test]
    fn strict_approx_rejects_unequal_families() {
        let obs = normal_set(&[0.9, 0.2], &[1.0, 2.0]);
        let r = parametric_complexity_approx(&ParameterSpace::FullLine, &obs, 0.5, &NmwlSettings::default());
        assert!(matches!(r, Err(Error::EqualWeightViolation(_))));
    }

    #[test]
    fn asymptotic_formula() {
        let s = ParameterSpace::BoundedInterval { lo: 0.0, hi: 1.0 };
        let a = asymptotic_complexity_normal(&s, 1, 1.0).unwrap();
        assert!((a + 0.5 * (2.0 * std::f64::consts::PI).ln()).abs() < 1e-15);
        let b = asymptotic_complexity_normal(&ParameterSpace::BoundedInterval { lo: 0.0, hi: 2.0 }, 1, 1.0).unwrap();
        assert!((b - a - 2f64.ln()).abs() < 1e-15);
    }
}
