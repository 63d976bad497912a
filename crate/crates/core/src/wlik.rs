//! Weighted log-likelihood `log L̄_i(θ; t) = Σ_j w_ij log g_{θ,j}(t_j)` and
//! its maximizer over a hypothesis set.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::families::{ComparisonSet, FamilyInstance};
use crate::optimize::{maximize, Settings};
use crate::scalar::Real;
use crate::weights::{validate_weights, WeightRow};

/// Hypothesis set `Θ′ ⊆ Θ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum ParameterSpace<T> {
    FullLine,
    HalfLineNonneg,
    Singleton {
        theta0: T,
    },
    /// `Θ ∖ {excluded}`; optimized and integrated as its closure.
    Punctured {
        excluded: T,
    },
    BoundedInterval {
        lo: T,
        hi: T,
    },
}

impl<T: Real> ParameterSpace<T> {
    pub fn validate(&self) -> Result<()> {
        match *self {
            ParameterSpace::Singleton { theta0: x } | ParameterSpace::Punctured { excluded: x } if !x.is_finite() => {
                Err(Error::InvalidParameter(format!("point {} must be finite", x)))
            }
            ParameterSpace::BoundedInterval { lo, hi } if !(lo < hi && lo.is_finite() && hi.is_finite()) => {
                Err(Error::InvalidParameter(format!("interval [{}, {}] must satisfy lo < hi", lo, hi)))
            }
            _ => Ok(()),
        }
    }

    /// Closed bounds of the space intersected with the family's `Θ`.
    pub fn bounds(&self, family: &FamilyInstance<T>) -> Result<(T, T)> {
        self.validate()?;
        let (flo, fhi) = family.parameter_domain();
        let (lo, hi) = match *self {
            ParameterSpace::FullLine | ParameterSpace::Punctured { .. } => (flo, fhi),
            ParameterSpace::HalfLineNonneg => (T::zero(), fhi),
            ParameterSpace::Singleton { theta0 } => (theta0, theta0),
            ParameterSpace::BoundedInterval { lo, hi } => (lo, hi),
        };
        let (lo, hi) = (lo.max(flo), hi.min(fhi));
        if lo > hi {
            return Err(Error::InvalidParameter(format!("{} does not meet the family's parameter space", self.label())));
        }
        Ok((lo, hi))
    }

    /// Stable text form, used in report labels and cache keys.
    pub fn label(&self) -> String {
        match self {
            ParameterSpace::FullLine => "full_line".into(),
            ParameterSpace::HalfLineNonneg => "half_line_nonneg".into(),
            ParameterSpace::Singleton { theta0 } => format!("singleton({:e})", theta0.as_f64()),
            ParameterSpace::Punctured { excluded } => format!("punctured({:e})", excluded.as_f64()),
            ParameterSpace::BoundedInterval { lo, hi } => format!("interval({:e},{:e})", lo.as_f64(), hi.as_f64()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, bound = "T: Real")]
pub struct OptimConfig<T> {
    /// Absolute tolerance on `θ̂`.
    pub theta_tol: T,
    pub max_expansions: usize,
    pub grid_points: usize,
    /// Use the exact quadratic maximizer when every term is normal.
    pub normal_closed_form: bool,
}

impl<T: Real> Default for OptimConfig<T> {
    fn default() -> Self {
        OptimConfig { theta_tol: T::lit(1e-9), max_expansions: 60, grid_points: 33, normal_closed_form: true }
    }
}

impl<T: Real> OptimConfig<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.theta_tol > T::zero()) || self.max_expansions == 0 {
            return Err(Error::InvalidConfig("theta_tol and max_expansions must be positive".into()));
        }
        Ok(())
    }

    fn settings(&self) -> Settings<T> {
        Settings { tol: self.theta_tol, max_expansions: self.max_expansions, grid_points: self.grid_points, restart_margin: T::lit(1e-9) }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightedMleResult<T> {
    pub theta_hat: T,
    pub max_log_wlik: T,
    pub at_boundary: bool,
    pub iterations: usize,
}

#[derive(Debug, Clone, Copy)]
struct Term<T> {
    weight: T,
    family: FamilyInstance<T>,
    t: T,
}

/// The weighted log-likelihood of one row as a function of `θ`, with the
/// focus statistic replaceable in place. Zero-weight terms are dropped.
#[derive(Debug, Clone)]
pub(crate) struct Objective<T> {
    terms: Vec<Term<T>>,
    focus: usize,
}

impl<T: Real> Objective<T> {
    pub(crate) fn new(row: &WeightRow<T>, obs: &ComparisonSet<T>) -> Result<Self> {
        if row.len() != obs.len() {
            return Err(Error::DimensionMismatch { expected: obs.len(), got: row.len() });
        }
        let violations = validate_weights(row);
        if !violations.is_empty() {
            return Err(Error::InvalidWeights(violations));
        }
        let focus_family = obs.observations()[row.focus_index].family;
        let mut terms = Vec::with_capacity(obs.len() + 1);
        let mut focus = 0;
        for (j, (o, &w)) in obs.iter().zip(&row.weights).enumerate() {
            if j == row.focus_index {
                focus = terms.len();
                terms.push(Term { weight: w, family: o.family, t: o.statistic });
            } else if w > T::zero() {
                terms.push(Term { weight: w, family: o.family, t: o.statistic });
            }
        }
        if let Some(p) = row.pseudo {
            if !focus_family.in_support(p.statistic) {
                return Err(Error::OutOfSupport { t: p.statistic.as_f64() });
            }
            if p.weight > T::zero() {
                terms.push(Term { weight: p.weight, family: focus_family, t: p.statistic });
            }
        }
        Ok(Objective { terms, focus })
    }

    pub(crate) fn focus_family(&self) -> FamilyInstance<T> {
        self.terms[self.focus].family
    }

    pub(crate) fn focus_weight(&self) -> T {
        self.terms[self.focus].weight
    }

    pub(crate) fn set_focus_statistic(&mut self, t: T) {
        self.terms[self.focus].t = t;
    }

    pub(crate) fn eval(&self, theta: T) -> Result<T> {
        let mut s = T::zero();
        for term in &self.terms {
            if term.weight > T::zero() {
                s = s + term.weight * term.family.log_density(theta, term.t)?;
            }
        }
        Ok(s)
    }

    fn all_normal(&self) -> bool {
        self.terms.iter().all(|t| matches!(t.family, FamilyInstance::NormalKnownScale { .. }))
    }

    /// Unconstrained maximizer `Σ w t/σ² / Σ w/σ²` when every term is normal.
    pub(crate) fn normal_closed_form(&self) -> Option<T> {
        let mut num = T::zero();
        let mut den = T::zero();
        for term in &self.terms {
            match term.family {
                FamilyInstance::NormalKnownScale { scale } => {
                    let p = term.weight / (scale * scale);
                    num = num + p * term.t;
                    den = den + p;
                }
                _ => return None,
            }
        }
        Some(num / den)
    }

    /// Weighted mean of the statistics of every other term in the focus
    /// family's kind; independent of the focus statistic.
    pub(crate) fn non_focus_center(&self) -> Option<T> {
        let kind = self.focus_family().kind();
        let mut num = T::zero();
        let mut den = T::zero();
        for (k, term) in self.terms.iter().enumerate() {
            if k != self.focus && term.family.kind() == kind {
                num = num + term.weight * term.t;
                den = den + term.weight;
            }
        }
        (den > T::zero()).then(|| num / den)
    }

    /// Moment-type starting value: weighted mean of per-term `θ` estimates.
    fn moment_start(&self) -> T {
        let mut num = T::zero();
        let mut den = T::zero();
        for term in &self.terms {
            let est = match term.family {
                FamilyInstance::NormalKnownScale { .. } => term.t,
                f => f.theta_from_noncentrality(term.t).unwrap_or(term.t),
            };
            num = num + term.weight * est;
            den = den + term.weight;
        }
        num / den
    }

    pub(crate) fn maximize(&self, space: &ParameterSpace<T>, optim: &OptimConfig<T>, start: Option<T>) -> Result<WeightedMleResult<T>> {
        let family = self.focus_family();
        let (lo, hi) = space.bounds(&family)?;
        if lo == hi {
            return Ok(WeightedMleResult { theta_hat: lo, max_log_wlik: self.eval(lo)?, at_boundary: false, iterations: 0 });
        }
        let excluded = match *space {
            ParameterSpace::Punctured { excluded } => Some(excluded),
            _ => None,
        };
        let boundary = |x: T| x == lo || x == hi || Some(x) == excluded;
        if optim.normal_closed_form && self.all_normal() {
            let x = self.normal_closed_form().expect("normal terms").max(lo).min(hi);
            return Ok(WeightedMleResult { theta_hat: x, max_log_wlik: self.eval(x)?, at_boundary: boundary(x), iterations: 0 });
        }
        let start = start.filter(|s| s.is_finite()).unwrap_or_else(|| self.moment_start());
        let step = family.theta_scale() * T::lit(0.5);
        let o = maximize(|th| self.eval(th), lo, hi, start, step, &optim.settings())?;
        let mut x = o.x;
        let mut fx = o.fx;
        if let Some(e) = excluded {
            if e >= lo && e <= hi && (x - e).abs() <= T::lit(4.0) * optim.theta_tol {
                let fe = self.eval(e)?;
                if fe >= fx {
                    x = e;
                    fx = fe;
                }
            }
        }
        Ok(WeightedMleResult { theta_hat: x, max_log_wlik: fx, at_boundary: boundary(x), iterations: o.evaluations })
    }
}

/// `Σ_j w_ij log g_θ(t_j)` plus the pseudo term; zero weights contribute
/// exactly zero.
pub fn weighted_log_likelihood<T: Real>(theta: T, row: &WeightRow<T>, obs: &ComparisonSet<T>) -> Result<T> {
    Objective::new(row, obs)?.eval(theta)
}

/// Maximum weighted likelihood estimate over the closure of `space`.
pub fn weighted_mle<T: Real>(
    space: &ParameterSpace<T>,
    row: &WeightRow<T>,
    obs: &ComparisonSet<T>,
    optim: &OptimConfig<T>,
) -> Result<WeightedMleResult<T>> {
    optim.validate()?;
    Objective::new(row, obs)?.maximize(space, optim, None)
}

/// `Σ w t/σ² / Σ w/σ²` over the full line, pseudo term included.
pub fn weighted_mle_normal_closed_form<T: Real>(row: &WeightRow<T>, obs: &ComparisonSet<T>) -> Result<T> {
    Objective::new(row, obs)?.normal_closed_form().ok_or(Error::WrongFamily)
}
