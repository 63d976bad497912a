//! Likelihood weight rows `w_i = (w_i1, …, w_iN)` with an optional
//! pseudo-statistic term.
//!
//! The constructors work in exact rational arithmetic and only round once,
//! when the row is converted to the working scalar type. Indices are 0-based.

use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

pub type Rational = Ratio<u128>;

/// Unit-sum tolerance accepted by [`validate_weights`].
pub const UNIT_SUM_TOL: f64 = 1e-12;

/// Weight on a data-independent pseudo-statistic `t₀`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PseudoTerm<T> {
    pub weight: T,
    pub statistic: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightRow<T> {
    pub focus_index: usize,
    pub weights: Vec<T>,
    pub pseudo: Option<PseudoTerm<T>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "violation", rename_all = "snake_case")]
pub enum WeightViolation {
    FocusOutOfRange { focus_index: usize, len: usize },
    Negative { index: usize },
    NegativePseudo,
    FocusDominance { index: usize },
    PseudoDominance,
    UnitSum { sum: f64 },
    PseudoIncomplete,
    NonFinite,
}

impl<T: Real> WeightRow<T> {
    /// Assembles a row from loose parts (e.g. a config file). A pseudo weight
    /// without a statistic, or vice versa, is reported as a violation.
    pub fn from_parts(
        focus_index: usize,
        weights: Vec<T>,
        pseudo_weight: Option<T>,
        pseudo_statistic: Option<T>,
    ) -> std::result::Result<Self, Vec<WeightViolation>> {
        let pseudo = match (pseudo_weight, pseudo_statistic) {
            (Some(weight), Some(statistic)) => Some(PseudoTerm { weight, statistic }),
            (None, None) => None,
            _ => return Err(vec![WeightViolation::PseudoIncomplete]),
        };
        let row = WeightRow { focus_index, weights, pseudo };
        let v = validate_weights(&row);
        if v.is_empty() {
            Ok(row)
        } else {
            Err(v)
        }
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn focus_weight(&self) -> T {
        self.weights[self.focus_index]
    }

    /// Total weight, pseudo term included.
    pub fn total(&self) -> T {
        self.weights.iter().copied().sum::<T>() + self.pseudo.map_or(T::zero(), |p| p.weight)
    }

    /// Places a single-comparison row at position `focus` of an `len`-long
    /// row, padding the incidental positions with zero weight.
    pub fn embedded(&self, focus: usize, len: usize) -> Result<Self> {
        if self.weights.len() != 1 {
            return Err(Error::DimensionMismatch { expected: 1, got: self.weights.len() });
        }
        if focus >= len {
            return Err(Error::DimensionMismatch { expected: len, got: focus + 1 });
        }
        let mut weights = vec![T::zero(); len];
        weights[focus] = self.weights[0];
        Ok(WeightRow { focus_index: focus, weights, pseudo: self.pseudo })
    }
}

/// Exact-rational form of a weight row.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExactWeightRow {
    pub focus_index: usize,
    pub weights: Vec<Rational>,
    pub pseudo_weight: Option<Rational>,
}

impl ExactWeightRow {
    pub fn total(&self) -> Rational {
        self.weights.iter().copied().fold(Rational::from_integer(0), |a, b| a + b)
            + self.pseudo_weight.unwrap_or_else(|| Rational::from_integer(0))
    }

    /// Rounds to the working precision, attaching `t₀` to the pseudo weight.
    pub fn to_row<T: Real>(&self, pseudo_statistic: Option<T>) -> WeightRow<T> {
        let pseudo = match (self.pseudo_weight, pseudo_statistic) {
            (Some(w), Some(t)) => Some(PseudoTerm { weight: rational_to(w), statistic: t }),
            _ => None,
        };
        WeightRow { focus_index: self.focus_index, weights: self.weights.iter().map(|&w| rational_to(w)).collect(), pseudo }
    }
}

fn rational_to<T: Real>(r: Rational) -> T {
    let num = T::from_u128(*r.numer()).expect("representable");
    let den = T::from_u128(*r.denom()).expect("representable");
    num / den
}

fn focus_rational(n_i: u64) -> Rational {
    Rational::from_integer(1) - Rational::new(1, u128::from(n_i) + 1)
}

/// Exact single-observation weights: `w_ii = 1 − (n_i+1)⁻¹` and
/// `w_ij = (n_i+1)⁻¹ (N−1)⁻¹` for `j ≠ i`, so all incidental comparisons
/// together weigh as much as one observation of the focus sample.
pub fn single_observation_weights_exact(i: usize, n_i: u64, n_comparisons: usize) -> Result<ExactWeightRow> {
    if n_comparisons < 2 {
        return Err(Error::InvalidArity { required: 2, got: n_comparisons });
    }
    check_focus(i, n_i, n_comparisons)?;
    let off = Rational::new(1, (u128::from(n_i) + 1) * (n_comparisons as u128 - 1));
    let mut weights = vec![off; n_comparisons];
    weights[i] = focus_rational(n_i);
    Ok(ExactWeightRow { focus_index: i, weights, pseudo_weight: None })
}

pub fn single_observation_weights<T: Real>(i: usize, n_i: u64, n_comparisons: usize) -> Result<WeightRow<T>> {
    Ok(single_observation_weights_exact(i, n_i, n_comparisons)?.to_row(None))
}

/// Single comparison supplemented by a pseudo-statistic `t₀` carrying the
/// weight of one observation: `(1 − (n₁+1)⁻¹)` on `t₁`, `(n₁+1)⁻¹` on `t₀`.
pub fn null_pseudo_weights_exact(n_1: u64) -> Result<ExactWeightRow> {
    check_focus(0, n_1, 1)?;
    Ok(ExactWeightRow { focus_index: 0, weights: vec![focus_rational(n_1)], pseudo_weight: Some(Rational::new(1, u128::from(n_1) + 1)) })
}

pub fn null_pseudo_weights<T: Real>(n_1: u64, t0: T) -> Result<WeightRow<T>> {
    Ok(null_pseudo_weights_exact(n_1)?.to_row(Some(t0)))
}

/// The pseudo-statistic and each of the `N − 1` incidental statistics get
/// `(n_i+1)⁻¹ N⁻¹`; the focus keeps `1 − (n_i+1)⁻¹`.
pub fn blended_weights_exact(i: usize, n_i: u64, n_comparisons: usize) -> Result<ExactWeightRow> {
    if n_comparisons < 1 {
        return Err(Error::InvalidArity { required: 1, got: n_comparisons });
    }
    check_focus(i, n_i, n_comparisons)?;
    let off = Rational::new(1, (u128::from(n_i) + 1) * n_comparisons as u128);
    let mut weights = vec![off; n_comparisons];
    weights[i] = focus_rational(n_i);
    Ok(ExactWeightRow { focus_index: i, weights, pseudo_weight: Some(off) })
}

pub fn blended_weights<T: Real>(i: usize, n_i: u64, n_comparisons: usize, t0: T) -> Result<WeightRow<T>> {
    Ok(blended_weights_exact(i, n_i, n_comparisons)?.to_row(Some(t0)))
}

fn check_focus(i: usize, n_i: u64, n: usize) -> Result<()> {
    if i >= n {
        return Err(Error::DimensionMismatch { expected: n, got: i + 1 });
    }
    if n_i < 1 {
        return Err(Error::InvalidParameter("sample size must be >= 1".into()));
    }
    Ok(())
}

/// Lists every violated constraint: non-negativity, focus dominance
/// (`w_ii ≥ w_ij`, pseudo weight included) and unit sum within
/// [`UNIT_SUM_TOL`].
pub fn validate_weights<T: Real>(row: &WeightRow<T>) -> Vec<WeightViolation> {
    let mut out = Vec::new();
    let all_finite =
        row.weights.iter().all(|w| w.is_finite()) && row.pseudo.is_none_or(|p| p.weight.is_finite() && p.statistic.is_finite());
    if !all_finite {
        out.push(WeightViolation::NonFinite);
        return out;
    }
    if row.focus_index >= row.weights.len() {
        out.push(WeightViolation::FocusOutOfRange { focus_index: row.focus_index, len: row.weights.len() });
        return out;
    }
    let focus = row.weights[row.focus_index];
    for (j, &w) in row.weights.iter().enumerate() {
        if w < T::zero() {
            out.push(WeightViolation::Negative { index: j });
        }
        if j != row.focus_index && w > focus {
            out.push(WeightViolation::FocusDominance { index: j });
        }
    }
    if let Some(p) = row.pseudo {
        if p.weight < T::zero() {
            out.push(WeightViolation::NegativePseudo);
        }
        if p.weight > focus {
            out.push(WeightViolation::PseudoDominance);
        }
    }
    let sum = row.total();
    if (sum - T::one()).abs().as_f64() > UNIT_SUM_TOL {
        out.push(WeightViolation::UnitSum { sum: sum.as_f64() });
    }
    out
}
