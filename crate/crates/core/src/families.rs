//! Reduced-statistic sampling families `g_θ` and the comparison data built on
//! them.
//!
//! Two families are bundled:
//!
//! * [`FamilyInstance::NormalKnownScale`]: `t ~ N(θ, σ²)`, `θ ∈ ℝ`.
//! * [`FamilyInstance::FoldedNoncentralT`]: `t = |T|` for the equal-variance
//!   two-sample t statistic of groups of size `m` and `n`, where `θ ≥ 0` is the
//!   absolute inverse coefficient of variation and the noncentrality is
//!   `θ / √(1/m + 1/n)`.

use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};

use rand::Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::noncentral_t;
use crate::quadrature::{integrate_log, Tolerance};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FamilyKind {
    NormalKnownScale,
    FoldedNoncentralT,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FamilyInstance<T> {
    NormalKnownScale { scale: T },
    FoldedNoncentralT { m: u32, n: u32 },
}

impl<T: Real> FamilyInstance<T> {
    pub fn normal(scale: T) -> Result<Self> {
        let f = FamilyInstance::NormalKnownScale { scale };
        f.validate()?;
        Ok(f)
    }

    pub fn folded_t(m: u32, n: u32) -> Result<Self> {
        let f = FamilyInstance::FoldedNoncentralT { m, n };
        f.validate()?;
        Ok(f)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            FamilyInstance::NormalKnownScale { scale } if !(scale > T::zero() && scale.is_finite()) => {
                Err(Error::InvalidParameter(format!("scale must be positive and finite, got {}", scale)))
            }
            FamilyInstance::FoldedNoncentralT { m, n } if m < 2 || n < 2 => {
                Err(Error::InvalidParameter(format!("group sizes must be >= 2, got m={m}, n={n}")))
            }
            _ => Ok(()),
        }
    }

    pub fn kind(&self) -> FamilyKind {
        match self {
            FamilyInstance::NormalKnownScale { .. } => FamilyKind::NormalKnownScale,
            FamilyInstance::FoldedNoncentralT { .. } => FamilyKind::FoldedNoncentralT,
        }
    }

    /// Closed support of the statistic.
    pub fn support(&self) -> (T, T) {
        match self {
            FamilyInstance::NormalKnownScale { .. } => (T::neg_infinity(), T::infinity()),
            FamilyInstance::FoldedNoncentralT { .. } => (T::zero(), T::infinity()),
        }
    }

    /// Closed parameter space `Θ`.
    pub fn parameter_domain(&self) -> (T, T) {
        match self {
            FamilyInstance::NormalKnownScale { .. } => (T::neg_infinity(), T::infinity()),
            FamilyInstance::FoldedNoncentralT { .. } => (T::zero(), T::infinity()),
        }
    }

    /// Degrees of freedom `m + n − 2` of the folded t family.
    pub fn df(&self) -> Option<T> {
        match *self {
            FamilyInstance::FoldedNoncentralT { m, n } => Some(T::from_count(u64::from(m) + u64::from(n) - 2)),
            _ => None,
        }
    }

    /// Default sample size behind one statistic: 1 for a pre-reduced normal
    /// estimate, `m + n` for a two-sample t statistic.
    pub fn default_sample_size(&self) -> u64 {
        match *self {
            FamilyInstance::NormalKnownScale { .. } => 1,
            FamilyInstance::FoldedNoncentralT { m, n } => u64::from(m) + u64::from(n),
        }
    }

    /// Natural length scale of `θ`, used to size optimizer steps.
    pub fn theta_scale(&self) -> T {
        match *self {
            FamilyInstance::NormalKnownScale { scale } => scale,
            FamilyInstance::FoldedNoncentralT { m, n } => group_factor::<T>(m, n),
        }
    }

    /// Natural length scale of the statistic.
    pub fn statistic_scale(&self) -> T {
        match *self {
            FamilyInstance::NormalKnownScale { scale } => scale,
            FamilyInstance::FoldedNoncentralT { .. } => T::one(),
        }
    }

    fn check_theta(&self, theta: T) -> Result<()> {
        let (lo, hi) = self.parameter_domain();
        if theta.is_nan() || theta < lo || theta > hi || theta.is_infinite() {
            return Err(Error::InvalidParameter(format!("theta = {} outside the parameter space", theta)));
        }
        Ok(())
    }

    pub fn in_support(&self, t: T) -> bool {
        let (lo, hi) = self.support();
        t >= lo && t <= hi && t.is_finite()
    }

    /// Noncentrality `(1/m + 1/n)^{-1/2} θ` of the folded t family.
    pub fn noncentrality(&self, theta: T) -> Result<T> {
        match *self {
            FamilyInstance::FoldedNoncentralT { m, n } => {
                self.check_theta(theta)?;
                Ok(theta / group_factor::<T>(m, n))
            }
            _ => Err(Error::InvalidParameter("noncentrality is defined for the folded t family only".into())),
        }
    }

    /// Maps a noncentrality back to `θ`.
    pub fn theta_from_noncentrality(&self, ncp: T) -> Option<T> {
        match *self {
            FamilyInstance::FoldedNoncentralT { m, n } => Some(ncp * group_factor::<T>(m, n)),
            _ => None,
        }
    }

    /// `log g_θ(t)`.
    pub fn log_density(&self, theta: T, t: T) -> Result<T> {
        self.check_theta(theta)?;
        if !self.in_support(t) {
            return Err(Error::OutOfSupport { t: t.as_f64() });
        }
        match *self {
            FamilyInstance::NormalKnownScale { scale } => {
                let z = (t - theta) / scale;
                Ok(-T::lit(0.5) * z * z - scale.ln() - T::lit(0.5) * (T::lit(2.0) * T::PI()).ln())
            }
            FamilyInstance::FoldedNoncentralT { m, n } => {
                let df = self.df().expect("folded family");
                noncentral_t::folded_log_pdf(t, df, theta / group_factor::<T>(m, n))
            }
        }
    }

    /// `E[T]` under `θ`, the null pseudo-statistic when `θ = θ₀`.
    pub fn mean(&self, theta: T) -> Result<T> {
        self.check_theta(theta)?;
        match *self {
            FamilyInstance::NormalKnownScale { .. } => Ok(theta),
            FamilyInstance::FoldedNoncentralT { m, n } => {
                noncentral_t::folded_mean(self.df().expect("folded family"), theta / group_factor::<T>(m, n))
            }
        }
    }

    /// Draws one statistic from `g_θ`.
    pub fn sample<R: Rng + ?Sized>(&self, theta: T, rng: &mut R) -> Result<T> {
        self.check_theta(theta)?;
        let z: f64 = rng.sample(StandardNormal);
        match *self {
            FamilyInstance::NormalKnownScale { scale } => Ok(theta + scale * T::lit(z)),
            FamilyInstance::FoldedNoncentralT { m, n } => {
                let df = f64::from(m + n - 2);
                let v = ChiSquared::new(df).expect("df >= 2").sample(rng);
                let ncp = (theta / group_factor::<T>(m, n)).as_f64();
                Ok(T::lit(((z + ncp) / (v / df).sqrt()).abs()))
            }
        }
    }

    /// `P(T ≤ t)` under `θ`; folded t uses adaptive quadrature of the density.
    pub fn cdf(&self, theta: T, t: T) -> Result<T> {
        self.check_theta(theta)?;
        match *self {
            FamilyInstance::NormalKnownScale { scale } => Ok(((t - theta) / scale).norm_cdf()),
            FamilyInstance::FoldedNoncentralT { .. } => {
                if t <= T::zero() {
                    return Ok(T::zero());
                }
                let tol = Tolerance {
                    rel_tol: T::lit(1e-10_f64.max(T::TOL_FLOOR * 10.0)),
                    abs_tol: T::lit(1e-14_f64.max(T::TOL_FLOOR)),
                    log_abs_floor: T::neg_infinity(),
                    max_subdivisions: 2000,
                };
                let r = integrate_log(|x| self.log_density(theta, x), T::zero(), t, &[], &tol)?;
                Ok(r.log_value.exp().min(T::one()))
            }
        }
    }

    /// Inverse CDF, by bisection for the folded t family.
    pub fn quantile(&self, theta: T, p: T) -> Result<T> {
        if !(p > T::zero() && p < T::one()) {
            return Err(Error::InvalidParameter(format!("probability {} not in (0, 1)", p)));
        }
        match *self {
            FamilyInstance::NormalKnownScale { scale } => {
                self.check_theta(theta)?;
                let z = -std::f64::consts::SQRT_2 * statrs::function::erf::erfc_inv(2.0 * p.as_f64());
                Ok(theta + scale * T::lit(z))
            }
            FamilyInstance::FoldedNoncentralT { .. } => {
                let mut hi = self.mean(theta)?.max(T::one());
                while self.cdf(theta, hi)? < p {
                    hi = hi * T::lit(2.0);
                    if hi > T::lit(1e12) {
                        return Err(Error::NumericalFailure("quantile bracket overflow".into()));
                    }
                }
                let mut lo = T::zero();
                for _ in 0..200 {
                    let mid = (lo + hi) * T::lit(0.5);
                    if self.cdf(theta, mid)? < p {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                    if hi - lo <= T::lit(1e-12) * hi.max(T::one()) {
                        break;
                    }
                }
                Ok((lo + hi) * T::lit(0.5))
            }
        }
    }
}

fn group_factor<T: Real>(m: u32, n: u32) -> T {
    (T::one() / T::from_count(u64::from(m)) + T::one() / T::from_count(u64::from(n))).sqrt()
}

/// One comparison: a reduced statistic `t_i`, the sample size `n_i` behind it
/// and its sampling family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReducedObservation<T> {
    pub id: String,
    pub statistic: T,
    pub sample_size: u64,
    pub family: FamilyInstance<T>,
}

impl<T: Real> ReducedObservation<T> {
    /// Builds an observation with the family's default sample size.
    pub fn new(id: impl Into<String>, statistic: T, family: FamilyInstance<T>) -> Result<Self> {
        let obs = ReducedObservation { id: id.into(), statistic, sample_size: family.default_sample_size(), family };
        obs.validate()?;
        Ok(obs)
    }

    pub fn with_sample_size(mut self, sample_size: u64) -> Result<Self> {
        self.sample_size = sample_size;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        self.family.validate()?;
        if !self.family.in_support(self.statistic) {
            return Err(Error::OutOfSupport { t: self.statistic.as_f64() });
        }
        if self.sample_size < 1 {
            return Err(Error::InvalidParameter("sample size must be >= 1".into()));
        }
        Ok(())
    }
}

/// The statistics `t_1..t_N` of `N` simultaneous comparisons.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ComparisonSet<T> {
    observations: Vec<ReducedObservation<T>>,
}

impl<T: Real> ComparisonSet<T> {
    pub fn new(observations: Vec<ReducedObservation<T>>) -> Result<Self> {
        if observations.is_empty() {
            return Err(Error::InvalidArity { required: 1, got: 0 });
        }
        for o in &observations {
            o.validate()?;
        }
        Ok(ComparisonSet { observations })
    }

    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }

    pub fn get(&self, i: usize) -> Option<&ReducedObservation<T>> {
        self.observations.get(i)
    }

    pub fn iter(&self) -> impl Iterator<Item = &ReducedObservation<T>> {
        self.observations.iter()
    }

    pub fn observations(&self) -> &[ReducedObservation<T>] {
        &self.observations
    }

    pub fn statistics(&self) -> Vec<T> {
        self.observations.iter().map(|o| o.statistic).collect()
    }

    /// `t_i(t)`: the set with the `i`-th statistic replaced by `t`.
    pub fn with_statistic(&self, i: usize, t: T) -> Result<Self> {
        let mut out = self.clone();
        let o = out.observations.get_mut(i).ok_or(Error::DimensionMismatch { expected: self.len(), got: i + 1 })?;
        if !o.family.in_support(t) {
            return Err(Error::OutOfSupport { t: t.as_f64() });
        }
        o.statistic = t;
        Ok(out)
    }

    /// Hash of the data, optionally ignoring the statistic at `skip`.
    ///
    /// Normalizing integrals substitute over the focus statistic, so they are
    /// keyed on everything else.
    pub fn content_hash(&self, skip: Option<usize>) -> u64 {
        let mut h = DefaultHasher::new();
        self.observations.len().hash(&mut h);
        for (j, o) in self.observations.iter().enumerate() {
            if Some(j) != skip {
                o.statistic.as_f64().to_bits().hash(&mut h);
            }
            o.sample_size.hash(&mut h);
            match o.family {
                FamilyInstance::NormalKnownScale { scale } => (0u8, scale.as_f64().to_bits()).hash(&mut h),
                FamilyInstance::FoldedNoncentralT { m, n } => (1u8, m, n).hash(&mut h),
            }
        }
        h.finish()
    }
}

/// `E[T]` under `θ₀`, used as the pseudo-statistic standing in for
/// incidental data.
pub fn null_pseudo_statistic<T: Real>(family: &FamilyInstance<T>, theta0: T) -> Result<T> {
    family.mean(theta0)
}

/// Reduces two groups to the absolute equal-variance two-sample t statistic.
pub fn reduce_two_sample<T: Real>(id: impl Into<String>, x: &[T], y: &[T]) -> Result<ReducedObservation<T>> {
    let (m, n) = (x.len(), y.len());
    if m < 2 || n < 2 {
        return Err(Error::InvalidParameter(format!("each group needs at least 2 values, got m={m}, n={n}")));
    }
    let mean = |v: &[T]| v.iter().copied().sum::<T>() / T::from_count(v.len() as u64);
    let (mx, my) = (mean(x), mean(y));
    let ss = |v: &[T], c: T| v.iter().map(|&a| (a - c) * (a - c)).sum::<T>();
    let df = T::from_count((m + n - 2) as u64);
    let pooled = (ss(x, mx) + ss(y, my)) / df;
    if !(pooled > T::zero()) {
        return Err(Error::DegenerateVariance);
    }
    let se = (pooled * (T::one() / T::from_count(m as u64) + T::one() / T::from_count(n as u64))).sqrt();
    let family = FamilyInstance::folded_t(m as u32, n as u32)?;
    ReducedObservation::new(id, ((mx - my) / se).abs(), family)
}
