//! Noncentral Student-t densities, plain and folded at zero.
//!
//! Two independent evaluation routes are provided:
//!
//! * a Poisson-mixture style power series in `z = tδ√2/√(ν+t²)`, summed
//!   outward from its largest term so nothing overflows for large `δ`;
//! * direct quadrature of the defining integral
//!   `f(t) = ∫₀^∞ s φ(ts − δ) p_S(s) ds`, with `S = √(χ²_ν/ν)`.
//!
//! Folding `|T|` cancels the odd series terms, so the folded series has only
//! positive terms for every `t ≥ 0`. The signed density uses the series when
//! `tδ ≥ 0` and falls back to quadrature otherwise, where the series
//! alternates. Both switch to quadrature for `|δ| > 37`.

use crate::error::{Error, Result};
use crate::quadrature::{integrate_log_windowed, WindowOptions};
use crate::scalar::{log_add_exp, Real};

const MAX_TERMS: usize = 1_000_000;
/// Largest admissible index of the peak term. Only `O(√peak)` terms around
/// it are summed, so this bounds `|tδ|` rather than the work.
const MAX_PEAK: usize = 1 << 44;

fn check_df<T: Real>(df: T) -> Result<()> {
    if !(df >= T::one()) || !df.is_finite() {
        return Err(Error::InvalidParameter(format!("degrees of freedom must be >= 1, got {}", df)));
    }
    Ok(())
}

/// `log Σ_k z^j Γ((ν+j+1)/2) / j!` with `j = step·k` and `z ≥ 0`: all powers
/// for `step = 1`, even powers only for `step = 2`.
fn log_series<T: Real>(df: T, z: T, step: usize) -> Result<T> {
    let half = T::lit(0.5);
    let base = |k: usize| -> T {
        let j = T::from_count((step * k) as u64);
        ((df + j + T::one()) * half).lgamma() - (j + T::one()).lgamma() + if k == 0 { T::zero() } else { j * z.ln() }
    };
    if z == T::zero() {
        return Ok(base(0));
    }
    // ratio of consecutive terms in k
    let ratio = |k: usize| -> T {
        if step == 2 {
            let j = T::from_count((2 * k) as u64);
            (df + j + T::one()) * half * z * z / ((j + T::one()) * (j + T::lit(2.0)))
        } else {
            let j = T::from_count(k as u64);
            let x = (df + j + T::one()) * half;
            ((x + half).lgamma() - x.lgamma()).exp() * z / (j + T::one())
        }
    };
    // Largest term: first k with ratio(k) < 1. Ratios decrease in k.
    let (mut lo, mut hi) = (0usize, 1usize);
    while ratio(hi) >= T::one() {
        lo = hi;
        hi *= 2;
        if hi > MAX_PEAK {
            return Err(Error::NumericalFailure("noncentral t series peak out of range".into()));
        }
    }
    if ratio(lo) < T::one() {
        hi = lo;
    }
    while hi - lo > 1 {
        let mid = (lo + hi) / 2;
        if ratio(mid) >= T::one() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let peak = hi;
    let eps = T::lit(T::TOL_FLOOR * 0.1);
    let mut sum = T::one();
    // forward
    let mut term = T::one();
    let mut k = peak;
    loop {
        let r = ratio(k);
        term = term * r;
        sum = sum + term;
        k += 1;
        if r < T::one() && term * r / (T::one() - r) < eps * sum {
            break;
        }
        if k - peak > MAX_TERMS {
            return Err(Error::NumericalFailure("noncentral t series did not converge".into()));
        }
    }
    // backward
    let mut term = T::one();
    let mut k = peak;
    while k > 0 {
        k -= 1;
        term = term / ratio(k);
        sum = sum + term;
        if term < eps * sum {
            break;
        }
    }
    let out = base(peak) + sum.ln();
    if out.is_finite() {
        Ok(out)
    } else {
        Err(Error::NumericalFailure("noncentral t series overflow".into()))
    }
}

fn log_prefactor<T: Real>(t: T, df: T, ncp: T) -> T {
    let half = T::lit(0.5);
    half * df * df.ln() - half * ncp * ncp - half * T::PI().ln() - (half * df).lgamma() - half * (df + T::one()) * (df + t * t).ln()
}

fn series_argument<T: Real>(t: T, df: T, ncp: T) -> T {
    (t * ncp).abs() * T::SQRT_2() / (df + t * t).sqrt()
}

/// `log f_{|T|}(t)` via the even-power series. `t ≥ 0`.
pub fn folded_log_pdf_series<T: Real>(t: T, df: T, ncp: T) -> Result<T> {
    check_df(df)?;
    if t < T::zero() {
        return Err(Error::OutOfSupport { t: t.as_f64() });
    }
    let z = series_argument(t, df, ncp);
    Ok(T::LN_2() + log_prefactor(t, df, ncp) + log_series(df, z, 2)?)
}

/// `log f_T(t)` via the series; valid only when `tδ ≥ 0`.
fn log_pdf_series<T: Real>(t: T, df: T, ncp: T) -> Result<T> {
    let z = series_argument(t, df, ncp);
    Ok(log_prefactor(t, df, ncp) + log_series(df, z, 1)?)
}

fn log_scale_density<T: Real>(s: T, df: T) -> T {
    let half = T::lit(0.5);
    let v = df * s * s;
    (T::lit(2.0) * df).ln() + s.ln() + (half * df - T::one()) * v.ln() - half * v - half * df * T::LN_2() - (half * df).lgamma()
}

fn log_phi<T: Real>(x: T) -> T {
    -T::lit(0.5) * x * x - T::lit(0.5) * (T::lit(2.0) * T::PI()).ln()
}

/// Integrates `s·exp(inner(s))·p_S(s)` over `s > 0`. The window starts at
/// the precision-weighted blend of the two peaks: `φ(ts − δ)` has precision
/// `t²` around `δ/t`, and `p_S` roughly `2ν` around 1.
fn scale_integral<T: Real, F: Fn(T) -> T>(t: T, df: T, ncp: T, inner: F) -> Result<T> {
    let opts = WindowOptions {
        rel_tol: T::lit(1e-12_f64.max(T::TOL_FLOOR * 10.0)),
        abs_tol: T::lit(1e-300_f64.max(T::TOL_FLOOR * 1e-3)),
        truncation_mass: T::lit(1e-15_f64.max(T::TOL_FLOOR)),
        max_subdivisions: 4000,
        divergence_run: 6,
        max_doublings: 200,
    };
    let h = |s: T| -> Result<T> {
        if s <= T::zero() {
            return Ok(T::neg_infinity());
        }
        Ok(s.ln() + inner(s) + log_scale_density(s, df))
    };
    let two_df = T::lit(2.0) * df;
    let precision = t * t + two_df;
    let width = (T::lit(4.0) / precision.sqrt()).min(T::lit(0.99));
    let center = ((t * ncp + two_df) / precision).max(width);
    integrate_log_windowed(h, T::zero(), T::infinity(), center, width, &opts).map(|r| r.log_value)
}

/// `log f_T(t)` by quadrature of the defining integral.
pub fn log_pdf_quadrature<T: Real>(t: T, df: T, ncp: T) -> Result<T> {
    check_df(df)?;
    scale_integral(t, df, ncp, |s| log_phi(t * s - ncp))
}

/// `log f_{|T|}(t)` by quadrature of the defining integral. `t ≥ 0`.
pub fn folded_log_pdf_quadrature<T: Real>(t: T, df: T, ncp: T) -> Result<T> {
    check_df(df)?;
    if t < T::zero() {
        return Err(Error::OutOfSupport { t: t.as_f64() });
    }
    scale_integral(t, df, ncp.abs(), |s| log_add_exp(log_phi(t * s - ncp), log_phi(t * s + ncp)))
}

/// Beyond this `|δ|` the series loses digits to cancellation between terms
/// of size `δ²/2`, so quadrature takes over.
pub const SERIES_MAX_NCP: f64 = 37.0;

/// `log f_T(t; ν, δ)` for the signed noncentral t.
pub fn log_pdf<T: Real>(t: T, df: T, ncp: T) -> Result<T> {
    check_df(df)?;
    if t * ncp >= T::zero() && ncp.abs() <= T::lit(SERIES_MAX_NCP) {
        match log_pdf_series(t, df, ncp) {
            Ok(v) => return Ok(v),
            Err(Error::NumericalFailure(_)) => {}
            Err(e) => return Err(e),
        }
    }
    log_pdf_quadrature(t, df, ncp)
}

/// `log (f_T(t) + f_T(−t))`, the density of `|T|` at `t ≥ 0`.
///
/// Uses the series for `|δ| ≤ 37` and quadrature beyond; each route falls
/// back to the other if it fails.
pub fn folded_log_pdf<T: Real>(t: T, df: T, ncp: T) -> Result<T> {
    type Route<T> = fn(T, T, T) -> Result<T>;
    let (first, second): (Route<T>, Route<T>) = if ncp.abs() <= T::lit(SERIES_MAX_NCP) {
        (folded_log_pdf_series, folded_log_pdf_quadrature)
    } else {
        (folded_log_pdf_quadrature, folded_log_pdf_series)
    };
    match first(t, df, ncp) {
        Err(Error::NumericalFailure(_)) => second(t, df, ncp),
        other => other,
    }
}

/// `E|T|` for a noncentral t with `df > 1`.
pub fn folded_mean<T: Real>(df: T, ncp: T) -> Result<T> {
    if !(df > T::one()) {
        return Err(Error::DivergentExpectation { df: df.as_f64() });
    }
    let half = T::lit(0.5);
    let d = ncp.abs();
    let abs_normal = d * (d / T::SQRT_2()).error_function() + T::lit(2.0) * log_phi(d).exp();
    let inv_scale = (half * df).sqrt() * ((half * (df - T::one())).lgamma() - (half * df).lgamma()).exp();
    Ok(abs_normal * inv_scale)
}
