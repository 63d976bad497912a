//! Adaptive Gauss–Kronrod quadrature of `exp(h(x))` carried out entirely in
//! log space.
//!
//! Likelihood integrands routinely sit at `exp(-700)` or below, so every panel
//! is evaluated relative to its own maximum log value and panels are combined
//! with log-sum-exp. Error estimates follow the QUADPACK `qk21` heuristics.
//!
//! [`integrate_log_windowed`] handles half-infinite and infinite ranges: it
//! integrates a finite window and keeps doubling it until the tail is
//! negligible, or reports divergence when the shells stop shrinking.

use crate::error::{Error, Result};
use crate::scalar::{log_add_exp, log_sum_exp, Real};

const XGK: [f64; 11] = [
    0.995_657_163_025_808_080_735_527_280_689,
    0.973_906_528_517_171_720_077_964_012_084,
    0.930_157_491_355_708_226_001_207_180_060,
    0.865_063_366_688_984_510_732_096_688_423,
    0.780_817_726_586_416_897_063_717_578_345,
    0.679_409_568_299_024_406_234_327_365_115,
    0.562_757_134_668_604_683_339_000_099_273,
    0.433_395_394_129_247_190_799_265_943_166,
    0.294_392_862_701_460_198_131_126_603_104,
    0.148_874_338_981_631_210_884_826_001_130,
    0.0,
];

const WGK: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062,
    0.032_558_162_307_964_727_478_818_972_459,
    0.054_755_896_574_351_996_031_381_300_245,
    0.075_039_674_810_919_952_767_043_140_916,
    0.093_125_454_583_697_605_535_065_465_083,
    0.109_387_158_802_297_641_899_210_590_326,
    0.123_491_976_262_065_851_077_798_923_340,
    0.134_709_217_311_473_325_928_054_001_772,
    0.142_775_938_577_060_080_797_094_273_139,
    0.147_739_104_901_338_491_374_841_515_972,
    0.149_445_554_002_916_905_664_936_468_390,
];

// 10-point Gauss weights for the odd-indexed Kronrod nodes.
const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893,
    0.149_451_349_150_580_593_145_776_339_658,
    0.219_086_362_515_982_043_995_534_934_228,
    0.269_266_719_309_996_355_091_226_921_569,
    0.295_524_224_714_752_870_173_892_994_651,
];

#[derive(Debug, Clone, Copy)]
struct Panel<T> {
    a: T,
    b: T,
    log_value: T,
    log_error: T,
}

/// Result of a log-space integration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogIntegral<T> {
    /// `log ∫ exp(h)`.
    pub log_value: T,
    /// `log` of the absolute error estimate.
    pub log_error: T,
    pub panels: usize,
    pub evaluations: usize,
}

impl<T: Real> LogIntegral<T> {
    /// Relative error estimate `err / value`.
    pub fn relative_error(&self) -> T {
        if self.log_value == T::neg_infinity() {
            T::zero()
        } else {
            (self.log_error - self.log_value).exp()
        }
    }
}

/// Tolerances for [`integrate_log`].
#[derive(Debug, Clone, Copy)]
pub struct Tolerance<T> {
    pub rel_tol: T,
    /// Absolute tolerance, in units of `exp(max h)` seen so far.
    pub abs_tol: T,
    /// Absolute error target in log scale, e.g. a fraction of an already
    /// accumulated integral. `-inf` disables it.
    pub log_abs_floor: T,
    pub max_subdivisions: usize,
}

fn eval_panel<T: Real, F>(h: &mut F, a: T, b: T, peak: &mut T) -> Result<Panel<T>>
where
    F: FnMut(T) -> Result<T>,
{
    let half = (b - a) * T::lit(0.5);
    let center = a + half;
    let mut vals = [T::neg_infinity(); 21];
    vals[0] = h(center)?;
    for j in 0..10 {
        let dx = half * T::lit(XGK[j]);
        vals[1 + 2 * j] = h(center - dx)?;
        vals[2 + 2 * j] = h(center + dx)?;
    }
    if vals.iter().any(|v| v.is_nan()) {
        return Err(Error::NumericalFailure(format!("integrand is NaN on [{}, {}]", a.as_f64(), b.as_f64())));
    }
    let m = vals.iter().copied().fold(T::neg_infinity(), T::max);
    if m == T::infinity() {
        return Err(Error::NumericalFailure("integrand overflow".into()));
    }
    if m == T::neg_infinity() {
        return Ok(Panel { a, b, log_value: m, log_error: m });
    }
    *peak = peak.max(m);
    let e: Vec<T> = vals.iter().map(|&v| (v - m).exp()).collect();
    let mut kron = e[0] * T::lit(WGK[10]);
    let mut gauss = T::zero();
    for j in 0..10 {
        let pair = e[1 + 2 * j] + e[2 + 2 * j];
        kron = kron + pair * T::lit(WGK[j]);
        if j % 2 == 1 {
            gauss = gauss + pair * T::lit(WG[j / 2]);
        }
    }
    let mean = kron * T::lit(0.5);
    let mut asc = (e[0] - mean).abs() * T::lit(WGK[10]);
    for j in 0..10 {
        asc = asc + ((e[1 + 2 * j] - mean).abs() + (e[2 + 2 * j] - mean).abs()) * T::lit(WGK[j]);
    }
    let mut err = (kron - gauss).abs();
    if asc > T::zero() && err > T::zero() {
        err = asc * T::one().min((T::lit(200.0) * err / asc).powf(T::lit(1.5)));
    }
    let floor = T::lit(50.0) * T::epsilon() * kron;
    err = err.max(floor);
    let scale = half.ln() + m;
    Ok(Panel { a, b, log_value: scale + kron.ln(), log_error: scale + err.ln() })
}

/// Integrates `exp(h(x))` over `[a, b]` with global adaptive subdivision.
///
/// `breaks` are optional interior points that start as panel boundaries.
/// Fails with `NumericalFailure` if the tolerance is not met within
/// `max_subdivisions` panels.
pub fn integrate_log<T: Real, F>(mut h: F, a: T, b: T, breaks: &[T], tol: &Tolerance<T>) -> Result<LogIntegral<T>>
where
    F: FnMut(T) -> Result<T>,
{
    if !(a < b) {
        return Ok(LogIntegral { log_value: T::neg_infinity(), log_error: T::neg_infinity(), panels: 0, evaluations: 0 });
    }
    let mut edges = vec![a];
    edges.extend(breaks.iter().copied().filter(|&x| x > a && x < b));
    edges.push(b);
    edges.sort_by(|x, y| x.partial_cmp(y).expect("finite break points"));
    edges.dedup();

    let mut peak = T::neg_infinity();
    let mut panels = Vec::with_capacity(64);
    for w in edges.windows(2) {
        panels.push(eval_panel(&mut h, w[0], w[1], &mut peak)?);
    }
    let mut evaluations = 21 * panels.len();
    let log_rel = tol.rel_tol.ln();
    loop {
        let values: Vec<T> = panels.iter().map(|p| p.log_value).collect();
        let errors: Vec<T> = panels.iter().map(|p| p.log_error).collect();
        let total = log_sum_exp(&values);
        let total_err = log_sum_exp(&errors);
        let width_scale = (b - a).ln() + peak + tol.abs_tol.ln();
        let target = (log_rel + total).max(width_scale).max(tol.log_abs_floor);
        if total_err <= target || total == T::neg_infinity() {
            return Ok(LogIntegral { log_value: total, log_error: total_err, panels: panels.len(), evaluations });
        }
        if panels.len() >= tol.max_subdivisions {
            return Err(Error::NumericalFailure(format!(
                "quadrature did not converge in {} panels (relative error {:e})",
                panels.len(),
                (total_err - total).exp().as_f64()
            )));
        }
        let (worst, _) =
            panels.iter().enumerate().fold((0, T::neg_infinity()), |acc, (k, p)| if p.log_error > acc.1 { (k, p.log_error) } else { acc });
        let p = panels.swap_remove(worst);
        let mid = p.a + (p.b - p.a) * T::lit(0.5);
        if !(mid > p.a && mid < p.b) {
            return Err(Error::NumericalFailure("panel width underflow".into()));
        }
        panels.push(eval_panel(&mut h, p.a, mid, &mut peak)?);
        panels.push(eval_panel(&mut h, mid, p.b, &mut peak)?);
        evaluations += 42;
    }
}

/// Options for [`integrate_log_windowed`].
#[derive(Debug, Clone, Copy)]
pub struct WindowOptions<T> {
    pub rel_tol: T,
    pub abs_tol: T,
    /// Stop widening once the newest shells carry less than this fraction of
    /// the integral.
    pub truncation_mass: T,
    pub max_subdivisions: usize,
    /// Consecutive non-shrinking doublings that signal divergence.
    pub divergence_run: usize,
    pub max_doublings: usize,
}

/// Result of a windowed integration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindowedIntegral<T> {
    pub log_value: T,
    /// Relative error: quadrature error plus the last shell's share.
    pub relative_error: T,
    pub evaluations: usize,
    pub panels: usize,
    pub lower: T,
    pub upper: T,
}

/// Integrates `exp(h)` over the support `[lower, upper]` (either end may be
/// infinite) starting from a window around `center`.
///
/// The window is first widened until `h` at its edges is 40 nats below the
/// largest value seen, then integrated, then doubled shell by shell. The
/// integral is declared divergent when `divergence_run` consecutive shells
/// each change it by more than `rel_tol` without shrinking geometrically.
pub fn integrate_log_windowed<T: Real, F>(
    mut h: F,
    lower: T,
    upper: T,
    center: T,
    half_width: T,
    opts: &WindowOptions<T>,
) -> Result<WindowedIntegral<T>>
where
    F: FnMut(T) -> Result<T>,
{
    let center = center.max(lower).min(upper);
    let clip = |x: T| x.max(lower).min(upper);
    let mut width = half_width;
    let mut hmax = h(center)?;
    let drop = T::lit(40.0);
    // A doubling whose edges fall by less than ln(2/0.9) has a shell ratio
    // of at least 0.9, the same signal the shell phase uses below.
    let flat_step = (T::lit(2.0) / T::lit(0.9)).ln();
    let mut flat_run = 0;
    let mut prev_edge = T::infinity();
    let mut dropped = false;
    for _ in 0..40 {
        let lo = clip(center - width);
        let hi = clip(center + width);
        let hl = if lo > lower { h(lo)? } else { T::neg_infinity() };
        let hr = if hi < upper { h(hi)? } else { T::neg_infinity() };
        hmax = hmax.max(hl).max(hr);
        if hl < hmax - drop && hr < hmax - drop {
            dropped = true;
            break;
        }
        let edge = hl.max(hr);
        flat_run = if edge > prev_edge - flat_step { flat_run + 1 } else { 0 };
        prev_edge = edge;
        width = width * T::lit(2.0);
    }
    // No decay over 2^40 initial widths: integrating there only measures
    // rounding noise in `h`.
    if !dropped && flat_run >= opts.divergence_run {
        return Err(Error::DivergentComplexity { window: width.as_f64() });
    }

    let mut lo = clip(center - width);
    let mut hi = clip(center + width);
    let breaks: Vec<T> = (1..16).map(|k| lo + (hi - lo) * T::lit(k as f64 / 16.0)).collect();
    let tol = Tolerance {
        rel_tol: opts.rel_tol,
        abs_tol: opts.abs_tol,
        log_abs_floor: T::neg_infinity(),
        max_subdivisions: opts.max_subdivisions,
    };
    let core = integrate_log(&mut h, lo, hi, &breaks, &tol)?;
    let mut total = core.log_value;
    let mut total_err = core.log_error;
    let mut evaluations = core.evaluations;
    let mut panels = core.panels;
    if total == T::neg_infinity() {
        return Err(Error::NumericalFailure("integrand vanishes on the whole window".into()));
    }

    let mut prev_shell = T::neg_infinity();
    let mut run = 0;
    let mut last_share = T::zero();
    let mut doublings = 0;
    while lo > lower || hi < upper {
        if doublings >= opts.max_doublings {
            return Err(Error::DivergentComplexity { window: width.as_f64() });
        }
        doublings += 1;
        width = width * T::lit(2.0);
        let new_lo = clip(center - width);
        let new_hi = clip(center + width);
        let shell_tol = Tolerance {
            rel_tol: opts.rel_tol,
            abs_tol: T::lit(1e-300),
            log_abs_floor: opts.rel_tol.ln() + total - T::lit(3.0_f64.ln()),
            max_subdivisions: opts.max_subdivisions,
        };
        let mut shell = T::neg_infinity();
        for (a, b) in [(new_lo, lo), (hi, new_hi)] {
            if a < b {
                let s = integrate_log(&mut h, a, b, &[], &shell_tol)?;
                shell = log_add_exp(shell, s.log_value);
                total_err = log_add_exp(total_err, s.log_error);
                evaluations += s.evaluations;
                panels += s.panels;
            }
        }
        lo = new_lo;
        hi = new_hi;
        total = log_add_exp(total, shell);
        let share = (shell - total).exp();
        last_share = share;
        let ratio = if prev_shell == T::neg_infinity() { T::infinity() } else { (shell - prev_shell).exp() };
        prev_shell = shell;

        if share < opts.truncation_mass {
            break;
        }
        if ratio < T::lit(0.9) {
            // Geometric tail estimate.
            let rest = share * ratio / (T::one() - ratio);
            if rest < opts.truncation_mass {
                break;
            }
        }
        if share > opts.rel_tol && ratio >= T::lit(0.9) {
            run += 1;
            if run >= opts.divergence_run {
                return Err(Error::DivergentComplexity { window: width.as_f64() });
            }
        } else {
            run = 0;
        }
    }
    if !total.is_finite() {
        return Err(Error::NumericalFailure("non-finite normalizing integral".into()));
    }
    let relative_error = (total_err - total).exp() + last_share.min(opts.truncation_mass);
    Ok(WindowedIntegral { log_value: total, relative_error, evaluations, panels, lower: lo, upper: hi })
}
