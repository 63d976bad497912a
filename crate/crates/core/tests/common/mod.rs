//! Closed forms for the normal known-scale family.
//!
//! With `a_j = w_j / σ_j²` (the pseudo term uses the focus scale) the
//! weighted log-likelihood is a concave quadratic in θ, maximized at
//! `Σ a t / A` where `A = Σ a`. Profiling out θ leaves a quadratic in the
//! focus statistic, so the normalized profile is a Gaussian density.

#![allow(dead_code)]

use std::f64::consts::{LN_2, PI};

use nmwl::{Comparisons, Family, Observation, Weights};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use statrs::function::gamma::ln_gamma;

pub fn normal_set(ts: &[f64], sigmas: &[f64]) -> Comparisons {
    Comparisons::new(
        ts.iter()
            .zip(sigmas)
            .enumerate()
            .map(|(k, (&t, &s))| Observation::new(format!("c{k}"), t, Family::normal(s).unwrap()).unwrap())
            .collect(),
    )
    .unwrap()
}

pub fn sigma(obs: &Comparisons, j: usize) -> f64 {
    match obs.observations()[j].family {
        Family::NormalKnownScale { scale } => scale,
        _ => panic!("normal family expected"),
    }
}

/// `(w, t, σ)` for every term with nonzero weight, pseudo term last.
fn terms(row: &Weights, obs: &Comparisons) -> Vec<(f64, f64, f64)> {
    let mut v: Vec<(f64, f64, f64)> =
        row.weights.iter().enumerate().map(|(j, &w)| (w, obs.observations()[j].statistic, sigma(obs, j))).collect();
    if let Some(p) = row.pseudo {
        v.push((p.weight, p.statistic, sigma(obs, row.focus_index)));
    }
    v.retain(|&(w, _, _)| w > 0.0);
    v
}

fn log_normal(x: f64, mean: f64, var: f64) -> f64 {
    -0.5 * (2.0 * PI * var).ln() - 0.5 * (x - mean).powi(2) / var
}

pub fn weighted_log_likelihood(theta: f64, row: &Weights, obs: &Comparisons) -> f64 {
    terms(row, obs).iter().map(|&(w, t, s)| w * log_normal(t, theta, s * s)).sum()
}

pub fn weighted_mle(row: &Weights, obs: &Comparisons) -> f64 {
    let tt = terms(row, obs);
    let a: f64 = tt.iter().map(|&(w, _, s)| w / (s * s)).sum();
    tt.iter().map(|&(w, t, s)| w * t / (s * s)).sum::<f64>() / a
}

struct Profile {
    /// coefficient of −½ t² in the profile
    alpha: f64,
    /// coefficient of t
    beta: f64,
    /// constant
    gamma: f64,
}

fn profile(row: &Weights, obs: &Comparisons) -> Profile {
    let i = row.focus_index;
    let si = sigma(obs, i);
    let ai = row.weights[i] / (si * si);
    let mut others: Vec<(f64, f64, f64)> = row
        .weights
        .iter()
        .enumerate()
        .filter(|&(j, &w)| j != i && w > 0.0)
        .map(|(j, &w)| (w, obs.observations()[j].statistic, sigma(obs, j)))
        .collect();
    if let Some(p) = row.pseudo.filter(|p| p.weight > 0.0) {
        others.push((p.weight, p.statistic, si));
    }
    let a_sum: f64 = ai + others.iter().map(|&(w, _, s)| w / (s * s)).sum::<f64>();
    let s_sum: f64 = others.iter().map(|&(w, t, s)| w * t / (s * s)).sum();
    let r_sum: f64 = others.iter().map(|&(w, t, s)| w * t * t / (s * s)).sum();
    let c: f64 =
        -0.5 * (row.weights[i] * (2.0 * PI * si * si).ln() + others.iter().map(|&(w, _, s)| w * (2.0 * PI * s * s).ln()).sum::<f64>());
    Profile { alpha: ai * (1.0 - ai / a_sum), beta: ai * s_sum / a_sum, gamma: c - 0.5 * (r_sum - s_sum * s_sum / a_sum) }
}

/// Profile log weighted likelihood over the full line at focus value `t`.
pub fn profile_full_line(t: f64, row: &Weights, obs: &Comparisons) -> f64 {
    let p = profile(row, obs);
    p.gamma - 0.5 * p.alpha * t * t + p.beta * t
}

/// Log of the integral of the profile over the focus statistic.
pub fn log_complexity_full_line(row: &Weights, obs: &Comparisons) -> f64 {
    let p = profile(row, obs);
    p.gamma + 0.5 * (2.0 * PI / p.alpha).ln() + p.beta * p.beta / (2.0 * p.alpha)
}

/// The full-line NMWL is `N(β/α, 1/α)` in the focus statistic.
pub fn nmwl_full_line(t: f64, row: &Weights, obs: &Comparisons) -> f64 {
    let p = profile(row, obs);
    log_normal(t, p.beta / p.alpha, 1.0 / p.alpha)
}

/// With θ fixed at `theta0` the normalized profile is `N(θ₀, σ²/w_ii)`.
pub fn nmwl_singleton(t: f64, theta0: f64, row: &Weights, obs: &Comparisons) -> f64 {
    let s = sigma(obs, row.focus_index);
    log_normal(t, theta0, s * s / row.weights[row.focus_index])
}

/// Log of `∫ exp(ℓ(θ₀; t)) dt`: a Gaussian raised to the power `w` times
/// the constant incidental terms.
pub fn log_complexity_singleton(theta0: f64, row: &Weights, obs: &Comparisons) -> f64 {
    let i = row.focus_index;
    let s = sigma(obs, i);
    let w = row.weights[i];
    let rest: f64 = weighted_log_likelihood(theta0, row, obs) - w * log_normal(obs.observations()[i].statistic, theta0, s * s);
    -0.5 * w * (2.0 * PI * s * s).ln() + 0.5 * (2.0 * PI * s * s / w).ln() + rest
}

/// Discrimination information in bits for a two-sided alternative and a
/// point null, both evaluated at the observed focus statistic.
pub fn di_bits_two_sided(theta0: f64, row: &Weights, obs: &Comparisons) -> f64 {
    let t = obs.observations()[row.focus_index].statistic;
    (nmwl_full_line(t, row, obs) - nmwl_singleton(t, theta0, row, obs)) / LN_2
}

pub fn simpson<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, panels: usize) -> f64 {
    let n = panels + panels % 2;
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for k in 1..n {
        s += f(a + k as f64 * h) * if k % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0
}

/// Random valid row: the focus takes at least half, the rest is split at
/// random, optionally with a pseudo term.
pub fn random_instance(rng: &mut ChaCha8Rng) -> (Weights, Comparisons) {
    let n = rng.random_range(2..=10);
    let ts: Vec<f64> = (0..n).map(|_| rng.random_range(-5.0..5.0)).collect();
    let sig: Vec<f64> = (0..n).map(|_| rng.random_range(0.3..3.0)).collect();
    let focus = rng.random_range(0..n);
    let wf = rng.random_range(0.5..0.95);
    let pseudo = rng.random_bool(0.3);
    let mut raw: Vec<f64> = (0..n + usize::from(pseudo)).map(|_| rng.random_range(0.01..1.0)).collect();
    raw[focus] = 0.0;
    let total: f64 = raw.iter().sum();
    let mut w: Vec<f64> = raw.iter().map(|r| r / total * (1.0 - wf)).collect();
    w[focus] = wf;
    let (pw, pt) = if pseudo { (Some(w.pop().unwrap()), Some(rng.random_range(-1.0..1.0))) } else { (None, None) };
    let row = Weights::from_parts(focus, w, pw, pt).unwrap();
    (row, normal_set(&ts, &sig))
}

/// Density of `(Z + δ)/√(V/ν)` at `t`, integrating over `V ~ χ²_ν`.
pub fn nct_oracle(t: f64, df: f64, ncp: f64) -> f64 {
    let log_norm = -(df / 2.0) * 2f64.ln() - ln_gamma(df / 2.0);
    let chi2 = |v: f64| {
        if v <= 0.0 {
            if df == 2.0 {
                0.5
            } else {
                0.0
            }
        } else {
            (log_norm + (df / 2.0 - 1.0) * v.ln() - v / 2.0).exp()
        }
    };
    let phi = |x: f64| (-0.5 * x * x).exp() / (2.0 * PI).sqrt();
    let upper = df + 80.0 * (2.0 * df).sqrt() + 200.0;
    simpson(
        |v| {
            let s = (v / df).sqrt();
            s * phi(t * s - ncp) * chi2(v)
        },
        0.0,
        upper,
        400_000,
    )
}

pub fn folded_oracle(t: f64, df: f64, ncp: f64) -> f64 {
    nct_oracle(t, df, ncp) + nct_oracle(-t, df, ncp)
}
