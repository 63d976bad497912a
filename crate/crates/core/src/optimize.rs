//! One-dimensional derivative-free maximization on a closed interval.
//!
//! A bracket is grown geometrically from a starting point, refined with
//! Brent's golden-section/parabolic search, checked against a uniform grid
//! for better local maxima, and finally polished with one parabolic step on
//! a fixed symmetric stencil (Brent alone cannot resolve the maximizer much
//! beyond `√ε` relative precision because the objective is flat there).

use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Optimum<T> {
    pub x: T,
    pub fx: T,
    pub evaluations: usize,
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct Settings<T> {
    pub tol: T,
    pub max_expansions: usize,
    pub grid_points: usize,
    /// Improvement a grid point needs over the converged value to trigger a
    /// restart.
    pub restart_margin: T,
}

struct Counted<F> {
    f: F,
    n: usize,
}

impl<F> Counted<F> {
    fn call<T: Real>(&mut self, x: T) -> Result<T>
    where
        F: FnMut(T) -> Result<T>,
    {
        self.n += 1;
        let v = (self.f)(x)?;
        if v.is_nan() {
            return Err(Error::OptimizerFailure(format!("objective is NaN at {}", x)));
        }
        Ok(v)
    }
}

/// Maximizes `f` over `[lo, hi]` (either end may be infinite), starting the
/// bracket search at `start` with initial step `step`.
pub(crate) fn maximize<T: Real, F>(f: F, lo: T, hi: T, start: T, step: T, cfg: &Settings<T>) -> Result<Optimum<T>>
where
    F: FnMut(T) -> Result<T>,
{
    let mut f = Counted { f, n: 0 };
    let clip = |x: T| x.max(lo).min(hi);
    let x0 = clip(start);
    let f0 = f.call(x0)?;
    if !(lo < hi) {
        return Ok(Optimum { x: x0, fx: f0, evaluations: f.n });
    }
    let (left, right, mut best, mut fbest) = bracket(&mut f, lo, hi, x0, f0, step, cfg.max_expansions)?;

    let (mut x, mut fx) = brent(&mut f, left, right, best, fbest, cfg.tol)?;
    if fx >= fbest {
        best = x;
        fbest = fx;
    }

    // Grid guard against a better separate local maximum, over the whole
    // interval where it is finite and over the bracket otherwise.
    let (left, right) = (if lo.is_finite() { lo } else { left }, if hi.is_finite() { hi } else { right });
    if cfg.grid_points >= 2 {
        for _ in 0..3 {
            let k = cfg.grid_points - 1;
            let grid: Vec<T> = (0..=k).map(|j| left + (right - left) * T::from_count(j as u64) / T::from_count(k as u64)).collect();
            let mut top: Option<(usize, T)> = None;
            for (j, &g) in grid.iter().enumerate() {
                let v = f.call(g)?;
                if v > fbest + cfg.restart_margin && top.is_none_or(|(_, tv)| v > tv) {
                    top = Some((j, v));
                }
            }
            let Some((j, v)) = top else { break };
            let a = grid[j.saturating_sub(1)];
            let b = grid[(j + 1).min(k)];
            let (nx, nfx) = brent(&mut f, a, b, grid[j], v, cfg.tol)?;
            (best, fbest) = if nfx >= v { (nx, nfx) } else { (grid[j], v) };
        }
    }
    x = best;
    fx = fbest;

    // Parabolic polish on a symmetric stencil.
    let h = T::lit(1e-4) * step.abs().max(T::lit(1e-3) * x.abs()).max(cfg.tol);
    if x - h >= lo && x + h <= hi {
        let fm = f.call(x - h)?;
        let fp = f.call(x + h)?;
        let curv = fp - T::lit(2.0) * fx + fm;
        if curv < T::zero() {
            let dx = -h * (fp - fm) / (T::lit(2.0) * curv);
            if dx.abs() < h {
                let xn = x + dx;
                let fxn = f.call(xn)?;
                let noise = T::lit(16.0) * T::epsilon() * (T::one() + fx.abs());
                if fxn >= fx - noise {
                    x = xn;
                    fx = fxn;
                }
            }
        }
    }

    // Snap onto an end point the search converged against.
    let snap = T::lit(4.0) * (T::epsilon().sqrt() * x.abs() + cfg.tol);
    for end in [lo, hi] {
        if end.is_finite() && (x - end).abs() <= snap && x != end {
            let fe = f.call(end)?;
            if fe >= fx {
                x = end;
                fx = fe;
            }
        }
    }
    Ok(Optimum { x, fx, evaluations: f.n })
}

/// Grows a bracket `[left, right]` containing a local maximum. Returns the
/// bracket and its best interior (or end) point.
fn bracket<T: Real, F>(f: &mut Counted<F>, lo: T, hi: T, x0: T, f0: T, step: T, max_expansions: usize) -> Result<(T, T, T, T)>
where
    F: FnMut(T) -> Result<T>,
{
    let step = if step > T::zero() && step.is_finite() { step } else { T::one() };
    let clip = |x: T| x.max(lo).min(hi);
    let xr = clip(x0 + step);
    let xl = clip(x0 - step);
    let fr = if xr > x0 { f.call(xr)? } else { T::neg_infinity() };
    let fl = if xl < x0 { f.call(xl)? } else { T::neg_infinity() };
    if fr <= f0 && fl <= f0 {
        return Ok((xl, xr, x0, f0));
    }
    let dir = if fr > fl { T::one() } else { -T::one() };
    let (mut a, mut b, mut fb) = if dir > T::zero() { (x0, xr, fr) } else { (x0, xl, fl) };
    let mut width = step;
    for _ in 0..max_expansions {
        let bound = if dir > T::zero() { hi } else { lo };
        if b == bound {
            let (l, r) = if a < b { (a, b) } else { (b, a) };
            return Ok((l, r, b, fb));
        }
        width = width * T::lit(2.0);
        let c = clip(b + dir * width);
        let fc = f.call(c)?;
        if fc < fb {
            let (l, r) = if a < c { (a, c) } else { (c, a) };
            return Ok((l, r, b, fb));
        }
        a = b;
        b = c;
        fb = fc;
    }
    Err(Error::OptimizerFailure(format!("no maximum bracketed after {max_expansions} expansions (last point {})", b)))
}

/// Brent's method on `[a, b]` seeded with the known point `(x, fx)`.
fn brent<T: Real, F>(f: &mut Counted<F>, mut a: T, mut b: T, x0: T, fx0: T, tol: T) -> Result<(T, T)>
where
    F: FnMut(T) -> Result<T>,
{
    let cgold = T::lit(0.381_966_011_250_105_1);
    let sqrt_eps = T::epsilon().sqrt();
    // minimize g = -f
    let (mut x, mut w, mut v) = (x0, x0, x0);
    let (mut gx, mut gw, mut gv) = (-fx0, -fx0, -fx0);
    let mut d = T::zero();
    let mut e = T::zero();
    for _ in 0..500 {
        let m = (a + b) * T::lit(0.5);
        let tol1 = sqrt_eps * x.abs() + tol / T::lit(3.0);
        let tol2 = T::lit(2.0) * tol1;
        if (x - m).abs() <= tol2 - (b - a) * T::lit(0.5) {
            return Ok((x, -gx));
        }
        let mut golden = true;
        if e.abs() > tol1 {
            let r = (x - w) * (gx - gv);
            let mut q = (x - v) * (gx - gw);
            let mut p = (x - v) * q - (x - w) * r;
            q = T::lit(2.0) * (q - r);
            if q > T::zero() {
                p = -p;
            }
            q = q.abs();
            let etemp = e;
            if p.abs() < (T::lit(0.5) * q * etemp).abs() && p > q * (a - x) && p < q * (b - x) {
                e = d;
                d = p / q;
                let u = x + d;
                if u - a < tol2 || b - u < tol2 {
                    d = if m >= x { tol1 } else { -tol1 };
                }
                golden = false;
            }
        }
        if golden {
            e = if x >= m { a - x } else { b - x };
            d = cgold * e;
        }
        let u = if d.abs() >= tol1 { x + d } else { x + if d > T::zero() { tol1 } else { -tol1 } };
        let gu = -f.call(u)?;
        if gu <= gx {
            if u >= x {
                a = x;
            } else {
                b = x;
            }
            (v, gv) = (w, gw);
            (w, gw) = (x, gx);
            (x, gx) = (u, gu);
        } else {
            if u < x {
                a = u;
            } else {
                b = u;
            }
            if gu <= gw || w == x {
                (v, gv) = (w, gw);
                (w, gw) = (u, gu);
            } else if gu <= gv || v == x || v == w {
                (v, gv) = (u, gu);
            }
        }
    }
    Err(Error::OptimizerFailure("Brent search did not converge".into()))
}
