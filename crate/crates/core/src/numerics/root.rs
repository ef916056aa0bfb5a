//! Safeguarded scalar root finding on a sign-change bracket.
//!
//! Both solvers keep a bracket `[lo, hi]` with a sign change and only accept
//! an interpolation (secant) or Newton step when it lands strictly inside the
//! current bracket; otherwise they bisect. Convergence is therefore never worse
//! than bisection.

use crate::error::{Error, Result};

/// Interval with a sign change of the target function.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bracket {
    pub lo: f64,
    pub hi: f64,
    pub f_lo: f64,
    pub f_hi: f64,
}

impl Bracket {
    /// Evaluates `f` at both ends and checks for a sign change.
    pub fn new<F: FnMut(f64) -> f64>(mut f: F, lo: f64, hi: f64) -> Result<Self> {
        let f_lo = f(lo);
        let f_hi = f(hi);
        Self::from_values(lo, hi, f_lo, f_hi)
    }

    pub fn from_values(lo: f64, hi: f64, f_lo: f64, f_hi: f64) -> Result<Self> {
        if lo.partial_cmp(&hi) != Some(std::cmp::Ordering::Less) {
            return Err(Error::InvalidInput(format!("bracket requires lo < hi, got [{lo}, {hi}]")));
        }
        if f_lo.is_nan() {
            return Err(Error::NotFinite { x: lo });
        }
        if f_hi.is_nan() {
            return Err(Error::NotFinite { x: hi });
        }
        if f_lo.signum() == f_hi.signum() && f_lo != 0.0 && f_hi != 0.0 {
            return Err(Error::NoSignChange { lo, hi, f_lo, f_hi });
        }
        Ok(Self { lo, hi, f_lo, f_hi })
    }

    /// Widens `[lo, hi]` around its centre by doubling its half-width until a
    /// sign change appears, at most `max_expansions` times.
    pub fn expand<F: FnMut(f64) -> f64>(mut f: F, mut lo: f64, mut hi: f64, max_expansions: usize) -> Result<Self> {
        let mut f_lo = f(lo);
        let mut f_hi = f(hi);
        for _ in 0..max_expansions {
            if f_lo.is_nan() || f_hi.is_nan() || f_lo.signum() != f_hi.signum() || f_lo == 0.0 || f_hi == 0.0 {
                break;
            }
            let width = hi - lo;
            // Step toward the side whose value is smaller in magnitude.
            if f_lo.abs() < f_hi.abs() {
                lo -= width;
                f_lo = f(lo);
            } else {
                hi += width;
                f_hi = f(hi);
            }
        }
        Self::from_values(lo, hi, f_lo, f_hi)
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    fn midpoint(&self) -> f64 {
        self.lo + 0.5 * (self.hi - self.lo)
    }

    fn contains_strictly(&self, x: f64) -> bool {
        x > self.lo && x < self.hi
    }

    /// Replaces whichever end has the same sign as `fx`.
    fn update(&mut self, x: f64, fx: f64) {
        if (fx < 0.0) == (self.f_lo < 0.0) {
            self.lo = x;
            self.f_lo = fx;
        } else {
            self.hi = x;
            self.f_hi = fx;
        }
    }
}

/// Tolerances for the root finders.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RootConfig {
    /// Stop when `|f(x)| <= tol` or the bracket is narrower than `tol`.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for RootConfig {
    fn default() -> Self {
        Self { tol: 1e-12, max_iter: 200 }
    }
}

impl RootConfig {
    pub fn with_tol(tol: f64) -> Self {
        Self { tol, ..Self::default() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RootResult {
    pub root: f64,
    pub residual: f64,
    pub iterations: usize,
}

fn endpoint_root(b: &Bracket) -> Option<RootResult> {
    if b.f_lo == 0.0 {
        Some(RootResult { root: b.lo, residual: 0.0, iterations: 0 })
    } else if b.f_hi == 0.0 {
        Some(RootResult { root: b.hi, residual: 0.0, iterations: 0 })
    } else {
        None
    }
}

fn best_end(b: &Bracket) -> (f64, f64) {
    if b.f_lo.abs() <= b.f_hi.abs() {
        (b.lo, b.f_lo)
    } else {
        (b.hi, b.f_hi)
    }
}

/// Derivative-free solve: Illinois-weighted secant steps, with bisection
/// whenever the step leaves the bracket or the bracket stops halving.
pub fn find_root<F: FnMut(f64) -> f64>(mut f: F, bracket: &Bracket, cfg: &RootConfig) -> Result<RootResult> {
    if let Some(r) = endpoint_root(bracket) {
        return Ok(r);
    }
    let mut b = *bracket;
    // Weighted copies of the endpoint values used for the Illinois rule.
    let (mut w_lo, mut w_hi) = (b.f_lo, b.f_hi);
    let mut last_side = 0i8;
    let mut width_two_back = b.width();
    let mut width_one_back = b.width();

    for it in 1..=cfg.max_iter {
        let secant = b.hi - w_hi * (b.hi - b.lo) / (w_hi - w_lo);
        let stalled = b.width() > 0.5 * width_two_back;
        let x = if b.contains_strictly(secant) && !(stalled && it > 2) { secant } else { b.midpoint() };
        let fx = f(x);
        if !fx.is_finite() {
            return Err(Error::NotFinite { x });
        }
        if fx.abs() <= cfg.tol {
            return Ok(RootResult { root: x, residual: fx, iterations: it });
        }
        width_two_back = width_one_back;
        let moved_lo = (fx < 0.0) == (b.f_lo < 0.0);
        b.update(x, fx);
        width_one_back = b.width();
        if moved_lo {
            w_lo = fx;
            if last_side == 1 {
                w_hi *= 0.5;
            }
            last_side = 1;
        } else {
            w_hi = fx;
            if last_side == -1 {
                w_lo *= 0.5;
            }
            last_side = -1;
        }
        if b.width() <= cfg.tol || b.midpoint() == b.lo || b.midpoint() == b.hi {
            let (root, residual) = best_end(&b);
            return Ok(RootResult { root, residual, iterations: it });
        }
    }
    let (best, residual) = best_end(&b);
    Err(Error::NoConvergence { best, residual, iterations: cfg.max_iter })
}

/// Newton iteration safeguarded by the bracket. `f` returns the value and the
/// derivative; `start` seeds the iteration and is replaced by the midpoint if
/// it lies outside the bracket.
pub fn find_root_newton<F: FnMut(f64) -> (f64, f64)>(
    mut f: F,
    bracket: &Bracket,
    start: f64,
    cfg: &RootConfig,
) -> Result<RootResult> {
    if let Some(r) = endpoint_root(bracket) {
        return Ok(r);
    }
    let mut b = *bracket;
    let mut x = if b.contains_strictly(start) { start } else { b.midpoint() };
    for it in 1..=cfg.max_iter {
        let (fx, dfx) = f(x);
        if !fx.is_finite() {
            return Err(Error::NotFinite { x });
        }
        if fx.abs() <= cfg.tol {
            return Ok(RootResult { root: x, residual: fx, iterations: it });
        }
        b.update(x, fx);
        if b.width() <= cfg.tol {
            let (root, residual) = best_end(&b);
            return Ok(RootResult { root, residual, iterations: it });
        }
        let newton = x - fx / dfx;
        let next = if dfx != 0.0 && newton.is_finite() && b.contains_strictly(newton) { newton } else { b.midpoint() };
        if next == x {
            return Ok(RootResult { root: x, residual: fx, iterations: it });
        }
        x = next;
    }
    let (best, residual) = best_end(&b);
    Err(Error::NoConvergence { best, residual, iterations: cfg.max_iter })
}
