//! Brute-force verifiers for the solvers.
//!
//! These routines trade speed for transparency: an exhaustive grid over the
//! weak-FWER boundary, exact enumeration of independent Bernoulli outcomes,
//! and a direct shape check of ROC functions on a grid. They are shipped in
//! the library so tests and examples can use the same reference code.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::model::{roc_unchecked, RocModel};

/// Largest model the boundary grid search accepts.
pub const GRID_MAX_M: usize = 3;
/// Largest size vector the Bernoulli enumeration accepts.
pub const ENUMERATE_MAX_M: usize = 20;
/// Slack allowed by [`concavity_check`].
pub const SHAPE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSearchResult {
    pub best_sizes: Vec<f64>,
    /// Summed power at `best_sizes`.
    pub best_objective: f64,
    /// Spacing of the grid in `log(1 - eta)`.
    pub grid_step: f64,
}

/// Maximizes the summed power over the boundary `sum log(1 - eta_m) = log(1 - alpha)`.
///
/// The first `M - 1` coordinates run over a uniform grid in `log(1 - eta)`
/// with spacing at most `step`; the last coordinate is whatever the equality
/// leaves over. Ties keep the lexicographically smallest size vector.
pub fn grid_optimal_sizes(model: &RocModel, alpha: f64, step: f64) -> Result<GridSearchResult> {
    let m = model.len();
    if m > GRID_MAX_M {
        return Err(Error::TooLarge { what: "grid search model", limit: GRID_MAX_M, got: m });
    }
    if !(alpha.is_finite() && (0.0..1.0).contains(&alpha)) {
        return Err(invalid(format!("alpha must lie in [0, 1), got {alpha}")));
    }
    if !(step > 0.0 && step <= 0.01) {
        return Err(invalid(format!("grid step must lie in (0, 0.01], got {step}")));
    }
    let gammas = model.gammas();
    let total = (-alpha).ln_1p();
    let size_of = |t: f64| -t.exp_m1();

    if m == 1 || alpha == 0.0 {
        let sizes = if m == 1 { vec![alpha] } else { vec![0.0; m] };
        return Ok(GridSearchResult { best_objective: model.total_power(&sizes), best_sizes: sizes, grid_step: step });
    }

    // Grid points t_k = total * k / n for k = 0..=n, visited from t = 0
    // (eta = 0) downwards so that the first strict maximum is also the
    // lexicographically smallest.
    let n = (total.abs() / step).ceil() as usize;
    let grid_step = total.abs() / n as f64;
    let ts: Vec<f64> = (0..=n).map(|k| if k == n { total } else { total * k as f64 / n as f64 }).collect();
    let first: Vec<(f64, f64)> = ts.iter().map(|&t| (size_of(t), roc_unchecked(gammas[0], size_of(t)))).collect();

    let mut best_objective = f64::NEG_INFINITY;
    let mut best_sizes = Vec::new();
    let mut consider = |sizes: &[f64], objective: f64| {
        if objective > best_objective {
            best_objective = objective;
            best_sizes = sizes.to_vec();
        }
    };

    if m == 2 {
        for (k, &t1) in ts.iter().enumerate() {
            let e2 = size_of(total - t1);
            let (e1, r1) = first[k];
            consider(&[e1, e2], r1 + roc_unchecked(gammas[1], e2));
        }
    } else {
        let second: Vec<(f64, f64)> = ts.iter().map(|&t| (size_of(t), roc_unchecked(gammas[1], size_of(t)))).collect();
        for (k1, &t1) in ts.iter().enumerate() {
            let (e1, r1) = first[k1];
            // Remaining budget total - t1 runs over grid points k2 <= n - k1.
            for (k2, &t2) in ts.iter().enumerate().take(n - k1 + 1) {
                let t3 = (total - t1 - t2).min(0.0);
                let e3 = size_of(t3);
                let (e2, r2) = second[k2];
                consider(&[e1, e2, e3], r1 + r2 + roc_unchecked(gammas[2], e3));
            }
        }
    }
    Ok(GridSearchResult { best_sizes, best_objective, grid_step })
}

/// Exact `P(sum V_m >= a * sum eta_m)` for independent `V_m ~ Bernoulli(eta_m)`,
/// summed over all `2^M` outcomes.
pub fn bernoulli_tail_enumerate(etas: &[f64], a: f64) -> Result<f64> {
    let m = etas.len();
    if m > ENUMERATE_MAX_M {
        return Err(Error::TooLarge { what: "Bernoulli enumeration", limit: ENUMERATE_MAX_M, got: m });
    }
    for &e in etas {
        crate::error::check_probability("size", e)?;
    }
    if !a.is_finite() {
        return Err(invalid(format!("threshold must be finite, got {a}")));
    }
    let cut = a * etas.iter().sum::<f64>();
    let mut total = 0.0;
    for mask in 0u32..(1u32 << m) {
        if (mask.count_ones() as f64) < cut {
            continue;
        }
        let p: f64 = etas.iter().enumerate().map(|(j, &e)| if mask >> j & 1 == 1 { e } else { 1.0 - e }).product();
        total += p;
    }
    Ok(total)
}

/// Which shape property a grid point violated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ShapeViolation {
    BelowDiagonal,
    Decreasing,
    NotConcave,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConcavityReport {
    pub passed: bool,
    /// Largest amount by which any check failed (0 when all pass).
    pub worst_violation: f64,
    /// Size at which the worst violation occurred, with its kind.
    pub worst_at: Option<(f64, ShapeViolation)>,
}

/// Checks `rho(eta) >= eta`, monotonicity and midpoint concavity of an ROC
/// function on `grid` equally spaced points of `[0, 1]`.
///
/// Concavity is checked on consecutive triples, which on an equally spaced
/// grid implies midpoint concavity for every pair of grid points.
pub fn concavity_check<F: Fn(f64) -> f64>(roc: F, grid: usize) -> Result<ConcavityReport> {
    if grid < 3 {
        return Err(invalid(format!("concavity check needs at least 3 grid points, got {grid}")));
    }
    let etas: Vec<f64> = (0..grid).map(|i| i as f64 / (grid - 1) as f64).collect();
    let values: Vec<f64> = etas.iter().map(|&e| roc(e)).collect();
    let mut report = ConcavityReport { passed: true, worst_violation: 0.0, worst_at: None };
    let mut note = |amount: f64, eta: f64, kind: ShapeViolation| {
        if amount > SHAPE_TOL || amount.is_nan() {
            report.passed = false;
        }
        if amount > report.worst_violation || (amount.is_nan() && report.worst_at.is_none()) {
            report.worst_violation = amount;
            report.worst_at = Some((eta, kind));
        }
    };
    for i in 0..grid {
        note(etas[i] - values[i], etas[i], ShapeViolation::BelowDiagonal);
        if i + 1 < grid {
            note(values[i] - values[i + 1], etas[i + 1], ShapeViolation::Decreasing);
        }
        if i + 2 < grid {
            let chord = 0.5 * (values[i] + values[i + 2]);
            note(chord - values[i + 1], etas[i + 1], ShapeViolation::NotConcave);
        }
    }
    Ok(report)
}
