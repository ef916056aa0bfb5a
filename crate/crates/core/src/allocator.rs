//! Per-test size vectors under a weak family-wise error budget.
//!
//! The weak FWER of independent tests with sizes `eta_m` is
//! `1 - prod (1 - eta_m)`, so every allocation here lives on (or inside) the
//! set `sum log(1 - eta_m) = log(1 - alpha)`.
//!
//! The optimal allocation maximizes the summed power. Its Lagrange
//! conditions say that `g_m(eta_m) = rho'_m(eta_m) (1 - eta_m)` takes a
//! common value `d` across hypotheses. For Gaussian most powerful tests,
//! writing `v_m = z_{1-eta_m}`, the condition `g_m = d` reads
//!
//! ```text
//! log Phi(v_m) + gamma_m v_m - log d - gamma_m^2 / 2 = 0
//! ```
//!
//! which is increasing in `v_m` and solved per hypothesis by a safeguarded
//! Newton iteration. The outer problem finds `log d` such that the budget
//! constraint holds; the constraint is monotone in `d` because each `g_m` is
//! nonincreasing. Working in `v` and `log d` keeps sizes near `1e-12` and
//! near one representable without cancellation: `eta_m = Phi(-v_m)` and
//! `log(1 - eta_m) = log Phi(v_m)` are both evaluated directly.

use std::collections::HashMap;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::error::{check_probability, invalid, Error, Result};
use crate::model::{roc_unchecked, RocModel};
use crate::numerics::normal::{cdf, inverse_mills_lower, log_cdf, quantile};
use crate::numerics::{find_root, find_root_newton, Bracket, RootConfig};

/// Largest budget used when inverting the size map.
pub const ALPHA_CEILING: f64 = 1.0 - 1e-12;

const INNER_CFG: RootConfig = RootConfig { tol: 1e-13, max_iter: 200 };
const OUTER_CFG: RootConfig = RootConfig { tol: 1e-14, max_iter: 400 };
/// Geometric step (factor 4 in `d`) used to bracket the Lagrange constant.
const LOG_FOUR: f64 = 1.386_294_361_119_890_6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AllocationMethod {
    Sidak,
    Bonferroni,
    Optimal,
    Clustered,
}

/// A size vector together with its solver diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SizeAllocation {
    pub method: AllocationMethod,
    pub alpha: f64,
    pub sizes: Vec<f64>,
    /// Common value `d` of `rho'_m(eta_m)(1 - eta_m)`; optimal methods only.
    pub lagrange: Option<f64>,
    /// `sum log(1 - eta_m) - log(1 - alpha)`.
    pub constraint_residual: f64,
    /// `max_m |g_m(eta_m) - d| / d`; optimal methods only.
    pub stationarity_residual: Option<f64>,
    pub iterations: usize,
}

impl SizeAllocation {
    pub fn len(&self) -> usize {
        self.sizes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sizes.is_empty()
    }

    /// `sum eta_m`.
    pub fn size_sum(&self) -> f64 {
        self.sizes.iter().sum()
    }
}

fn validate_budget(m: usize, alpha: f64) -> Result<()> {
    if m == 0 {
        return Err(invalid("at least one hypothesis is required"));
    }
    if !(alpha.is_finite() && (0.0..1.0).contains(&alpha)) {
        return Err(invalid(format!("alpha must lie in [0, 1), got {alpha}")));
    }
    Ok(())
}

fn constraint_residual(sizes: &[f64], alpha: f64) -> f64 {
    sizes.iter().map(|&e| (-e).ln_1p()).sum::<f64>() - (-alpha).ln_1p()
}

/// Equal sizes `1 - (1 - alpha)^(1/M)`, which exhaust the budget exactly.
pub fn sidak_sizes(m: usize, alpha: f64) -> Result<SizeAllocation> {
    validate_budget(m, alpha)?;
    let eta = sidak_size(m, alpha);
    let sizes = vec![eta; m];
    Ok(SizeAllocation {
        method: AllocationMethod::Sidak,
        alpha,
        constraint_residual: constraint_residual(&sizes, alpha),
        sizes,
        lagrange: None,
        stationarity_residual: None,
        iterations: 0,
    })
}

pub(crate) fn sidak_size(m: usize, alpha: f64) -> f64 {
    -((-alpha).ln_1p() / m as f64).exp_m1()
}

/// Equal sizes `alpha / M`; conservative, so the residual is nonnegative.
pub fn bonferroni_sizes(m: usize, alpha: f64) -> Result<SizeAllocation> {
    validate_budget(m, alpha)?;
    let sizes = vec![alpha / m as f64; m];
    Ok(SizeAllocation {
        method: AllocationMethod::Bonferroni,
        alpha,
        constraint_residual: constraint_residual(&sizes, alpha),
        sizes,
        lagrange: None,
        stationarity_residual: None,
        iterations: 0,
    })
}

/// Solution of `g(eta) = d` for one effect size.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Coord {
    /// `z_{1-eta}`; `+inf` when `eta = 0`.
    pub v: f64,
    pub eta: f64,
    /// `log(1 - eta)`.
    pub log_keep: f64,
}

impl Coord {
    const ZERO: Coord = Coord { v: f64::INFINITY, eta: 0.0, log_keep: 0.0 };
    const ONE: Coord = Coord { v: f64::NEG_INFINITY, eta: 1.0, log_keep: f64::NEG_INFINITY };
}

/// `log g(eta)` for `g(eta) = rho'(eta)(1 - eta)`.
pub(crate) fn log_g(gamma: f64, eta: f64) -> f64 {
    if eta <= 0.0 {
        return if gamma > 0.0 { f64::INFINITY } else { 0.0 };
    }
    if eta >= 1.0 {
        return f64::NEG_INFINITY;
    }
    if gamma == 0.0 {
        return (-eta).ln_1p();
    }
    let z = -quantile(eta);
    gamma * z - 0.5 * gamma * gamma + log_cdf(z)
}

/// Solves `g(eta) = exp(log_d)` for `eta`. `guess` seeds the Newton
/// iteration on `v`.
pub(crate) fn solve_coord(gamma: f64, log_d: f64, guess: Option<f64>) -> Result<Coord> {
    if log_d == f64::INFINITY {
        return Ok(Coord::ZERO);
    }
    if log_d == f64::NEG_INFINITY {
        return Ok(Coord::ONE);
    }
    if gamma == 0.0 {
        // g(eta) = 1 - eta; the constraint eta >= 0 binds once d >= 1.
        if log_d >= 0.0 {
            return Ok(Coord::ZERO);
        }
        let keep = log_d.exp();
        return Ok(Coord { v: quantile(keep), eta: -log_d.exp_m1(), log_keep: log_d });
    }
    let target = log_d + 0.5 * gamma * gamma;
    let f = |v: f64| log_cdf(v) + gamma * v - target;
    let start = match guess {
        Some(g) if g.is_finite() => g,
        // log Phi(v) is negligible once v is moderately positive.
        _ => (target / gamma).clamp(-40.0, 40.0),
    };
    let bracket = Bracket::expand(f, start - 0.5, start + 0.5, 64)?;
    let r = find_root_newton(
        |v| (log_cdf(v) + gamma * v - target, inverse_mills_lower(v) + gamma),
        &bracket,
        start,
        &INNER_CFG,
    )?;
    let v = r.root;
    Ok(Coord { v, eta: cdf(-v), log_keep: log_cdf(v) })
}

/// Effect sizes grouped into clusters of identical ROC functions.
#[derive(Debug, Clone)]
pub(crate) struct Groups {
    pub gammas: Vec<f64>,
    pub weights: Vec<f64>,
    /// Cluster index of each hypothesis.
    pub member_of: Vec<usize>,
}

impl Groups {
    pub fn from_gammas(gammas: &[f64]) -> Self {
        let mut order: Vec<usize> = (0..gammas.len()).collect();
        order.sort_by(|&a, &b| gammas[a].total_cmp(&gammas[b]).then(a.cmp(&b)));
        let mut unique = Vec::new();
        let mut weights: Vec<f64> = Vec::new();
        let mut member_of = vec![0; gammas.len()];
        for &i in &order {
            if unique.last() != Some(&gammas[i]) {
                unique.push(gammas[i]);
                weights.push(0.0);
            }
            let k = unique.len() - 1;
            weights[k] += 1.0;
            member_of[i] = k;
        }
        Self { gammas: unique, weights, member_of }
    }

    pub fn from_clusters(gammas: &[f64], counts: &[usize]) -> Self {
        let member_of = counts.iter().enumerate().flat_map(|(k, &c)| std::iter::repeat_n(k, c)).collect();
        Self { gammas: gammas.to_vec(), weights: counts.iter().map(|&c| c as f64).collect(), member_of }
    }

    pub fn len(&self) -> usize {
        self.gammas.len()
    }

    /// Solves every cluster at `log_d`, warm-starting from `guesses` when given
    /// and writing the new roots back into them.
    pub fn coords_at(&self, log_d: f64, guesses: &mut [f64], out: &mut Vec<Coord>) -> Result<()> {
        out.clear();
        for (k, &g) in self.gammas.iter().enumerate() {
            let c = solve_coord(g, log_d, Some(guesses[k]))?;
            if c.v.is_finite() {
                guesses[k] = c.v;
            }
            out.push(c);
        }
        Ok(())
    }

    /// `sum_k w_k log(1 - eta_k(d))`.
    fn log_keep_total(&self, coords: &[Coord]) -> f64 {
        self.weights.iter().zip(coords).map(|(w, c)| w * c.log_keep).sum()
    }

    /// `sum_k w_k eta_k(d)`.
    pub fn size_total(&self, coords: &[Coord]) -> f64 {
        self.weights.iter().zip(coords).map(|(w, c)| w * c.eta).sum()
    }
}

/// Result of the outer solve on the Lagrange constant.
#[derive(Debug, Clone)]
pub(crate) struct LagrangeSolution {
    pub log_d: f64,
    pub coords: Vec<Coord>,
    pub iterations: usize,
}

/// Finds `log d` with `sum_k w_k log(1 - eta_k(d)) = log(1 - alpha)`.
pub(crate) fn solve_lagrange(groups: &Groups, alpha: f64) -> Result<LagrangeSolution> {
    if alpha == 0.0 {
        return Ok(LagrangeSolution { log_d: f64::INFINITY, coords: vec![Coord::ZERO; groups.len()], iterations: 0 });
    }
    let log_budget = (-alpha).ln_1p();
    let mut guesses = vec![f64::NAN; groups.len()];
    let mut coords = Vec::with_capacity(groups.len());
    let mut failure: Option<Error> = None;

    let mut h = |t: f64| -> f64 {
        match groups.coords_at(t, &mut guesses, &mut coords) {
            Ok(()) => groups.log_keep_total(&coords) - log_budget,
            Err(e) => {
                failure.get_or_insert(e);
                f64::NAN
            }
        }
    };

    // Geometric search for a sign change, starting from d = 1.
    let mut lo = 0.0;
    let mut f_lo = h(lo);
    let mut hi = lo;
    let mut f_hi = f_lo;
    let mut steps = 0;
    while f_lo > 0.0 && f_lo.is_finite() && steps < 500 {
        hi = lo;
        f_hi = f_lo;
        lo -= LOG_FOUR;
        f_lo = h(lo);
        steps += 1;
    }
    while f_hi < 0.0 && f_hi.is_finite() && steps < 500 {
        lo = hi;
        f_lo = f_hi;
        hi += LOG_FOUR;
        f_hi = h(hi);
        steps += 1;
    }
    if let Some(e) = failure.take() {
        return Err(Error::Solver(format!("inner solve failed while bracketing: {e}")));
    }
    let bracket = if lo == hi {
        // d = 1 is already the root.
        Bracket { lo: lo - LOG_FOUR, hi, f_lo: -1.0, f_hi: 0.0 }
    } else {
        Bracket::from_values(lo, hi, f_lo, f_hi)
            .map_err(|e| Error::Solver(format!("could not bracket the Lagrange constant: {e}")))?
    };

    let mut h = |t: f64| -> f64 {
        match groups.coords_at(t, &mut guesses, &mut coords) {
            Ok(()) => groups.log_keep_total(&coords) - log_budget,
            Err(e) => {
                failure.get_or_insert(e);
                f64::NAN
            }
        }
    };
    let root = find_root(&mut h, &bracket, &OUTER_CFG);
    if let Some(e) = failure {
        return Err(Error::Solver(format!("inner solve failed: {e}")));
    }
    let root = root.map_err(|e| Error::Solver(format!("Lagrange constant: {e}")))?;
    let mut final_coords = Vec::with_capacity(groups.len());
    groups.coords_at(root.root, &mut guesses, &mut final_coords)?;
    Ok(LagrangeSolution { log_d: root.root, coords: final_coords, iterations: root.iterations + steps })
}

/// `max_k |g_k(eta_k) / d - 1|` over clusters with a binding equation.
fn stationarity(groups: &Groups, coords: &[Coord], log_d: f64) -> f64 {
    if !log_d.is_finite() {
        return 0.0;
    }
    groups
        .gammas
        .iter()
        .zip(coords)
        .filter(|&(&g, c)| !(g == 0.0 && c.eta == 0.0))
        .map(|(&g, c)| {
            // Recompute from the size itself; sizes that underflowed are
            // checked through their quantile coordinate instead.
            let lg = if c.eta >= f64::MIN_POSITIVE { log_g(g, c.eta) } else { g * c.v - 0.5 * g * g + c.log_keep };
            (lg - log_d).exp_m1().abs()
        })
        .fold(0.0, f64::max)
}

fn allocation_from_groups(
    groups: &Groups,
    alpha: f64,
    method: AllocationMethod,
) -> Result<(SizeAllocation, LagrangeSolution)> {
    let sol = solve_lagrange(groups, alpha)?;
    let sizes: Vec<f64> = groups.member_of.iter().map(|&k| sol.coords[k].eta).collect();
    let alloc = SizeAllocation {
        method,
        alpha,
        constraint_residual: constraint_residual(&sizes, alpha),
        stationarity_residual: Some(stationarity(groups, &sol.coords, sol.log_d)),
        lagrange: Some(sol.log_d.exp()),
        sizes,
        iterations: sol.iterations,
    };
    Ok((alloc, sol))
}

/// Power-maximizing sizes under the weak FWER budget `alpha`.
pub fn optimal_sizes(model: &RocModel, alpha: f64) -> Result<SizeAllocation> {
    validate_budget(model.len(), alpha)?;
    let groups = Groups::from_gammas(&model.gammas());
    Ok(allocation_from_groups(&groups, alpha, AllocationMethod::Optimal)?.0)
}

/// Clusters of hypotheses sharing one ROC function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterSpec {
    gammas: Vec<f64>,
    counts: Vec<usize>,
}

impl ClusterSpec {
    pub fn new(gammas: Vec<f64>, counts: Vec<usize>) -> Result<Self> {
        if gammas.is_empty() {
            return Err(invalid("at least one cluster is required"));
        }
        if gammas.len() != counts.len() {
            return Err(Error::LengthMismatch { expected: gammas.len(), got: counts.len() });
        }
        if let Some(g) = gammas.iter().find(|g| !(g.is_finite() && **g >= 0.0)) {
            return Err(invalid(format!("effect size must be finite and nonnegative, got {g}")));
        }
        if counts.contains(&0) {
            return Err(invalid("cluster counts must be positive"));
        }
        Ok(Self { gammas, counts })
    }

    pub fn gammas(&self) -> &[f64] {
        &self.gammas
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    /// Total number of hypotheses.
    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }

    /// The per-hypothesis model, clusters laid out consecutively.
    pub fn expand_model(&self) -> Result<RocModel> {
        let gammas: Vec<f64> =
            self.gammas.iter().zip(&self.counts).flat_map(|(&g, &c)| std::iter::repeat_n(g, c)).collect();
        RocModel::from_gammas(&gammas)
    }
}

/// Optimal sizes per cluster.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterAllocation {
    pub alpha: f64,
    pub cluster_sizes: Vec<f64>,
    pub counts: Vec<usize>,
    pub lagrange: f64,
    pub constraint_residual: f64,
    pub stationarity_residual: f64,
}

impl ClusterAllocation {
    /// Per-hypothesis sizes, clusters laid out consecutively.
    pub fn expand(&self) -> Vec<f64> {
        self.cluster_sizes.iter().zip(&self.counts).flat_map(|(&z, &c)| std::iter::repeat_n(z, c)).collect()
    }
}

/// Solves the clustered Lagrange system
/// `rho'_k(zeta_k)(1 - zeta_k) = d`, `sum_k n_k log(1 - zeta_k) = log(1 - alpha)`.
pub fn optimal_sizes_clustered(spec: &ClusterSpec, alpha: f64) -> Result<ClusterAllocation> {
    validate_budget(spec.total(), alpha)?;
    let groups = Groups::from_clusters(&spec.gammas, &spec.counts);
    let sol = solve_lagrange(&groups, alpha)?;
    let cluster_sizes: Vec<f64> = sol.coords.iter().map(|c| c.eta).collect();
    let constraint =
        spec.counts.iter().zip(&cluster_sizes).map(|(&n, &z)| n as f64 * (-z).ln_1p()).sum::<f64>() - (-alpha).ln_1p();
    Ok(ClusterAllocation {
        alpha,
        stationarity_residual: stationarity(&groups, &sol.coords, sol.log_d),
        lagrange: sol.log_d.exp(),
        constraint_residual: constraint,
        counts: spec.counts.clone(),
        cluster_sizes,
    })
}

/// The map `alpha -> eta(alpha)` of optimal allocations for a fixed model,
/// with a memo of solved Lagrange constants keyed by the exact budget.
#[derive(Debug)]
pub struct SizeMap {
    model: RocModel,
    groups: Groups,
    cache: Mutex<HashMap<u64, f64>>,
}

impl Clone for SizeMap {
    fn clone(&self) -> Self {
        Self::new(self.model.clone())
    }
}

impl SizeMap {
    pub fn new(model: RocModel) -> Self {
        let groups = Groups::from_gammas(&model.gammas());
        Self { model, groups, cache: Mutex::new(HashMap::new()) }
    }

    pub fn model(&self) -> &RocModel {
        &self.model
    }

    pub fn len(&self) -> usize {
        self.model.len()
    }

    pub fn is_empty(&self) -> bool {
        self.model.is_empty()
    }

    /// `log d(alpha)`.
    pub fn log_lagrange(&self, alpha: f64) -> Result<f64> {
        validate_budget(self.len(), alpha)?;
        let key = alpha.to_bits();
        if let Some(&t) = self.cache.lock().expect("size map cache poisoned").get(&key) {
            return Ok(t);
        }
        let t = solve_lagrange(&self.groups, alpha)?.log_d;
        self.cache.lock().expect("size map cache poisoned").insert(key, t);
        Ok(t)
    }

    /// Full optimal allocation at `alpha`.
    pub fn allocation(&self, alpha: f64) -> Result<SizeAllocation> {
        validate_budget(self.len(), alpha)?;
        let (alloc, sol) = allocation_from_groups(&self.groups, alpha, AllocationMethod::Optimal)?;
        self.cache.lock().expect("size map cache poisoned").insert(alpha.to_bits(), sol.log_d);
        Ok(alloc)
    }

    /// `eta_m(alpha)`.
    pub fn size(&self, alpha: f64, m: usize) -> Result<f64> {
        let k = *self
            .groups
            .member_of
            .get(m)
            .ok_or_else(|| invalid(format!("hypothesis index {m} out of range 0..{}", self.len())))?;
        if alpha == 0.0 {
            return Ok(0.0);
        }
        let t = self.log_lagrange(alpha)?;
        Ok(solve_coord(self.groups.gammas[k], t, None)?.eta)
    }

    /// Smallest budget `W` with `eta_m(W) = s`, by bisection on `alpha`
    /// over `[0, ALPHA_CEILING]`.
    pub fn inverse(&self, m: usize, s: f64) -> Result<f64> {
        check_probability("size", s)?;
        if s == 0.0 {
            self.size(0.0, m)?;
            return Ok(0.0);
        }
        let top = self.size(ALPHA_CEILING, m)?;
        if s > top {
            return Err(Error::Saturated { index: m, requested: s, max_attainable: top });
        }
        let (mut lo, mut hi) = (0.0f64, ALPHA_CEILING);
        for _ in 0..300 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            let eta = self.size(mid, m)?;
            if eta >= s {
                hi = mid;
            } else {
                lo = mid;
            }
            if (eta - s).abs() <= 1e-15 * s.max(1e-300) {
                return Ok(mid);
            }
        }
        Ok(hi)
    }
}

/// `eta_m(alpha)` for the optimal allocation.
pub fn size_map(model: &RocModel, alpha: f64, m: usize) -> Result<f64> {
    SizeMap::new(model.clone()).size(alpha, m)
}

/// Budget `W` at which hypothesis `m` receives size `s`.
pub fn size_map_inverse(model: &RocModel, m: usize, s: f64) -> Result<f64> {
    SizeMap::new(model.clone()).inverse(m, s)
}

/// Worst case, over a grid of budgets, of `(M - 1) max_m eta_m / sum_m eta_m`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SizeConditionReport {
    pub satisfied: bool,
    pub worst_alpha: f64,
    pub worst_ratio: f64,
}

/// Checks `|M0| max_{m in M0} eta_m <= sum_m eta_m` for every proper subset
/// `M0`, whose worst case is `(M - 1) max_m eta_m`.
pub fn check_size_condition(model: &RocModel, alpha_grid: &[f64]) -> Result<SizeConditionReport> {
    SizeMap::new(model.clone()).size_condition(alpha_grid)
}

impl SizeMap {
    pub fn size_condition(&self, alpha_grid: &[f64]) -> Result<SizeConditionReport> {
        if alpha_grid.is_empty() {
            return Err(invalid("the alpha grid must not be empty"));
        }
        let m = self.len();
        let mut worst = SizeConditionReport { satisfied: true, worst_alpha: alpha_grid[0], worst_ratio: 0.0 };
        for &alpha in alpha_grid {
            if !(alpha > 0.0 && alpha < 1.0) {
                return Err(invalid(format!("grid values must lie in (0, 1), got {alpha}")));
            }
            if m == 1 {
                continue;
            }
            let sizes = self.allocation(alpha)?.sizes;
            let max = sizes.iter().cloned().fold(0.0, f64::max);
            let sum: f64 = sizes.iter().sum();
            let ratio = (m - 1) as f64 * max / sum;
            if ratio > worst.worst_ratio {
                worst.worst_ratio = ratio;
                worst.worst_alpha = alpha;
            }
        }
        worst.satisfied = worst.worst_ratio <= 1.0;
        Ok(worst)
    }
}

/// Summed power of `sizes` relative to Šidák sizes at the same budget, in percent.
pub fn efficiency_of(model: &RocModel, sizes: &[f64], alpha: f64) -> Result<f64> {
    if sizes.len() != model.len() {
        return Err(Error::LengthMismatch { expected: model.len(), got: sizes.len() });
    }
    let eta = sidak_size(model.len(), alpha);
    let sidak: f64 = model.gammas().iter().map(|&g| roc_unchecked(g, eta)).sum();
    if sidak == 0.0 {
        return Ok(100.0);
    }
    Ok(100.0 * model.total_power(sizes) / sidak)
}
