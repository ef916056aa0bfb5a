//! Multiple decision procedures built on the optimal size map, plus the
//! classical baselines.
//!
//! Every optimal procedure works through the generalized p-values
//! `W_m = inf { alpha : S_m <= eta_m(alpha) }`. Because each `eta_m` is
//! nondecreasing in `alpha`, hypothesis `m` is rejected at budget `alpha`
//! exactly when `W_m <= alpha`, so all stepwise rules reject a prefix of the
//! hypotheses ordered by `W`.
//!
//! `W_m` is computed without searching over `alpha`: the Lagrange constant at
//! which hypothesis `m` receives size `S_m` is `d_m = g_m(S_m)`, and the
//! budget spent by the whole allocation at that constant is
//! `W_m = 1 - prod_j (1 - eta_j(d_m))`. The same pass yields
//! `sum_j eta_j(W_m)`, which the step-up rule needs.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::allocator::{log_g, optimal_sizes, sidak_size, Coord, Groups, SizeConditionReport, SizeMap};
use crate::error::{check_probability, invalid, Error, Result};
use crate::model::RocModel;
use crate::numerics::normal::quantile;

/// Budgets on which `decide_fdr_opt` evaluates the size-condition diagnostic.
pub const SIZE_CONDITION_GRID: [f64; 7] = [0.001, 0.005, 0.01, 0.025, 0.05, 0.1, 0.2];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProcedureTag {
    WeakFwerOpt,
    StrongFwerOpt,
    FdrOpt,
    Bh,
    StepdownSidak,
    Bonferroni,
}

impl ProcedureTag {
    pub const ALL: [ProcedureTag; 6] = [
        ProcedureTag::WeakFwerOpt,
        ProcedureTag::StrongFwerOpt,
        ProcedureTag::FdrOpt,
        ProcedureTag::Bh,
        ProcedureTag::StepdownSidak,
        ProcedureTag::Bonferroni,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            ProcedureTag::WeakFwerOpt => "weak-fwer-opt",
            ProcedureTag::StrongFwerOpt => "strong-fwer-opt",
            ProcedureTag::FdrOpt => "fdr-opt",
            ProcedureTag::Bh => "bh",
            ProcedureTag::StepdownSidak => "stepdown-sidak",
            ProcedureTag::Bonferroni => "bonferroni",
        }
    }

    /// Whether the procedure needs effect sizes.
    pub fn needs_model(&self) -> bool {
        matches!(self, ProcedureTag::WeakFwerOpt | ProcedureTag::StrongFwerOpt | ProcedureTag::FdrOpt)
    }
}

impl fmt::Display for ProcedureTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ProcedureTag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ProcedureTag::ALL
            .into_iter()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| invalid(format!("unknown procedure '{s}'")))
    }
}

/// Ordinary and generalized p-values with the anti-ranks of the latter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PValuePanel {
    pub s: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub u: Option<Vec<f64>>,
    pub w: Vec<f64>,
    /// Hypothesis indices (0-based) ordered by increasing `w`, ties by index.
    pub antiranks: Vec<usize>,
    #[serde(skip)]
    log_d: Vec<f64>,
    #[serde(skip)]
    size_sum: Vec<f64>,
}

impl PValuePanel {
    pub fn len(&self) -> usize {
        self.s.len()
    }

    pub fn is_empty(&self) -> bool {
        self.s.is_empty()
    }

    /// Attaches the randomizers that produced `s`.
    pub fn with_randomizers(mut self, u: Vec<f64>) -> Result<Self> {
        if u.len() != self.s.len() {
            return Err(Error::LengthMismatch { expected: self.s.len(), got: u.len() });
        }
        self.u = Some(u);
        Ok(self)
    }

    /// `W_(1) <= ... <= W_(M)`.
    pub fn ordered_w(&self) -> Vec<f64> {
        self.antiranks.iter().map(|&m| self.w[m]).collect()
    }

    /// `sum_j eta_j(W_m)` for each hypothesis `m`.
    pub fn size_sums(&self) -> &[f64] {
        &self.size_sum
    }
}

/// One row of a stepwise scan, in order of increasing statistic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceStep {
    /// 1-based position in the ordering.
    pub rank: usize,
    /// 0-based hypothesis index.
    pub index: usize,
    /// `W_(i)` for the optimal procedures, `S_(i)` for the baselines.
    pub statistic: f64,
    /// Value the step is compared against.
    pub threshold: f64,
    /// `prod_{m >= i} [1 - eta_(m)(W_(i))]` (step-down rule).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub product: Option<f64>,
    /// `sum_j eta_j(W_(i))` (step-up rule).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub size_sum: Option<f64>,
    pub pass: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ProcedureTrace {
    pub steps: Vec<TraceStep>,
}

/// Outcome of a procedure on one panel of p-values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Decision {
    pub procedure: ProcedureTag,
    /// The error budget the procedure was run at (`alpha` or `q*`).
    pub budget: f64,
    pub reject: Vec<bool>,
    /// Number of hypotheses rejected from the front of the ordering.
    pub cutoff_index: usize,
    /// Realized threshold; any value in `[stat_(J), stat_(J+1))` gives the same decision.
    pub alpha_threshold: f64,
    pub trace: ProcedureTrace,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub size_condition: Option<SizeConditionReport>,
}

impl Decision {
    pub fn rejections(&self) -> usize {
        self.reject.iter().filter(|&&r| r).count()
    }

    pub fn rejected_indices(&self) -> Vec<usize> {
        self.reject.iter().enumerate().filter(|(_, &r)| r).map(|(i, _)| i).collect()
    }
}

/// True state of each pair of hypotheses; used only to score decisions.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TruthAssignment {
    pub theta: Vec<bool>,
}

impl TruthAssignment {
    pub fn new(theta: Vec<bool>) -> Self {
        Self { theta }
    }

    pub fn len(&self) -> usize {
        self.theta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.theta.is_empty()
    }

    /// Indices of true nulls.
    pub fn nulls(&self) -> Vec<usize> {
        self.theta.iter().enumerate().filter(|(_, &t)| !t).map(|(i, _)| i).collect()
    }

    /// Indices of true alternatives.
    pub fn alternatives(&self) -> Vec<usize> {
        self.theta.iter().enumerate().filter(|(_, &t)| t).map(|(i, _)| i).collect()
    }

    pub fn n_alternatives(&self) -> usize {
        self.theta.iter().filter(|&&t| t).count()
    }
}

fn validate_pvalues(s: &[f64]) -> Result<()> {
    if s.is_empty() {
        return Err(invalid("at least one p-value is required"));
    }
    for &p in s {
        check_probability("p-value", p)?;
    }
    Ok(())
}

fn validate_model(model: &RocModel, s: &[f64]) -> Result<()> {
    validate_pvalues(s)?;
    if model.len() != s.len() {
        return Err(Error::LengthMismatch { expected: model.len(), got: s.len() });
    }
    Ok(())
}

/// Indices sorted by value, ties broken by ascending index.
pub fn antiranks(values: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
    order
}

fn prefix_reject(order: &[usize], cutoff: usize, m: usize) -> Vec<bool> {
    let mut reject = vec![false; m];
    for &i in &order[..cutoff] {
        reject[i] = true;
    }
    reject
}

/// Coordinates at `log_d` with hypothesis `m`'s own cluster pinned to its
/// exact size `s_m` (which it has there by construction).
fn coords_pinned(
    groups: &Groups,
    log_d: f64,
    m: usize,
    s_m: f64,
    guesses: &mut [f64],
    out: &mut Vec<Coord>,
) -> Result<()> {
    groups.coords_at(log_d, guesses, out)?;
    if log_d.is_finite() {
        let k = groups.member_of[m];
        out[k] = Coord { v: -quantile(s_m), eta: s_m, log_keep: (-s_m).ln_1p() };
    }
    Ok(())
}

fn build_panel(groups: &Groups, s: &[f64]) -> Result<PValuePanel> {
    let m_total = s.len();
    let log_d: Vec<f64> = s
        .iter()
        .enumerate()
        .map(|(m, &sm)| if sm == 0.0 { f64::INFINITY } else { log_g(groups.gammas[groups.member_of[m]], sm) })
        .collect();

    // Visit hypotheses by decreasing d (increasing W) so warm starts stay close.
    let mut visit: Vec<usize> = (0..m_total).collect();
    visit.sort_by(|&a, &b| log_d[b].total_cmp(&log_d[a]).then(a.cmp(&b)));

    let mut w = vec![0.0; m_total];
    let mut size_sum = vec![0.0; m_total];
    let mut guesses = vec![f64::NAN; groups.len()];
    let mut coords = Vec::with_capacity(groups.len());
    let mut previous: Option<(u64, usize, f64, f64)> = None;
    for &m in &visit {
        let key = (log_d[m].to_bits(), groups.member_of[m]);
        if let Some((bits, k, wm, sum)) = previous {
            if (bits, k) == key {
                w[m] = wm;
                size_sum[m] = sum;
                continue;
            }
        }
        coords_pinned(groups, log_d[m], m, s[m], &mut guesses, &mut coords)?;
        let log_keep: f64 = groups.weights.iter().zip(&coords).map(|(wt, c)| wt * c.log_keep).sum();
        w[m] = -log_keep.exp_m1();
        size_sum[m] = groups.size_total(&coords);
        previous = Some((key.0, key.1, w[m], size_sum[m]));
    }
    let antiranks = antiranks(&w);
    Ok(PValuePanel { s: s.to_vec(), u: None, w, antiranks, log_d, size_sum })
}

/// Generalized p-values `W_m` with `S_m = eta_m(W_m)`.
///
/// `S_m = 0` maps to `W_m = 0` and `S_m = 1` to `W_m = 1`.
pub fn generalized_pvalues(model: &RocModel, s: &[f64]) -> Result<PValuePanel> {
    validate_model(model, s)?;
    build_panel(&Groups::from_gammas(&model.gammas()), s)
}

/// Single-step weighted rule: reject `m` iff `S_m <= eta_m(alpha)` for the optimal sizes.
pub fn decide_weak_fwer(model: &RocModel, s: &[f64], alpha: f64) -> Result<Decision> {
    validate_model(model, s)?;
    let sizes = optimal_sizes(model, alpha)?.sizes;
    let reject: Vec<bool> = s.iter().zip(&sizes).map(|(&p, &eta)| p <= eta).collect();
    let steps = s
        .iter()
        .zip(&sizes)
        .enumerate()
        .map(|(i, (&p, &eta))| TraceStep {
            rank: i + 1,
            index: i,
            statistic: p,
            threshold: eta,
            product: None,
            size_sum: None,
            pass: p <= eta,
        })
        .collect();
    let cutoff_index = reject.iter().filter(|&&r| r).count();
    Ok(Decision {
        procedure: ProcedureTag::WeakFwerOpt,
        budget: alpha,
        reject,
        cutoff_index,
        alpha_threshold: alpha,
        trace: ProcedureTrace { steps },
        size_condition: None,
    })
}

/// Step-down strong FWER rule on a prepared panel:
/// `J = max { j : prod_{m >= i} [1 - eta_(m)(W_(i))] >= 1 - q* for all i <= j }`.
pub fn strong_fwer_on_panel(model: &RocModel, panel: &PValuePanel, qstar: f64) -> Result<Decision> {
    check_probability("q*", qstar)?;
    validate_model(model, &panel.s)?;
    let groups = Groups::from_gammas(&model.gammas());
    let order = &panel.antiranks;
    let m_total = order.len();
    let floor = 1.0 - qstar;
    let mut guesses = vec![f64::NAN; groups.len()];
    let mut coords = Vec::with_capacity(groups.len());
    let mut steps = Vec::with_capacity(m_total);
    let mut cutoff = 0;
    let mut still_passing = true;
    for (i, &m) in order.iter().enumerate() {
        coords_pinned(&groups, panel.log_d[m], m, panel.s[m], &mut guesses, &mut coords)?;
        let log_prod: f64 = order[i..].iter().map(|&k| coords[groups.member_of[k]].log_keep).sum();
        let product = log_prod.exp();
        let pass = product >= floor;
        if pass && still_passing {
            cutoff = i + 1;
        } else {
            still_passing = false;
        }
        steps.push(TraceStep {
            rank: i + 1,
            index: m,
            statistic: panel.w[m],
            threshold: floor,
            product: Some(product),
            size_sum: None,
            pass,
        });
    }
    Ok(Decision {
        procedure: ProcedureTag::StrongFwerOpt,
        budget: qstar,
        reject: prefix_reject(order, cutoff, m_total),
        cutoff_index: cutoff,
        alpha_threshold: if cutoff == 0 { 0.0 } else { panel.w[order[cutoff - 1]] },
        trace: ProcedureTrace { steps },
        size_condition: None,
    })
}

/// Step-down strong FWER control at `q*` built on the optimal size map.
pub fn decide_strong_fwer(model: &RocModel, s: &[f64], qstar: f64) -> Result<Decision> {
    check_probability("q*", qstar)?;
    let panel = generalized_pvalues(model, s)?;
    strong_fwer_on_panel(model, &panel, qstar)
}

/// Step-up FDR rule on a prepared panel:
/// `J = max { i : sum_j eta_j(W_(i)) <= q* i }`. No size-condition report is attached.
pub fn fdr_opt_on_panel(panel: &PValuePanel, qstar: f64) -> Result<Decision> {
    check_probability("q*", qstar)?;
    let order = &panel.antiranks;
    let m_total = order.len();
    let mut cutoff = 0;
    let steps: Vec<TraceStep> = order
        .iter()
        .enumerate()
        .map(|(i, &m)| {
            let threshold = qstar * (i + 1) as f64;
            let sum = panel.size_sum[m];
            let pass = sum <= threshold;
            if pass {
                cutoff = i + 1;
            }
            TraceStep {
                rank: i + 1,
                index: m,
                statistic: panel.w[m],
                threshold,
                product: None,
                size_sum: Some(sum),
                pass,
            }
        })
        .collect();
    Ok(Decision {
        procedure: ProcedureTag::FdrOpt,
        budget: qstar,
        reject: prefix_reject(order, cutoff, m_total),
        cutoff_index: cutoff,
        alpha_threshold: if cutoff == 0 { 0.0 } else { panel.w[order[cutoff - 1]] },
        trace: ProcedureTrace { steps },
        size_condition: None,
    })
}

/// Step-up FDR control at `q*` built on the optimal size map. The size
/// condition under which control is guaranteed is checked on
/// [`SIZE_CONDITION_GRID`] and attached; the decision is made either way.
pub fn decide_fdr_opt(model: &RocModel, s: &[f64], qstar: f64) -> Result<Decision> {
    check_probability("q*", qstar)?;
    let panel = generalized_pvalues(model, s)?;
    let mut decision = fdr_opt_on_panel(&panel, qstar)?;
    decision.size_condition = Some(SizeMap::new(model.clone()).size_condition(&SIZE_CONDITION_GRID)?);
    Ok(decision)
}

fn ordered_baseline(
    s: &[f64],
    qstar: f64,
    tag: ProcedureTag,
    step_down: bool,
    threshold: impl Fn(usize) -> f64,
) -> Result<Decision> {
    validate_pvalues(s)?;
    check_probability("q*", qstar)?;
    let order = antiranks(s);
    let m_total = s.len();
    let mut cutoff = 0;
    let mut still_passing = true;
    let mut steps = Vec::with_capacity(m_total);
    for (i, &m) in order.iter().enumerate() {
        let t = threshold(i + 1);
        let pass = s[m] <= t;
        if step_down {
            if pass && still_passing {
                cutoff = i + 1;
            } else {
                still_passing = false;
            }
        } else if pass {
            cutoff = i + 1;
        }
        steps.push(TraceStep {
            rank: i + 1,
            index: m,
            statistic: s[m],
            threshold: t,
            product: None,
            size_sum: None,
            pass,
        });
    }
    Ok(Decision {
        procedure: tag,
        budget: qstar,
        reject: prefix_reject(&order, cutoff, m_total),
        cutoff_index: cutoff,
        alpha_threshold: if cutoff == 0 { 0.0 } else { s[order[cutoff - 1]] },
        trace: ProcedureTrace { steps },
        size_condition: None,
    })
}

/// Benjamini-Hochberg step-up: `J = max { i : S_(i) <= q* i / M }`.
pub fn decide_bh(s: &[f64], qstar: f64) -> Result<Decision> {
    let m = s.len() as f64;
    ordered_baseline(s, qstar, ProcedureTag::Bh, false, |i| qstar * i as f64 / m)
}

/// Step-down Šidák: reject while `S_(i) <= 1 - (1 - q*)^(1/(M - i + 1))`.
pub fn decide_stepdown_sidak(s: &[f64], qstar: f64) -> Result<Decision> {
    let m = s.len();
    ordered_baseline(s, qstar, ProcedureTag::StepdownSidak, true, |i| {
        if qstar >= 1.0 {
            1.0
        } else {
            sidak_size(m - i + 1, qstar)
        }
    })
}

/// Single-step Bonferroni: reject `S_m <= q* / M`.
pub fn decide_bonferroni(s: &[f64], qstar: f64) -> Result<Decision> {
    let m = s.len() as f64;
    let mut d = ordered_baseline(s, qstar, ProcedureTag::Bonferroni, false, |_| qstar / m)?;
    d.alpha_threshold = qstar / m;
    Ok(d)
}

/// Bounds `(1 - (1 - q*/M)^M, q*)` on the global-null FDR of the step-up rule.
pub fn fdr_null_bounds(m: usize, qstar: f64) -> Result<(f64, f64)> {
    if m == 0 {
        return Err(invalid("at least one hypothesis is required"));
    }
    check_probability("q*", qstar)?;
    let lower = -(m as f64 * (-qstar / m as f64).ln_1p()).exp_m1();
    Ok((lower, qstar))
}

/// Runs any procedure by tag; `model` is required for the optimal ones.
pub fn decide(tag: ProcedureTag, model: Option<&RocModel>, s: &[f64], budget: f64) -> Result<Decision> {
    let need = || model.ok_or_else(|| invalid(format!("procedure {tag} needs effect sizes")));
    match tag {
        ProcedureTag::WeakFwerOpt => decide_weak_fwer(need()?, s, budget),
        ProcedureTag::StrongFwerOpt => decide_strong_fwer(need()?, s, budget),
        ProcedureTag::FdrOpt => decide_fdr_opt(need()?, s, budget),
        ProcedureTag::Bh => decide_bh(s, budget),
        ProcedureTag::StepdownSidak => decide_stepdown_sidak(s, budget),
        ProcedureTag::Bonferroni => decide_bonferroni(s, budget),
    }
}
