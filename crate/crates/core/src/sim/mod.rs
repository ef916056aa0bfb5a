//! Seeded Monte Carlo harness for comparing procedures.
//!
//! Each replicate draws truth indicators `theta_m ~ Bernoulli(p)`, effect
//! sizes `xi_m = |nu + Z_m|` and observations `X_m ~ N(xi_m theta_m, 1)`, and
//! scores every requested procedure on the p-values `S_m = 1 - Phi(X_m)`.
//! The optimal procedures are given `gamma_m = xi_m` for every hypothesis.
//!
//! Replicates run in parallel, but per-replicate losses are collected in
//! replicate order and summed sequentially, so estimates are bit-identical to
//! a single-threaded run.

pub mod rng;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::allocator::{efficiency_of, optimal_sizes};
use crate::error::{check_probability, invalid, Error, Result};
use crate::model::RocModel;
use crate::numerics::normal::cdf;
use crate::procedures::{
    decide_bh, decide_bonferroni, decide_stepdown_sidak, decide_weak_fwer, fdr_opt_on_panel, generalized_pvalues,
    strong_fwer_on_panel, Decision, ProcedureTag, TruthAssignment,
};

pub use rng::{stream_rng, Stream};

/// One cell of a simulation study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    /// Number of hypotheses.
    pub m: usize,
    /// Proportion of true alternatives.
    pub p: f64,
    /// Mean of the effect-size generator.
    pub nu: f64,
    pub qstar: f64,
    pub reps: usize,
    pub seed: u64,
    pub procedures: Vec<ProcedureTag>,
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        if self.m == 0 {
            return Err(invalid("at least one hypothesis is required"));
        }
        check_probability("p", self.p)?;
        check_probability("q*", self.qstar)?;
        if !self.nu.is_finite() {
            return Err(invalid(format!("nu must be finite, got {}", self.nu)));
        }
        if self.reps == 0 {
            return Err(invalid("at least one replicate is required"));
        }
        if self.procedures.is_empty() {
            return Err(invalid("at least one procedure is required"));
        }
        Ok(())
    }
}

/// One simulated data set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Panel {
    pub theta: TruthAssignment,
    /// Effect sizes `xi_m`, drawn for nulls and alternatives alike.
    pub xi: Vec<f64>,
    pub x: Vec<f64>,
    /// `1 - Phi(x_m)`.
    pub s: Vec<f64>,
}

/// Draws replicate `rep` of `config`; the same `(seed, rep)` always yields the same panel.
pub fn generate_panel(config: &ScenarioConfig, rep: u64) -> Result<Panel> {
    config.validate()?;
    let m = config.m;
    let mut theta_rng = stream_rng(config.seed, rep, Stream::Theta);
    let mut effect_rng = stream_rng(config.seed, rep, Stream::Effect);
    let mut obs_rng = stream_rng(config.seed, rep, Stream::Observation);
    let theta: Vec<bool> = (0..m).map(|_| theta_rng.random::<f64>() < config.p).collect();
    let xi: Vec<f64> = (0..m).map(|_| (config.nu + effect_rng.sample::<f64, _>(StandardNormal)).abs()).collect();
    let x: Vec<f64> = theta
        .iter()
        .zip(&xi)
        .map(|(&t, &xi)| if t { xi } else { 0.0 } + obs_rng.sample::<f64, _>(StandardNormal))
        .collect();
    let s = x.iter().map(|&x| cdf(-x)).collect();
    Ok(Panel { theta: TruthAssignment::new(theta), xi, x, s })
}

/// Losses of one decision against the truth.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReplicateLoss {
    /// False discovery proportion, `0/0 = 0`.
    pub fdp: f64,
    /// Alternatives not rejected.
    pub missed: usize,
    /// `missed / #alternatives`, `0/0 = 0`.
    pub mdr_std: f64,
    pub true_positives: usize,
    pub false_positives: usize,
}

impl ReplicateLoss {
    /// At least `k` false rejections.
    pub fn at_least_false(&self, k: usize) -> bool {
        self.false_positives >= k
    }
}

pub fn risk_metrics(decision: &Decision, truth: &TruthAssignment) -> Result<ReplicateLoss> {
    if decision.reject.len() != truth.len() {
        return Err(Error::LengthMismatch { expected: truth.len(), got: decision.reject.len() });
    }
    let mut tp = 0;
    let mut fp = 0;
    let mut missed = 0;
    for (&r, &t) in decision.reject.iter().zip(&truth.theta) {
        match (r, t) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => missed += 1,
            (false, false) => {}
        }
    }
    let ratio = |num: usize, den: usize| if den == 0 { 0.0 } else { num as f64 / den as f64 };
    Ok(ReplicateLoss {
        fdp: ratio(fp, tp + fp),
        missed,
        mdr_std: ratio(missed, truth.n_alternatives()),
        true_positives: tp,
        false_positives: fp,
    })
}

/// Monte Carlo averages of the losses of one procedure, with standard errors
/// `sd / sqrt(reps)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskEstimates {
    pub procedure: ProcedureTag,
    pub reps: usize,
    pub fdr: f64,
    pub se_fdr: f64,
    /// Mean standardized missed discovery rate.
    pub mdr_std: f64,
    pub se_mdr: f64,
    pub fwer: f64,
    pub se_fwer: f64,
    pub etp: f64,
    pub se_etp: f64,
    pub efp: f64,
    pub se_efp: f64,
    /// `false_positive_counts[k]` replicates had exactly `k` false rejections.
    pub false_positive_counts: Vec<usize>,
}

impl RiskEstimates {
    /// Fraction of replicates with at least `k` false rejections.
    pub fn kfwer(&self, k: usize) -> f64 {
        let hits: usize = self.false_positive_counts.iter().skip(k).sum();
        hits as f64 / self.reps as f64
    }

    fn from_losses(procedure: ProcedureTag, losses: &[ReplicateLoss]) -> Self {
        let mean_se = |f: &dyn Fn(&ReplicateLoss) -> f64| mean_and_se(losses.iter().map(f));
        let (fdr, se_fdr) = mean_se(&|l| l.fdp);
        let (mdr_std, se_mdr) = mean_se(&|l| l.mdr_std);
        let (fwer, se_fwer) = mean_se(&|l| if l.at_least_false(1) { 1.0 } else { 0.0 });
        let (etp, se_etp) = mean_se(&|l| l.true_positives as f64);
        let (efp, se_efp) = mean_se(&|l| l.false_positives as f64);
        let max_fp = losses.iter().map(|l| l.false_positives).max().unwrap_or(0);
        let mut false_positive_counts = vec![0; max_fp + 1];
        for l in losses {
            false_positive_counts[l.false_positives] += 1;
        }
        Self {
            procedure,
            reps: losses.len(),
            fdr,
            se_fdr,
            mdr_std,
            se_mdr,
            fwer,
            se_fwer,
            etp,
            se_etp,
            efp,
            se_efp,
            false_positive_counts,
        }
    }
}

/// Sample mean and `sample sd / sqrt(n)`, summed in iteration order.
fn mean_and_se(values: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let (n, sum) = values.clone().fold((0usize, 0.0), |(n, s), v| (n + 1, s + v));
    if n == 0 {
        return (0.0, 0.0);
    }
    let mean = sum / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let ss: f64 = values.map(|v| (v - mean) * (v - mean)).sum();
    (mean, (ss / (n - 1) as f64).sqrt() / (n as f64).sqrt())
}

/// Runs every requested procedure on one panel, in the order requested.
pub fn decide_panel(panel: &Panel, procedures: &[ProcedureTag], qstar: f64) -> Result<Vec<Decision>> {
    let needs_model = procedures.iter().any(|t| t.needs_model());
    let model = if needs_model { Some(RocModel::from_gammas(&panel.xi)?) } else { None };
    let needs_w = procedures.iter().any(|t| matches!(t, ProcedureTag::StrongFwerOpt | ProcedureTag::FdrOpt));
    let w_panel = match (&model, needs_w) {
        (Some(model), true) => Some(generalized_pvalues(model, &panel.s)?),
        _ => None,
    };
    procedures
        .iter()
        .map(|&tag| match tag {
            ProcedureTag::WeakFwerOpt => decide_weak_fwer(model.as_ref().unwrap(), &panel.s, qstar),
            ProcedureTag::StrongFwerOpt => {
                strong_fwer_on_panel(model.as_ref().unwrap(), w_panel.as_ref().unwrap(), qstar)
            }
            ProcedureTag::FdrOpt => fdr_opt_on_panel(w_panel.as_ref().unwrap(), qstar),
            ProcedureTag::Bh => decide_bh(&panel.s, qstar),
            ProcedureTag::StepdownSidak => decide_stepdown_sidak(&panel.s, qstar),
            ProcedureTag::Bonferroni => decide_bonferroni(&panel.s, qstar),
        })
        .collect()
}

fn replicate_losses(config: &ScenarioConfig, rep: u64) -> Result<Vec<ReplicateLoss>> {
    let panel = generate_panel(config, rep)?;
    decide_panel(&panel, &config.procedures, config.qstar)?.iter().map(|d| risk_metrics(d, &panel.theta)).collect()
}

/// Estimates, one per requested procedure (in request order).
pub fn run_cell(config: &ScenarioConfig) -> Result<Vec<RiskEstimates>> {
    config.validate()?;
    let per_rep: Vec<Vec<ReplicateLoss>> = (0..config.reps as u64)
        .into_par_iter()
        .map(|rep| replicate_losses(config, rep).map_err(|e| Error::Replicate { rep, source: Box::new(e) }))
        .collect::<Result<_>>()?;
    Ok(config
        .procedures
        .iter()
        .enumerate()
        .map(|(k, &tag)| {
            let losses: Vec<ReplicateLoss> = per_rep.iter().map(|r| r[k]).collect();
            RiskEstimates::from_losses(tag, &losses)
        })
        .collect())
}

/// Cross product of scenario parameters sharing one budget, replicate count and seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub m: Vec<usize>,
    pub p: Vec<f64>,
    pub nu: Vec<f64>,
    pub qstar: f64,
    pub reps: usize,
    pub seed: u64,
    pub procedures: Vec<ProcedureTag>,
}

impl GridSpec {
    /// `M in {20, 50, 100}`, `p in {0.1, 0.2, 0.4}`, `nu in {1, 2, 4}`,
    /// comparing the step-up optimal rule with Benjamini-Hochberg.
    pub fn study_grid(qstar: f64, reps: usize, seed: u64) -> Self {
        Self {
            m: vec![20, 50, 100],
            p: vec![0.1, 0.2, 0.4],
            nu: vec![1.0, 2.0, 4.0],
            qstar,
            reps,
            seed,
            procedures: vec![ProcedureTag::FdrOpt, ProcedureTag::Bh],
        }
    }

    /// The cells in `M`-major, then `p`, then `nu` order.
    pub fn cells(&self) -> Vec<ScenarioConfig> {
        let mut out = Vec::with_capacity(self.m.len() * self.p.len() * self.nu.len());
        for &m in &self.m {
            for &p in &self.p {
                for &nu in &self.nu {
                    out.push(ScenarioConfig {
                        m,
                        p,
                        nu,
                        qstar: self.qstar,
                        reps: self.reps,
                        seed: self.seed,
                        procedures: self.procedures.clone(),
                    });
                }
            }
        }
        out
    }
}

/// One report line: a cell's parameters and one procedure's estimates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub m: usize,
    pub p: f64,
    pub nu: f64,
    pub qstar: f64,
    pub reps: usize,
    pub seed: u64,
    pub procedure: ProcedureTag,
    pub fdr: f64,
    pub se_fdr: f64,
    pub mdr_std: f64,
    pub se_mdr: f64,
    pub fwer: f64,
    pub se_fwer: f64,
    pub etp: f64,
    pub se_etp: f64,
    pub efp: f64,
    pub se_efp: f64,
}

impl ReportRow {
    pub fn new(cell: &ScenarioConfig, est: &RiskEstimates) -> Self {
        Self {
            m: cell.m,
            p: cell.p,
            nu: cell.nu,
            qstar: cell.qstar,
            reps: cell.reps,
            seed: cell.seed,
            procedure: est.procedure,
            fdr: est.fdr,
            se_fdr: est.se_fdr,
            mdr_std: est.mdr_std,
            se_mdr: est.se_mdr,
            fwer: est.fwer,
            se_fwer: est.se_fwer,
            etp: est.etp,
            se_etp: est.se_etp,
            efp: est.efp,
            se_efp: est.se_efp,
        }
    }
}

/// Runs every cell of the grid; rows come out in cell order, procedures in request order.
pub fn run_table(grid: &GridSpec) -> Result<Vec<ReportRow>> {
    let mut rows = Vec::new();
    for cell in grid.cells() {
        for est in run_cell(&cell)? {
            rows.push(ReportRow::new(&cell, &est));
        }
    }
    Ok(rows)
}

/// Summed power of the optimal sizes over that of Šidák sizes, in percent.
pub fn efficiency_vs_sidak(model: &RocModel, alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(invalid(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    let sizes = optimal_sizes(model, alpha)?.sizes;
    efficiency_of(model, &sizes, alpha)
}
