//! Generalized p-values and the stepwise procedures on one panel.
//!
//! Ten hypotheses with known effect sizes are tested; the weak and strong
//! FWER rules and the FDR rule built on the generalized p-values are shown
//! next to Bonferroni, step-down Šidák and BH on the same p-values.
//!
//! Run with `cargo run --example stepwise_procedures`.

use optimal_mdf::{
    decide_bh, decide_bonferroni, decide_fdr_opt, decide_stepdown_sidak, decide_strong_fwer, decide_weak_fwer,
    generalized_pvalues, Decision, RocModel,
};

fn main() -> optimal_mdf::Result<()> {
    let gammas = [0.5, 0.5, 1.0, 1.0, 2.0, 2.0, 3.0, 3.0, 4.0, 4.0];
    let s = [0.20, 0.03, 0.012, 0.40, 0.004, 0.021, 0.0009, 0.05, 0.002, 0.0015];
    let q = 0.05;
    let model = RocModel::from_gammas(&gammas)?;

    let panel = generalized_pvalues(&model, &s)?;
    println!("{:>3} {:>6} {:>8} {:>10}", "m", "gamma", "S", "W");
    for &m in &panel.antiranks {
        println!("{m:>3} {:>6} {:>8} {:>10.5}", gammas[m], s[m], panel.w[m]);
    }

    let show = |name: &str, d: &Decision| {
        println!("{name:<16} rejects {:>2}: {:?}", d.rejections(), d.rejected_indices());
    };
    println!();
    show("weak FWER opt", &decide_weak_fwer(&model, &s, q)?);
    show("strong FWER opt", &decide_strong_fwer(&model, &s, q)?);
    show("step-down Šidák", &decide_stepdown_sidak(&s, q)?);
    show("Bonferroni", &decide_bonferroni(&s, q)?);
    let fdr = decide_fdr_opt(&model, &s, q)?;
    show("FDR opt", &fdr);
    show("BH", &decide_bh(&s, q)?);

    println!("\nFDR opt scan (size sum against q * rank):");
    for step in &fdr.trace.steps {
        println!(
            "  rank {:>2}  W = {:.5}  sum = {:.5}  bound = {:.3}  {}",
            step.rank,
            step.statistic,
            step.size_sum.unwrap_or(f64::NAN),
            step.threshold,
            if step.pass { "pass" } else { "" }
        );
    }
    if let Some(sc) = &fdr.size_condition {
        println!(
            "size condition satisfied: {} (worst ratio {:.3} at alpha {})",
            sc.satisfied, sc.worst_ratio, sc.worst_alpha
        );
    }
    Ok(())
}
