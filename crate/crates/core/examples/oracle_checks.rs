//! Cross-checks of the solver against the brute-force oracles.
//!
//! A grid search over the budget simplex confirms the optimal sizes for
//! small families, exhaustive enumeration gives exact Bernoulli-sum tails,
//! and a numerical check confirms the ROC curves are concave.
//!
//! Run with `cargo run --example oracle_checks`.

use optimal_mdf::model::roc;
use optimal_mdf::oracle::{bernoulli_tail_enumerate, concavity_check, grid_optimal_sizes};
use optimal_mdf::{optimal_sizes, sidak_sizes, GaussianHypothesis, RocModel};

fn main() -> optimal_mdf::Result<()> {
    let alpha = 0.05;
    println!("grid search vs solver");
    for gammas in [vec![0.5, 2.0], vec![1.0, 3.0], vec![0.5, 1.0, 4.0]] {
        let model = RocModel::from_gammas(&gammas)?;
        let grid = grid_optimal_sizes(&model, alpha, 1e-3)?;
        let solved = optimal_sizes(&model, alpha)?;
        let gap = grid.best_sizes.iter().zip(&solved.sizes).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        println!(
            "  {gammas:?}: power grid {:.6} solver {:.6}  max size gap {gap:.2e}",
            grid.best_objective,
            model.total_power(&solved.sizes)
        );
    }

    println!("\nBernoulli-sum tails P(sum V >= a * sum eta), uneven sizes vs Šidák");
    for etas in [vec![0.03, 0.01, 0.0103], vec![0.049, 0.0005, 0.0005]] {
        let total: f64 = etas.iter().map(|e: &f64| (-e).ln_1p()).sum();
        let budget = -total.exp_m1();
        let sidak = sidak_sizes(etas.len(), budget)?.sizes;
        for a in [1.5, 30.0] {
            println!(
                "  {etas:?} a = {a}: {:.3e}, Šidák {:.3e}",
                bernoulli_tail_enumerate(&etas, a)?,
                bernoulli_tail_enumerate(&sidak, a)?
            );
        }
    }

    println!("\nROC concavity");
    for gamma in [0.0, 0.5, 2.0, 6.0] {
        let h = GaussianHypothesis::standard(gamma)?;
        let report = concavity_check(|e| roc(&h, e).unwrap(), 2001)?;
        println!("  gamma {gamma}: passed {} (worst violation {:.1e})", report.passed, report.worst_violation);
    }
    Ok(())
}
