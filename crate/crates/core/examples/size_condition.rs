//! When does the size condition hold?
//!
//! The FDR guarantee of the optimal step-up rule rests on the condition
//! `(M - 1) max_m eta_m <= sum_m eta_m` along the size map. It holds for
//! exchangeable families and fails once one hypothesis dominates the budget.
//!
//! Run with `cargo run --example size_condition`.

use optimal_mdf::{check_size_condition, RocModel};

fn main() -> optimal_mdf::Result<()> {
    let grid = [0.001, 0.005, 0.01, 0.025, 0.05, 0.1, 0.2];
    let families: [(&str, Vec<f64>); 5] = [
        ("exchangeable", vec![2.0; 10]),
        ("mild spread", vec![1.5, 1.8, 2.0, 2.2, 2.5]),
        ("wide spread", vec![0.5, 1.0, 2.0, 4.0, 8.0]),
        ("one strong", vec![0.3, 0.3, 0.3, 0.3, 5.0]),
        ("pair", vec![1.0, 3.0]),
    ];
    println!("{:<14} {:>10} {:>12} {:>12}", "family", "satisfied", "worst ratio", "at alpha");
    for (name, gammas) in families {
        let report = check_size_condition(&RocModel::from_gammas(&gammas)?, &grid)?;
        println!("{name:<14} {:>10} {:>12.4} {:>12}", report.satisfied, report.worst_ratio, report.worst_alpha);
    }
    Ok(())
}
