//! Efficiency of optimal sizes in large families with heterogeneous effects.
//!
//! Effect sizes are spread evenly over `[lo, hi]`; the optimal sizes gain
//! the most over Šidák when the family is large and the spread is wide.
//!
//! Run with `cargo run --release --example large_m_efficiency`.

use optimal_mdf::allocator::efficiency_of;
use optimal_mdf::{optimal_sizes, RocModel};

fn main() -> optimal_mdf::Result<()> {
    let alpha = 0.05;
    println!("{:>6} {:>10} {:>12} {:>12} {:>12}", "M", "effects", "max size", "min size", "efficiency");
    for (lo, hi) in [(1.0, 2.0), (0.5, 4.0), (1.0, 8.0)] {
        for m in [10usize, 100, 1000, 10_000] {
            let gammas: Vec<f64> = (0..m).map(|i| lo + (hi - lo) * i as f64 / (m - 1) as f64).collect();
            let model = RocModel::from_gammas(&gammas)?;
            let alloc = optimal_sizes(&model, alpha)?;
            let max = alloc.sizes.iter().cloned().fold(0.0, f64::max);
            let min = alloc.sizes.iter().cloned().fold(1.0, f64::min);
            let eff = efficiency_of(&model, &alloc.sizes, alpha)?;
            println!("{m:>6} {:>10} {max:>12.3e} {min:>12.3e} {eff:>11.1}%", format!("{lo}-{hi}"));
        }
    }
    Ok(())
}
