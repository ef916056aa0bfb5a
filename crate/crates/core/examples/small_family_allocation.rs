//! Optimal test sizes for small heterogeneous families, next to Šidák.
//!
//! Each configuration `k : (a, b, ...)` has `k` hypotheses of each listed
//! effect size. The efficiency column is the summed power of the optimal
//! sizes relative to equal Šidák sizes at the same weak FWER budget.
//!
//! Run with `cargo run --example small_family_allocation`.

use optimal_mdf::sim::efficiency_vs_sidak;
use optimal_mdf::{optimal_sizes_clustered, ClusterSpec};

fn main() -> optimal_mdf::Result<()> {
    let alpha = 0.05;
    let configs: [&[f64]; 6] =
        [&[1.0], &[0.5, 1.0], &[1.0, 2.0], &[1.0, 5.0], &[0.5, 1.0, 2.0, 4.0], &[1.0, 2.0, 4.0, 8.0]];
    println!("{:<22} {:>4}  {:<40} {:>10}", "effect sizes", "M", "optimal sizes (per cluster)", "efficiency");
    for gammas in configs {
        for m in [4usize, 20] {
            let k = m / gammas.len();
            let spec = ClusterSpec::new(gammas.to_vec(), vec![k; gammas.len()])?;
            let alloc = optimal_sizes_clustered(&spec, alpha)?;
            let eff = efficiency_vs_sidak(&spec.expand_model()?, alpha)?;
            let sizes: Vec<String> = alloc.cluster_sizes.iter().map(|s| format!("{s:.6}")).collect();
            println!("{:<22} {:>4}  {:<40} {:>9.1}%", format!("{k} : {gammas:?}"), m, sizes.join(", "), eff);
        }
    }
    Ok(())
}
