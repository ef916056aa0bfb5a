//! Power-enhanced multiple hypothesis testing.
//!
//! The crate allocates per-test sizes under a weak family-wise error budget
//! so that the summed power of most powerful tests is maximal, and builds the
//! derived stepwise procedures on top of that allocation:
//!
//! * [`allocator`]: Šidák, Bonferroni, optimal and clustered size vectors, the
//!   size map `alpha -> eta(alpha)` and its inverse.
//! * [`procedures`]: generalized p-values, the weak-FWER rule, the step-down
//!   strong-FWER rule, the step-up FDR rule, and the classical baselines.
//! * [`oracle`]: brute-force checks used to validate the solvers.
//! * [`sim`]: a seeded Monte Carlo harness for FDR / missed-discovery studies.
//! * [`cli`]: the `mdf` command line front end.

pub mod allocator;
pub mod cli;
pub mod error;
pub mod model;
pub mod numerics;
pub mod oracle;
pub mod procedures;
pub mod sim;

pub use allocator::{
    bonferroni_sizes, check_size_condition, optimal_sizes, optimal_sizes_clustered, sidak_sizes, size_map,
    size_map_inverse, AllocationMethod, ClusterAllocation, ClusterSpec, SizeAllocation, SizeConditionReport, SizeMap,
};
pub use error::{Error, Result};
pub use model::{GaussianHypothesis, RandomizedSample, RocModel};
pub use procedures::{
    decide_bh, decide_bonferroni, decide_fdr_opt, decide_stepdown_sidak, decide_strong_fwer, decide_weak_fwer,
    fdr_null_bounds, generalized_pvalues, Decision, PValuePanel, ProcedureTag, TruthAssignment,
};
