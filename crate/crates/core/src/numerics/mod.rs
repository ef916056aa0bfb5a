//! Numerical kernels shared by the rest of the crate.

pub mod normal;
pub mod root;

pub use normal::{log_norm_cdf, log_norm_pdf, log_norm_sf, norm_cdf, norm_pdf, norm_quantile, norm_sf};
pub use root::{find_root, find_root_newton, Bracket, RootConfig, RootResult};
