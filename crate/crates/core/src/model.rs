//! Most powerful decision processes for Gaussian location hypotheses, their
//! ROC functions, and randomized p-values.

use serde::{Deserialize, Serialize};

use crate::error::{check_probability, invalid, Result};
use crate::numerics::normal::{cdf, quantile};

/// A family of tests indexed by size. `test` returns the rejection
/// probability of the size-`eta` test at statistic `x`; it must be
/// nondecreasing and right-continuous in `eta`.
pub trait DecisionProcess {
    fn test(&self, x: f64, eta: f64) -> f64;

    /// Null rejection probability of the size-`eta` test.
    fn size(&self, eta: f64) -> f64 {
        eta
    }

    /// Power of the size-`eta` test under the alternative.
    fn roc(&self, eta: f64) -> f64;

    /// `inf { eta : u <= test(x, eta) }`, found by bisection on `eta`.
    fn pvalue(&self, sample: &RandomizedSample) -> f64 {
        let RandomizedSample { x, u } = *sample;
        if u <= self.test(x, 0.0) {
            return 0.0;
        }
        if u > self.test(x, 1.0) {
            return 1.0;
        }
        let (mut lo, mut hi) = (0.0f64, 1.0f64);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if u <= self.test(x, mid) {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        hi
    }
}

/// `H0: mu = mu0` against `H1: mu = mu0 + gamma * sigma0` for one normal
/// observation with known standard deviation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianHypothesis {
    mu0: f64,
    sigma0: f64,
    gamma: f64,
}

impl GaussianHypothesis {
    pub fn new(mu0: f64, sigma0: f64, gamma: f64) -> Result<Self> {
        if !mu0.is_finite() {
            return Err(invalid(format!("null mean must be finite, got {mu0}")));
        }
        if !(sigma0.is_finite() && sigma0 > 0.0) {
            return Err(invalid(format!("standard deviation must be positive, got {sigma0}")));
        }
        if !(gamma.is_finite() && gamma >= 0.0) {
            return Err(invalid(format!("effect size must be finite and nonnegative, got {gamma}")));
        }
        Ok(Self { mu0, sigma0, gamma })
    }

    /// Unit-variance hypothesis with null mean zero.
    pub fn standard(gamma: f64) -> Result<Self> {
        Self::new(0.0, 1.0, gamma)
    }

    pub fn mu0(&self) -> f64 {
        self.mu0
    }

    pub fn sigma0(&self) -> f64 {
        self.sigma0
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// Rejection threshold `mu0 + sigma0 * z_{1-eta}`; infinite at the ends.
    pub fn threshold(&self, eta: f64) -> f64 {
        if eta <= 0.0 {
            f64::INFINITY
        } else if eta >= 1.0 {
            f64::NEG_INFINITY
        } else {
            self.mu0 - self.sigma0 * quantile(eta)
        }
    }

    /// Ordinary p-value `1 - Phi((x - mu0) / sigma0)`.
    pub fn pvalue_of(&self, x: f64) -> f64 {
        cdf(-(x - self.mu0) / self.sigma0)
    }
}

impl DecisionProcess for GaussianHypothesis {
    fn test(&self, x: f64, eta: f64) -> f64 {
        if x >= self.threshold(eta) {
            1.0
        } else {
            0.0
        }
    }

    fn roc(&self, eta: f64) -> f64 {
        roc_unchecked(self.gamma, eta)
    }

    fn pvalue(&self, sample: &RandomizedSample) -> f64 {
        self.pvalue_of(sample.x)
    }
}

/// The degenerate process `test(x, eta) = eta`, whose p-value is the randomizer itself.
#[derive(Debug, Clone, Copy, Default)]
pub struct PureRandomizer;

impl DecisionProcess for PureRandomizer {
    fn test(&self, _x: f64, eta: f64) -> f64 {
        eta
    }

    fn roc(&self, eta: f64) -> f64 {
        eta
    }
}

/// Observed statistic with its auxiliary uniform randomizer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RandomizedSample {
    pub x: f64,
    pub u: f64,
}

impl RandomizedSample {
    pub fn new(x: f64, u: f64) -> Result<Self> {
        check_probability("randomizer", u)?;
        Ok(Self { x, u })
    }
}

/// The collection of hypotheses under test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocModel {
    hypotheses: Vec<GaussianHypothesis>,
}

impl RocModel {
    pub fn new(hypotheses: Vec<GaussianHypothesis>) -> Result<Self> {
        if hypotheses.is_empty() {
            return Err(invalid("a model needs at least one hypothesis"));
        }
        Ok(Self { hypotheses })
    }

    /// Standard hypotheses with the given effect sizes.
    pub fn from_gammas(gammas: &[f64]) -> Result<Self> {
        let hypotheses = gammas.iter().map(|&g| GaussianHypothesis::standard(g)).collect::<Result<Vec<_>>>()?;
        Self::new(hypotheses)
    }

    /// `m` copies of the same effect size.
    pub fn exchangeable(m: usize, gamma: f64) -> Result<Self> {
        Self::from_gammas(&vec![gamma; m])
    }

    pub fn len(&self) -> usize {
        self.hypotheses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.hypotheses.is_empty()
    }

    pub fn hypotheses(&self) -> &[GaussianHypothesis] {
        &self.hypotheses
    }

    pub fn get(&self, m: usize) -> Option<&GaussianHypothesis> {
        self.hypotheses.get(m)
    }

    pub fn gammas(&self) -> Vec<f64> {
        self.hypotheses.iter().map(|h| h.gamma).collect()
    }

    /// All ROC functions identical.
    pub fn is_exchangeable(&self) -> bool {
        let g0 = self.hypotheses[0].gamma;
        self.hypotheses.iter().all(|h| h.gamma == g0)
    }

    /// Sum of powers at the given sizes.
    pub fn total_power(&self, sizes: &[f64]) -> f64 {
        self.hypotheses.iter().zip(sizes).map(|(h, &eta)| roc_unchecked(h.gamma, eta)).sum()
    }
}

/// Most powerful size-`eta` test: reject when `x >= mu0 + sigma0 * z_{1-eta}`.
pub fn mp_test(h: &GaussianHypothesis, x: f64, eta: f64) -> Result<bool> {
    check_probability("size", eta)?;
    Ok(h.test(x, eta) > 0.0)
}

/// Power `Phi(gamma - z_{1-eta})` of the size-`eta` most powerful test.
pub fn roc(h: &GaussianHypothesis, eta: f64) -> Result<f64> {
    check_probability("size", eta)?;
    Ok(roc_unchecked(h.gamma, eta))
}

pub(crate) fn roc_unchecked(gamma: f64, eta: f64) -> f64 {
    if eta <= 0.0 {
        0.0
    } else if eta >= 1.0 {
        1.0
    } else {
        cdf(gamma + quantile(eta))
    }
}

/// Derivative of the ROC function, `exp(gamma z - gamma^2 / 2)` with
/// `z = z_{1-eta}`. Defined on the open interval only.
pub fn roc_deriv(h: &GaussianHypothesis, eta: f64) -> Result<f64> {
    if !(eta > 0.0 && eta < 1.0) {
        return Err(invalid(format!("ROC derivative needs a size in (0, 1), got {eta}")));
    }
    let z = -quantile(eta);
    Ok((h.gamma * z - 0.5 * h.gamma * h.gamma).exp())
}

/// Randomized p-value `inf { eta : u <= test(x, eta) }` of a size-valid process.
pub fn randomized_pvalue<P: DecisionProcess + ?Sized>(process: &P, sample: &RandomizedSample) -> Result<f64> {
    check_probability("randomizer", sample.u)?;
    Ok(process.pvalue(sample))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn std(g: f64) -> GaussianHypothesis {
        GaussianHypothesis::standard(g).unwrap()
    }

    #[test]
    fn mp_test_examples() {
        let h = std(1.0);
        assert!(mp_test(&h, 2.0, 0.05).unwrap());
        assert!(!mp_test(&h, 1.6, 0.05).unwrap());
        assert!(!mp_test(&h, 1e6, 0.0).unwrap());
        assert!(mp_test(&h, -1e6, 1.0).unwrap());
        assert!(mp_test(&h, 0.0, 1.5).is_err());
    }

    #[test]
    fn threshold_uses_location_and_scale() {
        let h = GaussianHypothesis::new(3.0, 2.0, 1.0).unwrap();
        assert!((h.threshold(0.05) - (3.0 + 2.0 * 1.644_853_626_951_472_2)).abs() < 1e-12);
    }

    #[test]
    fn roc_examples() {
        assert!((roc(&std(0.0), 0.05).unwrap() - 0.05).abs() < 1e-15);
        // Phi(1 - 1.6448536) = Phi(-0.6448536)
        assert!((roc(&std(1.0), 0.05).unwrap() - 0.259_511_022_841_444).abs() < 1e-9);
        assert_eq!(roc(&std(3.0), 1.0).unwrap(), 1.0);
        assert_eq!(roc(&std(3.0), 0.0).unwrap(), 0.0);
    }

    #[test]
    fn roc_deriv_examples() {
        assert!((roc_deriv(&std(0.0), 0.37).unwrap() - 1.0).abs() < 1e-15);
        assert!((roc_deriv(&std(1.0), 0.5).unwrap() - (-0.5f64).exp()).abs() < 1e-15);
        assert!((roc_deriv(&std(2.0), 0.5).unwrap() - (-2.0f64).exp()).abs() < 1e-15);
        assert!(roc_deriv(&std(1.0), 0.0).is_err());
        assert!(roc_deriv(&std(1.0), 1.0).is_err());
    }

    #[test]
    fn roc_deriv_equals_density_ratio() {
        // phi(gamma - z) / phi(z), evaluated directly where both densities are tame.
        let h = std(1.7);
        for &eta in &[0.01, 0.2, 0.5, 0.8] {
            let z = -quantile(eta);
            let ratio = crate::numerics::norm_pdf(1.7 - z) / crate::numerics::norm_pdf(z);
            assert!((roc_deriv(&h, eta).unwrap() - ratio).abs() < 1e-12 * ratio.max(1.0));
        }
    }

    #[test]
    fn gaussian_pvalue_is_upper_tail() {
        let h = std(2.0);
        for &u in &[0.0, 0.3, 1.0] {
            let s = randomized_pvalue(&h, &RandomizedSample::new(1.644_853_626_951_472_2, u).unwrap()).unwrap();
            assert!((s - 0.05).abs() < 1e-12);
        }
    }

    #[test]
    fn generic_pvalue_agrees_with_closed_form() {
        struct Bisected(GaussianHypothesis);
        impl DecisionProcess for Bisected {
            fn test(&self, x: f64, eta: f64) -> f64 {
                self.0.test(x, eta)
            }
            fn roc(&self, eta: f64) -> f64 {
                self.0.roc(eta)
            }
        }
        let h = GaussianHypothesis::new(0.5, 2.0, 1.0).unwrap();
        for &x in &[-1.0, 0.5, 2.0, 4.5] {
            let sample = RandomizedSample::new(x, 0.4).unwrap();
            let s = Bisected(h).pvalue(&sample);
            assert!((s - h.pvalue_of(x)).abs() < 1e-12, "x={x}");
        }
    }

    #[test]
    fn pure_randomizer_pvalue_is_u() {
        for &u in &[0.0, 0.25, 0.5, 0.999] {
            let s = randomized_pvalue(&PureRandomizer, &RandomizedSample { x: 7.0, u }).unwrap();
            assert!((s - u).abs() < 1e-15);
        }
    }

    #[test]
    fn hypothesis_validation() {
        assert!(GaussianHypothesis::new(0.0, 0.0, 1.0).is_err());
        assert!(GaussianHypothesis::new(0.0, 1.0, -0.1).is_err());
        assert!(GaussianHypothesis::new(0.0, 1.0, f64::NAN).is_err());
        assert!(RocModel::from_gammas(&[]).is_err());
        assert!(RandomizedSample::new(0.0, 1.2).is_err());
    }

    #[test]
    fn exchangeable_detection() {
        assert!(RocModel::exchangeable(5, 1.3).unwrap().is_exchangeable());
        assert!(!RocModel::from_gammas(&[1.0, 2.0]).unwrap().is_exchangeable());
    }
}
