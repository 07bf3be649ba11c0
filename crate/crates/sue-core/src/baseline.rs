//! Poisson and gamma-count baselines.
//!
//! Both are reported alongside the SUE model in regression comparisons: the
//! Poisson as the equidispersed reference, the gamma-count (gamma-distributed
//! interarrival times with shape α) as an established over/underdispersed
//! alternative.

use crate::error::NumericError;
use crate::math::{exp, poisson_log_pmf_raw};
use crate::special::reg_gamma_pair;

/// Poisson process with rate λ observed for time t.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoissonParams {
    pub lambda: f64,
    pub exposure: f64,
}

impl PoissonParams {
    pub fn new(lambda: f64, exposure: f64) -> Result<Self, NumericError> {
        if !(lambda > 0.0) || !lambda.is_finite() {
            return Err(NumericError::Domain("lambda must be positive and finite"));
        }
        if !(exposure > 0.0) || !exposure.is_finite() {
            return Err(NumericError::Domain("exposure must be positive and finite"));
        }
        Ok(PoissonParams { lambda, exposure })
    }
}

/// P{N(t) = n} = (λt)^n e^{−λt}/n!.
pub fn poisson_pmf(params: &PoissonParams, n: u64) -> f64 {
    exp(poisson_log_pmf_raw(params.lambda * params.exposure, n))
}

/// ln P{N(t) = n} for likelihood work.
pub fn poisson_log_pmf(params: &PoissonParams, n: u64) -> f64 {
    poisson_log_pmf_raw(params.lambda * params.exposure, n)
}

/// Renewal process with Gamma(α, λ) interarrival times observed for time t.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GammaCountParams {
    pub lambda: f64,
    pub alpha: f64,
    pub exposure: f64,
}

impl GammaCountParams {
    pub fn new(lambda: f64, alpha: f64, exposure: f64) -> Result<Self, NumericError> {
        if !(lambda > 0.0) || !lambda.is_finite() {
            return Err(NumericError::Domain("lambda must be positive and finite"));
        }
        if !(alpha > 0.0) || !alpha.is_finite() {
            return Err(NumericError::Domain("alpha must be positive and finite"));
        }
        if !(exposure > 0.0) || !exposure.is_finite() {
            return Err(NumericError::Domain("exposure must be positive and finite"));
        }
        Ok(GammaCountParams { lambda, alpha, exposure })
    }
}

/// P{N(t) = n} = G(nα, λt) − G((n+1)α, λt) with G(0, x) ≡ 1.
///
/// The difference is taken on whichever side of the (P, Q) pair each
/// evaluation computed accurately, so nearly equal tails do not cancel the
/// result down to noise.
pub fn gamma_count_pmf(params: &GammaCountParams, n: u64) -> Result<f64, NumericError> {
    let x = params.lambda * params.exposure;
    let (p_hi, q_hi) = reg_gamma_pair((n as f64 + 1.0) * params.alpha, x)?;
    if n == 0 {
        // G(0, x) − G(α, x) = Q(α, x), already relative-accurate.
        return Ok(q_hi);
    }
    let (p_lo, q_lo) = reg_gamma_pair(n as f64 * params.alpha, x)?;
    // P(lo) − P(hi) = Q(hi) − Q(lo); pick the subtraction between the pair
    // members that were computed directly (series side gives P, CF side Q).
    let diff = if p_lo <= 0.5 { p_lo - p_hi } else { q_hi - q_lo };
    Ok(if diff < 0.0 { 0.0 } else { diff })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn poisson_frozen_value() {
        let p = PoissonParams::new(5.0, 2.0).unwrap();
        assert!((poisson_pmf(&p, 10) - 0.12511003572113372).abs() < 1e-15);
    }

    #[test]
    fn poisson_zero_count() {
        let p = PoissonParams::new(3.0, 1.0).unwrap();
        assert_eq!(poisson_pmf(&p, 0), (-3.0f64).exp());
    }

    #[test]
    fn gamma_count_alpha_one_is_poisson() {
        let g = GammaCountParams::new(2.7, 1.0, 1.0).unwrap();
        let p = PoissonParams::new(2.7, 1.0).unwrap();
        for n in 0..15 {
            let a = gamma_count_pmf(&g, n).unwrap();
            let b = poisson_pmf(&p, n);
            assert!((a - b).abs() < 1e-13, "n={n}: {a} vs {b}");
        }
    }

    #[test]
    fn gamma_count_frozen_value() {
        let g = GammaCountParams::new(2.0, 2.0, 1.0).unwrap();
        let p = gamma_count_pmf(&g, 0).unwrap();
        assert!((p - 0.40600584970983844).abs() < 1e-14);
    }

    #[test]
    fn gamma_count_normalizes() {
        for &(lambda, alpha) in &[(0.7, 0.4), (2.0, 2.0), (5.0, 1.3)] {
            let g = GammaCountParams::new(lambda, alpha, 1.0).unwrap();
            let total: f64 = (0..200).map(|n| gamma_count_pmf(&g, n).unwrap()).sum();
            assert!((total - 1.0).abs() < 1e-10, "λ={lambda} α={alpha}: {total}");
        }
    }

    #[test]
    fn rejects_bad_params() {
        assert!(PoissonParams::new(-1.0, 1.0).is_err());
        assert!(GammaCountParams::new(1.0, 0.0, 1.0).is_err());
    }
}
