//! Thin wrappers over `libm` plus the numeric helpers the rest of the crate
//! leans on: log-gamma, log-space Poisson mass, and a fixed-tree pairwise sum
//! so reductions are deterministic and accurate.

#[inline]
pub fn exp(x: f64) -> f64 {
    libm::exp(x)
}

#[inline]
pub fn ln(x: f64) -> f64 {
    libm::log(x)
}

#[inline]
pub fn ln_1p(x: f64) -> f64 {
    libm::log1p(x)
}

#[inline]
pub fn sqrt(x: f64) -> f64 {
    libm::sqrt(x)
}

#[inline]
pub fn cosh(x: f64) -> f64 {
    libm::cosh(x)
}

#[inline]
pub fn sinh(x: f64) -> f64 {
    libm::sinh(x)
}

#[inline]
pub fn abs(x: f64) -> f64 {
    libm::fabs(x)
}

/// ln Γ(x) for x > 0.
#[inline]
pub fn ln_gamma(x: f64) -> f64 {
    libm::lgamma_r(x).0
}

/// ln n!
#[inline]
pub fn ln_factorial(n: u64) -> f64 {
    ln_gamma(n as f64 + 1.0)
}

/// Log of the Poisson mass: n·ln(μ) − μ − ln n!, with the n = 0 case kept
/// exact (0·ln μ) so μ → 0 behaves.
#[inline]
pub fn poisson_log_pmf_raw(mu: f64, n: u64) -> f64 {
    if n == 0 {
        -mu
    } else {
        n as f64 * ln(mu) - mu - ln_factorial(n)
    }
}

/// Poisson mass e^{−μ}μ^n/n! by linear recursion: roughly n-ulp accuracy,
/// far better than the log-space route for moderate n. Returns 0.0 on
/// underflow; callers fall back to [`poisson_log_pmf_raw`] then.
pub fn poisson_pmf_linear(mu: f64, n: u64) -> f64 {
    let mut p = exp(-mu);
    for k in 1..=n {
        p *= mu / k as f64;
    }
    p
}

/// Pairwise (fixed-tree) summation with two-sum error compensation. The
/// reduction tree depends only on the slice length, so the result is
/// identical across runs and thread counts; the compensation keeps the total
/// accurate to about one ulp regardless of length, which matters because the
/// finite-difference gradients divide this rounding error by tiny steps.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    let (s, e) = pairwise_core(xs);
    s + e
}

fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bv = s - a;
    let err = (a - (s - bv)) + (b - bv);
    (s, err)
}

fn pairwise_core(xs: &[f64]) -> (f64, f64) {
    match xs.len() {
        0 => (0.0, 0.0),
        1 => (xs[0], 0.0),
        n => {
            let mid = n / 2;
            let (s1, e1) = pairwise_core(&xs[..mid]);
            let (s2, e2) = pairwise_core(&xs[mid..]);
            let (s, e) = two_sum(s1, s2);
            (s, e + e1 + e2)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ln_gamma_matches_factorials() {
        for n in 1u64..20 {
            let direct: f64 = (1..=n).map(|k| (k as f64).ln()).sum();
            assert!((ln_factorial(n) - direct).abs() < 1e-10);
        }
    }

    #[test]
    fn pairwise_sum_is_exact_on_small_inputs() {
        assert_eq!(pairwise_sum(&[]), 0.0);
        assert_eq!(pairwise_sum(&[1.5]), 1.5);
        assert_eq!(pairwise_sum(&[1.0, 2.0, 3.0, 4.0]), 10.0);
    }

    #[test]
    fn poisson_log_pmf_normalizes() {
        let mu = 3.7;
        let total: f64 = (0..80).map(|n| poisson_log_pmf_raw(mu, n).exp()).sum();
        assert!((total - 1.0).abs() < 1e-12);
    }
}
