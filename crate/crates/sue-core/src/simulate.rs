//! Monte Carlo oracle: samples the counting process directly from its
//! exponential interarrival times, independent of every pmf formula, so
//! simulation agreement is real evidence the algebra is right.
//!
//! Randomness is SplitMix64 in counter mode. Each path gets its own stream
//! keyed by (seed, path index), so path k's draws do not depend on how many
//! draws earlier paths consumed — results are identical regardless of how
//! the path range is chunked across threads.

use alloc::vec::Vec;

use crate::error::NumericError;
use crate::math::{ln, sqrt};
use crate::special::reg_upper_gamma;
use crate::sue::SueParams;

/// Monte Carlo controls. `n_cap` bounds the count on a single path; hitting
/// it is reported as an error rather than silently truncating.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SimSettings {
    pub paths: u64,
    pub seed: u64,
    pub n_cap: u64,
}

impl Default for SimSettings {
    fn default() -> Self {
        SimSettings { paths: 100_000, seed: 0x5eed, n_cap: 10_000 }
    }
}

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 output function.
#[inline]
fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// One path's random stream.
struct PathRng {
    state: u64,
}

impl PathRng {
    fn new(seed: u64, path: u64) -> Self {
        // Decorrelate the stream start from both seed and path index.
        let key = mix(seed.wrapping_add(GOLDEN)) ^ mix(path.wrapping_mul(GOLDEN).wrapping_add(1));
        PathRng { state: key }
    }

    #[inline]
    fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GOLDEN);
        mix(self.state)
    }

    /// Uniform on the open interval (0, 1).
    #[inline]
    fn next_open01(&mut self) -> f64 {
        ((self.next_u64() >> 11) as f64 + 0.5) * (1.0 / 9_007_199_254_740_992.0)
    }

    /// Exponential with the given rate by inverse CDF.
    #[inline]
    fn next_exp(&mut self, rate: f64) -> f64 {
        -ln(self.next_open01()) / rate
    }
}

/// Simulates one path: counts events whose arrival times fall inside [0, t].
fn simulate_path(params: &SueParams, rng: &mut PathRng, n_cap: u64) -> Result<u64, NumericError> {
    let t = params.exposure;
    let mut time = 0.0f64;
    let mut n = 0u64;
    loop {
        let rate = if n + 1 == params.gamma_event {
            params.alpha * params.lambda
        } else {
            params.lambda
        };
        time += rng.next_exp(rate);
        if time > t {
            return Ok(n);
        }
        n += 1;
        if n >= n_cap {
            return Err(NumericError::NonConvergence {
                what: "simulated path hit the count cap",
                iterations: n_cap as usize,
            });
        }
    }
}

/// Histogram of final counts over the half-open path range [start, end).
/// Chunk-invariant: concatenating range histograms equals one big run.
pub fn simulate_paths(
    params: &SueParams,
    seed: u64,
    path_start: u64,
    path_end: u64,
    n_cap: u64,
) -> Result<Vec<u64>, NumericError> {
    let mut hist: Vec<u64> = Vec::new();
    for path in path_start..path_end {
        let mut rng = PathRng::new(seed, path);
        let n = simulate_path(params, &mut rng, n_cap)? as usize;
        if n >= hist.len() {
            hist.resize(n + 1, 0);
        }
        hist[n] += 1;
    }
    Ok(hist)
}

/// Adds `other` into `acc` bin by bin.
pub fn merge_histograms(acc: &mut Vec<u64>, other: &[u64]) {
    if other.len() > acc.len() {
        acc.resize(other.len(), 0);
    }
    for (a, &b) in acc.iter_mut().zip(other) {
        *a += b;
    }
}

/// Empirical distribution of simulated counts with jackknife standard errors
/// for its mean and variance, computed from the histogram in O(#bins).
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalPmf {
    pub histogram: Vec<u64>,
    pub paths: u64,
    pub mean: f64,
    pub variance: f64,
    pub mean_se: f64,
    pub variance_se: f64,
}

impl EmpiricalPmf {
    pub fn from_histogram(histogram: Vec<u64>, paths: u64) -> Self {
        let n = paths as f64;
        let mut s1 = 0.0f64;
        let mut s2 = 0.0f64;
        for (k, &c) in histogram.iter().enumerate() {
            let x = k as f64;
            s1 += c as f64 * x;
            s2 += c as f64 * x * x;
        }
        let mean = s1 / n;
        let variance = if paths > 1 { (s2 - s1 * s1 / n) / (n - 1.0) } else { 0.0 };
        // Leave-one-out statistics are constant within a histogram bin, so
        // the jackknife sums collapse to one term per bin.
        let (mean_se, variance_se) = if paths > 2 {
            let m = n - 1.0;
            let mut mean_dev2 = 0.0f64;
            let mut var_sum = 0.0f64;
            let mut var_sum2 = 0.0f64;
            for (k, &c) in histogram.iter().enumerate() {
                if c == 0 {
                    continue;
                }
                let x = k as f64;
                let w = c as f64;
                let loo_mean = (s1 - x) / m;
                mean_dev2 += w * (loo_mean - mean) * (loo_mean - mean);
                let loo_var = ((s2 - x * x) - (s1 - x) * (s1 - x) / m) / (m - 1.0);
                var_sum += w * loo_var;
                var_sum2 += w * loo_var * loo_var;
            }
            let var_bar = var_sum / n;
            let var_dev2 = var_sum2 - n * var_bar * var_bar;
            (
                sqrt((m / n) * mean_dev2),
                sqrt((m / n) * var_dev2.max(0.0)),
            )
        } else {
            (f64::NAN, f64::NAN)
        };
        EmpiricalPmf { histogram, paths, mean, variance, mean_se, variance_se }
    }

    /// Relative frequency of count n.
    pub fn prob(&self, n: u64) -> f64 {
        self.histogram.get(n as usize).map_or(0.0, |&c| c as f64 / self.paths as f64)
    }
}

/// Runs the full Monte Carlo and summarizes it.
pub fn simulate_sue(params: &SueParams, settings: &SimSettings) -> Result<EmpiricalPmf, NumericError> {
    if settings.paths == 0 {
        return Err(NumericError::Domain("need at least one simulation path"));
    }
    let hist = simulate_paths(params, settings.seed, 0, settings.paths, settings.n_cap)?;
    Ok(EmpiricalPmf::from_histogram(hist, settings.paths))
}

/// Chi-squared goodness-of-fit comparison of a simulated histogram against
/// model probabilities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GofResult {
    pub statistic: f64,
    pub dof: u64,
    pub p_value: f64,
}

/// Upper-tail p-value of a chi-squared statistic: Q(dof/2, stat/2).
pub fn chi_squared_pvalue(statistic: f64, dof: u64) -> Result<f64, NumericError> {
    if statistic < 0.0 {
        return Err(NumericError::Domain("chi-squared statistic must be nonnegative"));
    }
    if dof == 0 {
        return Err(NumericError::Domain("chi-squared test needs at least one degree of freedom"));
    }
    reg_upper_gamma(dof as f64 / 2.0, statistic / 2.0)
}

/// Pearson test of the histogram against expected cell probabilities
/// (`expected[n]` for n < len, `tail_expected` for everything beyond).
/// Cells with expected count below 5 are pooled into the tail cell.
pub fn gof_test(
    histogram: &[u64],
    expected: &[f64],
    tail_expected: f64,
    paths: u64,
) -> Result<GofResult, NumericError> {
    let n = paths as f64;
    let mut statistic = 0.0f64;
    let mut cells = 0u64;
    let mut pooled_obs = 0.0f64;
    let mut pooled_exp = tail_expected * n;
    // Observed mass beyond the expected table always pools into the tail.
    for (k, &c) in histogram.iter().enumerate() {
        if k >= expected.len() {
            pooled_obs += c as f64;
        }
    }
    for (k, &e) in expected.iter().enumerate() {
        let obs = histogram.get(k).map_or(0.0, |&c| c as f64);
        let exp_count = e * n;
        if exp_count < 5.0 {
            pooled_obs += obs;
            pooled_exp += exp_count;
        } else {
            statistic += (obs - exp_count) * (obs - exp_count) / exp_count;
            cells += 1;
        }
    }
    if pooled_exp >= 5.0 {
        statistic += (pooled_obs - pooled_exp) * (pooled_obs - pooled_exp) / pooled_exp;
        cells += 1;
    }
    if cells < 2 {
        return Err(NumericError::Domain("too few usable cells for a chi-squared test"));
    }
    let dof = cells - 1;
    let p_value = chi_squared_pvalue(statistic, dof)?;
    Ok(GofResult { statistic, dof, p_value })
}
