//! Log-link count regression over three families: Poisson, gamma-count, and
//! the SUE model. Each observation j has rate λ_j = exp(β₀ + Σ_k β_k x_jk);
//! the dispersion families carry one extra coefficient, ln α, shared by all
//! observations. The log-likelihood treats any numeric failure or parameter
//! overflow as −∞, so the optimizer simply walks away from bad regions.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::baseline::{gamma_count_pmf, GammaCountParams, PoissonParams};
use crate::error::NumericError;
use crate::linalg::check_full_rank;
use crate::math::{abs, exp, pairwise_sum, poisson_log_pmf_raw};
use crate::sue::{sue_log_pmf, sue_pmf, SueParams};

/// Linear predictors beyond this are treated as likelihood −∞ rather than
/// letting exp() run to infinity.
const ETA_BOUND: f64 = 500.0;
/// Relative step for central-difference gradients.
const GRAD_REL_STEP: f64 = 1e-6;

/// The distribution family being fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    Poisson,
    GammaCount,
    Sue { gamma_event: u64 },
}

impl Family {
    /// Whether the family carries the extra ln α coefficient.
    pub fn has_alpha(&self) -> bool {
        !matches!(self, Family::Poisson)
    }
}

/// Observed counts plus a shared covariate matrix and observation window.
#[derive(Debug, Clone, PartialEq)]
pub struct CountDataset {
    counts: Vec<u64>,
    /// Row-major n_obs × n_covariates, without the intercept column.
    x: Vec<f64>,
    names: Vec<String>,
    exposure: f64,
}

impl CountDataset {
    pub fn new(
        counts: Vec<u64>,
        x: Vec<f64>,
        names: Vec<String>,
        exposure: f64,
    ) -> Result<Self, NumericError> {
        if counts.is_empty() {
            return Err(NumericError::Domain("dataset has no observations"));
        }
        if x.len() != counts.len() * names.len() {
            return Err(NumericError::Domain("covariate matrix shape mismatch"));
        }
        if !(exposure > 0.0) || !exposure.is_finite() {
            return Err(NumericError::Domain("exposure must be positive and finite"));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(NumericError::Domain("covariates must be finite"));
        }
        Ok(CountDataset { counts, x, names, exposure })
    }

    pub fn n_obs(&self) -> usize {
        self.counts.len()
    }

    pub fn n_covariates(&self) -> usize {
        self.names.len()
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn covariate_names(&self) -> &[String] {
        &self.names
    }

    pub fn exposure(&self) -> f64 {
        self.exposure
    }

    pub fn max_count(&self) -> u64 {
        self.counts.iter().copied().max().unwrap_or(0)
    }

    /// Row j of the covariate matrix.
    pub fn row(&self, j: usize) -> &[f64] {
        let p = self.names.len();
        &self.x[j * p..(j + 1) * p]
    }

    /// Mean of the observed counts.
    pub fn mean_count(&self) -> f64 {
        self.counts.iter().map(|&c| c as f64).sum::<f64>() / self.counts.len() as f64
    }

    /// Verifies the design matrix [1 | X] has full column rank, naming the
    /// dependent columns otherwise.
    pub fn check_design_rank(&self) -> Result<(), NumericError> {
        let n = self.n_obs();
        let p = self.n_covariates();
        let mut design = Vec::with_capacity(n * (p + 1));
        for j in 0..n {
            design.push(1.0);
            design.extend_from_slice(self.row(j));
        }
        let mut names = Vec::with_capacity(p + 1);
        names.push("intercept".to_string());
        names.extend(self.names.iter().cloned());
        check_full_rank(&design, n, p + 1, &names)
    }
}

/// A family paired with its coefficient layout over a given dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressionSpec {
    pub family: Family,
}

impl RegressionSpec {
    pub fn new(family: Family) -> Self {
        RegressionSpec { family }
    }

    /// Coefficient count: intercept + covariates (+ ln α for the dispersion
    /// families).
    pub fn n_params(&self, dataset: &CountDataset) -> usize {
        dataset.n_covariates() + 1 + usize::from(self.family.has_alpha())
    }

    /// Names in coefficient order: intercept, covariates, then ln_alpha.
    pub fn coef_names(&self, dataset: &CountDataset) -> Vec<String> {
        let mut names = Vec::with_capacity(self.n_params(dataset));
        names.push("intercept".to_string());
        names.extend(dataset.covariate_names().iter().cloned());
        if self.family.has_alpha() {
            names.push("ln_alpha".to_string());
        }
        names
    }
}

/// A coefficient vector laid out as (β₀, β₁..β_r, [ln α]).
#[derive(Debug, Clone, PartialEq)]
pub struct CoefVector {
    pub values: Vec<f64>,
}

impl CoefVector {
    pub fn new(values: Vec<f64>) -> Self {
        CoefVector { values }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    fn ln_alpha(&self, family: &Family) -> f64 {
        if family.has_alpha() {
            *self.values.last().unwrap()
        } else {
            0.0
        }
    }

    fn slopes<'a>(&'a self, family: &Family) -> &'a [f64] {
        let end = if family.has_alpha() { self.len() - 1 } else { self.len() };
        &self.values[1..end]
    }
}

/// η_j = β₀ + Σ_k β_k x_jk.
pub fn linear_predictor(dataset: &CountDataset, family: &Family, coefs: &CoefVector, j: usize) -> f64 {
    let mut eta = coefs.values[0];
    for (b, x) in coefs.slopes(family).iter().zip(dataset.row(j)) {
        eta += b * x;
    }
    eta
}

/// Log pmf of one observation under the given family. λ and α come in
/// already exponentiated.
fn obs_log_pmf(family: &Family, lambda: f64, alpha: f64, exposure: f64, n: u64) -> Result<f64, NumericError> {
    match family {
        Family::Poisson => Ok(poisson_log_pmf_raw(lambda * exposure, n)),
        Family::GammaCount => {
            let params = GammaCountParams::new(lambda, alpha, exposure)?;
            let p = gamma_count_pmf(&params, n)?;
            Ok(if p > 0.0 { crate::math::ln(p) } else { f64::NEG_INFINITY })
        }
        Family::Sue { gamma_event } => {
            let params = SueParams::new(lambda, alpha, *gamma_event, exposure)?;
            sue_log_pmf(&params, n)
        }
    }
}

/// Σ_j ln P{N = n_j | λ_j, α}, with −∞ for any parameter point where an
/// observation's mass cannot be evaluated (overflowed predictor, numeric
/// failure, zero mass). The per-observation terms are combined by a fixed
/// pairwise tree, so the value does not depend on evaluation order.
pub fn log_likelihood(dataset: &CountDataset, family: &Family, coefs: &CoefVector) -> f64 {
    let ln_alpha = coefs.ln_alpha(family);
    if abs(ln_alpha) > ETA_BOUND {
        return f64::NEG_INFINITY;
    }
    let alpha = exp(ln_alpha);
    let mut terms = Vec::with_capacity(dataset.n_obs());
    for j in 0..dataset.n_obs() {
        let eta = linear_predictor(dataset, family, coefs, j);
        if abs(eta) > ETA_BOUND {
            return f64::NEG_INFINITY;
        }
        let lambda = exp(eta);
        match obs_log_pmf(family, lambda, alpha, dataset.exposure(), dataset.counts()[j]) {
            Ok(lp) if lp.is_finite() => terms.push(lp),
            _ => return f64::NEG_INFINITY,
        }
    }
    pairwise_sum(&terms)
}

/// Central finite-difference gradient of the log-likelihood, component step
/// h_l = max(1e−6, 1e−6·|β_l|). Errors if any stencil point hits the −∞
/// sentinel.
pub fn log_likelihood_gradient(
    dataset: &CountDataset,
    family: &Family,
    coefs: &CoefVector,
) -> Result<Vec<f64>, NumericError> {
    let mut grad = Vec::with_capacity(coefs.len());
    let mut work = coefs.clone();
    for l in 0..coefs.len() {
        let h = GRAD_REL_STEP.max(GRAD_REL_STEP * abs(coefs.values[l]));
        work.values[l] = coefs.values[l] + h;
        let up = log_likelihood(dataset, family, &work);
        work.values[l] = coefs.values[l] - h;
        let down = log_likelihood(dataset, family, &work);
        work.values[l] = coefs.values[l];
        if !up.is_finite() || !down.is_finite() {
            return Err(NumericError::GradientAtSentinel);
        }
        grad.push((up - down) / (2.0 * h));
    }
    Ok(grad)
}

/// Per-observation fitted mean and variance under the family at `coefs`.
/// Gamma-count moments have no closed form and are summed from the pmf.
pub fn fitted_moments(
    dataset: &CountDataset,
    family: &Family,
    coefs: &CoefVector,
) -> Result<Vec<(f64, f64)>, NumericError> {
    let alpha = exp(coefs.ln_alpha(family));
    let t = dataset.exposure();
    let mut out = Vec::with_capacity(dataset.n_obs());
    for j in 0..dataset.n_obs() {
        let lambda = exp(linear_predictor(dataset, family, coefs, j));
        let (mean, var) = match family {
            Family::Poisson => {
                let mu = PoissonParams::new(lambda, t)?.lambda * t;
                (mu, mu)
            }
            Family::GammaCount => {
                let params = GammaCountParams::new(lambda, alpha, t)?;
                gamma_count_moments(&params)?
            }
            Family::Sue { gamma_event } => {
                let params = SueParams::new(lambda, alpha, *gamma_event, t)?;
                let mean = crate::sue::sue_mean(&params)?;
                let m2 = crate::sue::sue_second_moment(&params)?;
                (mean, m2 - mean * mean)
            }
        };
        out.push((mean, var));
    }
    Ok(out)
}

/// Gamma-count mean and variance by direct pmf summation until the
/// accumulated mass is within 1e−12 of one.
fn gamma_count_moments(params: &GammaCountParams) -> Result<(f64, f64), NumericError> {
    let mut mass = 0.0f64;
    let mut mean = 0.0f64;
    let mut m2 = 0.0f64;
    for n in 0..100_000u64 {
        let p = gamma_count_pmf(params, n)?;
        mass += p;
        mean += n as f64 * p;
        m2 += (n * n) as f64 * p;
        if 1.0 - mass < 1e-12 {
            return Ok((mean, m2 - mean * mean));
        }
    }
    Err(NumericError::NonConvergence { what: "gamma-count moment sum", iterations: 100_000 })
}

/// Probability of count n for observation j under the fitted family.
pub fn fitted_pmf(
    dataset: &CountDataset,
    family: &Family,
    coefs: &CoefVector,
    j: usize,
    n: u64,
) -> Result<f64, NumericError> {
    let alpha = exp(coefs.ln_alpha(family));
    let lambda = exp(linear_predictor(dataset, family, coefs, j));
    let t = dataset.exposure();
    match family {
        Family::Poisson => Ok(exp(poisson_log_pmf_raw(lambda * t, n))),
        Family::GammaCount => gamma_count_pmf(&GammaCountParams::new(lambda, alpha, t)?, n),
        Family::Sue { gamma_event } => sue_pmf(&SueParams::new(lambda, alpha, *gamma_event, t)?, n),
    }
}

/// Model-implied relative frequencies: the mixture (1/J)Σ_j P{N = n | λ_j}
/// for n = 0..n_max.
pub fn predicted_mixture_pmf(
    dataset: &CountDataset,
    family: &Family,
    coefs: &CoefVector,
    n_max: u64,
) -> Result<Vec<f64>, NumericError> {
    let j_count = dataset.n_obs() as f64;
    let mut out = Vec::with_capacity(n_max as usize + 1);
    for n in 0..=n_max {
        let mut cell = Vec::with_capacity(dataset.n_obs());
        for j in 0..dataset.n_obs() {
            cell.push(fitted_pmf(dataset, family, coefs, j, n).map_err(|e| e.at_count(n))?);
        }
        out.push(pairwise_sum(&cell) / j_count);
    }
    Ok(out)
}

/// Mean, variance, and variance/mean of the weights on counts 0..len−1 as
/// given (no renormalization): for truncated predicted distributions this is
/// the summary the reference tables report.
pub fn truncated_moments(pmf: &[f64]) -> (f64, f64, f64) {
    let mut mean = 0.0;
    let mut m2 = 0.0;
    for (n, &p) in pmf.iter().enumerate() {
        mean += n as f64 * p;
        m2 += (n * n) as f64 * p;
    }
    let var = m2 - mean * mean;
    (mean, var, var / mean)
}

/// Observed relative frequencies of counts 0..n_max from a dataset.
pub fn observed_frequencies(dataset: &CountDataset, n_max: u64) -> Vec<f64> {
    let mut freq = alloc::vec![0.0f64; n_max as usize + 1];
    for &c in dataset.counts() {
        if c <= n_max {
            freq[c as usize] += 1.0;
        }
    }
    for f in &mut freq {
        *f /= dataset.n_obs() as f64;
    }
    freq
}

/// Human-readable label for a family, used in reports.
pub fn family_label(family: &Family) -> String {
    match family {
        Family::Poisson => "poisson".to_string(),
        Family::GammaCount => "gamma-count".to_string(),
        Family::Sue { gamma_event } => format!("sue(gamma={gamma_event})"),
    }
}
