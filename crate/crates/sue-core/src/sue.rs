//! The single-unusual-event (SUE) counting distribution.
//!
//! Interarrival times are independent exponentials with rate αλ for the
//! γ-th event and rate λ for every other event. The mass function exists in
//! two algebraically equivalent forms:
//!
//! - a *direct* form built from the bracket e^z − Σ_{i<n} z^i/i! with
//!   z = (1−α)λt, which is exact but has an indeterminate 0/0 at α = 1 and
//!   loses significance when z is large;
//! - a *series* form α(λt)^n e^{−λt} Σ_{i≥0} z^i/(i+n)!, which is safe near
//!   α = 1 but whose terms can grow before the factorial wins when |z| is
//!   large.
//!
//! [`sue_pmf`] dispatches between them: series when |z| ≤ 30 or
//! |1−α| ≤ 1e−4, direct (evaluated in log space) otherwise, falling back to
//! the other form if the chosen one reports trouble.

use alloc::vec::Vec;

use crate::error::NumericError;
use crate::math::{
    abs, cosh, exp, ln, ln_factorial, pairwise_sum, poisson_log_pmf_raw, poisson_pmf_linear, sinh,
};

/// Switch to the direct form once |(1−α)λt| exceeds this.
const SERIES_Z_LIMIT: f64 = 30.0;
/// Always use the series form when α is this close to 1.
const ALPHA_NEAR_ONE: f64 = 1e-4;
/// Series truncation: a term this small relative to the partial sum,
/// three times in a row, ends the summation.
const SERIES_REL_TOL: f64 = 1e-16;
const SERIES_MAX_TERMS: usize = 10_000;
/// Probability-range guard half-width.
const PROB_EPS: f64 = 1e-9;

/// Parameters of one SUE distribution: rate λ, unusual-rate multiplier α,
/// unusual-event index γ, and observation window t.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SueParams {
    pub lambda: f64,
    pub alpha: f64,
    pub gamma_event: u64,
    pub exposure: f64,
}

impl SueParams {
    /// Validates λ > 0, α > 0, t > 0, γ ≥ 1.
    pub fn new(lambda: f64, alpha: f64, gamma_event: u64, exposure: f64) -> Result<Self, NumericError> {
        if !(lambda > 0.0) || !lambda.is_finite() {
            return Err(NumericError::Domain("lambda must be positive and finite"));
        }
        if !(alpha > 0.0) || !alpha.is_finite() {
            return Err(NumericError::Domain("alpha must be positive and finite"));
        }
        if !(exposure > 0.0) || !exposure.is_finite() {
            return Err(NumericError::Domain("exposure must be positive and finite"));
        }
        if gamma_event < 1 {
            return Err(NumericError::Domain("gamma_event must be >= 1"));
        }
        Ok(SueParams { lambda, alpha, gamma_event, exposure })
    }

    #[inline]
    fn lt(&self) -> f64 {
        self.lambda * self.exposure
    }

    #[inline]
    fn z(&self) -> f64 {
        (1.0 - self.alpha) * self.lt()
    }

    /// Scale factor on the series/bracket branch: α except at n = γ−1 (γ > 1).
    #[inline]
    fn branch_scale(&self, n: u64) -> f64 {
        if self.gamma_event > 1 && n == self.gamma_event - 1 {
            1.0
        } else {
            self.alpha
        }
    }
}

/// Which evaluation route produced a pmf value.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PmfForm {
    Direct,
    Series,
}

/// One pmf table entry with its evaluation metadata.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PmfEntry {
    pub prob: f64,
    pub form: PmfForm,
    pub terms: u32,
}

/// Probabilities for n = 0..n_max with truncation metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct PmfTable {
    pub params: SueParams,
    pub entries: Vec<PmfEntry>,
    /// 1 − Σ probs; nonnegative up to rounding.
    pub tail_mass: f64,
}

impl PmfTable {
    pub fn probs(&self) -> impl Iterator<Item = f64> + '_ {
        self.entries.iter().map(|e| e.prob)
    }
}

/// First two moments and the dispersion statistic.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentSummary {
    pub mean: f64,
    pub second_moment: f64,
    pub variance: f64,
    pub vm_ratio: f64,
}

/// Sign of variance − mean, with a 1e−10 dead band around zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dispersion {
    Over,
    Under,
    Equi,
}

struct LogPmf {
    log_p: f64,
    form: PmfForm,
    terms: u32,
}

/// Poisson log mass preferring the linear recursion for its accuracy, with
/// the log-space formula as the underflow fallback.
fn log_poisson(mu: f64, n: u64) -> f64 {
    let p = poisson_pmf_linear(mu, n);
    if p > 0.0 {
        ln(p)
    } else {
        poisson_log_pmf_raw(mu, n)
    }
}

/// Series evaluation of Σ_{i≥0} z^i/(i+n)! scaled by n! (so the i = 0 term
/// is 1). Returns (scaled sum, terms used).
fn scaled_tail_series(n: u64, z: f64) -> Result<(f64, u32), NumericError> {
    let mut term = 1.0f64;
    let mut sum = 1.0f64;
    let mut max_term = 1.0f64;
    let mut below = 0u32;
    for i in 1..=SERIES_MAX_TERMS {
        term *= z / (n as f64 + i as f64);
        sum += term;
        if abs(term) > max_term {
            max_term = abs(term);
        }
        if abs(term) < SERIES_REL_TOL * abs(sum) {
            below += 1;
            if below >= 3 {
                // With z < 0 the terms alternate; a sum far below the largest
                // term has cancelled away its accuracy.
                if abs(sum) < 1e-12 * max_term {
                    return Err(NumericError::Instability { what: "sue pmf series sum", value: sum });
                }
                return Ok((sum, i as u32));
            }
        } else {
            below = 0;
        }
    }
    Err(NumericError::NonConvergence { what: "sue pmf series", iterations: SERIES_MAX_TERMS })
}

/// Series-form log pmf. Valid for any α > 0; degenerates to the Poisson mass
/// at α = 1 because the series collapses to 1/n!.
fn series_log_pmf(params: &SueParams, n: u64) -> Result<LogPmf, NumericError> {
    let lt = params.lt();
    if params.gamma_event == 1 && n == 0 {
        return Ok(LogPmf { log_p: -params.alpha * lt, form: PmfForm::Series, terms: 0 });
    }
    if params.gamma_event > 1 && n < params.gamma_event - 1 {
        return Ok(LogPmf { log_p: log_poisson(lt, n), form: PmfForm::Series, terms: 0 });
    }
    let (sum, terms) = scaled_tail_series(n, params.z())?;
    if !(sum > 0.0) {
        return Err(NumericError::Instability { what: "sue pmf series sum", value: sum });
    }
    let scale = params.branch_scale(n);
    // Prefer the fully linear product; it keeps the α = 1 collapse to the
    // Poisson mass accurate to a few ulps instead of log-domain precision.
    let pois = poisson_pmf_linear(lt, n);
    let linear = scale * pois * sum;
    let log_p = if pois > 0.0 && linear.is_finite() && linear > 0.0 {
        ln(linear)
    } else {
        ln(scale) + n as f64 * ln(lt) - lt + ln(sum) - ln_factorial(n)
    };
    if log_p > PROB_EPS {
        return Err(NumericError::Instability { what: "sue pmf series", value: exp(log_p) });
    }
    Ok(LogPmf { log_p, form: PmfForm::Series, terms })
}

/// Log magnitude and sign of the bracket e^z − Σ_{i=0}^{n−1} z^i/i!,
/// evaluated with all large factors normalized by the largest term.
fn log_bracket(n: u64, z: f64) -> Result<(f64, f64), NumericError> {
    // Scale everything by e^M where M is the largest log magnitude in play.
    let mut max_log = z; // the e^z term
    let abs_z = abs(z);
    let ln_abs_z = if abs_z > 0.0 { ln(abs_z) } else { f64::NEG_INFINITY };
    for i in 0..n {
        let l = i as f64 * ln_abs_z - ln_factorial(i);
        if l > max_log {
            max_log = l;
        }
    }
    let mut acc = exp(z - max_log);
    for i in 0..n {
        let l = i as f64 * ln_abs_z - ln_factorial(i);
        let sign = if z < 0.0 && i % 2 == 1 { -1.0 } else { 1.0 };
        acc -= sign * exp(l - max_log);
    }
    if acc == 0.0 || abs(acc) < 1e-12 {
        // The bracket lost essentially all significant digits.
        return Err(NumericError::Instability { what: "sue pmf direct bracket", value: acc });
    }
    Ok((max_log + ln(abs(acc)), if acc > 0.0 { 1.0 } else { -1.0 }))
}

/// Direct-form log pmf (Eq. bracket route). Errors at α = 1 and when the
/// bracket subtraction cancels catastrophically.
fn direct_log_pmf(params: &SueParams, n: u64) -> Result<LogPmf, NumericError> {
    if params.alpha == 1.0 {
        return Err(NumericError::Domain("direct form is indeterminate (0/0) at alpha = 1"));
    }
    let lt = params.lt();
    if params.gamma_event == 1 && n == 0 {
        return Ok(LogPmf { log_p: -params.alpha * lt, form: PmfForm::Direct, terms: 0 });
    }
    if params.gamma_event > 1 && n < params.gamma_event - 1 {
        return Ok(LogPmf { log_p: log_poisson(lt, n), form: PmfForm::Direct, terms: 0 });
    }
    let z = params.z();
    let (log_bra, sign_bra) = log_bracket(n, z)?;
    // P = scale · e^{−λt} · bracket / (1−α)^n
    let one_minus_alpha = 1.0 - params.alpha;
    let sign_denom = if one_minus_alpha < 0.0 && n % 2 == 1 { -1.0 } else { 1.0 };
    let sign = sign_bra * sign_denom;
    let log_p = ln(params.branch_scale(n)) - lt + log_bra - n as f64 * ln(abs(one_minus_alpha));
    let p = sign * exp(log_p);
    if p.is_nan() || !(-PROB_EPS..=1.0 + PROB_EPS).contains(&p) {
        return Err(NumericError::Instability { what: "sue pmf direct", value: p });
    }
    if p <= 0.0 {
        // Negative-within-ε: rounding in the subtraction form; treat as zero.
        return Ok(LogPmf { log_p: f64::NEG_INFINITY, form: PmfForm::Direct, terms: n as u32 });
    }
    Ok(LogPmf { log_p: if p > 1.0 { 0.0 } else { log_p }, form: PmfForm::Direct, terms: n as u32 })
}

fn prefer_series(params: &SueParams) -> bool {
    abs(1.0 - params.alpha) <= ALPHA_NEAR_ONE || abs(params.z()) <= SERIES_Z_LIMIT
}

type PmfEval = fn(&SueParams, u64) -> Result<LogPmf, NumericError>;

fn dispatch_log_pmf(params: &SueParams, n: u64) -> Result<LogPmf, NumericError> {
    let (first, second): (PmfEval, PmfEval) = if prefer_series(params) {
        (series_log_pmf, direct_log_pmf)
    } else {
        (direct_log_pmf, series_log_pmf)
    };
    match first(params, n) {
        Ok(v) => Ok(v),
        Err(first_err) => match second(params, n) {
            Ok(v) => Ok(v),
            Err(_) => Err(first_err),
        },
    }
}

/// P{N(t) = n} by the direct (subtraction) form. Requires α ≠ 1.
pub fn sue_pmf_direct(params: &SueParams, n: u64) -> Result<f64, NumericError> {
    direct_log_pmf(params, n).map(|v| exp(v.log_p))
}

/// P{N(t) = n} by the series form, together with the number of series terms
/// summed. Valid for any α > 0.
pub fn sue_pmf_series(params: &SueParams, n: u64) -> Result<(f64, u32), NumericError> {
    series_log_pmf(params, n).map(|v| (exp(v.log_p), v.terms))
}

/// P{N(t) = n}: form-dispatching evaluation, always in [0, 1], never NaN.
pub fn sue_pmf(params: &SueParams, n: u64) -> Result<f64, NumericError> {
    sue_log_pmf(params, n).map(exp)
}

/// ln P{N(t) = n} for likelihood work; −∞ when the mass underflows.
pub fn sue_log_pmf(params: &SueParams, n: u64) -> Result<f64, NumericError> {
    let v = dispatch_log_pmf(params, n)?;
    if v.log_p.is_nan() || v.log_p > PROB_EPS {
        return Err(NumericError::Instability { what: "sue pmf", value: exp(v.log_p) });
    }
    Ok(if v.log_p > 0.0 { 0.0 } else { v.log_p })
}

/// Tabulates P{N(t) = n} for n = 0..n_max inclusive.
pub fn sue_pmf_table(params: &SueParams, n_max: u64) -> Result<PmfTable, NumericError> {
    let mut entries = Vec::with_capacity(n_max as usize + 1);
    for n in 0..=n_max {
        let v = dispatch_log_pmf(params, n).map_err(|e| e.at_count(n))?;
        entries.push(PmfEntry { prob: exp(v.log_p), form: v.form, terms: v.terms });
    }
    let probs: Vec<f64> = entries.iter().map(|e| e.prob).collect();
    let tail_mass = 1.0 - pairwise_sum(&probs);
    Ok(PmfTable { params: *params, entries, tail_mass })
}

/// Shared γ=1 mean term: λt + ((α−1)/α)(1 − e^{−αλt}). Exact at α = 1.
fn mean_gamma1(params: &SueParams) -> f64 {
    let lt = params.lt();
    let a = params.alpha;
    lt + (a - 1.0) / a * (1.0 - exp(-a * lt))
}

/// Shared γ=1 second-moment term.
fn second_moment_gamma1(params: &SueParams) -> f64 {
    let lt = params.lt();
    let a = params.alpha;
    (3.0 * a - 2.0) / a * lt + lt * lt + (a - 2.0) * (a - 1.0) / (a * a) * (1.0 - exp(-a * lt))
}

/// The value scale·(λt)^n e^{−λt} Σ_i z^i/(i+n)! appearing in the γ>1 moment
/// formulas, evaluated by the same series/direct dispatch as the pmf.
fn branch_value(params: &SueParams, n: u64, with_alpha: bool) -> Result<f64, NumericError> {
    let lt = params.lt();
    let scale = if with_alpha { params.alpha } else { 1.0 };
    if prefer_series(params) {
        let (sum, _) = scaled_tail_series(n, params.z())?;
        if !(sum > 0.0) {
            return Err(NumericError::Instability { what: "sue moment series sum", value: sum });
        }
        let pois = poisson_pmf_linear(lt, n);
        let v = if pois > 0.0 {
            scale * pois * sum
        } else {
            scale * exp(n as f64 * ln(lt) - lt + ln(sum) - ln_factorial(n))
        };
        if v > 1.0 + PROB_EPS {
            return Err(NumericError::Instability { what: "sue moment series branch", value: v });
        }
        Ok(v)
    } else {
        let (log_bra, sign_bra) = log_bracket(n, params.z())?;
        let one_minus_alpha = 1.0 - params.alpha;
        let sign_denom = if one_minus_alpha < 0.0 && n % 2 == 1 { -1.0 } else { 1.0 };
        let v = sign_bra * sign_denom * scale * exp(-lt + log_bra - n as f64 * ln(abs(one_minus_alpha)));
        if !(-PROB_EPS..=1.0 + PROB_EPS).contains(&v) {
            return Err(NumericError::Instability { what: "sue moment direct branch", value: v });
        }
        Ok(if v < 0.0 { 0.0 } else { v })
    }
}

/// E{N(t)} in closed/finite form.
pub fn sue_mean(params: &SueParams) -> Result<f64, NumericError> {
    let g = params.gamma_event;
    let base = mean_gamma1(params);
    if g == 1 {
        return Ok(base);
    }
    let lt = params.lt();
    let mut acc = base;
    for n in 1..=g.saturating_sub(2) {
        let pois = poisson_pmf_linear(lt, n);
        acc += n as f64 * (pois - branch_value(params, n, true)?);
    }
    acc += (g - 1) as f64 * (1.0 - params.alpha) * branch_value(params, g - 1, false)?;
    Ok(acc)
}

/// E{N(t)²} in closed/finite form.
pub fn sue_second_moment(params: &SueParams) -> Result<f64, NumericError> {
    let g = params.gamma_event;
    let base = second_moment_gamma1(params);
    if g == 1 {
        return Ok(base);
    }
    let lt = params.lt();
    let mut acc = base;
    for n in 1..=g.saturating_sub(2) {
        let pois = poisson_pmf_linear(lt, n);
        acc += (n * n) as f64 * (pois - branch_value(params, n, true)?);
    }
    let gm1 = (g - 1) as f64;
    acc += gm1 * gm1 * (1.0 - params.alpha) * branch_value(params, g - 1, false)?;
    Ok(acc)
}

/// Closed-form moments plus the over/under/equi classification.
pub fn sue_dispersion(params: &SueParams) -> Result<(MomentSummary, Dispersion), NumericError> {
    let mean = sue_mean(params)?;
    let second_moment = sue_second_moment(params)?;
    let variance = second_moment - mean * mean;
    let summary = MomentSummary { mean, second_moment, variance, vm_ratio: variance / mean };
    let diff = variance - mean;
    let class = if abs(diff) <= 1e-10 {
        Dispersion::Equi
    } else if diff > 0.0 {
        Dispersion::Over
    } else {
        Dispersion::Under
    };
    Ok((summary, class))
}

/// One cell of the variance-mean-ratio surface.
#[derive(Debug, Clone)]
pub struct VmCell {
    pub lambda: f64,
    pub alpha: f64,
    pub result: Result<f64, NumericError>,
}

/// Tabulates variance/mean over a (λ, α) grid for one γ. Per-cell failures
/// are recorded in place, not fatal.
pub fn vm_surface(gamma_event: u64, lambda_grid: &[f64], alpha_grid: &[f64], t: f64) -> Vec<VmCell> {
    let mut cells = Vec::with_capacity(lambda_grid.len() * alpha_grid.len());
    for &lambda in lambda_grid {
        for &alpha in alpha_grid {
            let result = SueParams::new(lambda, alpha, gamma_event, t)
                .and_then(|p| sue_dispersion(&p))
                .map(|(m, _)| m.vm_ratio);
            cells.push(VmCell { lambda, alpha, result });
        }
    }
    cells
}

/// γ=1 variance-mean identity from the dispersion proof:
/// V − E = 2(1−α)α^{−2} e^{−αλt} (α(cosh(αλt) − 1) + sinh(αλt) − αλt).
pub fn vm_identity_gamma1(params: &SueParams) -> f64 {
    let a = params.alpha;
    let x = a * params.lt();
    2.0 * (1.0 - a) / (a * a) * exp(-x) * (a * (cosh(x) - 1.0) + sinh(x) - x)
}
