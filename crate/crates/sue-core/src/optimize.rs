//! Maximum-likelihood fitting: BFGS with a strong-Wolfe line search over the
//! finite-difference score, standard errors from the observed information,
//! and a scan over the unusual-event index γ.
//!
//! Internally the optimizer minimizes f = −ℓ. A −∞ log-likelihood shows up
//! as f = +∞, which the line search treats as "too far": every trial that
//! lands there fails the sufficient-decrease test and the step shrinks back
//! into the feasible region.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::NumericError;
use crate::linalg::{invert_spd, symmetric_eigenvalues};
use crate::math::{abs, ln, sqrt};
use crate::regression::{
    log_likelihood, log_likelihood_gradient, CoefVector, CountDataset, Family, RegressionSpec,
};

/// Knobs for the BFGS fit. Defaults: 500 iterations, gradient max-norm
/// tolerance 1e−6, step tolerance 1e−10, Wolfe constants c1 = 1e−4, c2 = 0.9.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimizerSettings {
    pub max_iters: usize,
    pub grad_tol: f64,
    pub step_tol: f64,
    pub c1: f64,
    pub c2: f64,
}

impl Default for OptimizerSettings {
    fn default() -> Self {
        OptimizerSettings { max_iters: 500, grad_tol: 1e-6, step_tol: 1e-10, c1: 1e-4, c2: 0.9 }
    }
}

/// Where the optimizer starts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StartStrategy {
    /// Fit a Poisson first, then start the target family from its solution
    /// with ln α = 0.
    PoissonWarmStart,
    /// All coefficients zero.
    Zeros,
}

/// A completed fit.
#[derive(Debug, Clone)]
pub struct FitResult {
    pub family: Family,
    pub coef_names: Vec<String>,
    pub coefs: CoefVector,
    pub log_likelihood: f64,
    pub aic: f64,
    pub converged: bool,
    pub iterations: usize,
    /// Max-norm of the score at the solution.
    pub grad_norm: f64,
    /// √diag of the inverse observed information; an error if the Hessian
    /// could not be inverted (carries the offending pivot/eigenvalue).
    pub standard_errors: Result<Vec<f64>, NumericError>,
    pub n_obs: usize,
    /// Log-likelihood at the start point and after every accepted optimizer
    /// step; non-decreasing by construction of the line search.
    pub ll_trace: Vec<f64>,
}

/// One row of a γ-scan.
#[derive(Debug, Clone)]
pub struct ScanRow {
    pub gamma_event: u64,
    pub result: Result<FitResult, NumericError>,
}

fn max_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, &x| m.max(abs(x)))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Objective wrapper: value of −ℓ (+∞ at the sentinel) and, on demand, its
/// gradient (None where any stencil point is infeasible).
struct Objective<'a> {
    dataset: &'a CountDataset,
    family: &'a Family,
    evals: usize,
}

impl<'a> Objective<'a> {
    fn value(&mut self, x: &[f64]) -> f64 {
        self.evals += 1;
        let ll = log_likelihood(self.dataset, self.family, &CoefVector::new(x.to_vec()));
        if ll.is_finite() {
            -ll
        } else {
            f64::INFINITY
        }
    }

    fn gradient(&mut self, x: &[f64]) -> Option<Vec<f64>> {
        self.evals += 2 * x.len();
        log_likelihood_gradient(self.dataset, self.family, &CoefVector::new(x.to_vec()))
            .ok()
            .map(|g| g.iter().map(|v| -v).collect())
    }
}

struct SearchResult {
    x: Vec<f64>,
    f: f64,
    g: Vec<f64>,
}

/// Strong-Wolfe line search along d from x (f0 = f(x), dg0 = ∇fᵀd < 0).
/// Returns None if no acceptable step is found.
fn wolfe_search(
    obj: &mut Objective<'_>,
    x: &[f64],
    d: &[f64],
    f0: f64,
    dg0: f64,
    settings: &OptimizerSettings,
) -> Option<SearchResult> {
    let at = |alpha: f64| -> Vec<f64> { x.iter().zip(d).map(|(xi, di)| xi + alpha * di).collect() };

    // Bracketing phase (Nocedal–Wright algorithm 3.5).
    let mut a_prev = 0.0f64;
    let mut f_prev = f0;
    let mut dg_prev = dg0;
    let mut a = 1.0f64;
    let a_max = 1e4;
    for i in 0..30 {
        let xa = at(a);
        let fa = obj.value(&xa);
        let fa = if fa.is_nan() { f64::INFINITY } else { fa };
        if fa > f0 + settings.c1 * a * dg0 || (i > 0 && fa >= f_prev) {
            return zoom(obj, x, d, f0, dg0, a_prev, f_prev, dg_prev, a, settings);
        }
        let ga = obj.gradient(&xa)?;
        let dga = dot(&ga, d);
        if abs(dga) <= -settings.c2 * dg0 {
            return Some(SearchResult { x: xa, f: fa, g: ga });
        }
        if dga >= 0.0 {
            return zoom(obj, x, d, f0, dg0, a, fa, dga, a_prev, settings);
        }
        a_prev = a;
        f_prev = fa;
        dg_prev = dga;
        a = (a * 2.0).min(a_max);
        if a >= a_max {
            return Some(SearchResult { x: xa, f: fa, g: ga });
        }
    }
    None
}

/// Zoom phase: lo always satisfies sufficient decrease; hi is the other end.
#[allow(clippy::too_many_arguments)]
fn zoom(
    obj: &mut Objective<'_>,
    x: &[f64],
    d: &[f64],
    f0: f64,
    dg0: f64,
    mut a_lo: f64,
    mut f_lo: f64,
    mut dg_lo: f64,
    mut a_hi: f64,
    settings: &OptimizerSettings,
) -> Option<SearchResult> {
    let at = |alpha: f64| -> Vec<f64> { x.iter().zip(d).map(|(xi, di)| xi + alpha * di).collect() };
    for _ in 0..50 {
        // Quadratic interpolation off the lo end, safeguarded to the middle
        // third of the interval.
        let mut a = if dg_lo.is_finite() && f_lo.is_finite() {
            a_lo - 0.5 * dg_lo * (a_hi - a_lo) * (a_hi - a_lo)
                / ((f_at_guess(f_lo, dg_lo, a_hi - a_lo)).max(1e-300))
        } else {
            0.5 * (a_lo + a_hi)
        };
        let lo = a_lo.min(a_hi);
        let hi = a_lo.max(a_hi);
        let width = hi - lo;
        if !a.is_finite() || a <= lo + 0.1 * width || a >= hi - 0.1 * width {
            a = 0.5 * (a_lo + a_hi);
        }
        let xa = at(a);
        let fa = obj.value(&xa);
        let fa = if fa.is_nan() { f64::INFINITY } else { fa };
        if fa > f0 + settings.c1 * a * dg0 || fa >= f_lo {
            a_hi = a;
        } else {
            let ga = obj.gradient(&xa)?;
            let dga = dot(&ga, d);
            if abs(dga) <= -settings.c2 * dg0 {
                return Some(SearchResult { x: xa, f: fa, g: ga });
            }
            if dga * (a_hi - a_lo) >= 0.0 {
                a_hi = a_lo;
            }
            a_lo = a;
            f_lo = fa;
            dg_lo = dga;
        }
        if abs(a_hi - a_lo) < 1e-14 {
            break;
        }
    }
    // Accept the lo point if it at least made progress.
    if f_lo < f0 && a_lo > 0.0 {
        let xa = at(a_lo);
        let ga = obj.gradient(&xa)?;
        return Some(SearchResult { x: xa, f: f_lo, g: ga });
    }
    None
}

/// Denominator f(a_lo+Δ) − f_lo − dg_lo·Δ estimated for the quadratic model.
fn f_at_guess(_f_lo: f64, dg_lo: f64, delta: f64) -> f64 {
    // Curvature scale for the quadratic step; keep it positive.
    abs(dg_lo * delta) + 1e-12
}

struct BfgsOutcome {
    x: Vec<f64>,
    f: f64,
    grad_norm: f64,
    iterations: usize,
    converged: bool,
    /// Objective value (−ℓ) at the start and after each accepted step.
    trace: Vec<f64>,
}

/// BFGS on −ℓ starting from x0. The inverse-Hessian approximation starts at
/// the identity and is rescaled by sᵀy/yᵀy after the first accepted step.
fn bfgs(obj: &mut Objective<'_>, x0: &[f64], settings: &OptimizerSettings) -> Option<BfgsOutcome> {
    let n = x0.len();
    let mut x = x0.to_vec();
    let mut f = obj.value(&x);
    if !f.is_finite() {
        return None;
    }
    let mut g = obj.gradient(&x)?;
    let mut h = identity(n);
    let mut first_update = true;
    let mut trace = vec![f];
    for iter in 0..settings.max_iters {
        let gnorm = max_norm(&g);
        if gnorm <= settings.grad_tol {
            return Some(BfgsOutcome {
                x,
                f,
                grad_norm: gnorm,
                iterations: iter,
                converged: true,
                trace,
            });
        }
        let mut d = mat_vec_neg(&h, &g, n);
        if dot(&d, &g) >= 0.0 {
            // Approximation lost descent; reset to steepest descent.
            h = identity(n);
            first_update = true;
            d = g.iter().map(|v| -v).collect();
        }
        let dg0 = dot(&d, &g);
        let mut reset_after_step = false;
        let step = match wolfe_search(obj, &x, &d, f, dg0, settings) {
            Some(s) => s,
            None => {
                // Near the optimum the curvature condition drowns in
                // finite-difference noise; fall back to plain backtracking
                // on the function value before giving up.
                match backtrack(obj, &x, &d, f, dg0, settings) {
                    Some(s) => {
                        reset_after_step = true;
                        s
                    }
                    None => {
                        return Some(BfgsOutcome {
                            x,
                            f,
                            grad_norm: gnorm,
                            iterations: iter,
                            converged: gnorm <= settings.grad_tol,
                            trace,
                        })
                    }
                }
            }
        };
        let s: Vec<f64> = step.x.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = step.g.iter().zip(&g).map(|(a, b)| a - b).collect();
        let step_size = max_norm(&s);
        x = step.x;
        f = step.f;
        g = step.g;
        trace.push(f);
        let sy = dot(&s, &y);
        if reset_after_step {
            h = identity(n);
            first_update = true;
        }
        if sy > 1e-10 * sqrt(dot(&s, &s)) * sqrt(dot(&y, &y)) {
            if first_update {
                let yy = dot(&y, &y);
                if yy > 0.0 {
                    let scale = sy / yy;
                    for v in h.iter_mut() {
                        *v *= scale;
                    }
                }
                first_update = false;
            }
            bfgs_update(&mut h, &s, &y, sy, n);
        }
        if step_size < settings.step_tol * (1.0 + max_norm(&x)) {
            let gnorm = max_norm(&g);
            return Some(BfgsOutcome {
                x,
                f,
                grad_norm: gnorm,
                iterations: iter + 1,
                converged: gnorm <= settings.grad_tol,
                trace,
            });
        }
    }
    let gnorm = max_norm(&g);
    Some(BfgsOutcome {
        x,
        f,
        grad_norm: gnorm,
        iterations: settings.max_iters,
        converged: gnorm <= settings.grad_tol,
        trace,
    })
}

fn identity(n: usize) -> Vec<f64> {
    let mut h = vec![0.0f64; n * n];
    for i in 0..n {
        h[i * n + i] = 1.0;
    }
    h
}

fn mat_vec_neg(h: &[f64], g: &[f64], n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| -(0..n).map(|j| h[i * n + j] * g[j]).sum::<f64>())
        .collect()
}

/// Inverse-Hessian BFGS update: H ← (I − ρsyᵀ)H(I − ρysᵀ) + ρssᵀ.
fn bfgs_update(h: &mut [f64], s: &[f64], y: &[f64], sy: f64, n: usize) {
    let rho = 1.0 / sy;
    let hy: Vec<f64> = (0..n)
        .map(|i| (0..n).map(|j| h[i * n + j] * y[j]).sum::<f64>())
        .collect();
    let yhy = dot(y, &hy);
    for i in 0..n {
        for j in 0..n {
            h[i * n + j] += -rho * (s[i] * hy[j] + hy[i] * s[j])
                + rho * rho * yhy * s[i] * s[j]
                + rho * s[i] * s[j];
        }
    }
}

/// Armijo-only backtracking line search used when the strong-Wolfe search
/// cannot certify curvature (typically at the noise floor of the
/// finite-difference gradient).
fn backtrack(
    obj: &mut Objective<'_>,
    x: &[f64],
    d: &[f64],
    f0: f64,
    dg0: f64,
    settings: &OptimizerSettings,
) -> Option<SearchResult> {
    let mut a = 1.0f64;
    for _ in 0..40 {
        let xa: Vec<f64> = x.iter().zip(d).map(|(xi, di)| xi + a * di).collect();
        let fa = obj.value(&xa);
        if fa.is_finite() && fa <= f0 + settings.c1 * a * dg0 {
            let ga = obj.gradient(&xa)?;
            return Some(SearchResult { x: xa, f: fa, g: ga });
        }
        a *= 0.5;
    }
    None
}

/// 50 iterations of Armijo-backtracked steepest descent, used to pull the
/// fallback restart into a basin BFGS can finish from.
fn steepest_descent(obj: &mut Objective<'_>, x0: &[f64], settings: &OptimizerSettings) -> Option<Vec<f64>> {
    let mut x = x0.to_vec();
    let mut f = obj.value(&x);
    if !f.is_finite() {
        return None;
    }
    for _ in 0..50 {
        let g = obj.gradient(&x)?;
        if max_norm(&g) <= settings.grad_tol {
            break;
        }
        let d: Vec<f64> = g.iter().map(|v| -v).collect();
        let dg0 = dot(&d, &g);
        let mut a = 1.0 / (1.0 + max_norm(&g));
        let mut accepted = false;
        for _ in 0..40 {
            let xa: Vec<f64> = x.iter().zip(&d).map(|(xi, di)| xi + a * di).collect();
            let fa = obj.value(&xa);
            if fa.is_finite() && fa <= f + settings.c1 * a * dg0 {
                x = xa;
                f = fa;
                accepted = true;
                break;
            }
            a *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    Some(x)
}

/// Poisson-mean intercept start: β₀ = ln(mean + 1e−8), slopes zero.
fn poisson_start(dataset: &CountDataset) -> Vec<f64> {
    let mut x = vec![0.0f64; dataset.n_covariates() + 1];
    x[0] = ln(dataset.mean_count() + 1e-8);
    x
}

/// Observed information (−∇²ℓ) by central second differences with component
/// steps max(1e−4, 1e−4|β_l|), symmetrized.
fn observed_information(dataset: &CountDataset, family: &Family, beta: &[f64]) -> Option<Vec<f64>> {
    let n = beta.len();
    let f = |x: &[f64]| -> f64 { log_likelihood(dataset, family, &CoefVector::new(x.to_vec())) };
    let h: Vec<f64> = beta.iter().map(|b| 1e-4f64.max(1e-4 * abs(*b))).collect();
    let f0 = f(beta);
    if !f0.is_finite() {
        return None;
    }
    let shifted = |l: usize, sl: f64, m: usize, sm: f64| -> f64 {
        let mut x = beta.to_vec();
        x[l] += sl * h[l];
        x[m] += sm * h[m];
        f(&x)
    };
    let mut hess = vec![0.0f64; n * n];
    for l in 0..n {
        let up = shifted(l, 1.0, l, 0.0);
        let down = shifted(l, -1.0, l, 0.0);
        if !up.is_finite() || !down.is_finite() {
            return None;
        }
        hess[l * n + l] = -(up - 2.0 * f0 + down) / (h[l] * h[l]);
        for m in 0..l {
            let pp = shifted(l, 1.0, m, 1.0);
            let pm = shifted(l, 1.0, m, -1.0);
            let mp = shifted(l, -1.0, m, 1.0);
            let mm = shifted(l, -1.0, m, -1.0);
            if ![pp, pm, mp, mm].iter().all(|v| v.is_finite()) {
                return None;
            }
            let v = -(pp - pm - mp + mm) / (4.0 * h[l] * h[m]);
            hess[l * n + m] = v;
            hess[m * n + l] = v;
        }
    }
    Some(hess)
}

/// Standard errors at the MLE: √diag((−∇²ℓ)⁻¹). Reports the smallest
/// eigenvalue when the information matrix is not positive definite.
pub fn standard_errors(
    dataset: &CountDataset,
    family: &Family,
    coefs: &CoefVector,
) -> Result<Vec<f64>, NumericError> {
    let n = coefs.len();
    let info = observed_information(dataset, family, &coefs.values)
        .ok_or(NumericError::GradientAtSentinel)?;
    match invert_spd(&info, n) {
        Ok(inv) => {
            let mut ses = Vec::with_capacity(n);
            for l in 0..n {
                let v = inv[l * n + l];
                if v < 0.0 {
                    return Err(NumericError::Instability {
                        what: "negative variance on inverse information diagonal",
                        value: v,
                    });
                }
                ses.push(sqrt(v));
            }
            Ok(ses)
        }
        Err(_) => {
            let eigs = symmetric_eigenvalues(&info, n);
            Err(NumericError::Instability {
                what: "observed information is not positive definite; smallest eigenvalue",
                value: eigs[0],
            })
        }
    }
}

/// Fits a family by maximum likelihood.
///
/// With [`StartStrategy::PoissonWarmStart`] the Poisson model is fit first
/// and its solution (with ln α = 0 appended) seeds the target family. If the
/// primary run fails to converge, a fallback restarts from zeros with a
/// short steepest-descent phase before BFGS; the better log-likelihood wins.
pub fn fit(
    dataset: &CountDataset,
    family: &Family,
    settings: &OptimizerSettings,
    start: StartStrategy,
) -> Result<FitResult, NumericError> {
    dataset.check_design_rank()?;
    let spec = RegressionSpec::new(*family);
    let n_params = spec.n_params(dataset);

    let x0 = match (start, family) {
        (StartStrategy::Zeros, _) => vec![0.0f64; n_params],
        (StartStrategy::PoissonWarmStart, Family::Poisson) => poisson_start(dataset),
        (StartStrategy::PoissonWarmStart, _) => {
            let pois = fit(dataset, &Family::Poisson, settings, StartStrategy::PoissonWarmStart)?;
            let mut x = pois.coefs.values;
            x.push(0.0); // ln α = 0: start at the nested Poisson point.
            x
        }
    };

    let mut obj = Objective { dataset, family, evals: 0 };
    let primary = bfgs(&mut obj, &x0, settings);

    let outcome = match primary {
        Some(o) if o.converged => o,
        primary => {
            // Fallback: restart from zeros, smooth with steepest descent,
            // then BFGS again.
            let fallback = steepest_descent(&mut obj, &vec![0.0f64; n_params], settings)
                .and_then(|xs| bfgs(&mut obj, &xs, settings));
            match (primary, fallback) {
                (Some(a), Some(b)) => {
                    if b.converged && (!a.converged || b.f <= a.f) {
                        b
                    } else if a.f <= b.f {
                        a
                    } else {
                        b
                    }
                }
                (Some(a), None) => a,
                (None, Some(b)) => b,
                (None, None) => {
                    return Err(NumericError::NonConvergence {
                        what: "maximum-likelihood fit",
                        iterations: settings.max_iters,
                    })
                }
            }
        }
    };

    let ll_trace: Vec<f64> = outcome.trace.iter().map(|v| -v).collect();
    let coefs = CoefVector::new(outcome.x);
    let ll = -outcome.f;
    let ses = standard_errors(dataset, family, &coefs);
    Ok(FitResult {
        family: *family,
        coef_names: spec.coef_names(dataset),
        coefs,
        log_likelihood: ll,
        aic: 2.0 * n_params as f64 - 2.0 * ll,
        converged: outcome.converged,
        iterations: outcome.iterations,
        grad_norm: outcome.grad_norm,
        standard_errors: ses,
        n_obs: dataset.n_obs(),
        ll_trace,
    })
}

/// Fits the SUE family for each γ in `gammas`. Per-γ failures are recorded
/// in their rows rather than aborting the scan.
pub fn scan_gamma(
    dataset: &CountDataset,
    gammas: impl IntoIterator<Item = u64>,
    settings: &OptimizerSettings,
    start: StartStrategy,
) -> Vec<ScanRow> {
    gammas
        .into_iter()
        .map(|gamma_event| {
            let result = fit(dataset, &Family::Sue { gamma_event }, settings, start);
            ScanRow { gamma_event, result }
        })
        .collect()
}

/// γ with the highest log-likelihood among the successful scan rows.
pub fn scan_best(rows: &[ScanRow]) -> Option<u64> {
    rows.iter()
        .filter_map(|r| r.result.as_ref().ok().map(|f| (r.gamma_event, f.log_likelihood)))
        .fold(None, |best, (g, ll)| match best {
            Some((_, bll)) if bll >= ll => best,
            _ => Some((g, ll)),
        })
        .map(|(g, _)| g)
}
