//! Fit reports: JSON (versioned, lossless), paper-style tables, and CSV.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use sue_core::optimize::FitResult;
use sue_core::regression::{
    family_label, fitted_moments, observed_frequencies, predicted_mixture_pmf, truncated_moments,
    CountDataset,
};

/// Formats a float with 17 significant digits for machine-readable output.
pub fn fmt_machine(x: f64) -> String {
    format!("{x:.16e}")
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Coefficient {
    pub name: String,
    pub estimate: f64,
    pub se: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ObsMoments {
    pub mean: f64,
    pub variance: f64,
}

/// Everything a fit produces, serializable losslessly to JSON.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct FitReport {
    pub schema: u32,
    pub model: String,
    pub n_obs: usize,
    pub converged: bool,
    pub iterations: usize,
    pub grad_norm: f64,
    pub coefficients: Vec<Coefficient>,
    /// Why standard errors are absent, when they are.
    pub se_error: Option<String>,
    pub log_likelihood: f64,
    pub aic: f64,
    pub sample_mean: f64,
    pub sample_variance: f64,
    /// Moments of the model-implied count distribution (covariate mixture),
    /// truncated at the largest observed count — the same summary the
    /// dispersion triples use.
    pub predicted_mean: f64,
    pub predicted_variance: f64,
    pub predicted_vm_ratio: f64,
    /// Observed and predicted relative frequencies for n = 0..n_max.
    pub observed_frequencies: Vec<f64>,
    pub predicted_frequencies: Vec<f64>,
    pub per_observation: Vec<ObsMoments>,
    pub elapsed_seconds: f64,
}

impl FitReport {
    pub fn build(
        dataset: &CountDataset,
        fit: &FitResult,
        n_max: u64,
        elapsed_seconds: f64,
    ) -> Result<Self, sue_core::NumericError> {
        let ses = fit.standard_errors.as_ref();
        let coefficients = fit
            .coef_names
            .iter()
            .enumerate()
            .map(|(i, name)| Coefficient {
                name: name.clone(),
                estimate: fit.coefs.values[i],
                se: ses.ok().map(|v| v[i]),
            })
            .collect();
        let n = dataset.n_obs() as f64;
        let sample_mean = dataset.mean_count();
        // Population convention (÷ n), matching the reference tables.
        let sample_variance = dataset
            .counts()
            .iter()
            .map(|&c| {
                let d = c as f64 - sample_mean;
                d * d
            })
            .sum::<f64>()
            / n;

        // Dispersion triple: mixture truncated at the largest observed count.
        let truncated = predicted_mixture_pmf(dataset, &fit.family, &fit.coefs, dataset.max_count())?;
        let (predicted_mean, predicted_variance, predicted_vm_ratio) = truncated_moments(&truncated);

        let predicted_frequencies =
            predicted_mixture_pmf(dataset, &fit.family, &fit.coefs, n_max)?;
        let per_observation = fitted_moments(dataset, &fit.family, &fit.coefs)?
            .into_iter()
            .map(|(mean, variance)| ObsMoments { mean, variance })
            .collect();

        Ok(FitReport {
            schema: 1,
            model: family_label(&fit.family),
            n_obs: dataset.n_obs(),
            converged: fit.converged,
            iterations: fit.iterations,
            grad_norm: fit.grad_norm,
            coefficients,
            se_error: ses.err().map(|e| e.to_string()),
            log_likelihood: fit.log_likelihood,
            aic: fit.aic,
            sample_mean,
            sample_variance,
            predicted_mean,
            predicted_variance,
            predicted_vm_ratio,
            observed_frequencies: observed_frequencies(dataset, n_max),
            predicted_frequencies,
            per_observation,
            elapsed_seconds,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialization cannot fail")
    }

    /// Paper-table layout: estimate (SE) rows at 4 decimals plus the summary
    /// block.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "Model: {}   ({} observations)", self.model, self.n_obs);
        let width = self
            .coefficients
            .iter()
            .map(|c| c.name.len())
            .max()
            .unwrap_or(8)
            .max(8);
        for c in &self.coefficients {
            match c.se {
                Some(se) => {
                    let _ = writeln!(out, "  {:<width$}  {:>10.4} ({:.4})", c.name, c.estimate, se);
                }
                None => {
                    let _ = writeln!(out, "  {:<width$}  {:>10.4}", c.name, c.estimate);
                }
            }
        }
        if let Some(err) = &self.se_error {
            let _ = writeln!(out, "  standard errors unavailable: {err}");
        }
        let _ = writeln!(out, "  {:<width$}  {:>10.4}", "Log likelihood", self.log_likelihood);
        let _ = writeln!(out, "  {:<width$}  {:>10.4}", "AIC", self.aic);
        let _ = writeln!(
            out,
            "  Sample mean/variance      {:.4} / {:.4}",
            self.sample_mean, self.sample_variance
        );
        let _ = writeln!(
            out,
            "  Predicted mean/var/ratio  {:.4} / {:.4} / {:.4}",
            self.predicted_mean, self.predicted_variance, self.predicted_vm_ratio
        );
        let _ = writeln!(out, "  Converged                 {}", self.converged);
        let _ = writeln!(out, "  Elapsed time (seconds)    {:.3}", self.elapsed_seconds);
        out
    }

    /// Coefficient table as machine CSV.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("name,estimate,se\n");
        for c in &self.coefficients {
            let se = c.se.map(fmt_machine).unwrap_or_default();
            let _ = writeln!(out, "{},{},{}", c.name, fmt_machine(c.estimate), se);
        }
        let _ = writeln!(out, "log_likelihood,{},", fmt_machine(self.log_likelihood));
        let _ = writeln!(out, "aic,{},", fmt_machine(self.aic));
        out
    }
}
