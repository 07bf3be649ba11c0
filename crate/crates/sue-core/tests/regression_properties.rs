//! Behavioral invariants of the regression and fitting layer on synthetic
//! data: nesting, invariances, determinism, and error reporting.

use sue_core::optimize::{fit, OptimizerSettings, StartStrategy};
use sue_core::regression::{
    log_likelihood, log_likelihood_gradient, CoefVector, CountDataset, Family,
};
use sue_core::NumericError;

/// Small deterministic dataset: two covariates, counts generated once from a
/// Poisson regression and fixed here.
fn dataset() -> CountDataset {
    let x: Vec<f64> = vec![
        -1.2, 0.3, -0.8, -0.5, -0.5, 0.9, -0.3, 0.0, 0.0, -0.7, 0.1, 0.4, 0.4, -0.2, 0.7, 0.8,
        0.9, 0.5, 1.3, -0.9, -1.0, 0.6, 0.2, -0.4, 0.5, 0.2, 0.8, -0.1, 1.1, 0.0, -0.6, 0.3, -0.2,
        0.5, 0.3, -0.8, 0.6, 0.1, 1.0, 0.9, -0.4, -0.3, 0.0, 0.7, 0.1, -0.5, 0.2, 0.6, 0.4, 0.2,
        -1.1, -0.2, 0.8, 0.4, 1.2, 0.5, -0.7, 0.9, 0.3, -0.6,
    ];
    let counts: Vec<u64> = vec![
        1, 0, 2, 1, 2, 1, 3, 2, 4, 6, 0, 2, 3, 3, 5, 1, 2, 2, 3, 4, 1, 1, 0, 2, 3, 2, 1, 4, 2, 5,
    ];
    CountDataset::new(counts, x, vec!["x1".into(), "x2".into()], 1.0).unwrap()
}

fn reorder(ds: &CountDataset, perm: &[usize]) -> CountDataset {
    let counts: Vec<u64> = perm.iter().map(|&j| ds.counts()[j]).collect();
    let mut x = Vec::new();
    for &j in perm {
        x.extend_from_slice(ds.row(j));
    }
    CountDataset::new(counts, x, ds.covariate_names().to_vec(), ds.exposure()).unwrap()
}

#[test]
fn sue_and_gamma_count_nest_poisson() {
    let ds = dataset();
    let beta = CoefVector::new(vec![0.4, -0.3, 0.2]);
    let mut with_alpha = beta.values.clone();
    with_alpha.push(0.0);
    let with_alpha = CoefVector::new(with_alpha);
    let pois = log_likelihood(&ds, &Family::Poisson, &beta);
    for family in [Family::Sue { gamma_event: 1 }, Family::Sue { gamma_event: 4 }, Family::GammaCount] {
        let ll = log_likelihood(&ds, &family, &with_alpha);
        assert!((ll - pois).abs() < 1e-9, "{family:?}: {ll} vs {pois}");
    }
}

#[test]
fn fitted_sue_dominates_fitted_poisson() {
    let ds = dataset();
    let settings = OptimizerSettings::default();
    let pois = fit(&ds, &Family::Poisson, &settings, StartStrategy::PoissonWarmStart).unwrap();
    for gamma_event in [1u64, 2, 3] {
        let sue = fit(&ds, &Family::Sue { gamma_event }, &settings, StartStrategy::PoissonWarmStart)
            .unwrap();
        assert!(
            sue.log_likelihood >= pois.log_likelihood - 1e-7,
            "γ={gamma_event}: {} < {}",
            sue.log_likelihood,
            pois.log_likelihood
        );
    }
}

#[test]
fn likelihood_is_row_order_invariant() {
    let ds = dataset();
    let n = ds.n_obs();
    // A fixed shuffle.
    let perm: Vec<usize> = (0..n).map(|i| (i * 17 + 5) % n).collect();
    let shuffled = reorder(&ds, &perm);
    for family in [Family::Poisson, Family::Sue { gamma_event: 2 }] {
        let k = if family.has_alpha() { 4 } else { 3 };
        let coefs = CoefVector::new(vec![0.3, -0.2, 0.1, -0.4][..k].to_vec());
        let a = log_likelihood(&ds, &family, &coefs);
        let b = log_likelihood(&shuffled, &family, &coefs);
        assert!((a - b).abs() < 1e-9 * a.abs().max(1.0), "{a} vs {b}");
    }
}

#[test]
fn fit_is_row_order_invariant() {
    let ds = dataset();
    let n = ds.n_obs();
    let perm: Vec<usize> = (0..n).rev().collect();
    let shuffled = reorder(&ds, &perm);
    let settings = OptimizerSettings::default();
    let a = fit(&ds, &Family::Sue { gamma_event: 1 }, &settings, StartStrategy::PoissonWarmStart)
        .unwrap();
    let b = fit(&shuffled, &Family::Sue { gamma_event: 1 }, &settings, StartStrategy::PoissonWarmStart)
        .unwrap();
    assert!((a.log_likelihood - b.log_likelihood).abs() < 1e-7);
    for (x, y) in a.coefs.values.iter().zip(&b.coefs.values) {
        assert!((x - y).abs() < 1e-5, "{x} vs {y}");
    }
}

#[test]
fn zero_covariate_column_is_reported() {
    let counts: Vec<u64> = vec![1, 2, 0, 3, 1, 2];
    let mut x = Vec::new();
    for (i, _) in counts.iter().enumerate() {
        x.push(i as f64 * 0.3 - 1.0);
        x.push(0.0);
    }
    let ds = CountDataset::new(counts, x, vec!["x".into(), "empty".into()], 1.0).unwrap();
    let err = fit(&ds, &Family::Poisson, &OptimizerSettings::default(), StartStrategy::Zeros)
        .unwrap_err();
    match err {
        NumericError::RankDeficient { columns } => assert_eq!(columns, vec!["empty".to_string()]),
        other => panic!("expected rank error, got {other:?}"),
    }
}

#[test]
fn gradient_matches_directional_secant() {
    let ds = dataset();
    let family = Family::Sue { gamma_event: 2 };
    let coefs = CoefVector::new(vec![0.3, -0.1, 0.2, -0.3]);
    let g = log_likelihood_gradient(&ds, &family, &coefs).unwrap();
    // Directional derivative along a fixed non-axis direction.
    let d = [0.5f64, -0.25, 0.8, 0.35];
    let h = 1e-6;
    let shift = |sign: f64| {
        let v: Vec<f64> =
            coefs.values.iter().zip(&d).map(|(c, di)| c + sign * h * di).collect();
        log_likelihood(&ds, &family, &CoefVector::new(v))
    };
    let secant = (shift(1.0) - shift(-1.0)) / (2.0 * h);
    let gd: f64 = g.iter().zip(&d).map(|(a, b)| a * b).sum();
    assert!((secant - gd).abs() < 1e-5 * gd.abs().max(1.0), "{secant} vs {gd}");
}

#[test]
fn covariate_rescaling_rescales_slope() {
    let ds = dataset();
    let c = 10.0;
    let mut x = Vec::new();
    for j in 0..ds.n_obs() {
        x.push(ds.row(j)[0] * c);
        x.push(ds.row(j)[1]);
    }
    let scaled =
        CountDataset::new(ds.counts().to_vec(), x, ds.covariate_names().to_vec(), 1.0).unwrap();
    let settings = OptimizerSettings::default();
    let a = fit(&ds, &Family::Poisson, &settings, StartStrategy::PoissonWarmStart).unwrap();
    let b = fit(&scaled, &Family::Poisson, &settings, StartStrategy::PoissonWarmStart).unwrap();
    assert!((a.log_likelihood - b.log_likelihood).abs() < 1e-6);
    assert!((a.coefs.values[1] - c * b.coefs.values[1]).abs() < 1e-6);
    assert!((a.coefs.values[0] - b.coefs.values[0]).abs() < 1e-6);
    // SEs scale the same way as the coefficients.
    let (sa, sb) = (a.standard_errors.unwrap(), b.standard_errors.unwrap());
    assert!((sa[1] - c * sb[1]).abs() < 1e-5);
}

#[test]
fn repeated_fits_are_bitwise_identical() {
    let ds = dataset();
    let settings = OptimizerSettings::default();
    let family = Family::Sue { gamma_event: 2 };
    let a = fit(&ds, &family, &settings, StartStrategy::PoissonWarmStart).unwrap();
    let b = fit(&ds, &family, &settings, StartStrategy::PoissonWarmStart).unwrap();
    assert_eq!(a.coefs.values, b.coefs.values);
    assert_eq!(a.log_likelihood, b.log_likelihood);
    assert_eq!(a.standard_errors.unwrap(), b.standard_errors.unwrap());
}

#[test]
fn aic_orders_nested_models_sensibly() {
    let ds = dataset();
    let settings = OptimizerSettings::default();
    let pois = fit(&ds, &Family::Poisson, &settings, StartStrategy::PoissonWarmStart).unwrap();
    let sue = fit(&ds, &Family::Sue { gamma_event: 1 }, &settings, StartStrategy::PoissonWarmStart)
        .unwrap();
    // AIC definition check: k differs by exactly one parameter.
    let k_pois = pois.coefs.values.len() as f64;
    let k_sue = sue.coefs.values.len() as f64;
    assert_eq!(k_sue, k_pois + 1.0);
    assert!((pois.aic - (2.0 * k_pois - 2.0 * pois.log_likelihood)).abs() < 1e-10);
    assert!((sue.aic - (2.0 * k_sue - 2.0 * sue.log_likelihood)).abs() < 1e-10);
}
