mod common;

use proptest::prelude::*;

use casecross::design::{build_table, EventList};
use casecross::glm::{
    fit_design, fit_logistic, log_likelihood_at, score_at, wald_inference, Column, Design,
    FitOptions, ModelSpec,
};
use casecross::rng::stream;
use casecross::simulate::sample_event_days;
use common::prepared;

fn two_by_two(a: u32, b: u32, c: u32, d: u32) -> Design {
    let mut rows = Vec::new();
    let mut y = Vec::new();
    for (x, cases, controls) in [(1.0, a, b), (0.0, c, d)] {
        for k in 0..cases + controls {
            rows.push(vec![x]);
            y.push(k < cases);
        }
    }
    Design::from_binary(vec!["x".into()], rows, &y)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn two_by_two_tables_match_the_closed_form(a in 1u32..300, b in 1u32..300, c in 1u32..300, d in 1u32..300) {
        let fit = fit_design(&two_by_two(a, b, c, d), &FitOptions::default()).unwrap();
        let (a, b, c, d) = (a as f64, b as f64, c as f64, d as f64);
        prop_assert!(fit.converged);
        prop_assert!((fit.coefficient("x").unwrap() - (a * d / (b * c)).ln()).abs() < 1e-8);
        let se = (1.0 / a + 1.0 / b + 1.0 / c + 1.0 / d).sqrt();
        prop_assert!((fit.standard_error("x").unwrap() - se).abs() < 1e-8);
    }

    #[test]
    fn collapsed_and_binary_designs_agree(a in 1u32..100, b in 1u32..100, c in 1u32..100, d in 1u32..100) {
        let binary = fit_design(&two_by_two(a, b, c, d), &FitOptions::default()).unwrap();
        let (a, b, c, d) = (a as f64, b as f64, c as f64, d as f64);
        let grouped = Design::new(vec!["x".into()], vec![vec![1.0], vec![0.0]], vec![a, c], vec![a + b, c + d]);
        let grouped = fit_design(&grouped, &FitOptions::default()).unwrap();
        prop_assert!((binary.coefficient("x").unwrap() - grouped.coefficient("x").unwrap()).abs() < 1e-9);
        prop_assert!((binary.log_likelihood - grouped.log_likelihood).abs() < 1e-8);
    }
}

fn random_table(seed: u64) -> casecross::design::CaseCrossoverTable {
    use rand::Rng;
    let (series, decomp) = prepared(700 + seed);
    let mut rng = stream(seed, &[]);
    let days = sample_event_days(
        &decomp,
        rng.random_range(-0.3..0.3),
        rng.random_range(-0.3..0.3),
        rng.random_range(100..2000),
        &mut rng,
    )
    .unwrap();
    build_table(&EventList::from_dates(days, rng.random_range(0..=4)).unwrap(), &series, &decomp, &[]).unwrap()
}

#[test]
fn model_two_and_three_are_reparameterizations() {
    for seed in 0..20 {
        let t = random_table(seed);
        let m2 = fit_logistic(&t, &ModelSpec::model2()).unwrap();
        let m3 = fit_logistic(&t, &ModelSpec::model3()).unwrap();
        assert!((m2.coefficient("exposure").unwrap() - m3.coefficient("daily").unwrap()).abs() < 1e-6);
        assert!((m2.standard_error("exposure").unwrap() - m3.standard_error("daily").unwrap()).abs() < 1e-6);
        assert!((m2.log_likelihood - m3.log_likelihood).abs() < 1e-6);
    }
}

#[test]
fn score_vanishes_at_the_fit_and_matches_finite_differences() {
    let h = 1e-6;
    for seed in 0..5 {
        let t = random_table(seed);
        let design = Design::from_table(&t, &ModelSpec::model2()).unwrap();
        let fit = fit_design(&design, &FitOptions::default()).unwrap();
        assert!(fit.converged && fit.score_norm < 1e-8);
        let score = score_at(&design, &fit.coefficients);
        for j in 0..fit.coefficients.len() {
            let mut up = fit.coefficients.clone();
            let mut down = fit.coefficients.clone();
            up[j] += h;
            down[j] -= h;
            let fd = (log_likelihood_at(&design, &up) - log_likelihood_at(&design, &down)) / (2.0 * h);
            assert!((fd - score[j]).abs() < 1e-4, "coordinate {j}: {fd} vs {}", score[j]);
        }
    }
}

#[test]
fn wald_summaries_are_internally_consistent() {
    let t = random_table(3);
    let fit = fit_logistic(&t, &ModelSpec::model2()).unwrap();
    for (name, w) in fit.summaries() {
        let direct = wald_inference(&fit, name).unwrap();
        assert_eq!(w, direct);
        assert!((w.odds_ratio - w.estimate.exp()).abs() < 1e-12);
        assert!((w.ci_low - (w.estimate - 1.959964 * w.se).exp()).abs() < 1e-12);
        assert!((w.ci_high - (w.estimate + 1.959964 * w.se).exp()).abs() < 1e-12);
    }
}

#[test]
fn custom_model_with_a_covariate() {
    let (series, decomp) = prepared(9);
    let humidity = series.map(|x| (x * 1.7).sin());
    let days = sample_event_days(&decomp, 0.2, 0.0, 800, &mut stream(9, &[])).unwrap();
    let table = build_table(
        &EventList::from_dates(days, 0).unwrap(),
        &series,
        &decomp,
        &[("humidity".to_string(), humidity)],
    )
    .unwrap();
    let spec = ModelSpec::custom(vec![Column::Daily, Column::Weekly]).with_covariates(["humidity"]);
    let fit = fit_logistic(&table, &spec).unwrap();
    assert_eq!(fit.names, ["intercept", "daily", "weekly", "humidity"]);
    assert!(fit.converged);
}
