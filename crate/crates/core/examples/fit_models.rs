//! Models 1-3 on one trend-confounded sample, plus the 2x2 closed form.
//!
//!     cargo run --example fit_models [beta] [gamma]

use casecross::design::{build_table, EventList};
use casecross::glm::{fit_design, fit_logistic, wald_inference, Design, FitOptions, ModelSpec};
use casecross::rng::stream;
use casecross::series::{decompose, iqr_standardize};
use casecross::simulate::{generate_synthetic_series, sample_event_days, SyntheticParams};

fn main() -> casecross::Result<()> {
    let mut args = std::env::args().skip(1).map(|s| s.parse::<f64>().expect("number"));
    let beta = args.next().unwrap_or(0.0);
    let gamma = args.next().unwrap_or(0.2);

    // 2x2 table: 30/20 exposed/unexposed cases, 40/60 controls.
    let mut rows = Vec::new();
    let mut y = Vec::new();
    for (x, cases, controls) in [(1.0, 30, 40), (0.0, 20, 60)] {
        for k in 0..cases + controls {
            rows.push(vec![x]);
            y.push(k < cases);
        }
    }
    let fit = fit_design(&Design::from_binary(vec!["x".into()], rows, &y), &FitOptions::default())?;
    let w = wald_inference(&fit, "x")?;
    println!(
        "2x2: beta {:.5} (closed form {:.5}), OR {:.3} ({:.3}, {:.3}), p {:.4}",
        w.estimate,
        (30.0f64 * 60.0 / (20.0 * 40.0)).ln(),
        w.odds_ratio,
        w.ci_low,
        w.ci_high,
        w.p
    );

    let calendar = std::sync::Arc::new(casecross::series::StudyCalendar::edmonton_decade());
    let raw = generate_synthetic_series(&SyntheticParams::default(), calendar, &mut stream(11, &[]));
    let (series, _) = iqr_standardize(&raw)?;
    let decomp = decompose(&series)?;
    let days = sample_event_days(&decomp, beta, gamma, 3000, &mut stream(12, &[]))?;
    let table = build_table(&EventList::from_dates(days, 0)?, &series, &decomp, &[])?;

    println!("\n3000 events, true beta {beta}, gamma {gamma}");
    for spec in [ModelSpec::model1(), ModelSpec::model2(), ModelSpec::model3()] {
        let fit = fit_logistic(&table, &spec)?;
        let w = wald_inference(&fit, &spec.focal())?;
        println!(
            "  {:7} {:9} {:+.4} (SE {:.4})  OR {:.3} ({:.3}, {:.3})  p {:.4}  loglik {:.4}",
            spec.label(),
            spec.focal(),
            w.estimate,
            w.se,
            w.odds_ratio,
            w.ci_low,
            w.ci_high,
            w.p,
            fit.log_likelihood
        );
    }
    Ok(())
}
