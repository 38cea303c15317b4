//! A cohorts x seasons x exposures x lags grid on synthetic admissions.
//!
//!     cargo run --release --example empirical_grid [out_dir]

use std::sync::Arc;

use rand::Rng;

use casecross::design::Event;
use casecross::grid::{estimate_correlation, run_grid, Cohort, Exposure, GridSpec};
use casecross::rng::stream;
use casecross::series::StudyCalendar;
use casecross::simulate::{generate_synthetic_series, sample_event_days, SyntheticParams};

fn main() -> casecross::Result<()> {
    let out = std::env::args().nth(1);
    let calendar = Arc::new(StudyCalendar::edmonton_decade());
    let exposures = ["co", "no", "no2", "o3", "pm25"]
        .iter()
        .enumerate()
        .map(|(k, name)| {
            let raw = generate_synthetic_series(&SyntheticParams::default(), calendar.clone(), &mut stream(40, &[k as u64]));
            Exposure::prepare(*name, &raw)
        })
        .collect::<casecross::Result<Vec<_>>>()?;

    // Admissions driven by the daily CO residual.
    let mut rng = stream(41, &[]);
    let days = sample_event_days(&exposures[0].decomp, 0.15, 0.0, 4000, &mut rng)?;
    let events: Vec<Event> = days
        .into_iter()
        .map(|d| {
            let mut e = Event::on(d);
            e.attributes.insert("sex".into(), if rng.random_bool(0.5) { "F" } else { "M" }.into());
            e.attributes.insert("age".into(), rng.random_range(35..=95).to_string());
            e
        })
        .collect();

    let cohorts = [("all", "*"), ("female", "sex == F"), ("male", "sex == M"), ("over65", "age >= 65")]
        .iter()
        .map(|(n, p)| Ok(Cohort::new(*n, p.parse()?)))
        .collect::<casecross::Result<Vec<_>>>()?;
    let spec = GridSpec::new(cohorts, exposures);
    println!(
        "{} cells per model, Bonferroni threshold {:.3e}",
        spec.n_cells(),
        spec.alpha_bonferroni()
    );

    let results = run_grid(&spec, &events)?;
    for r in &results {
        let t = r.summary();
        println!(
            "{}: fitted {}, OR>1 {}, OR<1 {}, p<=0.05 {}, p<=0.01 {}, Bonferroni {}",
            r.model.label(),
            t.fitted,
            t.positive,
            t.negative,
            t.p05,
            t.p01,
            t.bonferroni
        );
        for row in r.rows.iter().filter(|row| row.flag_bonferroni) {
            let w = row.wald.unwrap();
            println!(
                "    {} {} {} lag {}: N {} OR {:.3} ({:.3}, {:.3})",
                row.cohort, row.season, row.pollutant, row.lag, row.n, w.odds_ratio, w.ci_low, w.ci_high
            );
        }
        if let Some(dir) = &out {
            std::fs::create_dir_all(dir)?;
            let path = std::path::Path::new(dir).join(r.file_name("example"));
            r.write_csv(std::fs::File::create(&path)?)?;
            println!("    wrote {}", path.display());
        }
    }
    if let Some(c) = estimate_correlation(&results[0], &results[1]) {
        println!("model1 / model2 estimate correlation {c:.3}");
    }
    Ok(())
}
