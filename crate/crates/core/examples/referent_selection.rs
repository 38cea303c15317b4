//! Time-stratified referents and the stacked case-crossover table.
//!
//!     cargo run --example referent_selection

use chrono::NaiveDate;

use casecross::design::{build_table, referent_days, EventList};
use casecross::rng::stream;
use casecross::series::{decompose, iqr_standardize, DailySeries};
use casecross::simulate::{generate_synthetic_series, SyntheticParams};

fn date(s: &str) -> NaiveDate {
    s.parse().unwrap()
}

fn main() -> casecross::Result<()> {
    for d in ["2005-06-15", "2001-02-14", "2004-02-29"] {
        let refs: Vec<String> = referent_days(date(d)).iter().map(|r| r.to_string()).collect();
        println!("{d} -> {}", refs.join(", "));
    }

    let calendar = std::sync::Arc::new(casecross::series::StudyCalendar::edmonton_decade());
    let raw = generate_synthetic_series(&SyntheticParams::default(), calendar.clone(), &mut stream(3, &[]));
    // Knock out one referent day to show how missing exposure is handled.
    let mut values = raw.values().to_vec();
    values[calendar.index_of(date("2005-06-22")).unwrap()] = None;
    let (series, _) = iqr_standardize(&DailySeries::new(calendar, values))?;
    let decomp = decompose(&series)?;

    let events = EventList::from_dates(
        ["2005-06-15", "2005-06-17", "2000-04-02", "2010-03-31"].map(date),
        2,
    )?;
    let table = build_table(&events, &series, &decomp, &[])?;
    println!("\nlag {}: {} strata, {} rows", events.lag(), table.n_strata(), table.rows.len());
    for r in &table.rows {
        println!(
            "  stratum {} {} y={} exposure {:+.3} daily {:+.3}",
            r.stratum,
            r.date,
            r.y(),
            r.exposure,
            r.daily
        );
    }
    println!("{:?}", table.report);
    Ok(())
}
