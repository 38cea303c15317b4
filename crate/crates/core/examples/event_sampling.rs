//! Exposure-weighted sampling of event days.
//!
//!     cargo run --example event_sampling

use std::sync::Arc;

use chrono::NaiveDate;

use casecross::rng::stream;
use casecross::series::{decompose, DailySeries, StudyCalendar};
use casecross::simulate::sample_event_days;

fn main() -> casecross::Result<()> {
    // Two days whose daily components differ by one unit: with beta = 1 the
    // second day should be drawn e/(1+e) of the time.
    let start = NaiveDate::from_ymd_opt(2001, 6, 4).unwrap();
    let calendar = Arc::new(StudyCalendar::new(start, start.succ_opt().unwrap())?);
    let decomp = decompose(&DailySeries::complete(calendar, vec![-0.5, 0.5]))?;
    let draws = sample_event_days(&decomp, 1.0, 0.0, 100_000, &mut stream(1, &[]))?;
    let second = draws.iter().filter(|d| **d != start).count() as f64 / draws.len() as f64;
    let e = std::f64::consts::E;
    println!("P(second day): empirical {second:.4}, exact {:.4}", e / (1.0 + e));

    // Extreme weights are refused rather than overflowing.
    match sample_event_days(&decomp, 2000.0, 0.0, 1, &mut stream(1, &[])) {
        Ok(_) => println!("unexpectedly sampled"),
        Err(e) => println!("beta = 2000: {e}"),
    }
    Ok(())
}
