//! Power of each strategy as the transient effect grows.
//!
//!     cargo run --release --example power_curve [n_reps] [B]

use casecross::calibrate::NullScheme;
use casecross::rng::stream;
use casecross::series::{decompose, iqr_standardize};
use casecross::simulate::{generate_synthetic_series, run_scenario, ScenarioSpec, Strategy, SyntheticParams};

fn main() -> casecross::Result<()> {
    let mut args = std::env::args().skip(1).map(|s| s.parse::<usize>().expect("integer"));
    let n_reps = args.next().unwrap_or(100);
    let b = args.next().unwrap_or(50);

    let calendar = std::sync::Arc::new(casecross::series::StudyCalendar::edmonton_decade());
    let raw = generate_synthetic_series(&SyntheticParams::default(), calendar, &mut stream(2024, &[1]));
    let (series, _) = iqr_standardize(&raw)?;
    let decomp = decompose(&series)?;

    let strategies = [Strategy::Model1, Strategy::Model2, Strategy::Model1Calibrated];
    print!("{:>6}", "beta");
    for s in strategies {
        print!(" {:>11}", s.name());
    }
    println!();
    for beta in [0.0, 0.1, 0.2, 0.3, 0.4] {
        let spec = ScenarioSpec {
            beta,
            gamma: 0.0,
            n_events: 2000,
            n_reps,
            strategies: strategies.to_vec(),
            alpha0: 0.05,
            master_seed: 7,
            calibration_reps: b,
            null_scheme: NullScheme::WithinTrendCell,
        };
        let summary = run_scenario(&spec, &series, &decomp)?;
        print!("{beta:>6}");
        for s in strategies {
            print!(" {:>11.3}", summary.outcome(s).unwrap().rejection_rate(0.05));
        }
        println!();
    }
    Ok(())
}
