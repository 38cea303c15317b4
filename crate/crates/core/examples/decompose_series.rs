//! Block-mean trend decomposition of a synthetic pollutant series.
//!
//!     cargo run --example decompose_series [seed] [out.csv]

use std::sync::Arc;

use casecross::rng::stream;
use casecross::series::{decompose, iqr_standardize, StudyCalendar};
use casecross::simulate::{generate_synthetic_series, SyntheticParams};

fn variance(xs: &[f64]) -> f64 {
    let m = xs.iter().sum::<f64>() / xs.len() as f64;
    xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / xs.len() as f64
}

fn main() -> casecross::Result<()> {
    let mut args = std::env::args().skip(1);
    let seed: u64 = args.next().map_or(1, |s| s.parse().expect("seed must be an integer"));
    let out = args.next();

    let calendar = Arc::new(StudyCalendar::edmonton_decade());
    let raw = generate_synthetic_series(&SyntheticParams::default(), calendar, &mut stream(seed, &[]));
    let (series, iqr) = iqr_standardize(&raw)?;
    let d = decompose(&series)?;

    let daily: Vec<f64> = d.daily.iter().flatten().copied().collect();
    println!("{} days, IQR {iqr:.3}", series.len());
    println!("component variances (IQR units):");
    println!("  yearly  {:.4}", variance(&d.yearly));
    println!("  monthly {:.4}", variance(&d.monthly));
    println!("  weekly  {:.4}", variance(&d.weekly));
    println!("  daily   {:.4}", variance(&daily));

    let worst = (0..series.len())
        .filter_map(|i| Some((series.values()[i]? - d.reconstruct(i)?).abs()))
        .fold(0.0, f64::max);
    println!("max reconstruction error {worst:.2e}");

    if let Some(path) = out {
        d.write_csv(&series, std::fs::File::create(&path)?)?;
        println!("wrote {path}");
    }
    Ok(())
}
