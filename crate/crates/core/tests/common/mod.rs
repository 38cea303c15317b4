#![allow(dead_code)]

use std::sync::Arc;

use casecross::rng::stream;
use casecross::series::{decompose, iqr_standardize, DailySeries, StudyCalendar, TrendDecomposition};
use casecross::simulate::{generate_synthetic_series, SyntheticParams};

pub fn decade() -> Arc<StudyCalendar> {
    Arc::new(StudyCalendar::edmonton_decade())
}

pub fn synthetic(seed: u64) -> DailySeries {
    let mut rng = stream(seed, &[1]);
    generate_synthetic_series(&SyntheticParams::default(), decade(), &mut rng)
}

/// IQR-scaled synthetic series and its decomposition.
pub fn prepared(seed: u64) -> (DailySeries, TrendDecomposition) {
    let (s, _) = iqr_standardize(&synthetic(seed)).unwrap();
    let d = decompose(&s).unwrap();
    (s, d)
}

/// Direct-summation mean, independent of the library's compensated sums.
pub fn naive_mean(xs: impl IntoIterator<Item = f64>) -> f64 {
    let (s, n) = xs.into_iter().fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    s / n as f64
}
