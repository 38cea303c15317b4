mod common;

use std::sync::Arc;

use chrono::{Duration, NaiveDate};
use proptest::prelude::*;

use casecross::rng::stream;
use casecross::series::{
    decompose, interquartile_range, iqr_standardize, BlockKind, DailySeries, StudyCalendar,
    TrendDecomposition,
};
use casecross::simulate::{generate_synthetic_series, SyntheticParams};
use common::naive_mean;

/// A short study period starting anywhere in 2000-2008, with values in
/// [-50, 50] and roughly `missing` of the interior days unobserved.
fn series_strategy() -> impl Strategy<Value = DailySeries> {
    (0i64..3000, 60usize..500, 0.0f64..0.3, any::<u64>()).prop_map(|(offset, len, missing, seed)| {
        let start = NaiveDate::from_ymd_opt(2000, 1, 1).unwrap() + Duration::days(offset);
        let cal = Arc::new(StudyCalendar::new(start, start + Duration::days(len as i64 - 1)).unwrap());
        let mut rng = stream(seed, &[]);
        use rand::Rng;
        let values = (0..cal.len())
            .map(|i| {
                let edge = i < 7 || i + 7 >= cal.len();
                let x = rng.random_range(-50.0..50.0);
                if !edge && rng.random_bool(missing) {
                    None
                } else {
                    Some(x)
                }
            })
            .collect();
        DailySeries::new(cal, values)
    })
}

fn decomposable(s: &DailySeries) -> Option<TrendDecomposition> {
    decompose(s).ok()
}

fn nested_means(s: &DailySeries, d: &TrendDecomposition) -> f64 {
    let cal = s.calendar();
    let observed = |i: &usize| s.values()[*i].is_some();
    let mut worst = 0.0f64;
    for b in cal.blocks(BlockKind::Year) {
        let m = naive_mean(b.days.clone().filter(observed).map(|i| d.monthly[i] + d.weekly[i] + d.daily[i].unwrap()));
        worst = worst.max(m.abs());
    }
    for b in cal.blocks(BlockKind::Month) {
        let m = naive_mean(b.days.clone().filter(observed).map(|i| d.weekly[i] + d.daily[i].unwrap()));
        worst = worst.max(m.abs());
    }
    for b in cal.blocks(BlockKind::Week) {
        let m = naive_mean(b.days.clone().filter(observed).map(|i| d.daily[i].unwrap()));
        worst = worst.max(m.abs());
    }
    worst
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn reconstruction_is_exact(s in series_strategy()) {
        let Some(d) = decomposable(&s) else { return Ok(()) };
        for (i, x) in s.values().iter().enumerate() {
            match x {
                Some(x) => prop_assert!((x - d.reconstruct(i).unwrap()).abs() < 1e-10),
                None => prop_assert!(d.daily[i].is_none()),
            }
        }
    }

    #[test]
    fn nested_block_means_vanish(s in series_strategy()) {
        let Some(d) = decomposable(&s) else { return Ok(()) };
        prop_assert!(nested_means(&s, &d) < 1e-10);
    }

    #[test]
    fn components_are_constant_on_their_blocks(s in series_strategy()) {
        let Some(d) = decomposable(&s) else { return Ok(()) };
        let cal = s.calendar();
        for (kind, comp) in [(BlockKind::Year, &d.yearly), (BlockKind::Month, &d.monthly), (BlockKind::Week, &d.weekly)] {
            for b in cal.blocks(kind) {
                let first = comp[b.days.start];
                prop_assert!(b.days.clone().all(|i| comp[i] == first));
            }
        }
    }

    #[test]
    fn decomposition_is_linear(s in series_strategy(), a in -3.0f64..3.0, b in -3.0f64..3.0, seed in any::<u64>()) {
        let Some(d1) = decomposable(&s) else { return Ok(()) };
        // A second series with the same missingness.
        let mut rng = stream(seed, &[]);
        use rand::Rng;
        let s2 = DailySeries::new(
            s.shared_calendar().clone(),
            s.values().iter().map(|v| v.map(|_| rng.random_range(-50.0..50.0))).collect(),
        );
        let d2 = decompose(&s2).unwrap();
        let combo = DailySeries::new(
            s.shared_calendar().clone(),
            s.values().iter().zip(s2.values()).map(|(x, y)| Some(a * (*x)? + b * (*y)?)).collect(),
        );
        let dc = decompose(&combo).unwrap();
        for i in 0..s.len() {
            prop_assert!((dc.yearly[i] - (a * d1.yearly[i] + b * d2.yearly[i])).abs() < 1e-10);
            prop_assert!((dc.monthly[i] - (a * d1.monthly[i] + b * d2.monthly[i])).abs() < 1e-10);
            prop_assert!((dc.weekly[i] - (a * d1.weekly[i] + b * d2.weekly[i])).abs() < 1e-10);
            if let (Some(x), Some(y), Some(z)) = (dc.daily[i], d1.daily[i], d2.daily[i]) {
                prop_assert!((x - (a * y + b * z)).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn a_shift_moves_only_the_yearly_component(s in series_strategy(), c in -100.0f64..100.0) {
        let Some(d) = decomposable(&s) else { return Ok(()) };
        let ds = decompose(&s.map(|x| x + c)).unwrap();
        for i in 0..s.len() {
            prop_assert!((ds.yearly[i] - d.yearly[i] - c).abs() < 1e-10);
            prop_assert!((ds.monthly[i] - d.monthly[i]).abs() < 1e-10);
            prop_assert!((ds.weekly[i] - d.weekly[i]).abs() < 1e-10);
        }
    }

    #[test]
    fn standardization_is_idempotent(s in series_strategy()) {
        let (once, _) = iqr_standardize(&s).unwrap();
        let (twice, iqr2) = iqr_standardize(&once).unwrap();
        prop_assert!((interquartile_range(&once).unwrap() - 1.0).abs() < 1e-12);
        prop_assert!((iqr2 - 1.0).abs() < 1e-12);
        for (a, b) in once.values().iter().zip(twice.values()) {
            match (a, b) {
                (Some(a), Some(b)) => prop_assert!((a - b).abs() < 1e-12),
                (None, None) => {}
                _ => prop_assert!(false, "missingness changed"),
            }
        }
    }
}

#[test]
fn strong_weekly_level_dominates_the_daily_residual() {
    let var = |xs: &[f64]| {
        let m = naive_mean(xs.iter().copied());
        naive_mean(xs.iter().map(|x| (x - m).powi(2)))
    };
    let params = SyntheticParams {
        year_amp: 0.0,
        month_amp: 0.0,
        week_amp: 5.0,
        noise_sd: 0.2,
        week_ar: 0.7,
    };
    let cal = Arc::new(StudyCalendar::edmonton_decade());
    let s = generate_synthetic_series(&params, cal, &mut stream(8, &[]));
    let d = decompose(&s).unwrap();
    let daily: Vec<f64> = d.daily.iter().flatten().copied().collect();
    // Weeks straddling a month edge leave part of the level in the daily residual.
    assert!(var(&d.weekly) > 5.0 * var(&daily), "{} vs {}", var(&d.weekly), var(&daily));
}
