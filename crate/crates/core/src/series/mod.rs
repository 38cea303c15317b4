//! Daily exposure series: ingestion, IQR scaling and the calendar-nested
//! yearly / monthly / weekly / daily trend decomposition.

mod calendar;
mod decompose;

use std::collections::HashMap;
use std::io::Read;
use std::sync::Arc;

use chrono::NaiveDate;

pub use calendar::{Block, BlockKind, StudyCalendar};
pub use decompose::{decompose, TrendDecomposition};

use crate::error::{Error, Result};
use crate::numeric::quantile_sorted;

/// One value slot per study day; `None` marks a missing measurement.
#[derive(Debug, Clone, PartialEq)]
pub struct DailySeries {
    calendar: Arc<StudyCalendar>,
    values: Vec<Option<f64>>,
}

impl DailySeries {
    /// Builds a series from one slot per calendar day.
    ///
    /// Panics if `values.len()` differs from the calendar length.
    pub fn new(calendar: Arc<StudyCalendar>, values: Vec<Option<f64>>) -> Self {
        assert_eq!(
            values.len(),
            calendar.len(),
            "one value slot per study day"
        );
        DailySeries { calendar, values }
    }

    pub fn complete(calendar: Arc<StudyCalendar>, values: Vec<f64>) -> Self {
        Self::new(calendar, values.into_iter().map(Some).collect())
    }

    pub fn calendar(&self) -> &StudyCalendar {
        &self.calendar
    }

    pub fn shared_calendar(&self) -> &Arc<StudyCalendar> {
        &self.calendar
    }

    pub fn values(&self) -> &[Option<f64>] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, date: NaiveDate) -> Option<f64> {
        self.calendar.index_of(date).and_then(|i| self.values[i])
    }

    pub fn observed(&self) -> impl Iterator<Item = f64> + '_ {
        self.values.iter().flatten().copied()
    }

    pub fn missing_count(&self) -> usize {
        self.values.iter().filter(|v| v.is_none()).count()
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> DailySeries {
        DailySeries {
            calendar: Arc::clone(&self.calendar),
            values: self.values.iter().map(|v| v.map(&f)).collect(),
        }
    }
}

/// Parsed daily CSV: a `date` column plus any number of value columns.
#[derive(Debug, Clone)]
pub struct DailyTable {
    pub dates: Vec<NaiveDate>,
    pub columns: Vec<(String, Vec<Option<f64>>)>,
}

impl DailyTable {
    /// Reads a CSV with a header row and a `date` column (YYYY-MM-DD).
    /// Empty cells become `None`; every non-date column is parsed as a number.
    pub fn read<R: Read>(source: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(source);
        let headers = rdr.headers()?.clone();
        let date_col = headers
            .iter()
            .position(|h| h == "date")
            .ok_or_else(|| Error::MissingColumn("date".into()))?;
        let mut columns: Vec<(String, Vec<Option<f64>>)> = headers
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != date_col)
            .map(|(_, h)| (h.to_string(), Vec::new()))
            .collect();
        let mut dates = Vec::new();
        let mut seen = HashMap::new();
        for record in rdr.records() {
            let record = record?;
            let line = record.position().map_or(0, |p| p.line() as usize);
            let text = record.get(date_col).unwrap_or_default();
            let date = NaiveDate::parse_from_str(text, "%Y-%m-%d").map_err(|_| Error::Parse {
                line,
                what: "date",
                text: text.to_string(),
            })?;
            if seen.insert(date, line).is_some() {
                return Err(Error::DuplicateDate(date));
            }
            dates.push(date);
            let mut k = 0;
            for (i, cell) in record.iter().enumerate() {
                if i == date_col {
                    continue;
                }
                let value = if cell.is_empty() || cell.eq_ignore_ascii_case("na") {
                    None
                } else {
                    Some(cell.parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(
                        || Error::Parse {
                            line,
                            what: "value",
                            text: cell.to_string(),
                        },
                    )?)
                };
                columns[k].1.push(value);
                k += 1;
            }
        }
        Ok(DailyTable { dates, columns })
    }

    pub fn column_names(&self) -> impl Iterator<Item = &str> {
        self.columns.iter().map(|(n, _)| n.as_str())
    }

    /// Smallest calendar covering every date in the file.
    pub fn spanning_calendar(&self) -> Result<StudyCalendar> {
        let start = self.dates.iter().min().ok_or(Error::EmptyTable)?;
        let end = self.dates.iter().max().ok_or(Error::EmptyTable)?;
        StudyCalendar::new(*start, *end)
    }

    /// Places one column onto `calendar`; dates absent from the file are missing.
    pub fn series(&self, column: &str, calendar: &Arc<StudyCalendar>) -> Result<DailySeries> {
        let (_, raw) = self
            .columns
            .iter()
            .find(|(n, _)| n == column)
            .ok_or_else(|| Error::MissingColumn(column.to_string()))?;
        let mut values = vec![None; calendar.len()];
        for (date, v) in self.dates.iter().zip(raw) {
            let i = calendar.index_of(*date).ok_or(Error::DateOutOfPeriod {
                date: *date,
                start: calendar.start(),
                end: calendar.end(),
            })?;
            values[i] = *v;
        }
        Ok(DailySeries::new(Arc::clone(calendar), values))
    }
}

/// Loads one value column of a daily CSV onto a fixed study calendar.
pub fn load_series<R: Read>(
    source: R,
    column: &str,
    calendar: &Arc<StudyCalendar>,
) -> Result<DailySeries> {
    DailyTable::read(source)?.series(column, calendar)
}

/// Divides every observed value by the interquartile range of the observed
/// values and returns the scaled series together with that range.
pub fn iqr_standardize(series: &DailySeries) -> Result<(DailySeries, f64)> {
    let iqr = interquartile_range(series)?;
    Ok((series.map(|v| v / iqr), iqr))
}

pub fn interquartile_range(series: &DailySeries) -> Result<f64> {
    let mut obs: Vec<f64> = series.observed().collect();
    obs.sort_by(|a, b| a.total_cmp(b));
    let distinct = {
        let mut d = obs.clone();
        d.dedup();
        d.len()
    };
    match distinct {
        0 => return Err(Error::TooFewValues(0)),
        1 => return Err(Error::DegenerateScale(0.0)),
        _ => {}
    }
    let iqr = quantile_sorted(&obs, 0.75) - quantile_sorted(&obs, 0.25);
    if iqr <= 0.0 || !iqr.is_finite() {
        return Err(Error::DegenerateScale(iqr));
    }
    Ok(iqr)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn date(y: i32, m: u32, d: u32) -> NaiveDate {
        NaiveDate::from_ymd_opt(y, m, d).unwrap()
    }

    fn short_calendar(n: i64) -> Arc<StudyCalendar> {
        let start = date(2001, 1, 1);
        Arc::new(StudyCalendar::new(start, start + chrono::Duration::days(n - 1)).unwrap())
    }

    #[test]
    fn full_decade_loads_without_missing() {
        let cal = Arc::new(StudyCalendar::edmonton_decade());
        let mut csv = String::from("date,o3\n");
        for (i, d) in cal.dates().enumerate() {
            csv.push_str(&format!("{d},{}\n", i % 17));
        }
        let s = load_series(csv.as_bytes(), "o3", &cal).unwrap();
        assert_eq!(s.len(), 3652);
        assert_eq!(s.missing_count(), 0);
    }

    #[test]
    fn absent_date_becomes_missing() {
        let cal = Arc::new(StudyCalendar::new(date(2005, 6, 10), date(2005, 6, 20)).unwrap());
        let mut csv = String::from("date,o3\n");
        for d in cal.dates().filter(|d| *d != date(2005, 6, 15)) {
            csv.push_str(&format!("{d},1.5\n"));
        }
        let s = load_series(csv.as_bytes(), "o3", &cal).unwrap();
        assert_eq!(s.missing_count(), 1);
        assert_eq!(s.get(date(2005, 6, 15)), None);
        assert_eq!(s.get(date(2005, 6, 16)), Some(1.5));
    }

    #[test]
    fn empty_cell_is_missing() {
        let cal = short_calendar(2);
        let s = load_series("date,x\n2001-01-01,\n2001-01-02,3\n".as_bytes(), "x", &cal).unwrap();
        assert_eq!(s.values(), &[None, Some(3.0)]);
    }

    #[test]
    fn ingestion_errors() {
        let cal = short_calendar(3);
        let dup = "date,x\n2001-01-01,1\n2001-01-01,2\n";
        assert!(matches!(
            load_series(dup.as_bytes(), "x", &cal),
            Err(Error::DuplicateDate(d)) if d == date(2001, 1, 1)
        ));
        let outside = "date,x\n2001-02-01,1\n";
        assert!(matches!(
            load_series(outside.as_bytes(), "x", &cal),
            Err(Error::DateOutOfPeriod { .. })
        ));
        let bad = "date,x\n2001-01-01,abc\n";
        assert!(matches!(
            load_series(bad.as_bytes(), "x", &cal),
            Err(Error::Parse { what: "value", .. })
        ));
        assert!(matches!(
            load_series("date,x\n".as_bytes(), "y", &cal),
            Err(Error::MissingColumn(_))
        ));
    }

    #[test]
    fn iqr_of_one_to_eight() {
        let cal = short_calendar(8);
        let s = DailySeries::complete(cal, (1..=8).map(f64::from).collect());
        let (scaled, iqr) = iqr_standardize(&s).unwrap();
        assert!((iqr - 3.5).abs() < 1e-15);
        assert!((scaled.values()[6].unwrap() - 2.0).abs() < 1e-15);
        assert!((interquartile_range(&scaled).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn constant_series_has_degenerate_scale() {
        let s = DailySeries::complete(short_calendar(3), vec![5.0; 3]);
        assert!(matches!(iqr_standardize(&s), Err(Error::DegenerateScale(_))));
        // Two distinct values but a zero IQR.
        let s = DailySeries::complete(short_calendar(5), vec![5.0, 5.0, 5.0, 5.0, 9.0]);
        assert!(matches!(iqr_standardize(&s), Err(Error::DegenerateScale(_))));
    }

    #[test]
    fn missing_values_are_ignored_by_iqr() {
        let cal = short_calendar(10);
        let mut v: Vec<Option<f64>> = (1..=8).map(|x| Some(f64::from(x))).collect();
        v.insert(3, None);
        v.push(None);
        let s = DailySeries::new(cal, v);
        assert!((interquartile_range(&s).unwrap() - 3.5).abs() < 1e-15);
    }
}
