//! Time-stratified referent selection and the stacked case-crossover table.
//!
//! A hazard day is matched to every other day of the same calendar
//! year-month falling on the same weekday, which yields three or four
//! referents. Each event becomes one stratum: one hazard row (`y = 1`) plus
//! its referent rows (`y = 0`).

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::sync::Arc;

use chrono::{Datelike, Duration, NaiveDate};

use crate::error::{Error, Result};
use crate::glm::Column;
use crate::series::{DailySeries, StudyCalendar, TrendDecomposition};

/// All days in the same calendar month with the same weekday as `hazard`,
/// excluding `hazard` itself, in ascending order.
pub fn referent_days(hazard: NaiveDate) -> Vec<NaiveDate> {
    let first = (hazard.day() - 1) % 7 + 1;
    let mut out = Vec::with_capacity(4);
    let mut d = hazard.with_day(first).expect("day 1..=7 exists in every month");
    while d.month() == hazard.month() {
        if d != hazard {
            out.push(d);
        }
        d += Duration::days(7);
    }
    out
}

/// One recorded health event with free-form tags (sex, age band, subtype...).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Event {
    pub date: NaiveDate,
    pub attributes: BTreeMap<String, String>,
}

impl Event {
    pub fn on(date: NaiveDate) -> Self {
        Event {
            date,
            attributes: BTreeMap::new(),
        }
    }

    pub fn attr(&self, name: &str) -> Option<&str> {
        self.attributes.get(name).map(String::as_str)
    }
}

/// Events analysed at a fixed lag: the hazard day is `event_date - lag`.
#[derive(Debug, Clone)]
pub struct EventList {
    pub events: Vec<Event>,
    lag: u32,
}

impl EventList {
    pub const MAX_LAG: u32 = 4;

    pub fn new(events: Vec<Event>, lag: u32) -> Result<Self> {
        if lag > Self::MAX_LAG {
            return Err(Error::InvalidLag(lag as i64));
        }
        Ok(EventList { events, lag })
    }

    pub fn from_dates(dates: impl IntoIterator<Item = NaiveDate>, lag: u32) -> Result<Self> {
        Self::new(dates.into_iter().map(Event::on).collect(), lag)
    }

    pub fn lag(&self) -> u32 {
        self.lag
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn hazard_day(&self, event: &Event) -> NaiveDate {
        event.date - Duration::days(self.lag as i64)
    }
}

/// Reads an events CSV: a `date` column plus any attribute columns.
pub fn load_events<R: Read>(source: R) -> Result<Vec<Event>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(source);
    let headers = rdr.headers()?.clone();
    let date_col = headers
        .iter()
        .position(|h| h == "date")
        .ok_or_else(|| Error::MissingColumn("date".into()))?;
    let mut events = Vec::new();
    for record in rdr.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        let text = &record[date_col];
        let date = NaiveDate::parse_from_str(text, "%Y-%m-%d").map_err(|_| Error::Parse {
            line,
            what: "date",
            text: text.to_string(),
        })?;
        let attributes = headers
            .iter()
            .zip(record.iter())
            .enumerate()
            .filter(|(i, _)| *i != date_col)
            .map(|(_, (h, v))| (h.to_string(), v.to_string()))
            .collect();
        events.push(Event { date, attributes });
    }
    Ok(events)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TableRow {
    pub stratum: usize,
    pub date: NaiveDate,
    /// Day index in the study calendar.
    pub day: usize,
    /// `true` on the hazard day.
    pub hazard: bool,
    pub exposure: f64,
    pub yearly: f64,
    pub monthly: f64,
    pub weekly: f64,
    pub daily: f64,
    pub covariates: Vec<f64>,
}

impl TableRow {
    pub fn y(&self) -> u8 {
        self.hazard as u8
    }
}

/// What was discarded while assembling a table.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DropReport {
    pub events: usize,
    /// Events whose hazard day falls outside the study period.
    pub out_of_window: usize,
    /// Strata removed because the hazard day lacks exposure or covariates.
    pub hazard_missing: usize,
    /// Strata removed because no referent survived.
    pub no_referents: usize,
    /// Referent rows removed for missing data or falling outside the period.
    pub referent_rows_dropped: usize,
}

impl DropReport {
    pub fn strata_dropped(&self) -> usize {
        self.out_of_window + self.hazard_missing + self.no_referents
    }

    pub fn strata_retained(&self) -> usize {
        self.events - self.strata_dropped()
    }
}

/// Stacked analysis rows ordered by `(stratum, date)`.
#[derive(Debug, Clone)]
pub struct CaseCrossoverTable {
    calendar: Arc<StudyCalendar>,
    pub covariate_names: Vec<String>,
    pub rows: Vec<TableRow>,
    pub report: DropReport,
}

impl CaseCrossoverTable {
    pub fn calendar(&self) -> &StudyCalendar {
        &self.calendar
    }

    pub fn n_strata(&self) -> usize {
        self.report.strata_retained()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Rows grouped by stratum, in stratum order.
    pub fn strata(&self) -> impl Iterator<Item = &[TableRow]> {
        self.rows.chunk_by(|a, b| a.stratum == b.stratum)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header: Vec<&str> = vec![
            "stratum", "date", "y", "exposure", "yearly", "monthly", "weekly", "daily",
        ];
        header.extend(self.covariate_names.iter().map(String::as_str));
        w.write_record(&header)?;
        for r in &self.rows {
            let mut rec = vec![
                r.stratum.to_string(),
                r.date.to_string(),
                r.y().to_string(),
                r.exposure.to_string(),
                r.yearly.to_string(),
                r.monthly.to_string(),
                r.weekly.to_string(),
                r.daily.to_string(),
            ];
            rec.extend(r.covariates.iter().map(f64::to_string));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Per-day view of everything a table row needs, `None` when any piece is missing.
pub(crate) struct DayLookup<'a> {
    series: &'a DailySeries,
    decomp: &'a TrendDecomposition,
    covariates: &'a [(String, DailySeries)],
}

impl<'a> DayLookup<'a> {
    pub(crate) fn new(
        series: &'a DailySeries,
        decomp: &'a TrendDecomposition,
        covariates: &'a [(String, DailySeries)],
    ) -> Result<Self> {
        if series.calendar() != decomp.calendar()
            || covariates.iter().any(|(_, c)| c.calendar() != series.calendar())
        {
            return Err(Error::CalendarMismatch);
        }
        Ok(DayLookup {
            series,
            decomp,
            covariates,
        })
    }

    pub(crate) fn usable(&self, day: usize) -> bool {
        self.series.values()[day].is_some()
            && self.decomp.daily[day].is_some()
            && self.covariates.iter().all(|(_, c)| c.values()[day].is_some())
    }

    fn row(&self, stratum: usize, day: usize, hazard: bool) -> Option<TableRow> {
        if !self.usable(day) {
            return None;
        }
        let cal = self.series.calendar();
        Some(TableRow {
            stratum,
            date: cal.date_of(day),
            day,
            hazard,
            exposure: self.series.values()[day]?,
            yearly: self.decomp.yearly[day],
            monthly: self.decomp.monthly[day],
            weekly: self.decomp.weekly[day],
            daily: self.decomp.daily[day]?,
            covariates: self
                .covariates
                .iter()
                .map(|(_, c)| c.values()[day])
                .collect::<Option<Vec<f64>>>()?,
        })
    }
}

impl DayLookup<'_> {
    pub(crate) fn calendar(&self) -> &StudyCalendar {
        self.series.calendar()
    }

    pub(crate) fn covariate_names(&self) -> impl Iterator<Item = &str> {
        self.covariates.iter().map(|(n, _)| n.as_str())
    }

    /// Value of `column` on a usable day.
    pub(crate) fn value(&self, day: usize, column: &Column) -> Result<f64> {
        let v = match column {
            Column::Exposure => self.series.values()[day],
            Column::Yearly => Some(self.decomp.yearly[day]),
            Column::Monthly => Some(self.decomp.monthly[day]),
            Column::Weekly => Some(self.decomp.weekly[day]),
            Column::Daily => self.decomp.daily[day],
            Column::Covariate(name) => {
                let (_, c) = self
                    .covariates
                    .iter()
                    .find(|(n, _)| n == name)
                    .ok_or_else(|| Error::UnknownCovariate(name.clone()))?;
                c.values()[day]
            }
        };
        Ok(v.expect("value requested on a usable day"))
    }
}

/// Per-day hazard and referent row counts: the table collapsed by date.
#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct DayCounts {
    pub cases: Vec<u32>,
    pub referents: Vec<u32>,
    pub strata: usize,
}

impl DayCounts {
    /// Applies the same drop rules as [`build_table`] to hazard day indices.
    pub(crate) fn from_hazards(lookup: &DayLookup<'_>, hazards: &[usize]) -> Self {
        let n = lookup.calendar().len();
        let mut counts = DayCounts {
            cases: vec![0; n],
            referents: vec![0; n],
            strata: 0,
        };
        let mut refs = Vec::with_capacity(4);
        for &h in hazards {
            if !lookup.usable(h) {
                continue;
            }
            refs.clear();
            refs.extend(
                referent_indices(lookup.calendar(), h)
                    .0
                    .into_iter()
                    .filter(|&r| lookup.usable(r)),
            );
            if refs.is_empty() {
                continue;
            }
            counts.cases[h] += 1;
            for &r in &refs {
                counts.referents[r] += 1;
            }
            counts.strata += 1;
        }
        counts
    }
}

/// Referent day indices of the hazard day `day`, restricted to the calendar.
/// Returns the in-period indices and the number of referents outside it.
pub(crate) fn referent_indices(cal: &StudyCalendar, day: usize) -> (Vec<usize>, usize) {
    let mut outside = 0;
    let idx = referent_days(cal.date_of(day))
        .into_iter()
        .filter_map(|d| {
            let i = cal.index_of(d);
            outside += i.is_none() as usize;
            i
        })
        .collect();
    (idx, outside)
}

/// Assembles the stacked table: one stratum per retained event.
pub fn build_table(
    events: &EventList,
    series: &DailySeries,
    decomp: &TrendDecomposition,
    covariates: &[(String, DailySeries)],
) -> Result<CaseCrossoverTable> {
    if events.is_empty() {
        return Err(Error::EmptyEvents);
    }
    let lookup = DayLookup::new(series, decomp, covariates)?;
    let cal = series.calendar();
    let mut report = DropReport {
        events: events.len(),
        ..DropReport::default()
    };
    let mut rows = Vec::with_capacity(events.len() * 5);
    for (stratum, event) in events.events.iter().enumerate() {
        let Some(h) = cal.index_of(events.hazard_day(event)) else {
            report.out_of_window += 1;
            continue;
        };
        let Some(hazard_row) = lookup.row(stratum, h, true) else {
            report.hazard_missing += 1;
            continue;
        };
        let (refs, outside) = referent_indices(cal, h);
        let mut stratum_rows = vec![hazard_row];
        let mut dropped = outside;
        for r in refs {
            match lookup.row(stratum, r, false) {
                Some(row) => stratum_rows.push(row),
                None => dropped += 1,
            }
        }
        if stratum_rows.len() == 1 {
            report.no_referents += 1;
            continue;
        }
        report.referent_rows_dropped += dropped;
        stratum_rows.sort_by_key(|r| r.day);
        rows.extend(stratum_rows);
    }
    if rows.is_empty() {
        return Err(Error::AllStrataDropped);
    }
    Ok(CaseCrossoverTable {
        calendar: Arc::clone(series.shared_calendar()),
        covariate_names: covariates.iter().map(|(n, _)| n.clone()).collect(),
        rows,
        report,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::series::decompose;

    fn date(y: i32, m: u32, d: u32) -> NaiveDate {
        NaiveDate::from_ymd_opt(y, m, d).unwrap()
    }

    /// Independent oracle: scan every day of the month.
    fn brute_force_referents(h: NaiveDate) -> Vec<NaiveDate> {
        (1..=31)
            .filter_map(|d| h.with_day(d))
            .filter(|d| d.weekday() == h.weekday() && *d != h)
            .collect()
    }

    #[test]
    fn june_2005_wednesdays() {
        assert_eq!(
            referent_days(date(2005, 6, 15)),
            vec![date(2005, 6, 1), date(2005, 6, 8), date(2005, 6, 22), date(2005, 6, 29)]
        );
    }

    #[test]
    fn february_2001_always_has_three_referents() {
        for d in 1..=28 {
            assert_eq!(referent_days(date(2001, 2, d)).len(), 3);
        }
    }

    #[test]
    fn referents_match_brute_force_over_a_decade() {
        let cal = StudyCalendar::edmonton_decade();
        for d in cal.dates() {
            let r = referent_days(d);
            assert_eq!(r, brute_force_referents(d));
            assert!((3..=4).contains(&r.len()));
            assert!(!r.contains(&d));
        }
    }

    fn fixture() -> (DailySeries, TrendDecomposition) {
        let cal = Arc::new(StudyCalendar::edmonton_decade());
        let values = (0..cal.len())
            .map(|i| ((i * 37) % 101) as f64 / 10.0 + (i as f64 / 50.0).sin())
            .collect();
        let s = DailySeries::complete(cal, values);
        let d = decompose(&s).unwrap();
        (s, d)
    }

    #[test]
    fn single_event_at_lag_two() {
        let (s, d) = fixture();
        let ev = EventList::from_dates([date(2005, 6, 17)], 2).unwrap();
        let t = build_table(&ev, &s, &d, &[]).unwrap();
        assert_eq!(t.rows.len(), 5);
        assert_eq!(t.rows.iter().filter(|r| r.hazard).count(), 1);
        let hazard = t.rows.iter().find(|r| r.hazard).unwrap();
        assert_eq!(hazard.date, date(2005, 6, 15));
        for r in &t.rows {
            assert_eq!(r.date.weekday(), hazard.date.weekday());
            assert_eq!(r.date.month(), 6);
            let sum = r.yearly + r.monthly + r.weekly + r.daily;
            assert!((sum - r.exposure).abs() < 1e-10);
        }
    }

    #[test]
    fn missing_hazard_exposure_drops_the_stratum() {
        let (s, d) = fixture();
        let mut v = s.values().to_vec();
        let i = s.calendar().index_of(date(2005, 6, 15)).unwrap();
        v[i] = None;
        let s2 = DailySeries::new(Arc::clone(s.shared_calendar()), v);
        let d2 = decompose(&s2).unwrap();
        let ev = EventList::from_dates([date(2005, 6, 15), date(2005, 6, 16)], 0).unwrap();
        let t = build_table(&ev, &s2, &d2, &[]).unwrap();
        assert_eq!(t.report.hazard_missing, 1);
        assert_eq!(t.n_strata(), 1);
        assert!(t.rows.iter().all(|r| r.stratum == 1));
        let _ = d;
    }

    #[test]
    fn missing_referent_shrinks_but_keeps_the_stratum() {
        let (s, _) = fixture();
        let mut v = s.values().to_vec();
        v[s.calendar().index_of(date(2005, 6, 8)).unwrap()] = None;
        let s2 = DailySeries::new(Arc::clone(s.shared_calendar()), v);
        let d2 = decompose(&s2).unwrap();
        let ev = EventList::from_dates([date(2005, 6, 15)], 0).unwrap();
        let t = build_table(&ev, &s2, &d2, &[]).unwrap();
        assert_eq!(t.rows.len(), 4);
        assert_eq!(t.report.referent_rows_dropped, 1);
    }

    #[test]
    fn hazard_before_study_start_is_out_of_window() {
        let (s, d) = fixture();
        let ev = EventList::from_dates([date(2000, 4, 2), date(2000, 4, 20)], 3).unwrap();
        let t = build_table(&ev, &s, &d, &[]).unwrap();
        assert_eq!(t.report.out_of_window, 1);
        assert_eq!(t.n_strata(), 1);
    }

    #[test]
    fn empty_and_all_missing_errors() {
        let (s, d) = fixture();
        let ev = EventList::new(vec![], 0).unwrap();
        assert!(matches!(build_table(&ev, &s, &d, &[]), Err(Error::EmptyEvents)));
        let ev = EventList::from_dates([date(1999, 1, 1)], 0).unwrap();
        assert!(matches!(build_table(&ev, &s, &d, &[]), Err(Error::AllStrataDropped)));
        assert!(EventList::from_dates([date(2001, 1, 1)], 5).is_err());
    }

    #[test]
    fn covariate_columns_are_carried() {
        let (s, d) = fixture();
        let temp = s.map(|v| 2.0 * v);
        let ev = EventList::from_dates([date(2003, 3, 3)], 0).unwrap();
        let t = build_table(&ev, &s, &d, &[("temp".into(), temp)]).unwrap();
        for r in &t.rows {
            assert_eq!(r.covariates, vec![2.0 * r.exposure]);
        }
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("stratum,date,y,exposure,yearly,monthly,weekly,daily,temp\n"));
    }

    #[test]
    fn events_csv_keeps_attributes() {
        let ev = load_events("date,sex,age\n2005-06-17,F,70\n2005-06-18,M,50\n".as_bytes()).unwrap();
        assert_eq!(ev.len(), 2);
        assert_eq!(ev[0].attr("sex"), Some("F"));
        assert_eq!(ev[1].attr("age"), Some("50"));
        assert!(load_events("day\n2001-01-01\n".as_bytes()).is_err());
    }
}
