//! Many-cell empirical study: cohorts x seasons x exposures x lags, each
//! cell analysed with one or more models and flagged at 0.05, 0.01 and a
//! Bonferroni threshold.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use chrono::{Datelike, NaiveDate};
use rayon::prelude::*;

use crate::design::{build_table, Event, EventList};
use crate::error::{Error, Result};
use crate::glm::{fit_logistic, wald_inference, ModelSpec, WaldSummary};
use crate::series::{decompose, iqr_standardize, DailySeries, TrendDecomposition};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Season {
    All,
    Spring,
    Summer,
    Autumn,
    Winter,
}

impl Season {
    pub const ALL: [Season; 5] = [
        Season::All,
        Season::Spring,
        Season::Summer,
        Season::Autumn,
        Season::Winter,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Season::All => "All",
            Season::Spring => "Spring",
            Season::Summer => "Summer",
            Season::Autumn => "Autumn",
            Season::Winter => "Winter",
        }
    }
}

impl fmt::Display for Season {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Season {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Season::ALL
            .into_iter()
            .find(|x| x.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidGrid(format!("unknown season {s:?}")))
    }
}

/// Month-to-season assignment. Defaults to meteorological seasons.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SeasonRule {
    by_month: [Season; 12],
}

impl Default for SeasonRule {
    fn default() -> Self {
        use Season::*;
        SeasonRule {
            by_month: [
                Winter, Winter, Spring, Spring, Spring, Summer, Summer, Summer, Autumn, Autumn,
                Autumn, Winter,
            ],
        }
    }
}

impl SeasonRule {
    /// Reassigns the listed months (1-12) to `season`.
    pub fn assign(&mut self, season: Season, months: &[u32]) -> Result<()> {
        if season == Season::All {
            return Err(Error::InvalidGrid("cannot assign months to All".into()));
        }
        for &m in months {
            if !(1..=12).contains(&m) {
                return Err(Error::InvalidGrid(format!("month {m} out of range")));
            }
            self.by_month[m as usize - 1] = season;
        }
        Ok(())
    }

    pub fn season_of(&self, date: NaiveDate) -> Season {
        self.by_month[date.month0() as usize]
    }

    pub fn contains(&self, season: Season, date: NaiveDate) -> bool {
        season == Season::All || self.season_of(date) == season
    }
}

/// Meteorological season of a date (Spring = Mar-May, ..., Winter = Dec-Feb).
pub fn season_of(date: NaiveDate) -> Season {
    SeasonRule::default().season_of(date)
}

#[derive(Debug, Clone, PartialEq)]
enum Condition {
    Eq(String, String),
    Ne(String, String),
    Ge(String, f64),
    Gt(String, f64),
    Le(String, f64),
    Lt(String, f64),
}

impl Condition {
    fn holds(&self, e: &Event) -> bool {
        let num = |a: &str| e.attr(a).and_then(|v| v.parse::<f64>().ok());
        match self {
            Condition::Eq(a, v) => e.attr(a) == Some(v.as_str()),
            Condition::Ne(a, v) => e.attr(a) != Some(v.as_str()),
            Condition::Ge(a, x) => num(a).is_some_and(|v| v >= *x),
            Condition::Gt(a, x) => num(a).is_some_and(|v| v > *x),
            Condition::Le(a, x) => num(a).is_some_and(|v| v <= *x),
            Condition::Lt(a, x) => num(a).is_some_and(|v| v < *x),
        }
    }
}

/// Conjunction of attribute conditions, e.g. `sex == F & age >= 65`.
/// `*` (or an empty expression) matches every event.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Predicate(Vec<Condition>);

impl Predicate {
    pub fn all() -> Self {
        Predicate(Vec::new())
    }

    pub fn matches(&self, event: &Event) -> bool {
        self.0.iter().all(|c| c.holds(event))
    }
}

impl FromStr for Predicate {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.is_empty() || s == "*" {
            return Ok(Predicate::all());
        }
        let mut conds = Vec::new();
        for part in s.split('&') {
            let part = part.trim();
            let bad = || Error::InvalidGrid(format!("cannot parse condition {part:?}"));
            // Two-character operators first so `>=` is not read as `>`.
            let op = ["==", "!=", ">=", "<=", ">", "<", "="]
                .into_iter()
                .find(|op| part.contains(op))
                .ok_or_else(bad)?;
            let (attr, value) = part.split_once(op).ok_or_else(bad)?;
            let (attr, value) = (attr.trim().to_string(), value.trim().to_string());
            if attr.is_empty() {
                return Err(bad());
            }
            let number = || value.parse::<f64>().map_err(|_| bad());
            conds.push(match op {
                "==" | "=" => Condition::Eq(attr, value),
                "!=" => Condition::Ne(attr, value),
                ">=" => Condition::Ge(attr, number()?),
                "<=" => Condition::Le(attr, number()?),
                ">" => Condition::Gt(attr, number()?),
                _ => Condition::Lt(attr, number()?),
            });
        }
        Ok(Predicate(conds))
    }
}

#[derive(Debug, Clone)]
pub struct Cohort {
    pub name: String,
    pub predicate: Predicate,
}

impl Cohort {
    pub fn new(name: impl Into<String>, predicate: Predicate) -> Self {
        Cohort {
            name: name.into(),
            predicate,
        }
    }
}

/// An exposure series ready for analysis.
#[derive(Debug, Clone)]
pub struct Exposure {
    pub name: String,
    pub series: DailySeries,
    pub decomp: TrendDecomposition,
}

impl Exposure {
    /// IQR-standardises then decomposes a raw series.
    pub fn prepare(name: impl Into<String>, raw: &DailySeries) -> Result<Self> {
        let (series, _) = iqr_standardize(raw)?;
        let decomp = decompose(&series)?;
        Ok(Exposure {
            name: name.into(),
            series,
            decomp,
        })
    }
}

#[derive(Debug, Clone)]
pub struct GridSpec {
    pub cohorts: Vec<Cohort>,
    pub seasons: Vec<Season>,
    pub lags: Vec<u32>,
    pub exposures: Vec<Exposure>,
    pub models: Vec<ModelSpec>,
    pub alpha0: f64,
    /// Cells with fewer retained events are skipped as under-powered.
    pub min_events: usize,
    pub season_rule: SeasonRule,
}

impl GridSpec {
    pub const DEFAULT_MIN_EVENTS: usize = 10;

    pub fn new(cohorts: Vec<Cohort>, exposures: Vec<Exposure>) -> Self {
        GridSpec {
            cohorts,
            seasons: Season::ALL.to_vec(),
            lags: (0..=4).collect(),
            exposures,
            models: vec![ModelSpec::model1(), ModelSpec::model2()],
            alpha0: 0.05,
            min_events: Self::DEFAULT_MIN_EVENTS,
            season_rule: SeasonRule::default(),
        }
    }

    /// Cells per model.
    pub fn n_cells(&self) -> usize {
        self.cohorts.len() * self.seasons.len() * self.lags.len() * self.exposures.len()
    }

    pub fn alpha_bonferroni(&self) -> f64 {
        self.alpha0 / self.n_cells() as f64
    }

    fn validate(&self) -> Result<()> {
        if self.n_cells() == 0 {
            return Err(Error::InvalidGrid("grid has no cells".into()));
        }
        if self.models.is_empty() {
            return Err(Error::InvalidGrid("no models requested".into()));
        }
        if let Some(&l) = self.lags.iter().find(|&&l| l > EventList::MAX_LAG) {
            return Err(Error::InvalidLag(l as i64));
        }
        if !(self.alpha0 > 0.0 && self.alpha0 < 1.0) {
            return Err(Error::InvalidGrid("alpha0 must lie in (0, 1)".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum CellStatus {
    Ok,
    /// Fewer retained events than the grid minimum.
    UnderPowered,
    /// Fit failed; carries a short failure code.
    Failed(String),
}

impl CellStatus {
    pub fn code(&self) -> String {
        match self {
            CellStatus::Ok => "ok".into(),
            CellStatus::UnderPowered => "under_powered".into(),
            CellStatus::Failed(c) => format!("failed:{c}"),
        }
    }
}

fn failure_code(e: &Error) -> &'static str {
    match e {
        Error::Collinear(_) => "collinear",
        Error::Separation { .. } => "separation",
        Error::DegenerateInference(_) => "degenerate_se",
        Error::AllStrataDropped => "all_missing",
        _ => "error",
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridRow {
    pub cohort: String,
    pub season: Season,
    /// Retained events (strata).
    pub n: usize,
    pub pollutant: String,
    pub lag: u32,
    pub wald: Option<WaldSummary>,
    pub flag_05: bool,
    pub flag_01: bool,
    pub flag_bonferroni: bool,
    pub status: CellStatus,
}

/// All cells for one model.
#[derive(Debug, Clone)]
pub struct GridResults {
    pub model: ModelSpec,
    pub alpha_bonferroni: f64,
    pub rows: Vec<GridRow>,
}

impl GridResults {
    pub fn file_name(&self, study: &str) -> String {
        format!("Est-{study}-{}.csv", self.model.label())
    }

    /// `cohort,season,n,pollutant,lag,estimate,se,or,ci_low,ci_high,p,flag_05,flag_01,flag_bonferroni,status`
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "cohort",
            "season",
            "n",
            "pollutant",
            "lag",
            "estimate",
            "se",
            "or",
            "ci_low",
            "ci_high",
            "p",
            "flag_05",
            "flag_01",
            "flag_bonferroni",
            "status",
        ])?;
        for r in &self.rows {
            let num = |f: fn(&WaldSummary) -> f64| r.wald.as_ref().map(|w| f(w).to_string()).unwrap_or_default();
            w.write_record([
                r.cohort.clone(),
                r.season.name().to_string(),
                r.n.to_string(),
                r.pollutant.clone(),
                r.lag.to_string(),
                num(|w| w.estimate),
                num(|w| w.se),
                num(|w| w.odds_ratio),
                num(|w| w.ci_low),
                num(|w| w.ci_high),
                num(|w| w.p),
                (r.flag_05 as u8).to_string(),
                (r.flag_01 as u8).to_string(),
                (r.flag_bonferroni as u8).to_string(),
                r.status.code(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn summary(&self) -> GridTally {
        let ok: Vec<&WaldSummary> = self.rows.iter().filter_map(|r| r.wald.as_ref()).collect();
        GridTally {
            fitted: ok.len(),
            positive: ok.iter().filter(|w| w.estimate > 0.0).count(),
            negative: ok.iter().filter(|w| w.estimate < 0.0).count(),
            p05: self.rows.iter().filter(|r| r.flag_05).count(),
            p01: self.rows.iter().filter(|r| r.flag_01).count(),
            bonferroni: self.rows.iter().filter(|r| r.flag_bonferroni).count(),
        }
    }
}

/// Counts of positive / negative estimates and flagged cells.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GridTally {
    pub fitted: usize,
    pub positive: usize,
    pub negative: usize,
    pub p05: usize,
    pub p01: usize,
    pub bonferroni: usize,
}

/// Pearson correlation of the estimates of two models over the cells fitted by both.
pub fn estimate_correlation(a: &GridResults, b: &GridResults) -> Option<f64> {
    let pairs: Vec<(f64, f64)> = a
        .rows
        .iter()
        .zip(&b.rows)
        .filter_map(|(x, y)| Some((x.wald?.estimate, y.wald?.estimate)))
        .collect();
    if pairs.len() < 2 {
        return None;
    }
    let n = pairs.len() as f64;
    let mx = pairs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pairs.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pairs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pairs.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let syy: f64 = pairs.iter().map(|p| (p.1 - my).powi(2)).sum();
    Some(sxy / (sxx * syy).sqrt())
}

struct Cell<'a> {
    cohort: &'a Cohort,
    season: Season,
    exposure: &'a Exposure,
    lag: u32,
}

fn run_cell(spec: &GridSpec, cell: &Cell<'_>, events: &[Event]) -> Vec<GridRow> {
    let selected: Vec<Event> = events
        .iter()
        .filter(|e| {
            cell.cohort.predicate.matches(e) && spec.season_rule.contains(cell.season, e.date)
        })
        .cloned()
        .collect();
    let alpha_b = spec.alpha_bonferroni();
    let row = |n: usize, outcome: std::result::Result<WaldSummary, CellStatus>| {
        let (wald, status) = match outcome {
            Ok(w) => (Some(w), CellStatus::Ok),
            Err(s) => (None, s),
        };
        let p = wald.map_or(f64::NAN, |w| w.p);
        GridRow {
            cohort: cell.cohort.name.clone(),
            season: cell.season,
            n,
            pollutant: cell.exposure.name.clone(),
            lag: cell.lag,
            wald,
            flag_05: p <= 0.05,
            flag_01: p <= 0.01,
            flag_bonferroni: p <= alpha_b,
            status,
        }
    };

    let table = if selected.is_empty() {
        Err(Error::EmptyEvents)
    } else {
        EventList::new(selected, cell.lag).and_then(|ev| {
            build_table(&ev, &cell.exposure.series, &cell.exposure.decomp, &[])
        })
    };
    let table = match table {
        Ok(t) if t.n_strata() >= spec.min_events => t,
        Ok(t) => {
            let n = t.n_strata();
            return spec.models.iter().map(|_| row(n, Err(CellStatus::UnderPowered))).collect();
        }
        Err(_) => {
            return spec.models.iter().map(|_| row(0, Err(CellStatus::UnderPowered))).collect();
        }
    };
    let n = table.n_strata();
    spec.models
        .iter()
        .map(|m| {
            let outcome = fit_logistic(&table, m)
                .and_then(|fit| wald_inference(&fit, &m.focal()))
                .map_err(|e| CellStatus::Failed(failure_code(&e).into()));
            row(n, outcome)
        })
        .collect()
}

/// Runs every cell. Output rows are ordered by (cohort, season, exposure, lag)
/// in the order given by `spec`, whatever the execution schedule.
pub fn run_grid(spec: &GridSpec, events: &[Event]) -> Result<Vec<GridResults>> {
    spec.validate()?;
    if events.is_empty() {
        return Err(Error::EmptyEvents);
    }
    let mut cells = Vec::with_capacity(spec.n_cells());
    for cohort in &spec.cohorts {
        for &season in &spec.seasons {
            for exposure in &spec.exposures {
                for &lag in &spec.lags {
                    cells.push(Cell {
                        cohort,
                        season,
                        exposure,
                        lag,
                    });
                }
            }
        }
    }
    let per_cell: Vec<Vec<GridRow>> = cells
        .par_iter()
        .map(|c| run_cell(spec, c, events))
        .collect();
    Ok(spec
        .models
        .iter()
        .enumerate()
        .map(|(k, model)| GridResults {
            model: model.clone(),
            alpha_bonferroni: spec.alpha_bonferroni(),
            rows: per_cell.iter().map(|r| r[k].clone()).collect(),
        })
        .collect())
}
