//! `key = value` config files for the simulate, grid and synth subcommands.
//! Relative paths are resolved against the config file's directory.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use chrono::NaiveDate;

use crate::calibrate::{NullConfig, NullScheme};
use crate::config::KeyValues;
use crate::error::{Error, Result};
use crate::glm::{Column, ModelSpec};
use crate::grid::{Cohort, GridSpec, Predicate, Season, SeasonRule};
use crate::series::StudyCalendar;
use crate::simulate::{ScenarioSpec, Strategy, SyntheticParams};

fn bad(kv: &KeyValues, key: &str, message: impl Into<String>) -> Error {
    Error::Config {
        line: kv.line_of(key),
        message: message.into(),
    }
}

fn check_keys(kv: &KeyValues, allowed: &[&str], prefixes: &[&str]) -> Result<()> {
    for k in kv.keys() {
        if !allowed.contains(&k) && !prefixes.iter().any(|p| k.starts_with(p)) {
            return Err(bad(kv, k, format!("unknown key {k:?}")));
        }
    }
    Ok(())
}

fn resolve(base: &Path, value: &str) -> PathBuf {
    let p = Path::new(value);
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

fn or<T: FromStr>(kv: &KeyValues, key: &str, default: T) -> Result<T> {
    Ok(kv.parsed(key)?.unwrap_or(default))
}

/// Parses each item of a comma-separated list.
fn list_of<T>(kv: &KeyValues, key: &str, parse: impl Fn(&str) -> Result<T>) -> Result<Option<Vec<T>>> {
    match kv.list(key) {
        None => Ok(None),
        Some(items) => items
            .iter()
            .map(|s| parse(s).map_err(|e| bad(kv, key, e.to_string())))
            .collect::<Result<Vec<T>>>()
            .map(Some),
    }
}

/// `1`, `2`, `3` (or `model1`...) and `custom` with explicit terms.
pub(crate) fn parse_model(name: &str, terms: &[String]) -> Result<ModelSpec> {
    match name.trim() {
        "1" | "model1" => Ok(ModelSpec::model1()),
        "2" | "model2" => Ok(ModelSpec::model2()),
        "3" | "model3" => Ok(ModelSpec::model3()),
        "custom" if terms.is_empty() => Err(Error::Usage("--model custom needs --terms".into())),
        "custom" => Ok(ModelSpec::custom(
            terms.iter().map(|t| Column::parse(t.trim())).collect(),
        )),
        other => Err(Error::Usage(format!(
            "unknown model {other:?}; expected 1, 2, 3 or custom"
        ))),
    }
}

pub(crate) fn parse_null(s: &str) -> Result<NullScheme> {
    NullScheme::parse(s).ok_or_else(|| {
        Error::Usage(format!(
            "unknown null scheme {s:?}; expected within-cell, within-week or uniform"
        ))
    })
}

const SYNTH_KEYS: [&str; 7] = [
    "start", "end", "year_amp", "month_amp", "week_amp", "noise_sd", "week_ar",
];

fn synthetic_params(kv: &KeyValues) -> Result<SyntheticParams> {
    let d = SyntheticParams::default();
    let p = SyntheticParams {
        year_amp: or(kv, "year_amp", d.year_amp)?,
        month_amp: or(kv, "month_amp", d.month_amp)?,
        week_amp: or(kv, "week_amp", d.week_amp)?,
        noise_sd: or(kv, "noise_sd", d.noise_sd)?,
        week_ar: or(kv, "week_ar", d.week_ar)?,
    };
    for (key, v) in [
        ("year_amp", p.year_amp),
        ("month_amp", p.month_amp),
        ("week_amp", p.week_amp),
        ("noise_sd", p.noise_sd),
    ] {
        if !(v >= 0.0 && v.is_finite()) {
            return Err(bad(kv, key, format!("{key} must be non-negative")));
        }
    }
    if !(p.week_ar.abs() < 1.0) {
        return Err(bad(kv, "week_ar", "week_ar must lie in (-1, 1)"));
    }
    Ok(p)
}

fn calendar(kv: &KeyValues) -> Result<StudyCalendar> {
    let decade = StudyCalendar::edmonton_decade();
    let start: NaiveDate = or(kv, "start", decade.start())?;
    let end: NaiveDate = or(kv, "end", decade.end())?;
    StudyCalendar::new(start, end)
}

/// Where a scenario's exposure series comes from.
#[derive(Debug, Clone)]
pub(crate) enum SeriesSource {
    File { path: PathBuf, column: Option<String> },
    Synthetic {
        params: SyntheticParams,
        calendar: StudyCalendar,
    },
}

#[derive(Debug, Clone)]
pub(crate) struct ScenarioConfig {
    /// `master_seed` is a placeholder until the run seed is settled.
    pub spec: ScenarioSpec,
    pub seed: Option<u64>,
    pub source: SeriesSource,
}

pub(crate) fn scenario_config(text: &str, base: &Path) -> Result<ScenarioConfig> {
    let kv = KeyValues::parse(text)?;
    let mut allowed = vec![
        "pollutant_file", "column", "beta", "gamma", "n_events", "n_reps", "strategies",
        "alpha0", "seed", "B", "null",
    ];
    allowed.extend(SYNTH_KEYS);
    check_keys(&kv, &allowed, &[])?;

    let strategies = list_of(&kv, "strategies", |s| s.parse::<Strategy>())?
        .unwrap_or_else(|| Strategy::ALL.to_vec());
    let spec = ScenarioSpec {
        beta: or(&kv, "beta", 0.0)?,
        gamma: or(&kv, "gamma", 0.0)?,
        n_events: or(&kv, "n_events", 5000)?,
        n_reps: or(&kv, "n_reps", 1000)?,
        strategies,
        alpha0: or(&kv, "alpha0", 0.05)?,
        master_seed: 0,
        calibration_reps: or(&kv, "B", NullConfig::DEFAULT_REPLICATES)?,
        null_scheme: match kv.get("null") {
            Some(s) => parse_null(s).map_err(|e| bad(&kv, "null", e.to_string()))?,
            None => NullScheme::default(),
        },
    };
    spec.validate().map_err(|e| Error::Config {
        line: 0,
        message: e.to_string(),
    })?;

    let source = match kv.get("pollutant_file") {
        Some(p) => {
            if let Some(k) = SYNTH_KEYS.iter().find(|k| kv.get(k).is_some()) {
                return Err(bad(&kv, k, format!("{k} only applies to synthetic series")));
            }
            SeriesSource::File {
                path: resolve(base, p),
                column: kv.get("column").map(String::from),
            }
        }
        None => {
            if kv.get("column").is_some() {
                return Err(bad(&kv, "column", "column needs pollutant_file"));
            }
            SeriesSource::Synthetic {
                params: synthetic_params(&kv)?,
                calendar: calendar(&kv)?,
            }
        }
    };
    Ok(ScenarioConfig {
        spec,
        seed: kv.parsed("seed")?,
        source,
    })
}

/// Everything in a grid config except the loaded data.
#[derive(Debug, Clone)]
pub(crate) struct GridConfig {
    pub name: String,
    pub events: PathBuf,
    pub exposures: PathBuf,
    /// Exposure columns to use; all columns when absent.
    pub pollutants: Option<Vec<String>>,
    pub cohorts: Vec<Cohort>,
    pub seasons: Vec<Season>,
    pub lags: Vec<u32>,
    pub models: Vec<ModelSpec>,
    pub alpha0: f64,
    pub min_events: usize,
    pub season_rule: SeasonRule,
}

pub(crate) fn grid_config(text: &str, base: &Path) -> Result<GridConfig> {
    let kv = KeyValues::parse(text)?;
    check_keys(
        &kv,
        &[
            "name", "events", "exposures", "pollutants", "cohorts", "seasons", "lags", "models",
            "alpha0", "min_events",
        ],
        &["cohort.", "season."],
    )?;
    let path = |key: &str| {
        kv.get(key)
            .map(|v| resolve(base, v))
            .ok_or_else(|| bad(&kv, key, format!("missing key {key:?}")))
    };

    let expressions: Vec<(&str, &str)> = kv.with_prefix("cohort.").collect();
    let cohort_names: Vec<String> = match kv.list("cohorts") {
        Some(names) => names,
        None => expressions.iter().map(|(n, _)| n.to_string()).collect(),
    };
    let cohorts = if cohort_names.is_empty() {
        vec![Cohort::new("All", Predicate::all())]
    } else {
        cohort_names
            .iter()
            .map(|name| {
                let key = format!("cohort.{name}");
                let expr = kv
                    .get(&key)
                    .ok_or_else(|| bad(&kv, "cohorts", format!("cohort {name:?} has no {key} line")))?;
                let predicate = expr.parse().map_err(|e: Error| bad(&kv, &key, e.to_string()))?;
                Ok(Cohort::new(name.clone(), predicate))
            })
            .collect::<Result<Vec<_>>>()?
    };

    let mut season_rule = SeasonRule::default();
    for (name, _) in kv.with_prefix("season.") {
        let key = format!("season.{name}");
        let season: Season = name.parse().map_err(|e: Error| bad(&kv, &key, e.to_string()))?;
        let months = list_of(&kv, &key, |m| {
            m.parse::<u32>()
                .map_err(|_| Error::InvalidGrid(format!("month {m:?} is not a number")))
        })?
        .unwrap_or_else(|| unreachable!("key came from the config"));
        season_rule
            .assign(season, &months)
            .map_err(|e| bad(&kv, &key, e.to_string()))?;
    }

    Ok(GridConfig {
        name: kv.get("name").unwrap_or("grid").to_string(),
        events: path("events")?,
        exposures: path("exposures")?,
        pollutants: kv.list("pollutants"),
        cohorts,
        seasons: list_of(&kv, "seasons", |s| s.parse())?.unwrap_or_else(|| Season::ALL.to_vec()),
        lags: list_of(&kv, "lags", |s| {
            s.parse()
                .map_err(|_| Error::InvalidGrid(format!("lag {s:?} is not a number")))
        })?
        .unwrap_or_else(|| (0..=4).collect()),
        models: list_of(&kv, "models", |s| parse_model(s, &[]))?
            .unwrap_or_else(|| vec![ModelSpec::model1(), ModelSpec::model2()]),
        alpha0: or(&kv, "alpha0", 0.05)?,
        min_events: or(&kv, "min_events", GridSpec::DEFAULT_MIN_EVENTS)?,
        season_rule,
    })
}

/// Synthetic exposures and events.
#[derive(Debug, Clone)]
pub(crate) struct SynthConfig {
    pub calendar: StudyCalendar,
    pub params: SyntheticParams,
    pub exposures: Vec<String>,
    /// Constant added to every series so values look like concentrations.
    pub level: f64,
    pub n_events: usize,
    pub beta: f64,
    pub gamma: f64,
    /// Exposure whose components drive the event sampling.
    pub driver: String,
    pub seed: Option<u64>,
}

pub(crate) fn synth_config(text: &str) -> Result<SynthConfig> {
    let kv = KeyValues::parse(text)?;
    let mut allowed = vec![
        "exposures", "level", "n_events", "beta", "gamma", "driver", "seed",
    ];
    allowed.extend(SYNTH_KEYS);
    check_keys(&kv, &allowed, &[])?;
    let exposures = kv.list("exposures").unwrap_or_else(|| {
        ["co", "no", "no2", "o3", "pm25"].map(String::from).to_vec()
    });
    if exposures.is_empty() {
        return Err(bad(&kv, "exposures", "need at least one exposure"));
    }
    let driver = kv.get("driver").unwrap_or(&exposures[0]).to_string();
    if !exposures.contains(&driver) {
        return Err(bad(&kv, "driver", format!("driver {driver:?} is not among the exposures")));
    }
    Ok(SynthConfig {
        calendar: calendar(&kv)?,
        params: synthetic_params(&kv)?,
        exposures,
        level: or(&kv, "level", 10.0)?,
        n_events: or(&kv, "n_events", 2000)?,
        beta: or(&kv, "beta", 0.0)?,
        gamma: or(&kv, "gamma", 0.0)?,
        driver,
        seed: kv.parsed("seed")?,
    })
}
