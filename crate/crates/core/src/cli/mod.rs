//! Command-line front end.
//!
//! Every subcommand reads CSV, writes CSV plus one `manifest.txt` into
//! `--out`, and maps failures to exit codes: 1 usage, 2 data, 3 numerical.

mod configs;
mod manifest;

pub use manifest::{sha256_hex, RunManifest, MANIFEST_FILE};

use std::ffi::OsString;
use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use chrono::NaiveDate;
use clap::{Args, Parser, Subcommand};
use rand::Rng;

use crate::calibrate::{calibrate_fit, permute_null_fits, NullConfig};
use crate::design::{build_table, load_events, referent_days, Event, EventList};
use crate::error::{Error, ErrorKind, Result};
use crate::glm::{fit_logistic, write_fits_csv, ModelSpec};
use crate::grid::{estimate_correlation, run_grid, Exposure, GridSpec};
use crate::rng::{stream, TAG_SAMPLE, TAG_SYNTH};
use crate::series::{decompose, iqr_standardize, DailySeries, DailyTable, StudyCalendar};
use crate::simulate::{generate_synthetic_series, run_scenario, sample_event_days};
use configs::{grid_config, parse_model, parse_null, scenario_config, synth_config, SeriesSource};

#[derive(Debug, Parser)]
#[command(name = "casecross", version, about = "Time-stratified case-crossover analysis")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Split a daily series into yearly, monthly, weekly and daily components
    Decompose(DecomposeArgs),
    /// List the referents of a date, or build the case-crossover table of an events file
    Referents(ReferentsArgs),
    /// Fit a logistic model to the case-crossover table
    Analyze(AnalyzeArgs),
    /// Fit a model and remove its design bias by permutation
    Calibrate(CalibrateArgs),
    /// Run a size / power simulation scenario
    Simulate(SimulateArgs),
    /// Run a cohorts x seasons x exposures x lags grid
    Grid(GridArgs),
    /// Write synthetic exposure series and events
    Synth(SynthArgs),
}

#[derive(Debug, Args)]
struct SeriesArgs {
    /// Daily CSV with a `date` column
    #[arg(long)]
    input: PathBuf,
    /// Exposure column of the input
    #[arg(long)]
    column: String,
    /// Keep raw units instead of dividing by the interquartile range
    #[arg(long)]
    raw: bool,
}

#[derive(Debug, Args)]
struct EventArgs {
    /// Events CSV with a `date` column
    #[arg(long)]
    events: PathBuf,
    /// Days between hazard day and event day (0-4)
    #[arg(long, default_value_t = 0)]
    lag: u32,
}

#[derive(Debug, Args)]
struct ModelArgs {
    /// 1, 2, 3 or custom
    #[arg(long, default_value = "2")]
    model: String,
    /// Regressors of a custom model, focal term first
    #[arg(long, value_delimiter = ',')]
    terms: Vec<String>,
    /// Further input columns to adjust for
    #[arg(long, value_delimiter = ',')]
    covariates: Vec<String>,
}

#[derive(Debug, Args)]
struct DecomposeArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    column: String,
    /// Divide by the interquartile range before decomposing
    #[arg(long)]
    standardize: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct ReferentsArgs {
    /// Print the referents of this hazard day
    #[arg(long, conflicts_with_all = ["input", "events"])]
    date: Option<NaiveDate>,
    #[arg(long, requires_all = ["column", "events", "out"])]
    input: Option<PathBuf>,
    #[arg(long)]
    column: Option<String>,
    #[arg(long)]
    raw: bool,
    #[arg(long)]
    events: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    lag: u32,
    #[arg(long, value_delimiter = ',')]
    covariates: Vec<String>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct AnalyzeArgs {
    #[command(flatten)]
    series: SeriesArgs,
    #[command(flatten)]
    events: EventArgs,
    #[command(flatten)]
    model: ModelArgs,
    /// Also write the stacked table
    #[arg(long)]
    table: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct CalibrateArgs {
    #[command(flatten)]
    series: SeriesArgs,
    #[command(flatten)]
    events: EventArgs,
    #[command(flatten)]
    model: ModelArgs,
    /// Permutation replicates
    #[arg(long = "B", default_value_t = NullConfig::DEFAULT_REPLICATES)]
    b: usize,
    /// Null scheme: within-cell, within-week or uniform
    #[arg(long, default_value = "within-cell")]
    null: String,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    jobs: Option<usize>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    jobs: Option<usize>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct GridArgs {
    #[arg(long)]
    config: PathBuf,
    /// Overrides `min_events` of the config
    #[arg(long)]
    min_events: Option<usize>,
    #[arg(long)]
    jobs: Option<usize>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct SynthArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
}

pub fn exit_code(err: &Error) -> i32 {
    match err.kind() {
        ErrorKind::Usage => 1,
        ErrorKind::Data => 2,
        ErrorKind::Numerical => 3,
    }
}

/// Parses `args` (program name first), runs the subcommand and returns the exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match execute(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn execute(command: Command) -> Result<()> {
    match command {
        Command::Decompose(a) => cmd_decompose(a),
        Command::Referents(a) => cmd_referents(a),
        Command::Analyze(a) => cmd_analyze(a),
        Command::Calibrate(a) => {
            let jobs = a.jobs;
            with_jobs(jobs, || cmd_calibrate(a))
        }
        Command::Simulate(a) => {
            let jobs = a.jobs;
            with_jobs(jobs, || cmd_simulate(a))
        }
        Command::Grid(a) => {
            let jobs = a.jobs;
            with_jobs(jobs, || cmd_grid(a))
        }
        Command::Synth(a) => cmd_synth(a),
    }
}

/// Runs `f` on a pool of `jobs` workers; `None` or 0 uses the global pool.
fn with_jobs<T: Send>(jobs: Option<usize>, f: impl FnOnce() -> Result<T> + Send) -> Result<T> {
    match jobs {
        None | Some(0) => f(),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::Usage(format!("cannot start {n} workers: {e}")))?
            .install(f),
    }
}

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| {
        Error::Io(io::Error::new(e.kind(), format!("{}: {e}", path.display())))
    })
}

fn output_dir(out: &Path) -> Result<PathBuf> {
    fs::create_dir_all(out)?;
    Ok(out.to_path_buf())
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

fn read_table(path: &Path) -> Result<(DailyTable, Arc<StudyCalendar>)> {
    let table = DailyTable::read(open(path)?)?;
    let calendar = Arc::new(table.spanning_calendar()?);
    Ok((table, calendar))
}

fn read_events(path: &Path) -> Result<Vec<Event>> {
    load_events(open(path)?)
}

fn seed_or_draw(seed: Option<u64>) -> u64 {
    seed.unwrap_or_else(|| rand::rng().random())
}

/// Exposure series ready for table building, plus covariates.
struct Prepared {
    series: DailySeries,
    decomp: crate::series::TrendDecomposition,
    covariates: Vec<(String, DailySeries)>,
}

fn prepare(
    args: &SeriesArgs,
    covariates: &[String],
    manifest: &mut RunManifest,
) -> Result<Prepared> {
    manifest.input("series", &args.input)?;
    manifest.param("column", &args.column);
    let (table, calendar) = read_table(&args.input)?;
    let raw = table.series(&args.column, &calendar)?;
    let series = if args.raw {
        manifest.param("scale", "raw");
        raw
    } else {
        let (s, iqr) = iqr_standardize(&raw)?;
        manifest.param("scale", "iqr");
        manifest.param("iqr", iqr);
        s
    };
    let decomp = decompose(&series)?;
    let covariates = covariates
        .iter()
        .map(|name| Ok((name.clone(), table.series(name, &calendar)?)))
        .collect::<Result<Vec<_>>>()?;
    if !covariates.is_empty() {
        manifest.param("covariates", covariates_list(&covariates));
    }
    Ok(Prepared {
        series,
        decomp,
        covariates,
    })
}

fn covariates_list(c: &[(String, DailySeries)]) -> String {
    c.iter().map(|(n, _)| n.as_str()).collect::<Vec<_>>().join(",")
}

fn model_of(args: &ModelArgs, manifest: &mut RunManifest) -> Result<ModelSpec> {
    let spec = parse_model(&args.model, &args.terms)?.with_covariates(args.covariates.clone());
    manifest.param("model", spec.label());
    Ok(spec)
}

fn record_drops(manifest: &mut RunManifest, report: &crate::design::DropReport) {
    manifest.param("events", report.events);
    manifest.param("strata_retained", report.strata_retained());
    manifest.param("dropped_out_of_window", report.out_of_window);
    manifest.param("dropped_hazard_missing", report.hazard_missing);
    manifest.param("dropped_no_referents", report.no_referents);
    manifest.param("referent_rows_dropped", report.referent_rows_dropped);
}

fn finish(mut manifest: RunManifest, started: Instant, dir: &Path) -> Result<()> {
    manifest.duration = started.elapsed();
    manifest.write(dir)
}

fn cmd_decompose(a: DecomposeArgs) -> Result<()> {
    let started = Instant::now();
    let mut m = RunManifest::new("decompose");
    m.input("series", &a.input)?;
    m.param("column", &a.column);
    let (table, calendar) = read_table(&a.input)?;
    let mut series = table.series(&a.column, &calendar)?;
    if a.standardize {
        let (s, iqr) = iqr_standardize(&series)?;
        series = s;
        m.param("iqr", iqr);
    }
    m.param("standardize", a.standardize);
    let decomp = decompose(&series)?;
    let dir = output_dir(&a.out)?;
    decomp.write_csv(&series, create(&dir, "decomposition.csv")?)?;
    finish(m, started, &dir)
}

fn cmd_referents(a: ReferentsArgs) -> Result<()> {
    if let Some(date) = a.date {
        let mut stdout = io::stdout().lock();
        for d in referent_days(date) {
            writeln!(stdout, "{d}")?;
        }
        return Ok(());
    }
    let (Some(input), Some(column), Some(events), Some(out)) = (a.input, a.column, a.events, a.out)
    else {
        return Err(Error::Usage(
            "referents needs either --date or --input, --column, --events and --out".into(),
        ));
    };
    let started = Instant::now();
    let mut m = RunManifest::new("referents");
    let series_args = SeriesArgs {
        input,
        column,
        raw: a.raw,
    };
    let p = prepare(&series_args, &a.covariates, &mut m)?;
    m.input("events", &events)?;
    m.param("lag", a.lag);
    let list = EventList::new(read_events(&events)?, a.lag)?;
    let table = build_table(&list, &p.series, &p.decomp, &p.covariates)?;
    record_drops(&mut m, &table.report);
    let dir = output_dir(&out)?;
    table.write_csv(create(&dir, "table.csv")?)?;
    finish(m, started, &dir)
}

fn cmd_analyze(a: AnalyzeArgs) -> Result<()> {
    let started = Instant::now();
    let mut m = RunManifest::new("analyze");
    let spec = model_of(&a.model, &mut m)?;
    let p = prepare(&a.series, &a.model.covariates, &mut m)?;
    m.input("events", &a.events.events)?;
    m.param("lag", a.events.lag);
    let list = EventList::new(read_events(&a.events.events)?, a.events.lag)?;
    let table = build_table(&list, &p.series, &p.decomp, &p.covariates)?;
    record_drops(&mut m, &table.report);
    let fit = fit_logistic(&table, &spec)?;
    let dir = output_dir(&a.out)?;
    write_fits_csv(create(&dir, "fits.csv")?, &[(spec.label(), &fit)])?;
    if a.table {
        table.write_csv(create(&dir, "table.csv")?)?;
    }
    finish(m, started, &dir)
}

fn cmd_calibrate(a: CalibrateArgs) -> Result<()> {
    let started = Instant::now();
    let mut m = RunManifest::new("calibrate");
    let spec = model_of(&a.model, &mut m)?;
    let scheme = parse_null(&a.null)?;
    let seed = seed_or_draw(a.seed);
    m.seed = Some(seed);
    m.param("B", a.b);
    m.param("null", scheme.name());
    let p = prepare(&a.series, &a.model.covariates, &mut m)?;
    m.input("events", &a.events.events)?;
    m.param("lag", a.events.lag);
    let list = EventList::new(read_events(&a.events.events)?, a.events.lag)?;
    let table = build_table(&list, &p.series, &p.decomp, &p.covariates)?;
    record_drops(&mut m, &table.report);
    let fit = fit_logistic(&table, &spec)?;

    let hazards: Vec<NaiveDate> = table.rows.iter().filter(|r| r.hazard).map(|r| r.date).collect();
    let cfg = NullConfig {
        replicates: a.b,
        seed,
        scheme,
    };
    let null = permute_null_fits(
        &hazards,
        &p.series,
        &p.decomp,
        &p.covariates,
        std::slice::from_ref(&spec),
        &cfg,
    )?;
    let cal = calibrate_fit(&fit, &null[0])?;

    let dir = output_dir(&a.out)?;
    write_fits_csv(create(&dir, "fits.csv")?, &[(spec.label(), &fit)])?;
    cal.write_csv(create(&dir, "calibration.csv")?)?;
    cal.write_null_csv(create(&dir, "null_estimates.csv")?)?;
    finish(m, started, &dir)
}

fn cmd_simulate(a: SimulateArgs) -> Result<()> {
    let started = Instant::now();
    let mut m = RunManifest::new("simulate");
    m.input("config", &a.config)?;
    let text = fs::read_to_string(&a.config)?;
    let base = a.config.parent().unwrap_or(Path::new("."));
    let cfg = scenario_config(&text, base)?;
    let seed = seed_or_draw(a.seed.or(cfg.seed));
    m.seed = Some(seed);

    let raw = match &cfg.source {
        SeriesSource::File { path, column } => {
            m.input("pollutant_file", path)?;
            let (table, calendar) = read_table(path)?;
            let column = match column {
                Some(c) => c.clone(),
                None => table
                    .column_names()
                    .next()
                    .ok_or_else(|| Error::MissingColumn("exposure".into()))?
                    .to_string(),
            };
            m.param("column", &column);
            table.series(&column, &calendar)?
        }
        SeriesSource::Synthetic { params, calendar } => {
            m.param("series", "synthetic");
            m.param("year_amp", params.year_amp);
            m.param("month_amp", params.month_amp);
            m.param("week_amp", params.week_amp);
            m.param("noise_sd", params.noise_sd);
            m.param("week_ar", params.week_ar);
            m.param("start", calendar.start());
            m.param("end", calendar.end());
            let mut rng = stream(seed, &[TAG_SYNTH]);
            generate_synthetic_series(params, Arc::new(calendar.clone()), &mut rng)
        }
    };
    let (series, iqr) = iqr_standardize(&raw)?;
    m.param("iqr", iqr);
    let decomp = decompose(&series)?;

    let mut spec = cfg.spec;
    spec.master_seed = seed;
    m.param("beta", spec.beta);
    m.param("gamma", spec.gamma);
    m.param("n_events", spec.n_events);
    m.param("n_reps", spec.n_reps);
    m.param("alpha0", spec.alpha0);
    m.param("B", spec.calibration_reps);
    m.param("null", spec.null_scheme.name());
    m.param(
        "strategies",
        spec.strategies.iter().map(|s| s.name()).collect::<Vec<_>>().join(","),
    );

    let summary = run_scenario(&spec, &series, &decomp)?;
    m.param("failed_replicates", summary.failed_replicates);
    let dir = output_dir(&a.out)?;
    summary.write_summary_csv(create(&dir, "summary.csv")?)?;
    summary.write_estimates_csv(create(&dir, "estimates.csv")?)?;
    finish(m, started, &dir)
}

fn cmd_grid(a: GridArgs) -> Result<()> {
    let started = Instant::now();
    let mut m = RunManifest::new("grid");
    m.input("config", &a.config)?;
    let text = fs::read_to_string(&a.config)?;
    let base = a.config.parent().unwrap_or(Path::new("."));
    let cfg = grid_config(&text, base)?;

    m.input("events", &cfg.events)?;
    m.input("exposures", &cfg.exposures)?;
    let events = read_events(&cfg.events)?;
    let (table, calendar) = read_table(&cfg.exposures)?;
    let names: Vec<String> = match &cfg.pollutants {
        Some(p) => p.clone(),
        None => table.column_names().map(String::from).collect(),
    };
    let exposures = names
        .iter()
        .map(|n| Exposure::prepare(n.clone(), &table.series(n, &calendar)?))
        .collect::<Result<Vec<_>>>()?;

    let spec = GridSpec {
        cohorts: cfg.cohorts,
        seasons: cfg.seasons,
        lags: cfg.lags,
        exposures,
        models: cfg.models,
        alpha0: cfg.alpha0,
        min_events: a.min_events.unwrap_or(cfg.min_events),
        season_rule: cfg.season_rule,
    };
    m.param("name", &cfg.name);
    m.param("cells_per_model", spec.n_cells());
    m.param("alpha0", spec.alpha0);
    m.param("alpha_bonferroni", spec.alpha_bonferroni());
    m.param("min_events", spec.min_events);

    let results = run_grid(&spec, &events)?;
    let dir = output_dir(&a.out)?;
    let mut tally = csv::Writer::from_writer(create(&dir, "tally.csv")?);
    tally.write_record([
        "model", "cells", "fitted", "positive", "negative", "p05", "p01", "bonferroni",
        "alpha_bonferroni",
    ])?;
    for r in &results {
        r.write_csv(create(&dir, &r.file_name(&cfg.name))?)?;
        let t = r.summary();
        tally.write_record([
            r.model.label(),
            r.rows.len().to_string(),
            t.fitted.to_string(),
            t.positive.to_string(),
            t.negative.to_string(),
            t.p05.to_string(),
            t.p01.to_string(),
            t.bonferroni.to_string(),
            r.alpha_bonferroni.to_string(),
        ])?;
    }
    tally.flush()?;
    for pair in results.windows(2) {
        if let Some(c) = estimate_correlation(&pair[0], &pair[1]) {
            m.param(
                &format!("correlation.{}.{}", pair[0].model.label(), pair[1].model.label()),
                c,
            );
        }
    }
    finish(m, started, &dir)
}

const DIAGNOSES: [&str; 4] = ["stemi", "nstemi", "dysrhythmia", "heart_failure"];

fn cmd_synth(a: SynthArgs) -> Result<()> {
    let started = Instant::now();
    let mut m = RunManifest::new("synth");
    let cfg = match &a.config {
        Some(path) => {
            m.input("config", path)?;
            synth_config(&fs::read_to_string(path)?)?
        }
        None => synth_config("")?,
    };
    let seed = seed_or_draw(a.seed.or(cfg.seed));
    m.seed = Some(seed);
    m.param("exposures", cfg.exposures.join(","));
    m.param("n_events", cfg.n_events);
    m.param("beta", cfg.beta);
    m.param("gamma", cfg.gamma);
    m.param("driver", &cfg.driver);

    let calendar = Arc::new(cfg.calendar.clone());
    let columns: Vec<DailySeries> = (0..cfg.exposures.len())
        .map(|k| {
            let mut rng = stream(seed, &[TAG_SYNTH, k as u64]);
            generate_synthetic_series(&cfg.params, calendar.clone(), &mut rng)
                .map(|v| v + cfg.level)
        })
        .collect();

    let dir = output_dir(&a.out)?;
    let mut w = csv::Writer::from_writer(create(&dir, "series.csv")?);
    let mut header = vec!["date".to_string()];
    header.extend(cfg.exposures.iter().cloned());
    w.write_record(&header)?;
    for (i, date) in calendar.dates().enumerate() {
        let mut rec = vec![date.to_string()];
        rec.extend(
            columns
                .iter()
                .map(|s| s.values()[i].map(|v| v.to_string()).unwrap_or_default()),
        );
        w.write_record(&rec)?;
    }
    w.flush()?;

    if cfg.n_events > 0 {
        let k = cfg.exposures.iter().position(|e| *e == cfg.driver).unwrap_or(0);
        let driver = Exposure::prepare(cfg.driver.clone(), &columns[k])?;
        let mut rng = stream(seed, &[TAG_SYNTH, TAG_SAMPLE]);
        let mut days = sample_event_days(&driver.decomp, cfg.beta, cfg.gamma, cfg.n_events, &mut rng)?;
        days.sort();
        let mut w = csv::Writer::from_writer(create(&dir, "events.csv")?);
        w.write_record(["date", "sex", "age", "dx"])?;
        for d in days {
            let sex = if rng.random_bool(0.5) { "F" } else { "M" };
            let age: u32 = rng.random_range(35..=95);
            let dx = DIAGNOSES[rng.random_range(0..DIAGNOSES.len())];
            w.write_record([d.to_string(), sex.to_string(), age.to_string(), dx.to_string()])?;
        }
        w.flush()?;
    }
    finish(m, started, &dir)
}
