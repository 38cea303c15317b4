//! Monte-Carlo size and power experiments.
//!
//! Each replicate samples event days with probability proportional to
//! `exp(beta * daily + gamma * (yearly + monthly + weekly))`, builds the
//! time-stratified table at lag 0 and runs every requested strategy.

use std::f64::consts::PI;
use std::fmt;
use std::io::Write;
use std::str::FromStr;
use std::sync::Arc;
use std::time::{Duration, Instant};

use chrono::NaiveDate;
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::calibrate::{calibrate_fit, null_fits_indexed, NullConfig, NullScheme};
use crate::design::{DayCounts, DayLookup};
use crate::error::{Error, Result};
use crate::glm::{fit_design, wald_inference, Design, FitOptions, FitResult, ModelSpec};
use crate::numeric::{mean, sample_sd};
use crate::rng::{derive_seed, stream, TAG_CALIBRATE, TAG_SAMPLE};
use crate::series::{BlockKind, DailySeries, StudyCalendar, TrendDecomposition};

/// Shape of a synthetic exposure series.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyntheticParams {
    pub year_amp: f64,
    pub month_amp: f64,
    pub week_amp: f64,
    pub noise_sd: f64,
    /// Week-to-week autocorrelation of the weekly level.
    pub week_ar: f64,
}

impl Default for SyntheticParams {
    /// A weekly level that dominates both the seasonal cycles and the daily
    /// noise: the regime in which the plain exposure model is biased.
    fn default() -> Self {
        SyntheticParams {
            year_amp: 1.0,
            month_amp: 0.5,
            week_amp: 3.0,
            noise_sd: 1.0,
            week_ar: 0.7,
        }
    }
}

/// `year_amp*sin(2πt/365.25) + month_amp*sin(2πt/30.44) + week_amp*s(week) + noise`,
/// where `s` is a unit-variance AR(1) level held constant over each week block.
pub fn generate_synthetic_series<R: Rng>(
    params: &SyntheticParams,
    calendar: Arc<StudyCalendar>,
    rng: &mut R,
) -> DailySeries {
    let n_weeks = calendar.blocks(BlockKind::Week).len();
    let innovation_sd = (1.0 - params.week_ar * params.week_ar).max(0.0).sqrt();
    let mut levels = Vec::with_capacity(n_weeks);
    let mut s: f64 = rng.sample(StandardNormal);
    levels.push(s);
    for _ in 1..n_weeks {
        let e: f64 = rng.sample(StandardNormal);
        s = params.week_ar * s + innovation_sd * e;
        levels.push(s);
    }
    let values = (0..calendar.len())
        .map(|i| {
            let t = i as f64;
            let noise: f64 = rng.sample(StandardNormal);
            params.year_amp * (2.0 * PI * t / 365.25).sin()
                + params.month_amp * (2.0 * PI * t / 30.44).sin()
                + params.week_amp * levels[calendar.block_of(BlockKind::Week, i)]
                + params.noise_sd * noise
        })
        .collect();
    DailySeries::complete(calendar, values)
}

/// Exponent above which sampling weights are refused.
const MAX_EXPONENT: f64 = 700.0;

/// Day-index sampler for `P(day) ∝ exp(beta*daily + gamma*trend)` over observed days.
pub(crate) struct EventSampler {
    days: Vec<usize>,
    index: WeightedIndex<f64>,
}

impl EventSampler {
    pub(crate) fn new(decomp: &TrendDecomposition, beta: f64, gamma: f64) -> Result<Self> {
        let mut days = Vec::new();
        let mut exps = Vec::new();
        for (i, d) in decomp.daily.iter().enumerate() {
            if let Some(d) = d {
                let e = beta * d + gamma * decomp.trend(i);
                if !e.is_finite() || e.abs() > MAX_EXPONENT {
                    return Err(Error::WeightOverflow(e));
                }
                days.push(i);
                exps.push(e);
            }
        }
        if days.is_empty() {
            return Err(Error::NothingToSample);
        }
        let max = exps.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let weights = exps.iter().map(|e| (e - max).exp());
        let index = WeightedIndex::new(weights).map_err(|_| Error::NothingToSample)?;
        Ok(EventSampler { days, index })
    }

    pub(crate) fn sample<R: Rng>(&self, n: usize, rng: &mut R) -> Vec<usize> {
        (0..n).map(|_| self.days[self.index.sample(rng)]).collect()
    }

    #[cfg(test)]
    fn probabilities(&self) -> Vec<f64> {
        let w = self.index.weights().collect::<Vec<_>>();
        let total: f64 = w.iter().sum();
        w.iter().map(|x| x / total).collect()
    }
}

/// Draws `n_events` event days with replacement from the observed days.
pub fn sample_event_days<R: Rng>(
    decomp: &TrendDecomposition,
    beta: f64,
    gamma: f64,
    n_events: usize,
    rng: &mut R,
) -> Result<Vec<NaiveDate>> {
    let sampler = EventSampler::new(decomp, beta, gamma)?;
    let cal = decomp.calendar();
    Ok(sampler
        .sample(n_events, rng)
        .into_iter()
        .map(|i| cal.date_of(i))
        .collect())
}

/// Number of p-values at or below `alpha0`.
pub fn summarize_size_power(p_values: &[f64], alpha0: f64) -> usize {
    p_values.iter().filter(|&&p| p <= alpha0).count()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Strategy {
    Model1,
    Model2,
    Model1Calibrated,
    Model2Calibrated,
}

impl Strategy {
    pub const ALL: [Strategy; 4] = [
        Strategy::Model1,
        Strategy::Model2,
        Strategy::Model1Calibrated,
        Strategy::Model2Calibrated,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Strategy::Model1 => "model1",
            Strategy::Model2 => "model2",
            Strategy::Model1Calibrated => "model1+cal",
            Strategy::Model2Calibrated => "model2+cal",
        }
    }

    pub fn model(self) -> ModelSpec {
        match self {
            Strategy::Model1 | Strategy::Model1Calibrated => ModelSpec::model1(),
            Strategy::Model2 | Strategy::Model2Calibrated => ModelSpec::model2(),
        }
    }

    pub fn calibrated(self) -> bool {
        matches!(self, Strategy::Model1Calibrated | Strategy::Model2Calibrated)
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.replace("+calibration", "+cal");
        Strategy::ALL
            .into_iter()
            .find(|st| st.name() == s)
            .ok_or_else(|| Error::InvalidScenario(format!("unknown strategy {s:?}")))
    }
}

/// One simulation scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSpec {
    /// True transient effect on the daily component.
    pub beta: f64,
    /// Common value of the yearly, monthly and weekly trend coefficients.
    pub gamma: f64,
    pub n_events: usize,
    pub n_reps: usize,
    pub strategies: Vec<Strategy>,
    pub alpha0: f64,
    pub master_seed: u64,
    /// Permutation replicates per calibrated fit.
    pub calibration_reps: usize,
    pub null_scheme: NullScheme,
}

impl ScenarioSpec {
    /// 5,000 events, 1,000 replicates, all four strategies, alpha0 = 0.05.
    pub fn full_scale(beta: f64, gamma: f64, master_seed: u64) -> Self {
        ScenarioSpec {
            beta,
            gamma,
            n_events: 5000,
            n_reps: 1000,
            strategies: Strategy::ALL.to_vec(),
            alpha0: 0.05,
            master_seed,
            calibration_reps: NullConfig::DEFAULT_REPLICATES,
            null_scheme: NullScheme::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidScenario(m.to_string()));
        if self.n_events < 1 {
            return bad("n_events must be at least 1");
        }
        if self.n_reps < 1 {
            return bad("n_reps must be at least 1");
        }
        if !(self.alpha0 > 0.0 && self.alpha0 < 1.0) {
            return bad("alpha0 must lie strictly between 0 and 1");
        }
        if self.strategies.is_empty() {
            return bad("no strategies requested");
        }
        if !(self.beta.is_finite() && self.gamma.is_finite()) {
            return bad("beta and gamma must be finite");
        }
        if self.strategies.iter().any(|s| s.calibrated()) && self.calibration_reps < 2 {
            return bad("calibration needs at least 2 permutation replicates");
        }
        Ok(())
    }
}

/// Per-replicate results of one strategy.
#[derive(Debug, Clone, PartialEq)]
pub struct StrategyOutcome {
    pub strategy: Strategy,
    /// `None` where the replicate failed for this strategy.
    pub estimates: Vec<Option<f64>>,
    pub p_values: Vec<Option<f64>>,
}

impl StrategyOutcome {
    pub fn successful_p_values(&self) -> Vec<f64> {
        self.p_values.iter().flatten().copied().collect()
    }

    pub fn successful_estimates(&self) -> Vec<f64> {
        self.estimates.iter().flatten().copied().collect()
    }

    pub fn denominator(&self) -> usize {
        self.p_values.iter().flatten().count()
    }

    pub fn rejections(&self, alpha0: f64) -> usize {
        summarize_size_power(&self.successful_p_values(), alpha0)
    }

    pub fn rejection_rate(&self, alpha0: f64) -> f64 {
        self.rejections(alpha0) as f64 / self.denominator().max(1) as f64
    }

    /// Mean estimate and its Monte-Carlo standard error.
    pub fn mean_estimate(&self) -> (f64, f64) {
        let e = self.successful_estimates();
        let m = mean(e.iter().copied()).unwrap_or(f64::NAN);
        (m, sample_sd(&e) / (e.len() as f64).sqrt())
    }
}

#[derive(Debug, Clone)]
pub struct ScenarioSummary {
    pub spec: ScenarioSpec,
    pub outcomes: Vec<StrategyOutcome>,
    /// Replicates in which at least one strategy failed.
    pub failed_replicates: usize,
    pub elapsed: Duration,
}

impl ScenarioSummary {
    pub fn outcome(&self, strategy: Strategy) -> Option<&StrategyOutcome> {
        self.outcomes.iter().find(|o| o.strategy == strategy)
    }

    /// `strategy,rejections,denominator,rate,mean_estimate,mc_se`
    pub fn write_summary_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "strategy",
            "rejections",
            "denominator",
            "rate",
            "mean_estimate",
            "mc_se",
        ])?;
        for o in &self.outcomes {
            let (m, se) = o.mean_estimate();
            w.write_record([
                o.strategy.name().to_string(),
                o.rejections(self.spec.alpha0).to_string(),
                o.denominator().to_string(),
                o.rejection_rate(self.spec.alpha0).to_string(),
                m.to_string(),
                se.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Long format `replicate,strategy,estimate,p`; failed cells are empty.
    pub fn write_estimates_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["replicate", "strategy", "estimate", "p"])?;
        let cell = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        for r in 0..self.spec.n_reps {
            for o in &self.outcomes {
                w.write_record([
                    r.to_string(),
                    o.strategy.name().to_string(),
                    cell(o.estimates[r]),
                    cell(o.p_values[r]),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

type ReplicateResult = Vec<Option<(f64, f64)>>;

fn run_replicate(
    spec: &ScenarioSpec,
    lookup: &DayLookup<'_>,
    sampler: &EventSampler,
    r: usize,
) -> ReplicateResult {
    let mut rng = stream(spec.master_seed, &[TAG_SAMPLE, r as u64]);
    let hazards = sampler.sample(spec.n_events, &mut rng);
    let counts = DayCounts::from_hazards(lookup, &hazards);
    let opts = FitOptions::default();

    let mut models: Vec<ModelSpec> = Vec::new();
    for s in &spec.strategies {
        if !models.contains(&s.model()) {
            models.push(s.model());
        }
    }
    let fits: Vec<Option<FitResult>> = models
        .iter()
        .map(|m| {
            let design = Design::from_day_counts(lookup, &counts, m).ok()?;
            fit_design(&design, &opts).ok()
        })
        .collect();

    let calibrated: Vec<ModelSpec> = models
        .iter()
        .filter(|m| spec.strategies.iter().any(|s| s.calibrated() && s.model() == **m))
        .cloned()
        .collect();
    let nulls = if calibrated.is_empty() {
        None
    } else {
        let cfg = NullConfig {
            replicates: spec.calibration_reps,
            seed: derive_seed(spec.master_seed, &[TAG_CALIBRATE, r as u64]),
            scheme: spec.null_scheme,
        };
        null_fits_indexed(lookup, &hazards, &calibrated, &cfg).ok()
    };

    spec.strategies
        .iter()
        .map(|s| {
            let model = s.model();
            let k = models.iter().position(|m| *m == model)?;
            let fit = fits[k].as_ref()?;
            if s.calibrated() {
                let null = nulls.as_ref()?.iter().find(|n| n.spec == model)?;
                let c = calibrate_fit(fit, null).ok()?;
                Some((c.beta_cal, c.p_perm))
            } else {
                let w = wald_inference(fit, &model.focal()).ok()?;
                Some((w.estimate, w.p))
            }
        })
        .collect()
}

/// Runs every replicate of a scenario. Replicates draw from streams derived
/// from `(master_seed, replicate)`, so the summary does not depend on the
/// thread schedule. Runs on the current rayon pool.
pub fn run_scenario(
    spec: &ScenarioSpec,
    series: &DailySeries,
    decomp: &TrendDecomposition,
) -> Result<ScenarioSummary> {
    spec.validate()?;
    let started = Instant::now();
    let lookup = DayLookup::new(series, decomp, &[])?;
    let sampler = EventSampler::new(decomp, spec.beta, spec.gamma)?;
    let results: Vec<ReplicateResult> = (0..spec.n_reps)
        .into_par_iter()
        .map(|r| run_replicate(spec, &lookup, &sampler, r))
        .collect();

    let failed = results.iter().filter(|r| r.iter().any(Option::is_none)).count();
    if failed * 20 > spec.n_reps {
        return Err(Error::ScenarioUnstable {
            failed,
            total: spec.n_reps,
        });
    }
    if failed > 0 {
        log::warn!("{failed} of {} replicates had a failed fit", spec.n_reps);
    }
    let outcomes = spec
        .strategies
        .iter()
        .enumerate()
        .map(|(k, &strategy)| StrategyOutcome {
            strategy,
            estimates: results.iter().map(|r| r[k].map(|v| v.0)).collect(),
            p_values: results.iter().map(|r| r[k].map(|v| v.1)).collect(),
        })
        .collect();
    Ok(ScenarioSummary {
        spec: spec.clone(),
        outcomes,
        failed_replicates: failed,
        elapsed: started.elapsed(),
    })
}
