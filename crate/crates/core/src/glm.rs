//! Unconditional logistic regression for case-crossover tables.
//!
//! Model 1 regresses the hazard indicator on the raw exposure. Model 2 adds
//! the yearly, monthly and weekly trend components as adjustment terms.
//! Model 3 swaps the raw exposure for its daily residual; because the four
//! components sum to the exposure, models 2 and 3 are reparameterisations
//! of each other and give the same focal estimate.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;

use nalgebra::{DMatrix, DVector};

use crate::design::{CaseCrossoverTable, DayCounts, DayLookup, TableRow};
use crate::error::{Error, Result};
use crate::numeric::{two_sided_p, Z_975};

/// A regressor drawn from a table row.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Column {
    Exposure,
    Yearly,
    Monthly,
    Weekly,
    Daily,
    Covariate(String),
}

impl Column {
    pub fn name(&self) -> &str {
        match self {
            Column::Exposure => "exposure",
            Column::Yearly => "yearly",
            Column::Monthly => "monthly",
            Column::Weekly => "weekly",
            Column::Daily => "daily",
            Column::Covariate(n) => n,
        }
    }

    pub fn parse(name: &str) -> Column {
        match name {
            "exposure" => Column::Exposure,
            "yearly" => Column::Yearly,
            "monthly" => Column::Monthly,
            "weekly" => Column::Weekly,
            "daily" => Column::Daily,
            other => Column::Covariate(other.to_string()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum ModelKind {
    /// intercept + exposure
    Model1,
    /// intercept + exposure + yearly + monthly + weekly
    Model2,
    /// intercept + daily + yearly + monthly + weekly
    Model3,
    /// intercept + the listed columns; the first one is the focal term
    Custom(Vec<Column>),
}

/// Which regressors enter the linear predictor, plus optional adjustment
/// covariates appended after the model's own terms.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ModelSpec {
    pub kind: ModelKind,
    pub covariates: Vec<String>,
}

impl ModelSpec {
    pub fn model1() -> Self {
        Self::new(ModelKind::Model1)
    }

    pub fn model2() -> Self {
        Self::new(ModelKind::Model2)
    }

    pub fn model3() -> Self {
        Self::new(ModelKind::Model3)
    }

    pub fn custom(columns: Vec<Column>) -> Self {
        Self::new(ModelKind::Custom(columns))
    }

    pub fn new(kind: ModelKind) -> Self {
        ModelSpec {
            kind,
            covariates: Vec::new(),
        }
    }

    pub fn with_covariates(mut self, names: impl IntoIterator<Item = impl Into<String>>) -> Self {
        self.covariates = names.into_iter().map(Into::into).collect();
        self
    }

    /// Regressors after the intercept, in design-matrix order.
    pub fn columns(&self) -> Vec<Column> {
        use Column::*;
        let mut cols = match &self.kind {
            ModelKind::Model1 => vec![Exposure],
            ModelKind::Model2 => vec![Exposure, Yearly, Monthly, Weekly],
            ModelKind::Model3 => vec![Daily, Yearly, Monthly, Weekly],
            ModelKind::Custom(c) => c.clone(),
        };
        cols.extend(self.covariates.iter().map(|n| Covariate(n.clone())));
        cols
    }

    /// The coefficient that carries the transient exposure effect.
    pub fn focal(&self) -> String {
        self.columns()
            .first()
            .map(|c| c.name().to_string())
            .unwrap_or_else(|| INTERCEPT.to_string())
    }

    pub fn label(&self) -> String {
        match &self.kind {
            ModelKind::Model1 => "model1".into(),
            ModelKind::Model2 => "model2".into(),
            ModelKind::Model3 => "model3".into(),
            ModelKind::Custom(c) => {
                let names: Vec<&str> = c.iter().map(Column::name).collect();
                format!("custom({})", names.join("+"))
            }
        }
    }
}

impl fmt::Display for ModelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

pub const INTERCEPT: &str = "intercept";

/// Binomial regression data: distinct covariate rows with success and
/// trial counts. Case-crossover tables collapse to one row per calendar day.
#[derive(Debug, Clone)]
pub struct Design {
    names: Vec<String>,
    x: Vec<f64>,
    successes: Vec<f64>,
    trials: Vec<f64>,
}

impl Design {
    /// `rows` exclude the intercept, which is prepended automatically.
    pub fn new(
        regressors: Vec<String>,
        rows: Vec<Vec<f64>>,
        successes: Vec<f64>,
        trials: Vec<f64>,
    ) -> Self {
        assert_eq!(rows.len(), successes.len());
        assert_eq!(rows.len(), trials.len());
        let p = regressors.len() + 1;
        let mut x = Vec::with_capacity(rows.len() * p);
        for r in &rows {
            assert_eq!(r.len() + 1, p, "row width must match the regressor names");
            x.push(1.0);
            x.extend_from_slice(r);
        }
        let mut names = vec![INTERCEPT.to_string()];
        names.extend(regressors);
        Design {
            names,
            x,
            successes,
            trials,
        }
    }

    /// One Bernoulli observation per row.
    pub fn from_binary(regressors: Vec<String>, rows: Vec<Vec<f64>>, y: &[bool]) -> Self {
        let s = y.iter().map(|&v| v as u8 as f64).collect();
        let t = vec![1.0; y.len()];
        Self::new(regressors, rows, s, t)
    }

    /// Collapses a case-crossover table by calendar day. Every regressor is a
    /// function of the date, so the likelihood is unchanged.
    pub fn from_table(table: &CaseCrossoverTable, spec: &ModelSpec) -> Result<Self> {
        if table.is_empty() {
            return Err(Error::EmptyTable);
        }
        let extract = column_extractors(&spec.columns(), &table.covariate_names)?;
        let n_days = table.calendar().len();
        let mut first: Vec<Option<&TableRow>> = vec![None; n_days];
        let mut counts = vec![(0u32, 0u32); n_days];
        for r in &table.rows {
            first[r.day].get_or_insert(r);
            if r.hazard {
                counts[r.day].0 += 1;
            } else {
                counts[r.day].1 += 1;
            }
        }
        let regressors = spec.columns().iter().map(|c| c.name().to_string()).collect();
        let mut rows = Vec::new();
        let mut s = Vec::new();
        let mut t = Vec::new();
        for (day, row) in first.iter().enumerate() {
            if let Some(row) = row {
                rows.push(extract.iter().map(|f| f(row)).collect());
                s.push(counts[day].0 as f64);
                t.push((counts[day].0 + counts[day].1) as f64);
            }
        }
        Ok(Design::new(regressors, rows, s, t))
    }

    pub(crate) fn from_day_counts(
        lookup: &DayLookup<'_>,
        counts: &DayCounts,
        spec: &ModelSpec,
    ) -> Result<Self> {
        let columns = spec.columns();
        for c in &columns {
            if let Column::Covariate(name) = c {
                if !lookup.covariate_names().any(|n| n == name) {
                    return Err(Error::UnknownCovariate(name.clone()));
                }
            }
        }
        if counts.strata == 0 {
            return Err(Error::EmptyTable);
        }
        let p = columns.len() + 1;
        let mut names = vec![INTERCEPT.to_string()];
        names.extend(columns.iter().map(|c| c.name().to_string()));
        let mut x = Vec::new();
        let mut successes = Vec::new();
        let mut trials = Vec::new();
        for day in 0..counts.cases.len() {
            let (c, r) = (counts.cases[day], counts.referents[day]);
            if c + r == 0 {
                continue;
            }
            x.push(1.0);
            for col in &columns {
                x.push(lookup.value(day, col)?);
            }
            successes.push(c as f64);
            trials.push((c + r) as f64);
        }
        debug_assert_eq!(x.len(), successes.len() * p);
        Ok(Design {
            names,
            x,
            successes,
            trials,
        })
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn n_rows(&self) -> usize {
        self.successes.len()
    }

    pub fn n_params(&self) -> usize {
        self.names.len()
    }

    fn row(&self, i: usize) -> &[f64] {
        let p = self.n_params();
        &self.x[i * p..(i + 1) * p]
    }

    fn total(&self) -> (f64, f64) {
        let s: f64 = self.successes.iter().sum();
        let t: f64 = self.trials.iter().sum();
        (s, t - s)
    }
}

type Extractor = Box<dyn Fn(&TableRow) -> f64 + Send + Sync>;

fn column_extractors(columns: &[Column], covariate_names: &[String]) -> Result<Vec<Extractor>> {
    columns
        .iter()
        .map(|c| -> Result<Extractor> {
            Ok(match c {
                Column::Exposure => Box::new(|r: &TableRow| r.exposure),
                Column::Yearly => Box::new(|r: &TableRow| r.yearly),
                Column::Monthly => Box::new(|r: &TableRow| r.monthly),
                Column::Weekly => Box::new(|r: &TableRow| r.weekly),
                Column::Daily => Box::new(|r: &TableRow| r.daily),
                Column::Covariate(name) => {
                    let k = covariate_names
                        .iter()
                        .position(|n| n == name)
                        .ok_or_else(|| Error::UnknownCovariate(name.clone()))?;
                    Box::new(move |r: &TableRow| r.covariates[k])
                }
            })
        })
        .collect()
}

/// Stopping rules for the Newton iteration.
#[derive(Debug, Clone, Copy)]
pub struct FitOptions {
    pub max_iter: usize,
    /// Converged once the max-norm of the score falls below this.
    pub score_tol: f64,
    /// Iteration stops early when an accepted step changes the
    /// log-likelihood by less than this relative amount and no further
    /// improvement is possible.
    pub rel_loglik_tol: f64,
    /// A slope coefficient beyond this magnitude while the likelihood is
    /// still improving is treated as separation.
    pub separation_bound: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            max_iter: 50,
            score_tol: 1e-8,
            rel_loglik_tol: 1e-10,
            separation_bound: 15.0,
        }
    }
}

/// Wald summary of one coefficient.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WaldSummary {
    pub estimate: f64,
    pub se: f64,
    pub z: f64,
    pub p: f64,
    pub odds_ratio: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

impl WaldSummary {
    pub fn from_estimate(estimate: f64, se: f64) -> Self {
        let z = estimate / se;
        WaldSummary {
            estimate,
            se,
            z,
            p: two_sided_p(z),
            odds_ratio: estimate.exp(),
            ci_low: (estimate - Z_975 * se).exp(),
            ci_high: (estimate + Z_975 * se).exp(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct FitResult {
    pub names: Vec<String>,
    pub coefficients: Vec<f64>,
    pub standard_errors: Vec<f64>,
    pub log_likelihood: f64,
    /// Log-likelihood after every accepted step, starting from the initial point.
    pub loglik_trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// Max-norm of the score at the returned estimate.
    pub score_norm: f64,
    pub n_rows: usize,
    pub n_cases: f64,
    pub n_referents: f64,
}

impl FitResult {
    fn index(&self, name: &str) -> Result<usize> {
        self.names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| Error::UnknownCoefficient(name.to_string()))
    }

    pub fn coefficient(&self, name: &str) -> Result<f64> {
        Ok(self.coefficients[self.index(name)?])
    }

    pub fn standard_error(&self, name: &str) -> Result<f64> {
        Ok(self.standard_errors[self.index(name)?])
    }

    pub fn coefficient_map(&self) -> BTreeMap<&str, f64> {
        self.names
            .iter()
            .map(String::as_str)
            .zip(self.coefficients.iter().copied())
            .collect()
    }

    /// Wald test and odds ratio for every coefficient, in design order.
    pub fn summaries(&self) -> Vec<(&str, WaldSummary)> {
        self.names
            .iter()
            .zip(self.coefficients.iter().zip(&self.standard_errors))
            .map(|(n, (&b, &se))| (n.as_str(), WaldSummary::from_estimate(b, se)))
            .collect()
    }
}

/// z, two-sided normal p-value, odds ratio and 95% interval for one coefficient.
pub fn wald_inference(fit: &FitResult, name: &str) -> Result<WaldSummary> {
    let i = fit.index(name)?;
    let se = fit.standard_errors[i];
    if !(se.is_finite() && se > 0.0) {
        return Err(Error::DegenerateInference(name.to_string()));
    }
    Ok(WaldSummary::from_estimate(fit.coefficients[i], se))
}

fn log1p_exp(eta: f64) -> f64 {
    if eta > 0.0 {
        eta + (-eta).exp().ln_1p()
    } else {
        eta.exp().ln_1p()
    }
}

fn sigmoid(eta: f64) -> f64 {
    if eta >= 0.0 {
        1.0 / (1.0 + (-eta).exp())
    } else {
        let e = eta.exp();
        e / (1.0 + e)
    }
}

fn linear_predictor(row: &[f64], beta: &[f64]) -> f64 {
    row.iter().zip(beta).map(|(x, b)| x * b).sum()
}

/// Binomial log-likelihood (without the constant combinatorial term).
pub fn log_likelihood_at(design: &Design, beta: &[f64]) -> f64 {
    (0..design.n_rows())
        .map(|i| {
            let eta = linear_predictor(design.row(i), beta);
            design.successes[i] * eta - design.trials[i] * log1p_exp(eta)
        })
        .sum()
}

/// Gradient of [`log_likelihood_at`].
pub fn score_at(design: &Design, beta: &[f64]) -> Vec<f64> {
    let p = design.n_params();
    let mut g = vec![0.0; p];
    for i in 0..design.n_rows() {
        let row = design.row(i);
        let r = design.successes[i] - design.trials[i] * sigmoid(linear_predictor(row, beta));
        for (gj, xj) in g.iter_mut().zip(row) {
            *gj += xj * r;
        }
    }
    g
}

struct Evaluation {
    loglik: f64,
    score: DVector<f64>,
    information: DMatrix<f64>,
}

fn evaluate(design: &Design, beta: &[f64]) -> Evaluation {
    let p = design.n_params();
    let mut loglik = 0.0;
    let mut score = DVector::zeros(p);
    let mut info = DMatrix::zeros(p, p);
    for i in 0..design.n_rows() {
        let row = design.row(i);
        let eta = linear_predictor(row, beta);
        let mu = sigmoid(eta);
        let t = design.trials[i];
        loglik += design.successes[i] * eta - t * log1p_exp(eta);
        let r = design.successes[i] - t * mu;
        let w = t * mu * (1.0 - mu);
        for a in 0..p {
            score[a] += row[a] * r;
            let wa = w * row[a];
            for b in a..p {
                info[(a, b)] += wa * row[b];
            }
        }
    }
    for a in 0..p {
        for b in 0..a {
            info[(a, b)] = info[(b, a)];
        }
    }
    Evaluation {
        loglik,
        score,
        information: info,
    }
}

/// Names of regressors that are (numerically) linear combinations of
/// earlier columns, judged on the trial-weighted Gram matrix in correlation
/// scale.
pub fn dependent_columns(design: &Design) -> Vec<String> {
    const TOL: f64 = 1e-10;
    let p = design.n_params();
    let mut gram = DMatrix::<f64>::zeros(p, p);
    for i in 0..design.n_rows() {
        let row = design.row(i);
        let t = design.trials[i];
        for a in 0..p {
            for b in a..p {
                gram[(a, b)] += t * row[a] * row[b];
            }
        }
    }
    // Cholesky on the normalised Gram matrix, skipping pivots that vanish.
    let scale: Vec<f64> = (0..p).map(|a| gram[(a, a)].sqrt()).collect();
    let mut l = DMatrix::<f64>::zeros(p, p);
    let mut accepted: Vec<usize> = Vec::new();
    let mut dependent = Vec::new();
    for j in 0..p {
        if scale[j] == 0.0 {
            dependent.push(design.names[j].clone());
            continue;
        }
        let g = |a: usize, b: usize| {
            let (a, b) = if a <= b { (a, b) } else { (b, a) };
            gram[(a, b)] / (scale[a] * scale[b])
        };
        let mut diag = g(j, j);
        for &k in &accepted {
            diag -= l[(j, k)] * l[(j, k)];
        }
        if diag < TOL {
            dependent.push(design.names[j].clone());
            continue;
        }
        let d = diag.sqrt();
        l[(j, j)] = d;
        for i in (j + 1)..p {
            let mut v = g(i, j);
            for &k in &accepted {
                v -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = v / d;
        }
        accepted.push(j);
    }
    dependent
}

/// Maximum-likelihood fit of a binomial design by Newton-Raphson (IRLS)
/// with step halving.
pub fn fit_design(design: &Design, opts: &FitOptions) -> Result<FitResult> {
    if design.n_rows() == 0 {
        return Err(Error::EmptyTable);
    }
    let dependent = dependent_columns(design);
    if !dependent.is_empty() {
        return Err(Error::Collinear(dependent));
    }
    let (cases, referents) = design.total();
    if cases == 0.0 || referents == 0.0 {
        return Err(Error::Separation {
            name: INTERCEPT.into(),
            value: f64::INFINITY,
        });
    }
    let p = design.n_params();
    let mut beta = vec![0.0; p];
    beta[0] = (cases / referents).ln();

    let mut eval = evaluate(design, &beta);
    let mut trace = vec![eval.loglik];
    let mut iterations = 0;
    let mut converged = false;

    while iterations < opts.max_iter {
        if eval.score.amax() < opts.score_tol {
            converged = true;
            break;
        }
        let Some(chol) = eval.information.clone().cholesky() else {
            return Err(Error::Collinear(design.names[1..].to_vec()));
        };
        let step = chol.solve(&eval.score);
        iterations += 1;

        let mut lambda = 1.0;
        let mut accepted = None;
        for _ in 0..40 {
            let trial: Vec<f64> = beta.iter().zip(step.iter()).map(|(b, s)| b + lambda * s).collect();
            let ll = log_likelihood_at(design, &trial);
            if ll.is_finite() && ll >= eval.loglik - 1e-12 * eval.loglik.abs() {
                accepted = Some(trial);
                break;
            }
            lambda *= 0.5;
        }
        let Some(next) = accepted else {
            // No ascent direction left at machine precision.
            break;
        };
        let next_eval = evaluate(design, &next);
        let improving = next_eval.loglik > eval.loglik;
        if improving {
            if let Some(j) = (1..p).find(|&j| next[j].abs() > opts.separation_bound) {
                return Err(Error::Separation {
                    name: design.names[j].clone(),
                    value: next[j],
                });
            }
        }
        let rel = (next_eval.loglik - eval.loglik).abs() / eval.loglik.abs().max(1.0);
        beta = next;
        eval = next_eval;
        trace.push(eval.loglik);
        if rel < opts.rel_loglik_tol && !improving {
            break;
        }
    }
    if !converged && eval.score.amax() < opts.score_tol {
        converged = true;
    }

    let cov = eval
        .information
        .clone()
        .cholesky()
        .map(|c| c.inverse())
        .ok_or_else(|| Error::Collinear(design.names[1..].to_vec()))?;
    let standard_errors = (0..p).map(|j| cov[(j, j)].max(0.0).sqrt()).collect();
    Ok(FitResult {
        names: design.names.clone(),
        coefficients: beta,
        standard_errors,
        log_likelihood: eval.loglik,
        loglik_trace: trace,
        iterations,
        converged,
        score_norm: eval.score.amax(),
        n_rows: design.n_rows(),
        n_cases: cases,
        n_referents: referents,
    })
}

/// Fits `spec` to a case-crossover table with the default stopping rules.
pub fn fit_logistic(table: &CaseCrossoverTable, spec: &ModelSpec) -> Result<FitResult> {
    fit_design(&Design::from_table(table, spec)?, &FitOptions::default())
}

/// Writes `model,coef,estimate,se,z,p,or,ci_low,ci_high,loglik,converged`.
pub fn write_fits_csv<W: Write>(out: W, fits: &[(String, &FitResult)]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "model", "coef", "estimate", "se", "z", "p", "or", "ci_low", "ci_high", "loglik",
        "converged",
    ])?;
    for (model, fit) in fits {
        for (name, s) in fit.summaries() {
            w.write_record([
                model.clone(),
                name.to_string(),
                s.estimate.to_string(),
                s.se.to_string(),
                s.z.to_string(),
                s.p.to_string(),
                s.odds_ratio.to_string(),
                s.ci_low.to_string(),
                s.ci_high.to_string(),
                fit.log_likelihood.to_string(),
                fit.converged.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Expands 2x2 counts into a binary-exposure design.
    fn two_by_two(a: u32, b: u32, c: u32, d: u32) -> Design {
        // a: y=1 exposed, b: y=1 unexposed, c: y=0 exposed, d: y=0 unexposed
        let mut rows = Vec::new();
        let mut y = Vec::new();
        for (n, x, yy) in [(a, 1.0, true), (b, 0.0, true), (c, 1.0, false), (d, 0.0, false)] {
            for _ in 0..n {
                rows.push(vec![x]);
                y.push(yy);
            }
        }
        Design::from_binary(vec!["exposure".into()], rows, &y)
    }

    #[test]
    fn two_by_two_closed_form() {
        let fit = fit_design(&two_by_two(30, 20, 40, 60), &FitOptions::default()).unwrap();
        assert!(fit.converged);
        let b = fit.coefficient("exposure").unwrap();
        let se = fit.standard_error("exposure").unwrap();
        assert!((b - 0.810930216216329).abs() < 1e-8);
        assert!((se - 0.125f64.sqrt()).abs() < 1e-8);
        assert!(fit.score_norm < 1e-8);
    }

    #[test]
    fn wald_of_two_by_two() {
        let s = WaldSummary::from_estimate(0.81093, 0.35355);
        assert!((s.z - 2.2937).abs() < 1e-3);
        assert!((s.p - 0.0218).abs() < 5e-4);
        assert!((s.odds_ratio - 2.25).abs() < 1e-4);
        assert!((s.ci_low - 1.125).abs() < 1e-3);
        assert!((s.ci_high - 4.499).abs() < 2e-3);
        let zero = WaldSummary::from_estimate(0.0, 0.4);
        assert_eq!(zero.z, 0.0);
        assert_eq!(zero.p, 1.0);
        assert_eq!(zero.odds_ratio, 1.0);
        assert!((zero.ci_low * zero.ci_high - 1.0).abs() < 1e-12);
    }

    #[test]
    fn reported_interval_is_consistent_with_a_wald_interval() {
        // OR 1.319 (1.094, 1.591): log-symmetric around ln 1.319 up to rounding.
        let b = 1.319f64.ln();
        let se = (1.591f64.ln() - 1.094f64.ln()) / (2.0 * Z_975);
        let s = WaldSummary::from_estimate(b, se);
        assert!((s.ci_low - 1.094).abs() < 1e-3);
        assert!((s.ci_high - 1.591).abs() < 1e-3);
    }

    #[test]
    fn constant_column_is_collinear_with_intercept() {
        let rows = (0..20).map(|_| vec![3.0]).collect();
        let y: Vec<bool> = (0..20).map(|i| i % 3 == 0).collect();
        let d = Design::from_binary(vec!["exposure".into()], rows, &y);
        match fit_design(&d, &FitOptions::default()) {
            Err(Error::Collinear(cols)) => assert_eq!(cols, vec!["exposure".to_string()]),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn perfectly_separated_data_is_reported() {
        let rows = (0..20).map(|i| vec![i as f64]).collect();
        let y: Vec<bool> = (0..20).map(|i| i >= 10).collect();
        let d = Design::from_binary(vec!["x".into()], rows, &y);
        assert!(matches!(
            fit_design(&d, &FitOptions::default()),
            Err(Error::Separation { .. })
        ));
    }

    #[test]
    fn unknown_coefficient_and_degenerate_se() {
        let fit = fit_design(&two_by_two(5, 6, 7, 8), &FitOptions::default()).unwrap();
        assert!(matches!(wald_inference(&fit, "nope"), Err(Error::UnknownCoefficient(_))));
        let mut broken = fit.clone();
        broken.standard_errors[1] = 0.0;
        assert!(matches!(
            wald_inference(&broken, "exposure"),
            Err(Error::DegenerateInference(_))
        ));
    }

    #[test]
    fn loglik_trace_never_decreases() {
        let rows: Vec<Vec<f64>> = (0..200).map(|i| vec![(i as f64 * 0.37).sin() * 3.0]).collect();
        let y: Vec<bool> = (0..200).map(|i| (i * 7919) % 11 < 4).collect();
        let d = Design::from_binary(vec!["x".into()], rows, &y);
        let fit = fit_design(&d, &FitOptions::default()).unwrap();
        for w in fit.loglik_trace.windows(2) {
            assert!(w[1] >= w[0] - 1e-9 * w[0].abs());
        }
    }

    #[test]
    fn day_counts_give_the_same_fit_as_the_full_table() {
        use crate::design::{build_table, EventList};
        use crate::series::{decompose, DailySeries, StudyCalendar};
        use std::sync::Arc;

        let cal = Arc::new(StudyCalendar::edmonton_decade());
        let values = (0..cal.len())
            .map(|i| (i % 13 != 5).then(|| ((i * 37) % 101) as f64 / 10.0 + (i as f64 / 9.0).sin()))
            .collect();
        let series = DailySeries::new(cal.clone(), values);
        let decomp = decompose(&series).unwrap();
        let hazards: Vec<usize> = (0..600).map(|k| (k * 7919 + 11) % cal.len()).collect();
        let dates: Vec<_> = hazards.iter().map(|&h| cal.date_of(h)).collect();
        let table = build_table(&EventList::from_dates(dates, 0).unwrap(), &series, &decomp, &[]).unwrap();

        let lookup = DayLookup::new(&series, &decomp, &[]).unwrap();
        let counts = DayCounts::from_hazards(&lookup, &hazards);
        assert_eq!(counts.strata, table.n_strata());
        for spec in [ModelSpec::model1(), ModelSpec::model2(), ModelSpec::model3()] {
            let full = fit_design(&Design::from_table(&table, &spec).unwrap(), &FitOptions::default()).unwrap();
            let fast = fit_design(&Design::from_day_counts(&lookup, &counts, &spec).unwrap(), &FitOptions::default()).unwrap();
            for (a, b) in full.coefficients.iter().zip(&fast.coefficients) {
                assert!((a - b).abs() < 1e-10);
            }
            assert!((full.log_likelihood - fast.log_likelihood).abs() < 1e-8);
        }
    }
}
