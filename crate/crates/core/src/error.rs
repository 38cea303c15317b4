use chrono::NaiveDate;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Broad failure class, used by the command-line front end to pick an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Usage,
    Data,
    Numerical,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid study period: start {start} is after end {end}")]
    InvalidPeriod { start: NaiveDate, end: NaiveDate },
    #[error("duplicate date {0} in input")]
    DuplicateDate(NaiveDate),
    #[error("date {date} lies outside the study period {start}..{end}")]
    DateOutOfPeriod {
        date: NaiveDate,
        start: NaiveDate,
        end: NaiveDate,
    },
    #[error("line {line}: cannot parse {what} from {text:?}")]
    Parse {
        line: usize,
        what: &'static str,
        text: String,
    },
    #[error("missing column {0:?}")]
    MissingColumn(String),
    #[error("degenerate scale: interquartile range is {0}")]
    DegenerateScale(f64),
    #[error("need at least two distinct observed values, found {0}")]
    TooFewValues(usize),
    #[error("{kind} block {label} has no observed days")]
    UndefinedBlock { kind: &'static str, label: String },
    #[error("series and decomposition do not share a calendar")]
    CalendarMismatch,
    #[error("lag {0} is outside 0..=4")]
    InvalidLag(i64),
    #[error("event list is empty")]
    EmptyEvents,
    #[error("every stratum was dropped because of missing exposure or out-of-window hazard days")]
    AllStrataDropped,
    #[error("analysis table is empty")]
    EmptyTable,
    #[error("design matrix is rank deficient: column(s) {0:?} are linear combinations of earlier columns")]
    Collinear(Vec<String>),
    #[error("separation detected: coefficient {name} reached {value:.3}")]
    Separation { name: String, value: f64 },
    #[error("unknown coefficient {0:?}")]
    UnknownCoefficient(String),
    #[error("unknown covariate column {0:?}")]
    UnknownCovariate(String),
    #[error("coefficient {0:?} has a non-positive or non-finite standard error")]
    DegenerateInference(String),
    #[error("sampling weight exponent {0:.1} overflows; rescale the exposure series")]
    WeightOverflow(f64),
    #[error("no observed days to sample from")]
    NothingToSample,
    #[error("calibration needs at least 2 permutation replicates, got {0}")]
    TooFewPermutations(usize),
    #[error("calibration unstable: {failed} of {requested} permutation fits failed")]
    CalibrationUnstable { failed: usize, requested: usize },
    #[error("no null reference estimates available")]
    NoReference,
    #[error("scenario unstable: {failed} of {total} replicates failed")]
    ScenarioUnstable { failed: usize, total: usize },
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("config line {line}: {message}")]
    Config { line: usize, message: String },
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Usage(_) | Error::InvalidLag(_) | Error::Config { .. } => ErrorKind::Usage,
            Error::DegenerateScale(_)
            | Error::Collinear(_)
            | Error::Separation { .. }
            | Error::DegenerateInference(_)
            | Error::WeightOverflow(_)
            | Error::CalibrationUnstable { .. }
            | Error::ScenarioUnstable { .. } => ErrorKind::Numerical,
            _ => ErrorKind::Data,
        }
    }
}
