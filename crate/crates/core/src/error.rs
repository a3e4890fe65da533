use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: expected {expected}, found {found}")]
    Shape { expected: String, found: String },

    #[error("{what} = {value} is out of range [{min}, {max}]")]
    OutOfRange {
        what: &'static str,
        value: i64,
        min: i64,
        max: i64,
    },

    #[error("month {month}: labor force is empty, unemployment rate undefined")]
    ZeroLaborForce { month: usize },

    #[error("population generation failed at month {month}: {reason}")]
    Generation { month: usize, reason: String },

    #[error("calibration failed at month {month}: {reason}")]
    Calibration { month: usize, reason: String },

    #[error("covariance matrix is not symmetric (max |S - S'| = {max_gap:e})")]
    Asymmetric { max_gap: f64 },

    #[error("draw r={draw}: {source}")]
    Draw {
        draw: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("{module}: {source}")]
    Context {
        module: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn shape(expected: impl ToString, found: impl ToString) -> Self {
        Error::Shape {
            expected: expected.to_string(),
            found: found.to_string(),
        }
    }

    pub(crate) fn at_draw(self, draw: usize) -> Self {
        match self {
            e @ Error::Draw { .. } => e,
            e => Error::Draw {
                draw,
                source: Box::new(e),
            },
        }
    }

    pub(crate) fn in_module(self, module: &'static str) -> Self {
        Error::Context {
            module,
            source: Box::new(self),
        }
    }
}
