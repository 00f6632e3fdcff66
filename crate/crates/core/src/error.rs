use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    Input(String),

    #[error("singular local fit at {window}: {reason}")]
    SingularFit { window: String, reason: String },

    #[error("residual sum of squares {rss:e} is below the interpolation floor {floor:e}; BIC is undefined")]
    Interpolation { rss: f64, floor: f64 },

    #[error("query {value} is outside the training range [{lo}, {hi}]")]
    OutOfRange { value: f64, lo: f64, hi: f64 },

    #[error("missing column `{0}`")]
    MissingColumn(String),

    #[error("csv error at row {row}, column `{column}`: {reason}")]
    Csv {
        row: usize,
        column: String,
        reason: String,
    },

    #[error("structural spec error: {0}")]
    Spec(String),

    #[error("i/o error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
