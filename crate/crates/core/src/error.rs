use std::fmt;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Pipeline stage a failure originated in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Baseline,
    FineTune,
    Synthesize,
    Filter,
    Retrain,
    Generator,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Stage::Baseline => "step 1 (train baseline classifier)",
            Stage::FineTune => "step 2 (fit language model)",
            Stage::Synthesize => "step 3 (synthesize candidates)",
            Stage::Filter => "step 4 (filter candidates)",
            Stage::Retrain => "retrain on augmented data",
            Stage::Generator => "external generator",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("{source_name}, line {line}: {message}")]
    Record {
        source_name: String,
        line: usize,
        message: String,
    },

    #[error("no usable records in {0}")]
    EmptyDataset(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("class `{0}` has no training examples")]
    EmptyClass(String),

    #[error("unknown class `{0}`")]
    UnknownClass(String),

    #[error("reserved token `{token}` found in sentence `{text}`")]
    ReservedToken { token: String, text: String },

    #[error("non-finite training loss at epoch {epoch}")]
    NonFiniteLoss { epoch: usize },

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("malformed model file: {0}")]
    ModelFormat(String),

    #[error("generator protocol error: {0}")]
    Protocol(String),

    #[error("{stage}: {source}")]
    Stage {
        stage: Stage,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn at(stage: Stage) -> impl FnOnce(Error) -> Error {
        move |e| Error::Stage {
            stage,
            source: Box::new(e),
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Error {
        Error::InvalidArgument(msg.into())
    }
}
