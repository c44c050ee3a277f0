use std::path::PathBuf;

use crate::model::{JointId, SpaceKind};

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("joint {0} is not a fingertip")]
    NotFingertip(JointId),
    #[error("session is in {found} space, expected {expected}")]
    WrongSpace { expected: SpaceKind, found: SpaceKind },
    #[error("need at least {needed} frames, got {got}")]
    TooFewFrames { needed: usize, got: usize },
    #[error("series is not uniformly sampled at index {index}")]
    NonUniform { index: usize },
    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },
    #[error("session has no frames")]
    EmptySession,
    #[error("character {0:?} has no key or finger assignment")]
    UnmappedKey(char),
    #[error("joint {joint} in frame {frame} is not in front of the camera")]
    JointBehindCamera { frame: usize, joint: usize },
    #[error("session carries no depth channel")]
    MissingDepth,
    #[error("camera viewpoints differ by {separation_deg:.2} degrees, need at least {min_deg}")]
    DegenerateBaseline { separation_deg: f64, min_deg: f64 },
    #[error("frame {frame}: timestamps differ by {delta:.6} s")]
    TimestampMismatch { frame: usize, delta: f64 },
    #[error("{events} events cannot fill {k} clusters")]
    TooFewEvents { events: usize, k: usize },
    #[error("corpus contains no usable symbols")]
    EmptyCorpus,
    #[error("cluster id {id} outside emission table of width {width}")]
    UnknownCluster { id: usize, width: usize },
    #[error("refiner training set has fewer than two labels")]
    SingleClass,
    #[error("reference text is empty")]
    EmptyReference,
    #[error("target rate {target} Hz exceeds nominal rate {nominal} Hz")]
    UpsampleRequested { target: f64, nominal: f64 },
    #[error("calibration target unreachable: {0}")]
    Unreachable(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
    #[error("configuration error in `{field}`: {message}")]
    Config { field: String, message: String },
    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: String,
        #[source]
        source: Box<Error>,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn format(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            message: message.into(),
        }
    }

    pub(crate) fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            message: message.into(),
        }
    }

    /// True for errors that stem from a bad configuration rather than a failed computation.
    pub fn is_config(&self) -> bool {
        matches!(self, Error::Config { .. })
    }
}
