use alloc::string::String;
use core::fmt;

/// Error type shared by all core modules.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Error {
    /// Tensor or frame dimensions do not line up.
    Shape(String),
    /// A configuration value is out of its legal range.
    Config(String),
    /// A class label or label code is invalid.
    Label(String),
    /// A NaN or infinity appeared where a finite value is required.
    Numerical(String),
    /// A clip/store/label file has invalid contents.
    Format(String),
    /// A clip contains no frames.
    EmptyClip,
    /// A clip has fewer frames than the number of segments requested.
    InsufficientFrames { have: usize, need: usize },
    /// A dataset split is empty or otherwise unusable.
    Dataset(String),
    /// Training produced a non-finite loss.
    Divergence { epoch: usize, batch: usize },
    /// A retrieval store has no candidates left after exclusion.
    EmptyStore,
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Shape(m) => write!(f, "shape error: {m}"),
            Error::Config(m) => write!(f, "config error: {m}"),
            Error::Label(m) => write!(f, "label error: {m}"),
            Error::Numerical(m) => write!(f, "numerical error: {m}"),
            Error::Format(m) => write!(f, "format error: {m}"),
            Error::EmptyClip => write!(f, "empty clip"),
            Error::InsufficientFrames { have, need } => {
                write!(f, "insufficient frames: have {have}, need {need}")
            }
            Error::Dataset(m) => write!(f, "dataset error: {m}"),
            Error::Divergence { epoch, batch } => {
                write!(f, "non-finite loss at epoch {epoch} batch {batch}")
            }
            Error::EmptyStore => write!(f, "empty feature store"),
        }
    }
}

impl core::error::Error for Error {}

pub type Result<T> = core::result::Result<T, Error>;
