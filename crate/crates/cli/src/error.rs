use std::path::Path;

use memeforge_core::baselines::BaselineError;
use memeforge_core::metrics::MetricsError;
use memeforge_core::nn::NnError;
use memeforge_core::ocr_client::OcrError;
use memeforge_core::text::TextError;
use memeforge_core::vision::VisionError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("configuration: {0}")]
    Config(String),
    #[error("labels row {row}: duplicate id {id:?}")]
    DuplicateId { row: usize, id: String },
    #[error("labels row {row}: unknown label {label:?}")]
    UnknownLabel { row: usize, label: String },
    #[error("labels row {row}: missing image {path}")]
    MissingImage { row: usize, path: String },
    #[error("{0}")]
    Data(String),
    #[error("internal error: {0}")]
    Internal(String),
}

impl CliError {
    /// 1 usage/config, 2 data, 3 internal.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Config(_) => 1,
            CliError::Internal(_) => 3,
            _ => 2,
        }
    }

    pub(crate) fn io(path: &Path, e: std::io::Error) -> Self {
        CliError::Data(format!("{}: {e}", path.display()))
    }

    /// Prefixes a data error with the record it came from.
    pub(crate) fn for_record(self, id: &str) -> Self {
        match self {
            CliError::Data(m) => CliError::Data(format!("record {id:?}: {m}")),
            other => other,
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;

impl From<NnError> for CliError {
    fn from(e: NnError) -> Self {
        match e {
            NnError::InvalidConfig(_) | NnError::InvalidGeometry(_) => CliError::Config(e.to_string()),
            NnError::CorruptCheckpoint(_) | NnError::Io(_) => CliError::Data(e.to_string()),
            NnError::ShapeMismatch(_) | NnError::NonFiniteLoss { .. } => CliError::Internal(e.to_string()),
        }
    }
}

impl From<VisionError> for CliError {
    fn from(e: VisionError) -> Self {
        match e {
            VisionError::NonPositiveSigma(_) | VisionError::EvenBlock(_) | VisionError::ZeroDimension(..) => {
                CliError::Config(e.to_string())
            }
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<TextError> for CliError {
    fn from(e: TextError) -> Self {
        match e {
            TextError::BadLexicon { .. } => CliError::Config(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<OcrError> for CliError {
    fn from(e: OcrError) -> Self {
        match e {
            OcrError::InvalidConfig(_) | OcrError::BadCaptionsFile { .. } => CliError::Config(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<MetricsError> for CliError {
    fn from(e: MetricsError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<BaselineError> for CliError {
    fn from(e: BaselineError) -> Self {
        match e {
            BaselineError::InvalidConfig(_) => CliError::Config(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Internal(format!("serialisation failed: {e}"))
    }
}
