//! Core algorithms for classifying memes with code-switched (Hinglish) captions
//! into hate-inducing, satirical and non-offensive.
//!
//! The crate is organised by pipeline stage:
//!
//! * [`vision`] decodes images, prepares them for OCR and computes the
//!   classical texture/colour/face features used by the baselines.
//! * [`ocr_client`] turns an image into a caption, either through a remote
//!   OCR service or from an offline captions file.
//! * [`text`] normalises captions and embeds them with word-vector tables.
//! * [`nn`] is a small from-scratch neural engine holding the CNN channel,
//!   the LSTM channel and their late fusion, trained with Adam.
//! * [`baselines`] provides the polynomial-kernel SVM and the random forest.
//! * [`metrics`] covers precision/recall/F1, stratified cross-validation and
//!   inter-annotator agreement.
//! * [`synth`] generates labelled synthetic memes for tests and demos.

pub mod baselines;
pub mod metrics;
pub mod nn;
pub mod ocr_client;
pub mod synth;
pub mod text;
pub mod vision;

mod rng;

pub use baselines::{FeatureFamily, FeatureVector, RfConfig, SvmConfig};
pub use metrics::{ConfusionMatrix, FoldAssignment, MetricsReport};
pub use nn::{FusionModelConfig, Model, ModelKind, ModelParams, Tensor, TrainConfig};
pub use ocr_client::{CaptionRecord, CaptionSource, OcrConfig};
pub use rng::derive_seed;
pub use text::{EmbeddingTable, LexiconSet, SequenceMatrix, TokenSequence};
pub use vision::{ImageGray, ImageRgb};

/// The three meme classes, in label-index order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MemeClass {
    NonOffensive,
    Satirical,
    HateInducing,
}

impl MemeClass {
    pub const ALL: [MemeClass; 3] = [
        MemeClass::NonOffensive,
        MemeClass::Satirical,
        MemeClass::HateInducing,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    /// Machine name as used in manifests and label CSVs.
    pub fn as_str(self) -> &'static str {
        match self {
            MemeClass::NonOffensive => "non_offensive",
            MemeClass::Satirical => "satirical",
            MemeClass::HateInducing => "hate_inducing",
        }
    }

    /// Human-readable name for reports.
    pub fn display_name(self) -> &'static str {
        match self {
            MemeClass::NonOffensive => "Non-Offensive",
            MemeClass::Satirical => "Satirical",
            MemeClass::HateInducing => "Hate-Inducing",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        let norm = s.trim().to_ascii_lowercase().replace(['-', ' '], "_");
        Self::ALL.into_iter().find(|c| c.as_str() == norm)
    }
}

impl std::fmt::Display for MemeClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}
