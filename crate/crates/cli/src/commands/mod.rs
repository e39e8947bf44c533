mod eval;
mod features;
mod ingest;
mod ocr;
mod predict;
mod report;
mod synth;
mod train;

pub use eval::{cmd_eval, run_eval, ClassScores, EvalEntry, EvalKind, EvalReport, FoldScores, Layout, Scores, REPORT_SCHEMA};
pub use features::{cmd_features, compute_features, parse_families, FeatureTable};
pub use ingest::cmd_ingest;
pub use ocr::{cmd_ocr, OcrSummary};
pub use predict::{cmd_predict, CaptionInput, Prediction};
pub use report::{cmd_report, corpus_report, Agreement, ClassCount, CorpusReport, Multilingual, DISTRIBUTION_ORDER};
pub use synth::{cmd_synth, embedding_text, SynthSummary, SYNTH_TABLES};
pub use train::{accuracy, cmd_train, fit, history_path, TrainSummary};
