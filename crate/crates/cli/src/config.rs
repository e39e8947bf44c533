//! The run configuration: one JSON file holding every stage's settings.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use memeforge_core::ocr_client::OcrMode;
use memeforge_core::text::{combine_tables, parse_embedding_table, LexiconPaths, LexiconTexts};
use memeforge_core::vision::OcrPreprocessConfig;
use memeforge_core::{EmbeddingTable, FusionModelConfig, LexiconSet, OcrConfig, RfConfig, SvmConfig, TrainConfig};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

/// Seed streams derived from the master seed.
pub(crate) const INIT_STREAM: u64 = 1;
pub(crate) const TRAIN_STREAM: u64 = 2;
pub(crate) const FOREST_STREAM: u64 = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    /// Cross-validation folds for `eval` when `--k` is not given.
    pub folds: usize,
    pub ocr: OcrConfig,
    /// JSONL `{"id", "text"}` captions used when `ocr.mode` is offline.
    pub offline_captions: Option<PathBuf>,
    pub ocr_preprocess: OcrPreprocessConfig,
    /// Directory with the five lexicon files; the built-in lexicon otherwise.
    pub lexicon_dir: Option<PathBuf>,
    /// Embedding table name -> text file.
    pub embeddings: BTreeMap<String, PathBuf>,
    /// Embedding variants to evaluate, e.g. `["glove", "glove+fasttext"]`.
    /// Empty means one variant per configured table.
    pub embedding_sets: Vec<String>,
    pub model: FusionModelConfig,
    pub train: TrainConfig,
    pub svm: SvmConfig,
    pub rf: RfConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            folds: 10,
            ocr: OcrConfig::default(),
            offline_captions: None,
            ocr_preprocess: OcrPreprocessConfig::default(),
            lexicon_dir: None,
            embeddings: BTreeMap::new(),
            embedding_sets: Vec::new(),
            model: FusionModelConfig::default(),
            train: TrainConfig::default(),
            svm: SvmConfig::default(),
            rf: RfConfig::default(),
        }
    }
}

fn resolve(base: &Path, p: &mut PathBuf) {
    if p.is_relative() {
        *p = base.join(&*p);
    }
}

impl RunConfig {
    /// Reads a config file. Relative paths inside it are taken relative to
    /// the file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let mut cfg: RunConfig =
            serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.resolve_paths(base);
        Ok(cfg)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        if let Some(p) = &mut self.offline_captions {
            resolve(base, p);
        }
        if let Some(p) = &mut self.lexicon_dir {
            resolve(base, p);
        }
        for p in self.embeddings.values_mut() {
            resolve(base, p);
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.folds < 2 {
            return Err(CliError::Config(format!("folds must be at least 2, got {}", self.folds)));
        }
        self.ocr.validate()?;
        if self.ocr_preprocess.block < 3 || self.ocr_preprocess.block % 2 == 0 {
            return Err(CliError::Config(format!("ocr_preprocess.block must be odd and >= 3, got {}", self.ocr_preprocess.block)));
        }
        if !(self.ocr_preprocess.scale > 0.0 && self.ocr_preprocess.sigma > 0.0) {
            return Err(CliError::Config("ocr_preprocess.scale and sigma must be positive".into()));
        }
        let mut paths: Vec<&Path> = self.embeddings.values().map(PathBuf::as_path).collect();
        paths.extend(self.lexicon_dir.as_deref());
        if self.ocr.mode == OcrMode::Offline {
            paths.extend(self.offline_captions.as_deref());
        }
        if let Some(missing) = paths.into_iter().find(|p| !p.exists()) {
            return Err(CliError::Config(format!("{} does not exist", missing.display())));
        }
        for set in &self.embedding_sets {
            for name in set.split('+') {
                if !self.embeddings.contains_key(name) {
                    return Err(CliError::Config(format!("embedding set {set:?} names unknown table {name:?}")));
                }
            }
        }
        self.model.validate()?;
        self.train.validate()?;
        self.svm.validate()?;
        self.rf.validate()?;
        Ok(())
    }

    /// The embedding variants in evaluation order.
    pub fn embedding_variants(&self) -> Vec<String> {
        if self.embedding_sets.is_empty() {
            self.embeddings.keys().cloned().collect()
        } else {
            self.embedding_sets.clone()
        }
    }

    /// Loads the tables named in `set` (`a+b+...`) and concatenates them.
    pub fn load_embedding_set(&self, set: &str) -> Result<EmbeddingTable> {
        let mut combined: Option<EmbeddingTable> = None;
        for name in set.split('+') {
            let path = self
                .embeddings
                .get(name)
                .ok_or_else(|| CliError::Config(format!("unknown embedding table {name:?}")))?;
            let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
            let table = parse_embedding_table(name, &text)?;
            combined = Some(match combined {
                None => table,
                Some(prev) => combine_tables(&prev, &table),
            });
        }
        combined.ok_or_else(|| CliError::Config("empty embedding set".into()))
    }

    pub fn lexicon(&self) -> Result<LexiconSet> {
        load_lexicon(self.lexicon_dir.as_deref())
    }
}

/// The lexicon shipped with the binary.
pub fn builtin_lexicon() -> LexiconSet {
    LexiconSet::from_texts(&LexiconTexts {
        emoticons: include_str!("../data/lexicon/emoticons.tsv"),
        translit: include_str!("../data/lexicon/translit.tsv"),
        hinglish_dict: include_str!("../data/lexicon/hinglish_dict.tsv"),
        stopwords: include_str!("../data/lexicon/stopwords.txt"),
        english_lexicon: include_str!("../data/lexicon/english_lexicon.txt"),
    })
    .expect("built-in lexicon parses")
}

pub fn lexicon_paths(dir: &Path) -> LexiconPaths {
    LexiconPaths {
        emoticons: dir.join("emoticons.tsv"),
        translit: dir.join("translit.tsv"),
        hinglish_dict: dir.join("hinglish_dict.tsv"),
        stopwords: dir.join("stopwords.txt"),
        english_lexicon: dir.join("english_lexicon.txt"),
    }
}

pub fn load_lexicon(dir: Option<&Path>) -> Result<LexiconSet> {
    match dir {
        Some(d) => Ok(LexiconSet::load(&lexicon_paths(d))?),
        None => Ok(builtin_lexicon()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_lexicon_covers_the_basics() {
        let lex = builtin_lexicon();
        assert_eq!(lex.hinglish_dict["kab"], "when");
        assert_eq!(lex.emoticon_map[":)"], "smile");
        assert_eq!(lex.translit_table["दोस्त"], "dost");
        assert!(lex.stopwords.contains("hai"));
        assert!(lex.english_lexicon.contains("food"));
    }

    #[test]
    fn empty_object_gives_defaults() {
        let cfg: RunConfig = serde_json::from_str("{}").unwrap();
        assert_eq!(cfg, RunConfig::default());
        assert!(serde_json::from_str::<RunConfig>(r#"{"sed": 1}"#).is_err());
    }

    #[test]
    fn relative_paths_follow_the_config_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.json");
        std::fs::write(&path, r#"{"embeddings": {"g": "emb/g.txt"}, "offline_captions": "/abs/c.jsonl"}"#).unwrap();
        let cfg = RunConfig::load(&path).unwrap();
        assert_eq!(cfg.embeddings["g"], dir.path().join("emb/g.txt"));
        assert_eq!(cfg.offline_captions.as_deref(), Some(Path::new("/abs/c.jsonl")));
        assert!(matches!(cfg.validate(), Err(CliError::Config(_))));
    }

    #[test]
    fn unknown_set_member_is_rejected() {
        let cfg = RunConfig { embedding_sets: vec!["glove+nope".into()], ..Default::default() };
        assert!(cfg.validate().unwrap_err().to_string().contains("nope"));
    }
}
