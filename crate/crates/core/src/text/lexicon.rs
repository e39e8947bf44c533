use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use super::{Result, TextError};

/// The lookup resources used by caption normalisation.
#[derive(Debug, Clone, Default)]
pub struct LexiconSet {
    /// Emoticon -> textual description.
    pub emoticon_map: BTreeMap<String, String>,
    /// Devanagari grapheme -> Roman string.
    pub translit_table: BTreeMap<String, String>,
    /// Roman-script Hindi token -> English token.
    pub hinglish_dict: BTreeMap<String, String>,
    pub stopwords: BTreeSet<String>,
    /// Known English words, used only for language tagging.
    pub english_lexicon: BTreeSet<String>,
}

/// Paths of the five lexicon files.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct LexiconPaths {
    pub emoticons: std::path::PathBuf,
    pub translit: std::path::PathBuf,
    pub hinglish_dict: std::path::PathBuf,
    pub stopwords: std::path::PathBuf,
    pub english_lexicon: std::path::PathBuf,
}

/// Contents of the five lexicon files.
#[derive(Debug, Clone, Copy)]
pub struct LexiconTexts<'a> {
    pub emoticons: &'a str,
    pub translit: &'a str,
    pub hinglish_dict: &'a str,
    pub stopwords: &'a str,
    pub english_lexicon: &'a str,
}

impl LexiconSet {
    pub fn load(paths: &LexiconPaths) -> Result<Self> {
        let read = |p: &Path| {
            std::fs::read_to_string(p)
                .map_err(|e| TextError::BadLexicon { path: p.display().to_string(), detail: e.to_string() })
        };
        Self::from_texts(&LexiconTexts {
            emoticons: &read(&paths.emoticons)?,
            translit: &read(&paths.translit)?,
            hinglish_dict: &read(&paths.hinglish_dict)?,
            stopwords: &read(&paths.stopwords)?,
            english_lexicon: &read(&paths.english_lexicon)?,
        })
    }

    /// Builds the set from in-memory file contents.
    pub fn from_texts(t: &LexiconTexts<'_>) -> Result<Self> {
        Ok(Self {
            emoticon_map: Self::parse_tsv(t.emoticons, "emoticons")?,
            translit_table: Self::parse_tsv(t.translit, "translit")?,
            hinglish_dict: Self::parse_tsv(t.hinglish_dict, "hinglish_dict")?
                .into_iter()
                .map(|(k, v)| (k.to_lowercase(), v.to_lowercase()))
                .collect(),
            stopwords: Self::parse_list(t.stopwords),
            english_lexicon: Self::parse_list(t.english_lexicon),
        })
    }

    /// Parses a two-column `key<TAB>value` table. Blank lines and lines
    /// starting with `#` are skipped.
    pub fn parse_tsv(text: &str, origin: &str) -> Result<BTreeMap<String, String>> {
        let mut map = BTreeMap::new();
        for (n, line) in text.lines().enumerate() {
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line.split_once('\t').ok_or_else(|| TextError::BadLexicon {
                path: origin.to_string(),
                detail: format!("line {} has no TAB separator", n + 1),
            })?;
            if k.is_empty() {
                return Err(TextError::BadLexicon { path: origin.to_string(), detail: format!("line {} has an empty key", n + 1) });
            }
            map.insert(k.to_string(), v.trim().to_string());
        }
        Ok(map)
    }

    pub fn parse_list(text: &str) -> BTreeSet<String> {
        text.lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(str::to_lowercase)
            .collect()
    }
}
