//! Caption normalisation for code-switched text and conversion to padded
//! word-vector matrices.
//!
//! The normalisation order is fixed: strip noise, replace emoticons,
//! transliterate Devanagari to Roman, tokenise and drop stopwords, then map
//! Hinglish tokens to English through the conversion dictionary.

mod embedding;
mod lexicon;
mod normalize;

pub use embedding::{combine_tables, embed_sequence, load_embedding_table, parse_embedding_table, EmbeddingTable, SequenceMatrix};
pub use lexicon::{LexiconPaths, LexiconSet, LexiconTexts};
pub use normalize::{
    normalize_caption, replace_emoticons, strip_noise, tokenize_and_filter, translate_tokens, transliterate_devanagari,
    LangTag, NormalizeOutput, TokenSequence, Transliterated,
};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum TextError {
    #[error("embedding file is empty: {0}")]
    EmptyFile(String),
    #[error("inconsistent embedding dimension on line {line}: expected {expected}, found {found}")]
    InconsistentDim { line: usize, expected: usize, found: usize },
    #[error("bad number on line {line}: {detail}")]
    BadNumber { line: usize, detail: String },
    #[error("lexicon {path}: {detail}")]
    BadLexicon { path: String, detail: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, TextError>;
