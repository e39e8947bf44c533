use serde::{Deserialize, Serialize};

use super::LexiconSet;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LangTag {
    Hindi,
    English,
    Other,
}

/// Cleaned, lowercased caption tokens with optional per-token language tags.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TokenSequence {
    pub tokens: Vec<String>,
    pub lang_tags: Option<Vec<LangTag>>,
}

impl TokenSequence {
    pub fn new(tokens: Vec<String>) -> Self {
        debug_assert!(tokens.iter().all(|t| !t.is_empty()));
        Self { tokens, lang_tags: None }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

fn is_numeric_token(tok: &str) -> bool {
    let body = tok.trim_start_matches(['+', '-']);
    body.chars().any(|c| c.is_ascii_digit()) && body.chars().all(|c| c.is_ascii_digit() || matches!(c, '.' | ',' | '%'))
}

fn is_url(tok: &str) -> bool {
    let lower = tok.to_ascii_lowercase();
    lower.starts_with("http://") || lower.starts_with("https://") || lower.starts_with("www.")
}

/// Drops hashtags, URLs, @mentions and standalone numbers, and collapses
/// whitespace.
pub fn strip_noise(raw: &str) -> String {
    raw.split_whitespace()
        .filter(|t| !(t.starts_with('#') || t.starts_with('@') || is_url(t) || is_numeric_token(t)))
        .collect::<Vec<_>>()
        .join(" ")
}

/// Replaces emoticons by their descriptions, longest match first.
pub fn replace_emoticons(s: &str, map: &std::collections::BTreeMap<String, String>) -> String {
    let mut keys: Vec<(&str, &str)> = map.iter().filter(|(k, _)| !k.is_empty()).map(|(k, v)| (k.as_str(), v.as_str())).collect();
    keys.sort_by(|a, b| b.0.len().cmp(&a.0.len()).then(a.0.cmp(b.0)));

    let mut out = String::with_capacity(s.len());
    let mut i = 0;
    while i < s.len() {
        let rest = &s[i..];
        if let Some((key, desc)) = keys.iter().find(|(k, _)| rest.starts_with(k)) {
            if out.chars().next_back().is_some_and(|c| !c.is_whitespace()) {
                out.push(' ');
            }
            out.push_str(desc);
            i += key.len();
            if s[i..].chars().next().is_some_and(|c| !c.is_whitespace()) {
                out.push(' ');
            }
        } else {
            let c = rest.chars().next().expect("non-empty remainder");
            out.push(c);
            i += c.len_utf8();
        }
    }
    out
}

fn is_devanagari(c: char) -> bool {
    ('\u{0900}'..='\u{097F}').contains(&c)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Transliterated {
    pub text: String,
    /// Devanagari characters with no table entry; they are dropped.
    pub dropped: usize,
}

/// Maps Devanagari graphemes left to right through `table`, trying the
/// longest table key first. Other characters pass through unchanged.
pub fn transliterate_devanagari(s: &str, table: &std::collections::BTreeMap<String, String>) -> Transliterated {
    let max_key = table.keys().map(|k| k.chars().count()).max().unwrap_or(0);
    let chars: Vec<char> = s.chars().collect();
    let mut out = String::with_capacity(s.len());
    let mut dropped = 0;
    let mut i = 0;
    let mut key = String::new();
    while i < chars.len() {
        if !is_devanagari(chars[i]) {
            out.push(chars[i]);
            i += 1;
            continue;
        }
        let mut matched = None;
        for len in (1..=max_key.min(chars.len() - i)).rev() {
            key.clear();
            key.extend(&chars[i..i + len]);
            if let Some(roman) = table.get(&key) {
                matched = Some((len, roman));
                break;
            }
        }
        match matched {
            Some((len, roman)) => {
                out.push_str(roman);
                i += len;
            }
            None => {
                dropped += 1;
                i += 1;
            }
        }
    }
    if dropped > 0 {
        log::warn!("dropped {dropped} untransliterable Devanagari characters");
    }
    Transliterated { text: out, dropped }
}

fn is_token_char(c: char) -> bool {
    c.is_alphanumeric() || (is_devanagari(c) && !matches!(c, '\u{0964}' | '\u{0965}'))
}

/// Lowercases, splits on whitespace and punctuation, and removes stopwords.
pub fn tokenize_and_filter(s: &str, stopwords: &std::collections::BTreeSet<String>) -> TokenSequence {
    let lower = s.to_lowercase();
    let tokens = lower
        .split(|c: char| !is_token_char(c))
        .filter(|t| !t.is_empty() && !stopwords.contains(*t))
        .map(str::to_string)
        .collect();
    TokenSequence::new(tokens)
}

/// Replaces Hinglish tokens with their English equivalents and tags each
/// output token with the language it was recognised as.
pub fn translate_tokens(t: &TokenSequence, lex: &LexiconSet) -> TokenSequence {
    let mut tokens = Vec::with_capacity(t.tokens.len());
    let mut tags = Vec::with_capacity(t.tokens.len());
    for tok in &t.tokens {
        if let Some(english) = lex.hinglish_dict.get(tok) {
            for piece in english.split_whitespace() {
                tokens.push(piece.to_string());
                tags.push(LangTag::Hindi);
            }
        } else {
            let tag = if lex.english_lexicon.contains(tok) { LangTag::English } else { LangTag::Other };
            tokens.push(tok.clone());
            tags.push(tag);
        }
    }
    TokenSequence { tokens, lang_tags: Some(tags) }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NormalizeOutput {
    pub tokens: TokenSequence,
    pub dropped_devanagari: usize,
}

/// The full caption normalisation chain.
pub fn normalize_caption(raw: &str, lex: &LexiconSet) -> NormalizeOutput {
    let cleaned = strip_noise(raw);
    let with_words = replace_emoticons(&cleaned, &lex.emoticon_map);
    let roman = transliterate_devanagari(&with_words, &lex.translit_table);
    let tokens = tokenize_and_filter(&roman.text, &lex.stopwords);
    NormalizeOutput { tokens: translate_tokens(&tokens, lex), dropped_devanagari: roman.dropped }
}
