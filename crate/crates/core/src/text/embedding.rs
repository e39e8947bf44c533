use std::collections::BTreeMap;
use std::path::Path;

use super::{Result, TextError, TokenSequence};

/// Token -> fixed-length word vector.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    name: String,
    dim: usize,
    vectors: BTreeMap<String, Vec<f64>>,
}

impl EmbeddingTable {
    pub fn new(name: impl Into<String>, dim: usize, vectors: BTreeMap<String, Vec<f64>>) -> Result<Self> {
        assert!(dim > 0, "embedding dimension must be positive");
        for (tok, v) in &vectors {
            if v.len() != dim {
                return Err(TextError::InconsistentDim { line: 0, expected: dim, found: v.len() })
                    .inspect_err(|_| log::error!("vector for {tok:?} has the wrong length"));
            }
        }
        Ok(Self { name: name.into(), dim, vectors })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn get(&self, token: &str) -> Option<&[f64]> {
        self.vectors.get(token).map(Vec::as_slice)
    }

    pub fn tokens(&self) -> impl Iterator<Item = &str> {
        self.vectors.keys().map(String::as_str)
    }
}

/// Parses whitespace-separated `token v1 ... vD` rows. A leading
/// `count dim` header line (word2vec/fastText text format) is skipped.
pub fn parse_embedding_table(name: &str, text: &str) -> Result<EmbeddingTable> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()).peekable();
    if let Some((_, first)) = lines.peek() {
        let fields: Vec<&str> = first.split_whitespace().collect();
        if fields.len() == 2 && fields.iter().all(|f| f.parse::<usize>().is_ok()) {
            lines.next();
        }
    }
    let mut dim = None;
    let mut vectors = BTreeMap::new();
    let mut duplicates = 0usize;
    for (n, line) in lines {
        let mut fields = line.split_whitespace();
        let token = fields.next().expect("non-blank line has a field");
        let values = fields
            .map(|f| f.parse::<f64>().map_err(|e| TextError::BadNumber { line: n + 1, detail: format!("{f:?}: {e}") }))
            .collect::<Result<Vec<f64>>>()?;
        let expected = *dim.get_or_insert(values.len());
        if values.len() != expected || expected == 0 {
            return Err(TextError::InconsistentDim { line: n + 1, expected, found: values.len() });
        }
        if vectors.contains_key(token) {
            duplicates += 1;
            continue;
        }
        vectors.insert(token.to_string(), values);
    }
    let Some(dim) = dim else {
        return Err(TextError::EmptyFile(name.to_string()));
    };
    if duplicates > 0 {
        log::warn!("{name}: {duplicates} duplicate token rows ignored (first occurrence kept)");
    }
    Ok(EmbeddingTable { name: name.to_string(), dim, vectors })
}

/// Loads a table from a text file; the table is named after the file stem.
pub fn load_embedding_table(path: &Path) -> Result<EmbeddingTable> {
    let text = std::fs::read_to_string(path)?;
    let name = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    parse_embedding_table(&name, &text).map_err(|e| match e {
        TextError::EmptyFile(_) => TextError::EmptyFile(path.display().to_string()),
        other => other,
    })
}

/// Concatenates two tables over the union vocabulary, filling a zero block
/// where a token is missing from one side.
pub fn combine_tables(a: &EmbeddingTable, b: &EmbeddingTable) -> EmbeddingTable {
    let dim = a.dim + b.dim;
    let mut vectors = BTreeMap::new();
    for tok in a.vectors.keys().chain(b.vectors.keys()) {
        if vectors.contains_key(tok) {
            continue;
        }
        let mut v = Vec::with_capacity(dim);
        match a.get(tok) {
            Some(x) => v.extend_from_slice(x),
            None => v.resize(a.dim, 0.0),
        }
        match b.get(tok) {
            Some(x) => v.extend_from_slice(x),
            None => v.resize(dim, 0.0),
        }
        vectors.insert(tok.clone(), v);
    }
    EmbeddingTable { name: format!("{}+{}", a.name, b.name), dim, vectors }
}

/// A `max_len x dim` caption matrix; rows at or past `valid_len` are zero.
#[derive(Debug, Clone, PartialEq)]
pub struct SequenceMatrix {
    pub max_len: usize,
    pub dim: usize,
    pub data: Vec<f64>,
    pub valid_len: usize,
    /// In-range tokens that had no vector (embedded as zeros).
    pub oov: usize,
}

impl SequenceMatrix {
    pub fn zeros(max_len: usize, dim: usize) -> Self {
        Self { max_len, dim, data: vec![0.0; max_len * dim], valid_len: 0, oov: 0 }
    }

    pub fn row(&self, t: usize) -> &[f64] {
        &self.data[t * self.dim..(t + 1) * self.dim]
    }
}

/// Looks up the first `max_len` tokens; out-of-vocabulary tokens and padding
/// become zero rows.
pub fn embed_sequence(t: &TokenSequence, table: &EmbeddingTable, max_len: usize) -> SequenceMatrix {
    assert!(max_len >= 1, "max_len must be at least 1");
    let mut m = SequenceMatrix::zeros(max_len, table.dim);
    m.valid_len = t.tokens.len().min(max_len);
    for (row, tok) in t.tokens.iter().take(max_len).enumerate() {
        match table.get(tok) {
            Some(v) => m.data[row * table.dim..(row + 1) * table.dim].copy_from_slice(v),
            None => m.oov += 1,
        }
    }
    m
}
