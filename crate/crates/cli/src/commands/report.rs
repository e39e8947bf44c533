use std::fmt::Write as _;
use std::path::Path;

use memeforge_core::metrics::{cohen_kappa, fleiss_kappa, m_index, AgreementTable};
use memeforge_core::text::{normalize_caption, LangTag};
use memeforge_core::{LexiconSet, MemeClass};
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::manifest::Manifest;

/// Row order of the class distribution table.
pub const DISTRIBUTION_ORDER: [MemeClass; 3] = [MemeClass::NonOffensive, MemeClass::HateInducing, MemeClass::Satirical];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassCount {
    pub class: MemeClass,
    pub count: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Agreement {
    /// Records carrying all three annotator labels.
    pub items: usize,
    /// Pairwise Cohen's kappa, A1..A3; the diagonal is 1.
    pub cohen: Vec<Vec<f64>>,
    pub fleiss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Multilingual {
    pub hindi_tokens: u64,
    pub english_tokens: u64,
    /// Tokens recognised as neither; not part of the index.
    pub other_tokens: u64,
    pub m_index: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusReport {
    pub distribution: Vec<ClassCount>,
    pub unlabelled: u64,
    pub total: u64,
    pub agreement: Option<Agreement>,
    pub multilingual: Option<Multilingual>,
}

fn agreement(manifest: &Manifest) -> Result<Option<Agreement>> {
    let rows: Vec<Vec<usize>> = manifest
        .records
        .iter()
        .filter_map(|r| r.annotator_labels.as_ref())
        .map(|a| a.iter().map(|c| c.index()).collect())
        .collect();
    if rows.is_empty() {
        return Ok(None);
    }
    let table = AgreementTable::new(MemeClass::ALL.len(), rows)?;
    let raters: Vec<Vec<usize>> = (0..table.raters()).map(|r| table.rater(r)).collect();
    let mut cohen = vec![vec![1.0; raters.len()]; raters.len()];
    for i in 0..raters.len() {
        for j in i + 1..raters.len() {
            let k = cohen_kappa(&raters[i], &raters[j])?;
            cohen[i][j] = k;
            cohen[j][i] = k;
        }
    }
    Ok(Some(Agreement { items: table.items(), cohen, fleiss: fleiss_kappa(&table).kappa }))
}

fn multilingual(manifest: &Manifest, lex: &LexiconSet) -> Result<Option<Multilingual>> {
    let (mut hi, mut en, mut other) = (0u64, 0u64, 0u64);
    let mut any = false;
    for caption in manifest.records.iter().filter_map(|r| r.caption_raw.as_deref()) {
        any = true;
        for tag in normalize_caption(caption, lex).tokens.lang_tags.unwrap_or_default() {
            match tag {
                LangTag::Hindi => hi += 1,
                LangTag::English => en += 1,
                LangTag::Other => other += 1,
            }
        }
    }
    if !any || hi + en == 0 {
        return Ok(None);
    }
    Ok(Some(Multilingual { hindi_tokens: hi, english_tokens: en, other_tokens: other, m_index: m_index(&[hi, en])? }))
}

/// Class distribution, annotator agreement and the multilingual index of a
/// manifest. Sections without input data are left out.
pub fn corpus_report(manifest: &Manifest, lex: &LexiconSet) -> Result<CorpusReport> {
    let distribution: Vec<ClassCount> = DISTRIBUTION_ORDER
        .iter()
        .map(|&class| ClassCount { class, count: manifest.records.iter().filter(|r| r.label == Some(class)).count() as u64 })
        .collect();
    let total = manifest.records.len() as u64;
    Ok(CorpusReport {
        unlabelled: total - distribution.iter().map(|c| c.count).sum::<u64>(),
        distribution,
        total,
        agreement: agreement(manifest)?,
        multilingual: multilingual(manifest, lex)?,
    })
}

impl CorpusReport {
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{:<16}{:>8}", "Label", "Count");
        for c in &self.distribution {
            let _ = writeln!(out, "{:<16}{:>8}", c.class.display_name(), c.count);
        }
        if self.unlabelled > 0 {
            let _ = writeln!(out, "{:<16}{:>8}", "(unlabelled)", self.unlabelled);
        }
        let _ = writeln!(out, "{:<16}{:>8}", "Total", self.total);

        if let Some(a) = &self.agreement {
            let _ = writeln!(out, "\nCohen's kappa ({} items)", a.items);
            let _ = write!(out, "{:<4}", "");
            for j in 0..a.cohen.len() {
                let _ = write!(out, "{:>8}", format!("A{}", j + 1));
            }
            out.push('\n');
            for (i, row) in a.cohen.iter().enumerate() {
                let _ = write!(out, "{:<4}", format!("A{}", i + 1));
                for (j, k) in row.iter().enumerate() {
                    if i == j {
                        let _ = write!(out, "{:>8}", "-");
                    } else {
                        let _ = write!(out, "{k:>8.4}");
                    }
                }
                out.push('\n');
            }
            let _ = writeln!(out, "Fleiss's kappa: {:.4}", a.fleiss);
        }
        if let Some(m) = &self.multilingual {
            let _ = writeln!(
                out,
                "\nMultilingual index: {:.4} (hindi {} / english {} tokens, {} other)",
                m.m_index, m.hindi_tokens, m.english_tokens, m.other_tokens
            );
        }
        out
    }
}

pub fn cmd_report(manifest_path: &Path, lex: &LexiconSet) -> Result<CorpusReport> {
    corpus_report(&Manifest::load(manifest_path)?, lex)
}
