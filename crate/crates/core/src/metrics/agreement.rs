use serde::{Deserialize, Serialize};

use super::{MetricsError, Result};

/// Items x raters matrix of category indices.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgreementTable {
    categories: usize,
    ratings: Vec<Vec<usize>>,
}

impl AgreementTable {
    pub fn new(categories: usize, ratings: Vec<Vec<usize>>) -> Result<Self> {
        let raters = ratings.first().map_or(0, Vec::len);
        if ratings.is_empty() {
            return Err(MetricsError::InvalidTable("no items".into()));
        }
        if raters < 2 {
            return Err(MetricsError::InvalidTable("need at least two raters".into()));
        }
        for (i, row) in ratings.iter().enumerate() {
            if row.len() != raters {
                return Err(MetricsError::InvalidTable(format!("item {i} has {} ratings, expected {raters}", row.len())));
            }
            if let Some(&c) = row.iter().find(|&&c| c >= categories) {
                return Err(MetricsError::LabelOutOfRange { label: c, k: categories });
            }
        }
        Ok(Self { categories, ratings })
    }

    pub fn items(&self) -> usize {
        self.ratings.len()
    }

    pub fn raters(&self) -> usize {
        self.ratings[0].len()
    }

    /// One rater's labels across all items.
    pub fn rater(&self, r: usize) -> Vec<usize> {
        self.ratings.iter().map(|row| row[r]).collect()
    }
}

/// Cohen's kappa between two raters.
pub fn cohen_kappa(a: &[usize], b: &[usize]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(MetricsError::LengthMismatch(a.len(), b.len()));
    }
    if a.is_empty() {
        return Err(MetricsError::TooFewItems("cohen's kappa needs at least one item".into()));
    }
    let k = a.iter().chain(b).max().unwrap() + 1;
    let n = a.len() as f64;
    let (mut ma, mut mb) = (vec![0f64; k], vec![0f64; k]);
    let mut agree = 0f64;
    for (&x, &y) in a.iter().zip(b) {
        ma[x] += 1.0;
        mb[y] += 1.0;
        if x == y {
            agree += 1.0;
        }
    }
    let po = agree / n;
    let pe: f64 = ma.iter().zip(&mb).map(|(x, y)| (x / n) * (y / n)).sum();
    if (1.0 - pe).abs() < 1e-15 {
        // both raters used one and the same category throughout
        return Ok(1.0);
    }
    Ok((po - pe) / (1.0 - pe))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FleissKappa {
    pub kappa: f64,
    /// Every rating fell in one category, so chance agreement is 1 and the
    /// statistic is undefined; `kappa` is reported as 1.
    pub degenerate: bool,
}

pub fn fleiss_kappa(table: &AgreementTable) -> FleissKappa {
    let n = table.raters() as f64;
    let items = table.items() as f64;
    let mut totals = vec![0f64; table.categories];
    let mut p_bar = 0.0;
    for row in &table.ratings {
        let mut counts = vec![0f64; table.categories];
        row.iter().for_each(|&c| counts[c] += 1.0);
        let sq: f64 = counts.iter().map(|c| c * c).sum();
        p_bar += (sq - n) / (n * (n - 1.0));
        totals.iter_mut().zip(&counts).for_each(|(t, c)| *t += c);
    }
    p_bar /= items;
    let pe: f64 = totals.iter().map(|t| (t / (items * n)).powi(2)).sum();
    if (1.0 - pe).abs() < 1e-15 {
        return FleissKappa { kappa: 1.0, degenerate: true };
    }
    FleissKappa { kappa: (p_bar - pe) / (1.0 - pe), degenerate: false }
}

/// Multilingual index of a corpus from per-language token counts. Languages
/// with a zero count are not considered present.
pub fn m_index(counts: &[u64]) -> Result<f64> {
    let present: Vec<f64> = counts.iter().filter(|&&c| c > 0).map(|&c| c as f64).collect();
    let total: f64 = present.iter().sum();
    if total == 0.0 {
        return Err(MetricsError::EmptyCorpus);
    }
    let k = present.len();
    if k == 1 {
        return Ok(0.0);
    }
    let s: f64 = present.iter().map(|c| (c / total).powi(2)).sum();
    Ok((1.0 - s) / ((k - 1) as f64 * s))
}
