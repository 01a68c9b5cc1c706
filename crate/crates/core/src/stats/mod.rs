//! Agreement, paired-difference and effect-size statistics.

mod wilcoxon;

use std::collections::HashMap;
use std::hash::Hash;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use wilcoxon::{
    wilcoxon_signed_rank, WilcoxonMethod, WilcoxonOptions, WilcoxonResult, ZeroMethod,
    EXACT_MAX_N,
};

#[derive(Debug, Clone, Error, PartialEq)]
pub enum StatsError {
    #[error("need at least 2 raters per item, got {0}")]
    TooFewRaters(u32),
    #[error("rating matrix is empty")]
    EmptyMatrix,
    #[error("item {item} has {got} ratings, expected {expected}")]
    RaggedRows { item: usize, got: u32, expected: u32 },
    #[error("chance agreement is 1 but observed agreement is not")]
    DegenerateExpectation,
    #[error("all paired differences are zero")]
    AllZeroDifferences,
    #[error("pooled variance is zero")]
    ZeroPooledVariance,
    #[error("lengths differ: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("need at least {need} values, got {got}")]
    TooFew { need: usize, got: usize },
    #[error("non-finite value in input")]
    NonFinite,
}

impl StatsError {
    pub fn code(&self) -> &'static str {
        match self {
            StatsError::TooFewRaters(_) => "TooFewRaters",
            StatsError::EmptyMatrix => "EmptyMatrix",
            StatsError::RaggedRows { .. } => "RaggedRows",
            StatsError::DegenerateExpectation => "DegenerateExpectation",
            StatsError::AllZeroDifferences => "AllZeroDifferences",
            StatsError::ZeroPooledVariance => "ZeroPooledVariance",
            StatsError::LengthMismatch(..) => "LengthMismatch",
            StatsError::TooFew { .. } => "TooFew",
            StatsError::NonFinite => "NonFinite",
        }
    }
}

/// Items x categories count matrix with a constant number of raters per item.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RatingMatrix {
    counts: Vec<Vec<u32>>,
    raters: u32,
}

impl RatingMatrix {
    pub fn new(counts: Vec<Vec<u32>>) -> Result<Self, StatsError> {
        let first = counts.first().ok_or(StatsError::EmptyMatrix)?;
        let width = first.len();
        let raters: u32 = first.iter().sum();
        for (item, row) in counts.iter().enumerate() {
            let got: u32 = row.iter().sum();
            if row.len() != width || got != raters {
                return Err(StatsError::RaggedRows {
                    item,
                    got,
                    expected: raters,
                });
            }
        }
        if raters < 2 {
            return Err(StatsError::TooFewRaters(raters));
        }
        Ok(Self { counts, raters })
    }

    /// Build from per-item category indices (one entry per rater).
    pub fn from_labels(items: &[Vec<usize>], n_categories: usize) -> Result<Self, StatsError> {
        let counts = items
            .iter()
            .map(|labels| {
                let mut row = vec![0u32; n_categories];
                for &l in labels {
                    row[l] += 1;
                }
                row
            })
            .collect();
        Self::new(counts)
    }

    pub fn counts(&self) -> &[Vec<u32>] {
        &self.counts
    }

    pub fn raters(&self) -> u32 {
        self.raters
    }

    pub fn items(&self) -> usize {
        self.counts.len()
    }
}

/// Fleiss' kappa. Returns exactly 1.0 when every rating falls in one category.
pub fn fleiss_kappa(m: &RatingMatrix) -> Result<f64, StatsError> {
    let n = m.raters as f64;
    let items = m.items() as f64;
    let cats = m.counts[0].len();
    let mut col_totals = vec![0u64; cats];
    let mut p_bar = 0.0;
    for row in &m.counts {
        let sq: u64 = row.iter().map(|&c| (c as u64) * (c as u64)).sum();
        p_bar += (sq as f64 - n) / (n * (n - 1.0));
        for (j, &c) in row.iter().enumerate() {
            col_totals[j] += c as u64;
        }
    }
    p_bar /= items;
    if col_totals.iter().filter(|&&t| t > 0).count() <= 1 {
        return if p_bar == 1.0 {
            Ok(1.0)
        } else {
            Err(StatsError::DegenerateExpectation)
        };
    }
    let total = items * n;
    let p_e: f64 = col_totals.iter().map(|&t| (t as f64 / total).powi(2)).sum();
    Ok((p_bar - p_e) / (1.0 - p_e))
}

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Sample variance (n - 1 denominator).
fn sample_var(x: &[f64]) -> f64 {
    let m = mean(x);
    x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (x.len() as f64 - 1.0)
}

/// Standardized mean difference with the pooled sample SD.
pub fn cohens_d(a: &[f64], b: &[f64]) -> Result<f64, StatsError> {
    for x in [a, b] {
        if x.len() < 2 {
            return Err(StatsError::TooFew { need: 2, got: x.len() });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(StatsError::NonFinite);
        }
    }
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let pooled = ((na - 1.0) * sample_var(a) + (nb - 1.0) * sample_var(b)) / (na + nb - 2.0);
    if pooled <= 0.0 {
        return Err(StatsError::ZeroPooledVariance);
    }
    Ok((mean(a) - mean(b)) / pooled.sqrt())
}

/// Mean and the half-width `1.96 * s / sqrt(n)` of a normal 95% interval.
pub fn mean_ci95(x: &[f64]) -> Result<(f64, f64), StatsError> {
    if x.len() < 2 {
        return Err(StatsError::TooFew { need: 2, got: x.len() });
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(StatsError::NonFinite);
    }
    Ok((mean(x), 1.96 * sample_var(x).sqrt() / (x.len() as f64).sqrt()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassScore<L> {
    pub class: L,
    pub f1: f64,
    pub support: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationScores<L> {
    pub accuracy: f64,
    pub macro_f1: f64,
    pub per_class: Vec<ClassScore<L>>,
}

/// Accuracy and macro-F1 over an explicit class list. With
/// `exclude_absent`, classes missing from both `pred` and `gold` are left out
/// of the average instead of contributing 0.
pub fn classification_scores<L: Eq + Hash + Clone>(
    pred: &[L],
    gold: &[L],
    classes: &[L],
    exclude_absent: bool,
) -> Result<ClassificationScores<L>, StatsError> {
    if pred.len() != gold.len() {
        return Err(StatsError::LengthMismatch(pred.len(), gold.len()));
    }
    if pred.is_empty() {
        return Err(StatsError::TooFew { need: 1, got: 0 });
    }
    let idx: HashMap<&L, usize> = classes.iter().enumerate().map(|(i, c)| (c, i)).collect();
    let k = classes.len();
    let (mut tp, mut fp, mut fn_, mut support) = (vec![0usize; k], vec![0usize; k], vec![0usize; k], vec![0usize; k]);
    let mut correct = 0;
    for (p, g) in pred.iter().zip(gold) {
        if p == g {
            correct += 1;
        }
        let pi = idx.get(p).copied();
        let gi = idx.get(g).copied();
        if let Some(gi) = gi {
            support[gi] += 1;
        }
        match (pi, gi) {
            (Some(a), Some(b)) if a == b => tp[a] += 1,
            _ => {
                if let Some(a) = pi {
                    fp[a] += 1;
                }
                if let Some(b) = gi {
                    fn_[b] += 1;
                }
            }
        }
    }
    let mut per_class = Vec::with_capacity(k);
    let mut sum = 0.0;
    let mut counted = 0;
    for (i, c) in classes.iter().enumerate() {
        let denom = 2 * tp[i] + fp[i] + fn_[i];
        let f1 = if denom == 0 { 0.0 } else { 2.0 * tp[i] as f64 / denom as f64 };
        if !(exclude_absent && denom == 0) {
            sum += f1;
            counted += 1;
        }
        per_class.push(ClassScore {
            class: c.clone(),
            f1,
            support: support[i],
        });
    }
    Ok(ClassificationScores {
        accuracy: correct as f64 / pred.len() as f64,
        macro_f1: if counted == 0 { 0.0 } else { sum / counted as f64 },
        per_class,
    })
}
