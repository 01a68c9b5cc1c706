use std::collections::BTreeMap;

use ndarray::{Array2, ArrayView2, Axis};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{
    f1_optimal_threshold, roc_auc, roc_curve, scores_at, validate, LearnError, RocPoint,
    ScaledLogistic, ThresholdChoice,
};

pub const DEFAULT_CV_SEED: u64 = 0x5eed;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CvOptions {
    pub l2: f64,
    pub seed: u64,
}

impl Default for CvOptions {
    fn default() -> Self {
        Self {
            l2: 1.0,
            seed: DEFAULT_CV_SEED,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldReport {
    pub fold: usize,
    pub n_train: usize,
    pub n_test: usize,
    /// `None` when the held-out fold holds a single class.
    pub auc: Option<f64>,
    /// F1 on this fold at the pooled F1-optimal θ.
    pub f1_at_theta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub k: usize,
    pub folds: Vec<FoldReport>,
    pub pooled_auc: f64,
    pub mean_auc: Option<f64>,
    pub roc: Vec<RocPoint>,
    pub threshold: ThresholdChoice,
    /// Out-of-fold probability for every sample, in input order.
    pub oof_scores: Vec<f64>,
    pub fold_of: Vec<usize>,
}

fn group_rank_key(group: &str, seed: u64) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(group.as_bytes());
    h.finalize().into()
}

/// Fold index per sample. Groups are ordered by a seeded hash and dealt
/// round-robin, so a group never straddles folds and fold sizes differ by at
/// most one group.
pub fn assign_folds(
    n: usize,
    k: usize,
    groups: Option<&[String]>,
    seed: u64,
) -> Result<Vec<usize>, LearnError> {
    if k < 2 {
        return Err(LearnError::InvalidParameter(format!("k = {k}")));
    }
    let ids: Vec<String> = match groups {
        Some(g) => {
            if g.len() != n {
                return Err(LearnError::DimensionMismatch {
                    rows: n,
                    labels: g.len(),
                });
            }
            g.to_vec()
        }
        None => (0..n).map(|i| i.to_string()).collect(),
    };
    let mut distinct: BTreeMap<&str, [u8; 32]> = BTreeMap::new();
    for id in &ids {
        distinct
            .entry(id.as_str())
            .or_insert_with(|| group_rank_key(id, seed));
    }
    if distinct.len() < k {
        return Err(LearnError::TooFewGroups {
            groups: distinct.len(),
            k,
        });
    }
    let mut ordered: Vec<(&str, [u8; 32])> = distinct.into_iter().collect();
    ordered.sort_by(|a, b| a.1.cmp(&b.1).then(a.0.cmp(b.0)));
    let fold_of_group: BTreeMap<&str, usize> = ordered
        .iter()
        .enumerate()
        .map(|(j, (g, _))| (*g, j % k))
        .collect();
    Ok(ids.iter().map(|g| fold_of_group[g.as_str()]).collect())
}

fn take_rows(x: ArrayView2<f64>, rows: &[usize]) -> Array2<f64> {
    x.select(Axis(0), rows)
}

/// k-fold cross-validation of a standardized logistic model. Folds run in
/// parallel; results are identical to a sequential run.
pub fn kfold_cv(
    x: ArrayView2<f64>,
    y: &[bool],
    k: usize,
    groups: Option<&[String]>,
    opts: CvOptions,
) -> Result<CvReport, LearnError> {
    validate(x, y)?;
    let fold_of = assign_folds(y.len(), k, groups, opts.seed)?;
    let fits: Vec<Result<(Vec<usize>, Vec<f64>), LearnError>> = (0..k)
        .into_par_iter()
        .map(|f| {
            let test: Vec<usize> = (0..y.len()).filter(|&i| fold_of[i] == f).collect();
            let train: Vec<usize> = (0..y.len()).filter(|&i| fold_of[i] != f).collect();
            let ytr: Vec<bool> = train.iter().map(|&i| y[i]).collect();
            let model = ScaledLogistic::fit(take_rows(x, &train).view(), &ytr, opts.l2)?;
            let scores = model.predict_all(take_rows(x, &test).view());
            Ok((test, scores))
        })
        .collect();
    let mut oof = vec![0.0; y.len()];
    let mut fold_rows = Vec::with_capacity(k);
    for r in fits {
        let (test, scores) = r?;
        for (&i, &s) in test.iter().zip(&scores) {
            oof[i] = s;
        }
        fold_rows.push(test);
    }
    let threshold = f1_optimal_threshold(&oof, y)?;
    let folds: Vec<FoldReport> = fold_rows
        .iter()
        .enumerate()
        .map(|(f, test)| {
            let s: Vec<f64> = test.iter().map(|&i| oof[i]).collect();
            let l: Vec<bool> = test.iter().map(|&i| y[i]).collect();
            FoldReport {
                fold: f,
                n_train: y.len() - test.len(),
                n_test: test.len(),
                auc: roc_auc(&s, &l).ok(),
                f1_at_theta: scores_at(&s, &l, threshold.theta).f1,
            }
        })
        .collect();
    let aucs: Vec<f64> = folds.iter().filter_map(|f| f.auc).collect();
    Ok(CvReport {
        k,
        pooled_auc: roc_auc(&oof, y)?,
        mean_auc: (!aucs.is_empty()).then(|| aucs.iter().sum::<f64>() / aucs.len() as f64),
        roc: roc_curve(&oof, y)?,
        threshold,
        folds,
        oof_scores: oof,
        fold_of,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureAuc {
    pub index: usize,
    pub name: String,
    pub auc: f64,
}

/// AUC of every column taken alone, best first (ties keep column order).
pub fn univariate_auc_scan(
    x: ArrayView2<f64>,
    y: &[bool],
    names: &[String],
) -> Result<Vec<FeatureAuc>, LearnError> {
    validate(x, y)?;
    if names.len() != x.ncols() {
        return Err(LearnError::DimensionMismatch {
            rows: x.ncols(),
            labels: names.len(),
        });
    }
    let mut out: Vec<FeatureAuc> = (0..x.ncols())
        .into_par_iter()
        .map(|j| {
            let col: Vec<f64> = x.column(j).to_vec();
            Ok(FeatureAuc {
                index: j,
                name: names[j].clone(),
                auc: roc_auc(&col, y)?,
            })
        })
        .collect::<Result<_, LearnError>>()?;
    out.sort_by(|a, b| b.auc.total_cmp(&a.auc).then(a.index.cmp(&b.index)));
    Ok(out)
}
