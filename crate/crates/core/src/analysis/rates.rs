use serde::{Deserialize, Serialize};

use super::{
    require_annotations, smiles_of, subject_sentences, AnalysisError, OverlapRule, PlotPoints,
    SmileIndex,
};
use crate::corpus::Corpus;
use crate::narrative::{NarrativeAnnotation, Structure, TemporalSyntax};
use crate::stats::{wilcoxon_signed_rank, StatsError, WilcoxonOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Facet {
    Structure,
    Syntax,
}

impl Facet {
    pub fn categories(self) -> Vec<&'static str> {
        match self {
            Facet::Structure => Structure::ALL.iter().map(|s| s.as_str()).collect(),
            Facet::Syntax => TemporalSyntax::ALL.iter().map(|s| s.as_str()).collect(),
        }
    }

    fn category(self, a: &NarrativeAnnotation) -> &'static str {
        match self {
            Facet::Structure => a.structure.as_str(),
            Facet::Syntax => a.temporal_syntax.as_str(),
        }
    }
}

impl std::str::FromStr for Facet {
    type Err = AnalysisError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "structure" => Ok(Facet::Structure),
            "syntax" | "temporal-syntax" => Ok(Facet::Syntax),
            other => Err(AnalysisError::UnknownFacet(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryChange {
    pub category: String,
    /// Mean over subjects of `(rate_smile - rate_nosmile) / rate_nosmile`, in percent.
    pub pct_change: Option<f64>,
    /// Subjects entering the percent-change mean (non-smile rate above 0).
    pub n_pct: usize,
    pub mean_rate_smile: f64,
    pub mean_rate_nosmile: f64,
    /// Paired signed-rank p over subjects; `None` when every pair ties.
    pub p_value: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateChangeReport {
    pub facet: Facet,
    pub overlap: OverlapRule,
    pub categories: Vec<CategoryChange>,
    /// Subjects with both smile and non-smile sentences.
    pub n_subjects: usize,
    /// Subjects dropped for lacking smile or non-smile sentences.
    pub excluded_subjects: Vec<String>,
}

impl RateChangeReport {
    pub fn get(&self, category: &str) -> Option<&CategoryChange> {
        self.categories.iter().find(|c| c.category == category)
    }
}

/// Within-subject category rates among smile sentences versus non-smile
/// sentences. Only subject sentences count; a sentence is a smile sentence
/// when `overlap` matches any smile.
pub fn structure_syntax_rate_change(
    corpus: &Corpus,
    smiles: &SmileIndex,
    facet: Facet,
    overlap: OverlapRule,
) -> Result<RateChangeReport, AnalysisError> {
    for v in &corpus.videos {
        require_annotations(v)?;
    }
    let cats = facet.categories();
    // per subject: (smile rates, non-smile rates)
    let mut pairs: Vec<(Vec<f64>, Vec<f64>)> = Vec::new();
    let mut excluded = Vec::new();
    for (subject, videos) in corpus.by_subject_sorted() {
        let mut smile_counts = vec![0usize; cats.len()];
        let mut other_counts = vec![0usize; cats.len()];
        for v in &videos {
            let list = smiles_of(smiles, &v.video_id);
            for s in subject_sentences(v) {
                let Some(a) = &s.annotation else { continue };
                let c = cats.iter().position(|c| *c == facet.category(a)).expect("closed vocabulary");
                if list.iter().any(|m| overlap.hits(m, s.start, s.end)) {
                    smile_counts[c] += 1;
                } else {
                    other_counts[c] += 1;
                }
            }
        }
        let ns: usize = smile_counts.iter().sum();
        let no: usize = other_counts.iter().sum();
        if ns == 0 || no == 0 {
            excluded.push(subject.to_string());
            continue;
        }
        pairs.push((
            smile_counts.iter().map(|&c| c as f64 / ns as f64).collect(),
            other_counts.iter().map(|&c| c as f64 / no as f64).collect(),
        ));
    }
    let n = pairs.len();
    let categories = cats
        .iter()
        .enumerate()
        .map(|(c, name)| {
            let paired: Vec<(f64, f64)> = pairs.iter().map(|(s, o)| (s[c], o[c])).collect();
            let rel: Vec<f64> = paired
                .iter()
                .filter(|(_, o)| *o > 0.0)
                .map(|(s, o)| (s - o) / o)
                .collect();
            let p_value = match wilcoxon_signed_rank(&paired, WilcoxonOptions::default()) {
                Ok(r) => Some(r.p_two_sided),
                Err(StatsError::AllZeroDifferences) => None,
                Err(e) => return Err(e.into()),
            };
            let mean = |xs: Vec<f64>| if xs.is_empty() { 0.0 } else { xs.iter().sum::<f64>() / xs.len() as f64 };
            Ok(CategoryChange {
                category: name.to_string(),
                pct_change: (!rel.is_empty()).then(|| 100.0 * rel.iter().sum::<f64>() / rel.len() as f64),
                n_pct: rel.len(),
                mean_rate_smile: mean(paired.iter().map(|p| p.0).collect()),
                mean_rate_nosmile: mean(paired.iter().map(|p| p.1).collect()),
                p_value,
            })
        })
        .collect::<Result<Vec<_>, AnalysisError>>()?;
    Ok(RateChangeReport {
        facet,
        overlap,
        categories,
        n_subjects: n,
        excluded_subjects: excluded,
    })
}

impl PlotPoints for RateChangeReport {
    fn figure_id(&self) -> &'static str {
        match self.facet {
            Facet::Structure => "rate-change-structure",
            Facet::Syntax => "rate-change-syntax",
        }
    }

    fn csv_header(&self) -> Vec<&'static str> {
        vec!["category", "pct_change", "p_value", "n_subjects"]
    }

    fn csv_rows(&self) -> Vec<Vec<String>> {
        self.categories
            .iter()
            .map(|c| {
                vec![
                    c.category.clone(),
                    super::fmt_opt(c.pct_change),
                    super::fmt_opt(c.p_value),
                    self.n_subjects.to_string(),
                ]
            })
            .collect()
    }
}
