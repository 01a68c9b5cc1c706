use serde::{Deserialize, Serialize};

/// Label returned when a rater judges the clip not to contain a smile.
pub const NOT_A_SMILE: &str = "not-a-smile";

/// Closed label set a batch is rated under.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Taxonomy {
    /// Social function of the smile.
    Social,
    /// Felt versus produced affect.
    Authenticity,
}

impl Taxonomy {
    pub fn labels(self) -> &'static [&'static str] {
        match self {
            Taxonomy::Social => &["genuine", "polite", "masking"],
            Taxonomy::Authenticity => &["felt", "false", "miserable"],
        }
    }

    /// Taxonomy labels followed by `not-a-smile`; the category order of
    /// four-class agreement matrices.
    pub fn categories(self) -> Vec<&'static str> {
        let mut v = self.labels().to_vec();
        v.push(NOT_A_SMILE);
        v
    }

    pub fn accepts(self, label: &str) -> bool {
        label == NOT_A_SMILE || self.labels().contains(&label)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BinaryLabel {
    Smile,
    NoSmile,
}

/// Any taxonomy label is a smile; `not-a-smile` is not.
pub fn collapse_binary(label: &str) -> BinaryLabel {
    if label == NOT_A_SMILE {
        BinaryLabel::NoSmile
    } else {
        BinaryLabel::Smile
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_sets() {
        assert!(Taxonomy::Social.accepts("genuine"));
        assert!(!Taxonomy::Authenticity.accepts("genuine"));
        assert!(Taxonomy::Authenticity.accepts(NOT_A_SMILE));
        assert_eq!(Taxonomy::Social.categories().len(), 4);
    }

    #[test]
    fn collapse() {
        for l in ["genuine", "polite", "masking", "felt", "false", "miserable"] {
            assert_eq!(collapse_binary(l), BinaryLabel::Smile);
        }
        assert_eq!(collapse_binary(NOT_A_SMILE), BinaryLabel::NoSmile);
    }
}
