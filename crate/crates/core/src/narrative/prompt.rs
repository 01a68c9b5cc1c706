use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{strip_fence, AnnotationRequest, ChatMessage, NarrativeError};

const NARRATIVE_V1: &str = include_str!("../../templates/narrative_v1.txt");
const PROSODIC_V1: &str = include_str!("../../templates/prosodic_v1.txt");

const USER_SPLIT: &str = "---USER---\n";

/// A versioned prompt: system instructions plus a user message with a
/// `{{context}}` slot.
#[derive(Debug, Clone, PartialEq)]
pub struct PromptTemplate {
    pub id: String,
    pub system: String,
    pub user: String,
    /// Hex SHA-256 of the full template text.
    pub hash: String,
}

impl PromptTemplate {
    pub fn parse(id: &str, text: &str) -> Result<Self, NarrativeError> {
        let (system, user) = text
            .split_once(USER_SPLIT)
            .ok_or_else(|| NarrativeError::UnknownTemplate(format!("{id}: no user section")))?;
        if !user.contains("{{context}}") {
            return Err(NarrativeError::UnknownTemplate(format!(
                "{id}: user section lacks {{{{context}}}}"
            )));
        }
        Ok(Self {
            id: id.to_string(),
            system: system.trim_end().to_string(),
            user: user.trim_end().to_string(),
            hash: hex::encode(Sha256::digest(text.as_bytes())),
        })
    }

    pub fn builtin(id: &str) -> Result<Self, NarrativeError> {
        match id {
            "narrative_v1" => Self::parse(id, NARRATIVE_V1),
            "prosodic_v1" => Self::parse(id, PROSODIC_V1),
            other => Err(NarrativeError::UnknownTemplate(other.to_string())),
        }
    }

    pub fn narrative() -> Self {
        Self::builtin("narrative_v1").expect("bundled template parses")
    }

    pub fn render(&self, req: &AnnotationRequest) -> Vec<ChatMessage> {
        vec![
            ChatMessage::system(self.system.clone()),
            ChatMessage::user(self.user.replace("{{context}}", &req.render_context())),
        ]
    }
}

/// 0-10 ratings from the prosodic template.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProsodicScores {
    pub courtesy: u8,
    pub nostalgia: u8,
    pub humor: u8,
    pub emotional_weight: u8,
    pub coping: u8,
    pub direct_interviewer_response: u8,
    pub topic_shift: u8,
    pub self_reference: u8,
    pub positivity: u8,
    pub negativity: u8,
}

pub fn parse_prosodic(reply: &str) -> Result<ProsodicScores, String> {
    let s: ProsodicScores = serde_json::from_str(strip_fence(reply)).map_err(|e| e.to_string())?;
    let all = [
        s.courtesy,
        s.nostalgia,
        s.humor,
        s.emotional_weight,
        s.coping,
        s.direct_interviewer_response,
        s.topic_shift,
        s.self_reference,
        s.positivity,
        s.negativity,
    ];
    if let Some(v) = all.iter().find(|&&v| v > 10) {
        return Err(format!("score {v} above 10"));
    }
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtins_parse_and_hash_differs() {
        let a = PromptTemplate::builtin("narrative_v1").unwrap();
        let b = PromptTemplate::builtin("prosodic_v1").unwrap();
        assert_ne!(a.hash, b.hash);
        assert_eq!(a.hash.len(), 64);
        assert!(PromptTemplate::builtin("nope").is_err());
    }

    #[test]
    fn prosodic_range_checked() {
        let ok = r#"{"courtesy":1,"nostalgia":2,"humor":3,"emotional_weight":4,"coping":5,
            "direct_interviewer_response":6,"topic_shift":7,"self_reference":8,"positivity":9,"negativity":10}"#;
        assert_eq!(parse_prosodic(ok).unwrap().negativity, 10);
        assert!(parse_prosodic(&ok.replace("10}", "11}")).is_err());
    }
}
