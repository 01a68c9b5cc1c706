use serde::{Deserialize, Serialize};

use super::NarrativeError;
use crate::corpus::{Speaker, TranscriptSentence};

/// Seconds of context on each side of the target, measured on sentence starts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContextWindow {
    pub before: f64,
    pub after: f64,
}

impl Default for ContextWindow {
    fn default() -> Self {
        Self {
            before: 20.0,
            after: 15.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContextSentence {
    pub index: u64,
    pub start: f64,
    pub speaker: Speaker,
    pub text: String,
    pub is_target: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotationRequest {
    pub target_index: u64,
    /// Ordered window; exactly one entry has `is_target`.
    pub context: Vec<ContextSentence>,
}

impl AnnotationRequest {
    pub fn target(&self) -> &ContextSentence {
        self.context
            .iter()
            .find(|c| c.is_target)
            .expect("request holds its target")
    }

    /// Speaker-tagged transcript window with the target wrapped in markers.
    pub fn render_context(&self) -> String {
        let mut out = String::new();
        for c in &self.context {
            let tag = match c.speaker {
                Speaker::Subject => "[SUBJECT]",
                Speaker::Interviewer => "[INTERVIEWER]",
            };
            if c.is_target {
                out.push_str(&format!(">>> {tag} {} <<<\n", c.text));
            } else {
                out.push_str(&format!("{tag} {}\n", c.text));
            }
        }
        out.pop();
        out
    }
}

/// Window of sentences whose start lies in
/// `[target.start - before, target.start + after]`, in transcript order.
pub fn build_context(
    transcript: &[TranscriptSentence],
    sentence_index: usize,
    window: ContextWindow,
) -> Result<AnnotationRequest, NarrativeError> {
    let target = transcript
        .get(sentence_index)
        .ok_or(NarrativeError::IndexOutOfRange {
            index: sentence_index,
            len: transcript.len(),
        })?;
    let lo = target.start - window.before;
    let hi = target.start + window.after;
    let context = transcript
        .iter()
        .enumerate()
        .filter(|(i, s)| *i == sentence_index || (s.start >= lo && s.start <= hi))
        .map(|(i, s)| ContextSentence {
            index: s.index,
            start: s.start,
            speaker: s.speaker,
            text: s.text.clone(),
            is_target: i == sentence_index,
        })
        .collect();
    Ok(AnnotationRequest {
        target_index: target.index,
        context,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sentence(index: u64, start: f64, len: f64) -> TranscriptSentence {
        TranscriptSentence {
            index,
            start,
            end: start + len,
            speaker: if index.is_multiple_of(2) {
                Speaker::Subject
            } else {
                Speaker::Interviewer
            },
            text: format!("sentence {index}"),
            word_onsets: vec![],
            onsets_interpolated: true,
            annotation: None,
        }
    }

    #[test]
    fn isolated_sentence_is_its_own_context() {
        let t = vec![sentence(0, 0.0, 1.0), sentence(1, 100.0, 1.0), sentence(2, 200.0, 1.0)];
        let req = build_context(&t, 1, ContextWindow::default()).unwrap();
        assert_eq!(req.context.len(), 1);
        assert!(req.context[0].is_target);
    }

    #[test]
    fn dense_sentences_give_twenty_before_fifteen_after() {
        let t: Vec<_> = (0..100).map(|i| sentence(i, i as f64, 1.0)).collect();
        let req = build_context(&t, 50, ContextWindow::default()).unwrap();
        // brute-force filter on start times
        let expected: Vec<u64> = t
            .iter()
            .filter(|s| s.start >= 30.0 && s.start <= 65.0)
            .map(|s| s.index)
            .collect();
        let got: Vec<u64> = req.context.iter().map(|c| c.index).collect();
        assert_eq!(got, expected);
        let before = got.iter().filter(|&&i| i < 50).count();
        let after = got.iter().filter(|&&i| i > 50).count();
        assert_eq!((before, after), (20, 15));
        assert_eq!(req.context.iter().filter(|c| c.is_target).count(), 1);
    }

    #[test]
    fn first_sentence_has_no_preceding_context() {
        let t: Vec<_> = (0..10).map(|i| sentence(i, i as f64 * 2.0, 1.0)).collect();
        let req = build_context(&t, 0, ContextWindow::default()).unwrap();
        assert_eq!(req.context[0].index, 0);
        assert!(req.context[0].is_target);
        assert_eq!(req.context.len(), 8);
    }

    #[test]
    fn out_of_range_index() {
        let t = vec![sentence(0, 0.0, 1.0)];
        assert!(matches!(
            build_context(&t, 3, ContextWindow::default()),
            Err(NarrativeError::IndexOutOfRange { index: 3, len: 1 })
        ));
    }

    #[test]
    fn widening_never_removes_sentences() {
        let t: Vec<_> = (0..60).map(|i| sentence(i, i as f64 * 1.7, 1.0)).collect();
        for target in [0, 10, 30, 59] {
            let narrow = build_context(&t, target, ContextWindow { before: 5.0, after: 3.0 }).unwrap();
            let wide = build_context(&t, target, ContextWindow { before: 12.0, after: 9.0 }).unwrap();
            for c in &narrow.context {
                assert!(wide.context.iter().any(|w| w.index == c.index));
            }
        }
    }

    #[test]
    fn render_marks_target() {
        let t: Vec<_> = (0..3).map(|i| sentence(i, i as f64, 1.0)).collect();
        let req = build_context(&t, 1, ContextWindow::default()).unwrap();
        let text = req.render_context();
        assert_eq!(
            text,
            "[SUBJECT] sentence 0\n>>> [INTERVIEWER] sentence 1 <<<\n[SUBJECT] sentence 2"
        );
    }
}
