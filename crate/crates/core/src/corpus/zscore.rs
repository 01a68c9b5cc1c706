use serde::{Deserialize, Serialize};

use super::{CorpusError, VideoBundle, AU_CODES};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelStats {
    pub mean: f64,
    /// Population standard deviation.
    pub sd: f64,
}

impl ChannelStats {
    /// `(x - mean) / sd`, or 0 for a constant channel.
    pub fn z(&self, x: f64) -> f64 {
        if self.sd > 0.0 {
            (x - self.mean) / self.sd
        } else {
            0.0
        }
    }
}

/// Per-AU normalizers pooled over all of a subject's videos.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerSubjectAuStats {
    pub subject_id: String,
    pub codes: Vec<String>,
    pub channels: Vec<ChannelStats>,
    pub frames: usize,
}

impl PerSubjectAuStats {
    pub fn get(&self, code: &str) -> Option<ChannelStats> {
        self.codes
            .iter()
            .position(|c| c == code)
            .map(|i| self.channels[i])
    }

    pub fn z(&self, code: &str, x: f64) -> f64 {
        self.get(code).map(|s| s.z(x)).unwrap_or(0.0)
    }
}

/// Mean and population SD of each canonical AU over the concatenated frames
/// of `bundles`, which must all belong to one subject.
pub fn per_subject_au_stats(bundles: &[&VideoBundle]) -> Result<PerSubjectAuStats, CorpusError> {
    let frames: usize = bundles.iter().map(|b| b.au.len()).sum();
    if frames == 0 {
        return Err(CorpusError::EmptyInput("no AU frames for subject".into()));
    }
    let subject_id = bundles[0].subject_id.clone();
    if let Some(other) = bundles.iter().find(|b| b.subject_id != subject_id) {
        return Err(CorpusError::EmptyInput(format!(
            "bundles mix subjects {subject_id} and {}",
            other.subject_id
        )));
    }
    let mut codes = Vec::new();
    let mut channels = Vec::new();
    for code in AU_CODES {
        let series: Vec<&[f64]> = bundles.iter().filter_map(|b| b.au.channel(code)).collect();
        let n: usize = series.iter().map(|s| s.len()).sum();
        if n == 0 {
            continue;
        }
        let mean = series.iter().flat_map(|s| s.iter()).sum::<f64>() / n as f64;
        let var = series
            .iter()
            .flat_map(|s| s.iter())
            .map(|x| (x - mean) * (x - mean))
            .sum::<f64>()
            / n as f64;
        codes.push(code.to_string());
        channels.push(ChannelStats {
            mean,
            sd: var.sqrt(),
        });
    }
    Ok(PerSubjectAuStats {
        subject_id,
        codes,
        channels,
        frames,
    })
}
