use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    interpolate_onsets, AffectModality, AffectSample, AffectTrack, AuFrameSeries, Corpus,
    CorpusError, GazeSample, GazeTrack, Speaker, TranscriptSentence, VideoBundle, WordOnset,
    AU_MAX_INTENSITY, REQUIRED_CHANNELS,
};
use crate::narrative::NarrativeAnnotation;

/// Linear map applied to every affect value at ingestion: `v * scale + offset`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearRescale {
    pub scale: f64,
    pub offset: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FormatConfig {
    /// Canonicalizes upstream VAD scales onto `[-1, 1]`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub affect_rescale: Option<LinearRescale>,
    /// Allowed overrun of the transcript past the AU track, in seconds.
    #[serde(default = "default_duration_tolerance")]
    pub duration_tolerance: f64,
}

fn default_duration_tolerance() -> f64 {
    1.0
}

impl Default for FormatConfig {
    fn default() -> Self {
        Self {
            affect_rescale: None,
            duration_tolerance: default_duration_tolerance(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BundlePaths {
    pub au: PathBuf,
    pub transcript: PathBuf,
    pub audio_affect: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gaze_affect: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gaze: Option<PathBuf>,
}

impl BundlePaths {
    pub fn resolve(&self, base: &Path) -> BundlePaths {
        let r = |p: &PathBuf| {
            if p.is_absolute() {
                p.clone()
            } else {
                base.join(p)
            }
        };
        BundlePaths {
            au: r(&self.au),
            transcript: r(&self.transcript),
            audio_affect: r(&self.audio_affect),
            gaze_affect: self.gaze_affect.as_ref().map(r),
            gaze: self.gaze.as_ref().map(r),
        }
    }

    pub fn all(&self) -> Vec<&Path> {
        let mut v = vec![self.au.as_path(), &self.transcript, &self.audio_affect];
        v.extend(self.gaze_affect.as_deref());
        v.extend(self.gaze.as_deref());
        v
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub video_id: String,
    pub subject_id: String,
    pub fps: f64,
    #[serde(flatten)]
    pub paths: BundlePaths,
}

/// Corpus manifest: video id to file paths, subject and frame rate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub videos: Vec<ManifestEntry>,
    #[serde(default)]
    pub format: FormatConfig,
}

fn io_err(path: &Path, source: std::io::Error) -> CorpusError {
    CorpusError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn malformed(path: &Path, line: usize, reason: impl Into<String>) -> CorpusError {
    CorpusError::MalformedRow {
        path: path.display().to_string(),
        line,
        reason: reason.into(),
    }
}

pub fn load_manifest(path: &Path) -> Result<Manifest, CorpusError> {
    let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let manifest: Manifest =
        serde_json::from_str(&text).map_err(|e| CorpusError::InvalidManifest {
            path: path.display().to_string(),
            reason: e.to_string(),
        })?;
    let mut ids = std::collections::HashSet::new();
    for v in &manifest.videos {
        if !ids.insert(v.video_id.as_str()) {
            return Err(CorpusError::InvalidManifest {
                path: path.display().to_string(),
                reason: format!("duplicate video id {}", v.video_id),
            });
        }
        if !(v.fps > 0.0 && v.fps.is_finite()) {
            return Err(CorpusError::InvalidManifest {
                path: path.display().to_string(),
                reason: format!("video {} has non-positive fps", v.video_id),
            });
        }
    }
    Ok(manifest)
}

pub fn write_manifest(path: &Path, manifest: &Manifest) -> Result<(), CorpusError> {
    let text = serde_json::to_string_pretty(manifest).expect("manifest serializes");
    std::fs::write(path, text + "\n").map_err(|e| io_err(path, e))
}

/// Ingest every video of a manifest. Paths resolve relative to the manifest.
pub fn ingest_corpus(manifest_path: &Path) -> Result<Corpus, CorpusError> {
    let manifest = load_manifest(manifest_path)?;
    let base = manifest_path.parent().unwrap_or(Path::new("."));
    let videos = manifest
        .videos
        .par_iter()
        .map(|e| ingest_video_bundle(e, base, &manifest.format))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Corpus::new(videos))
}

/// Read and validate one video's files.
pub fn ingest_video_bundle(
    entry: &ManifestEntry,
    base: &Path,
    format: &FormatConfig,
) -> Result<VideoBundle, CorpusError> {
    let paths = entry.paths.resolve(base);
    let au = read_au_csv(&paths.au)?;
    if au.is_empty() {
        return Err(CorpusError::EmptyInput(format!(
            "{} has no frames",
            paths.au.display()
        )));
    }
    let duration = au.len() as f64 / entry.fps;
    let last_ts = *au.timestamps.last().unwrap();
    let expected_last = au.timestamps[0] + (au.len() - 1) as f64 / entry.fps;
    if (last_ts - expected_last).abs() > 1.0 / entry.fps + 1e-9 {
        return Err(CorpusError::MisalignedDuration {
            path: paths.au.display().to_string(),
            reason: format!(
                "{} frames at {} fps end at {expected_last:.3} s but timestamps end at {last_ts:.3} s",
                au.len(),
                entry.fps
            ),
        });
    }
    let transcript = read_transcript_jsonl(&paths.transcript, duration, format.duration_tolerance)?;
    let audio_affect = read_affect_csv(&paths.audio_affect, AffectModality::Audio, format)?;
    let gaze_affect = paths
        .gaze_affect
        .as_deref()
        .map(|p| read_affect_csv(p, AffectModality::Eyegaze, format))
        .transpose()?;
    let gaze = paths.gaze.as_deref().map(read_gaze_csv).transpose()?;
    Ok(VideoBundle {
        video_id: entry.video_id.clone(),
        subject_id: entry.subject_id.clone(),
        fps: entry.fps,
        au,
        transcript,
        audio_affect,
        gaze_affect,
        gaze,
    })
}

fn csv_reader(path: &Path) -> Result<csv::Reader<File>, CorpusError> {
    let file = File::open(path).map_err(|e| io_err(path, e))?;
    Ok(csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(file))
}

fn parse_f64(path: &Path, line: usize, field: &str, raw: &str) -> Result<f64, CorpusError> {
    let v: f64 = raw
        .parse()
        .map_err(|_| malformed(path, line, format!("{field}: non-numeric value {raw:?}")))?;
    if !v.is_finite() {
        return Err(malformed(path, line, format!("{field}: non-finite value")));
    }
    Ok(v)
}

fn record_line(rec: &csv::StringRecord, fallback: usize) -> usize {
    rec.position().map(|p| p.line() as usize).unwrap_or(fallback)
}

fn read_au_csv(path: &Path) -> Result<AuFrameSeries, CorpusError> {
    let mut rdr = csv_reader(path)?;
    let headers = rdr
        .headers()
        .map_err(|e| malformed(path, 1, e.to_string()))?
        .clone();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let frame_col = col("frame").ok_or_else(|| CorpusError::MissingChannel {
        channel: "frame".into(),
        path: path.display().to_string(),
    })?;
    let ts_col = col("timestamp").ok_or_else(|| CorpusError::MissingChannel {
        channel: "timestamp".into(),
        path: path.display().to_string(),
    })?;
    let mut au_cols = Vec::new();
    for (i, h) in headers.iter().enumerate() {
        if let Some(code) = h.strip_suffix("_r") {
            if code.starts_with("AU") {
                au_cols.push((code.to_string(), i));
            }
        }
    }
    for req in REQUIRED_CHANNELS {
        if !au_cols.iter().any(|(c, _)| c == req) {
            return Err(CorpusError::MissingChannel {
                channel: req.to_string(),
                path: path.display().to_string(),
            });
        }
    }
    let blink_col = col("AU45_c");

    let mut series = AuFrameSeries {
        codes: au_cols.iter().map(|(c, _)| c.clone()).collect(),
        intensities: vec![Vec::new(); au_cols.len()],
        frame_numbers: Vec::new(),
        timestamps: Vec::new(),
        blink: blink_col.map(|_| Vec::new()),
    };
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| malformed(path, row + 2, e.to_string()))?;
        let line = record_line(&rec, row + 2);
        let get = |i: usize| rec.get(i).unwrap_or("");
        let frame: u64 = get(frame_col)
            .parse()
            .map_err(|_| malformed(path, line, format!("frame: bad value {:?}", get(frame_col))))?;
        let ts = parse_f64(path, line, "timestamp", get(ts_col))?;
        if let Some(&prev) = series.timestamps.last() {
            if ts < prev {
                return Err(malformed(path, line, "timestamps decrease"));
            }
        }
        series.frame_numbers.push(frame);
        series.timestamps.push(ts);
        for (k, (code, i)) in au_cols.iter().enumerate() {
            let v = parse_f64(path, line, code, get(*i))?;
            if !(0.0..=AU_MAX_INTENSITY).contains(&v) {
                return Err(malformed(
                    path,
                    line,
                    format!("{code}_r intensity {v} outside [0, {AU_MAX_INTENSITY}]"),
                ));
            }
            series.intensities[k].push(v);
        }
        if let (Some(i), Some(blink)) = (blink_col, series.blink.as_mut()) {
            let raw = get(i);
            let b = match raw {
                "0" | "0.0" => 0,
                "1" | "1.0" => 1,
                _ => {
                    return Err(malformed(
                        path,
                        line,
                        format!("AU45_c must be 0 or 1, got {raw:?}"),
                    ))
                }
            };
            blink.push(b);
        }
    }
    Ok(series)
}

#[derive(Debug, Serialize, Deserialize)]
struct SentenceRecord {
    index: u64,
    start: f64,
    end: f64,
    speaker: Speaker,
    text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    word_onsets: Option<Vec<(String, f64)>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    annotation: Option<NarrativeAnnotation>,
}

fn read_transcript_jsonl(
    path: &Path,
    duration: f64,
    tolerance: f64,
) -> Result<Vec<TranscriptSentence>, CorpusError> {
    let file = File::open(path).map_err(|e| io_err(path, e))?;
    let mut out: Vec<TranscriptSentence> = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let lineno = i + 1;
        let line = line.map_err(|e| io_err(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: SentenceRecord = serde_json::from_str(&line)
            .map_err(|e| malformed(path, lineno, e.to_string()))?;
        if !(rec.start.is_finite() && rec.end.is_finite()) || rec.start < 0.0 || rec.start >= rec.end {
            return Err(malformed(
                path,
                lineno,
                format!("sentence interval [{}, {}) is invalid", rec.start, rec.end),
            ));
        }
        if rec.end > duration + tolerance {
            return Err(CorpusError::MisalignedDuration {
                path: path.display().to_string(),
                reason: format!(
                    "sentence {} ends at {} s, past the {duration:.3} s AU track",
                    rec.index, rec.end
                ),
            });
        }
        if let Some(prev) = out.last() {
            if rec.index <= prev.index {
                return Err(malformed(path, lineno, "sentence index not increasing"));
            }
            if rec.start < prev.start {
                return Err(malformed(path, lineno, "sentences not ordered by start"));
            }
        }
        if let Some(prev_same) = out.iter().rev().find(|s| s.speaker == rec.speaker) {
            if rec.start < prev_same.end {
                return Err(malformed(
                    path,
                    lineno,
                    "sentence overlaps the previous sentence of the same speaker",
                ));
            }
        }
        let (word_onsets, interpolated) = match rec.word_onsets {
            Some(w) => {
                for (word, onset) in &w {
                    if !(onset.is_finite() && *onset >= rec.start && *onset <= rec.end) {
                        return Err(malformed(
                            path,
                            lineno,
                            format!("onset of {word:?} at {onset} lies outside the sentence"),
                        ));
                    }
                }
                (
                    w.into_iter()
                        .map(|(word, onset)| WordOnset { word, onset })
                        .collect(),
                    false,
                )
            }
            None => (interpolate_onsets(&rec.text, rec.start, rec.end), true),
        };
        out.push(TranscriptSentence {
            index: rec.index,
            start: rec.start,
            end: rec.end,
            speaker: rec.speaker,
            text: rec.text,
            word_onsets,
            onsets_interpolated: interpolated,
            annotation: rec.annotation,
        });
    }
    Ok(out)
}

fn read_affect_csv(
    path: &Path,
    modality: AffectModality,
    format: &FormatConfig,
) -> Result<AffectTrack, CorpusError> {
    let mut rdr = csv_reader(path)?;
    let headers = rdr
        .headers()
        .map_err(|e| malformed(path, 1, e.to_string()))?
        .clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| CorpusError::MissingChannel {
                channel: name.to_string(),
                path: path.display().to_string(),
            })
    };
    let cols = [col("time")?, col("valence")?, col("arousal")?, col("dominance")?];
    let mut samples: Vec<AffectSample> = Vec::new();
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| malformed(path, row + 2, e.to_string()))?;
        let line = record_line(&rec, row + 2);
        let mut vals = [0.0; 4];
        for (k, (&c, name)) in cols
            .iter()
            .zip(["time", "valence", "arousal", "dominance"])
            .enumerate()
        {
            vals[k] = parse_f64(path, line, name, rec.get(c).unwrap_or(""))?;
        }
        if let Some(r) = format.affect_rescale {
            for v in &mut vals[1..] {
                *v = *v * r.scale + r.offset;
            }
        }
        for (v, name) in vals[1..].iter().zip(["valence", "arousal", "dominance"]) {
            if !(-1.0..=1.0).contains(v) {
                return Err(malformed(path, line, format!("{name} {v} outside [-1, 1]")));
            }
        }
        if let Some(prev) = samples.last() {
            if vals[0] <= prev.time {
                return Err(malformed(path, line, "times not strictly increasing"));
            }
        }
        samples.push(AffectSample {
            time: vals[0],
            valence: vals[1],
            arousal: vals[2],
            dominance: vals[3],
        });
    }
    Ok(AffectTrack { modality, samples })
}

fn read_gaze_csv(path: &Path) -> Result<GazeTrack, CorpusError> {
    let mut rdr = csv_reader(path)?;
    let headers = rdr
        .headers()
        .map_err(|e| malformed(path, 1, e.to_string()))?
        .clone();
    let names = ["time", "lyaw", "lpitch", "ryaw", "rpitch", "valid"];
    let mut cols = [0usize; 6];
    for (k, name) in names.iter().enumerate() {
        cols[k] = headers
            .iter()
            .position(|h| h == *name)
            .ok_or_else(|| CorpusError::MissingChannel {
                channel: name.to_string(),
                path: path.display().to_string(),
            })?;
    }
    let mut samples: Vec<GazeSample> = Vec::new();
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| malformed(path, row + 2, e.to_string()))?;
        let line = record_line(&rec, row + 2);
        let mut vals = [0.0; 5];
        for k in 0..5 {
            vals[k] = parse_f64(path, line, names[k], rec.get(cols[k]).unwrap_or(""))?;
        }
        let valid = match rec.get(cols[5]).unwrap_or("") {
            "1" | "true" => true,
            "0" | "false" => false,
            other => return Err(malformed(path, line, format!("valid flag {other:?}"))),
        };
        if let Some(prev) = samples.last() {
            if vals[0] <= prev.time {
                return Err(malformed(path, line, "times not strictly increasing"));
            }
        }
        samples.push(GazeSample {
            time: vals[0],
            left_yaw: vals[1],
            left_pitch: vals[2],
            right_yaw: vals[3],
            right_pitch: vals[4],
            valid,
        });
    }
    Ok(GazeTrack { samples })
}

fn create(path: &Path) -> Result<BufWriter<File>, CorpusError> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    }
    Ok(BufWriter::new(File::create(path).map_err(|e| io_err(path, e))?))
}

pub fn write_au_csv(path: &Path, au: &AuFrameSeries) -> Result<(), CorpusError> {
    let mut w = create(path)?;
    let mut out = String::from("frame,timestamp");
    for c in &au.codes {
        out.push_str(&format!(",{c}_r"));
    }
    if au.blink.is_some() {
        out.push_str(",AU45_c");
    }
    out.push('\n');
    for i in 0..au.len() {
        out.push_str(&format!("{},{}", au.frame_numbers[i], au.timestamps[i]));
        for ch in &au.intensities {
            out.push_str(&format!(",{}", ch[i]));
        }
        if let Some(b) = &au.blink {
            out.push_str(&format!(",{}", b[i]));
        }
        out.push('\n');
        if out.len() > 1 << 16 {
            w.write_all(out.as_bytes()).map_err(|e| io_err(path, e))?;
            out.clear();
        }
    }
    w.write_all(out.as_bytes()).map_err(|e| io_err(path, e))?;
    w.flush().map_err(|e| io_err(path, e))
}

pub fn write_transcript_jsonl(
    path: &Path,
    transcript: &[TranscriptSentence],
) -> Result<(), CorpusError> {
    let mut w = create(path)?;
    for s in transcript {
        let rec = SentenceRecord {
            index: s.index,
            start: s.start,
            end: s.end,
            speaker: s.speaker,
            text: s.text.clone(),
            word_onsets: (!s.onsets_interpolated).then(|| {
                s.word_onsets
                    .iter()
                    .map(|w| (w.word.clone(), w.onset))
                    .collect()
            }),
            annotation: s.annotation.clone(),
        };
        let line = serde_json::to_string(&rec).expect("sentence serializes");
        writeln!(w, "{line}").map_err(|e| io_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

pub fn write_affect_csv(path: &Path, track: &AffectTrack) -> Result<(), CorpusError> {
    let mut w = create(path)?;
    writeln!(w, "time,valence,arousal,dominance").map_err(|e| io_err(path, e))?;
    for s in &track.samples {
        writeln!(w, "{},{},{},{}", s.time, s.valence, s.arousal, s.dominance)
            .map_err(|e| io_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

pub fn write_gaze_csv(path: &Path, track: &GazeTrack) -> Result<(), CorpusError> {
    let mut w = create(path)?;
    writeln!(w, "time,lyaw,lpitch,ryaw,rpitch,valid").map_err(|e| io_err(path, e))?;
    for s in &track.samples {
        writeln!(
            w,
            "{},{},{},{},{},{}",
            s.time, s.left_yaw, s.left_pitch, s.right_yaw, s.right_pitch, s.valid as u8
        )
        .map_err(|e| io_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}
