//! Annotation data model and the line-delimited corpus format.
//!
//! One JSON object per line, one video per line. Detectors (or the synthetic
//! generator in [`crate::synth`]) produce these files; everything downstream
//! works on the parsed [`VideoRecord`]s.

use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::io::{self, BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::taxonomy::Label;

/// Videos shorter than this are sampled every second, longer ones every two.
pub const LONG_VIDEO_SECONDS: f64 = 1800.0;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("io error: {0}")]
    Io(#[from] io::Error),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("video `{video_id}`, field `{field}`: {message}")]
    Validation {
        video_id: String,
        field: String,
        message: String,
    },
    #[error("duration must be positive, got {0}")]
    Domain(f64),
    #[error("invalid generator config: {0}")]
    Config(String),
}

impl CorpusError {
    fn invalid(video_id: &str, field: impl Into<String>, message: impl Into<String>) -> Self {
        CorpusError::Validation {
            video_id: video_id.to_string(),
            field: field.into(),
            message: message.into(),
        }
    }
}

/// Risk tags detected on one sampled frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameAnnotation {
    /// Seconds from the start of the video.
    #[serde(rename = "t")]
    pub time: f64,
    /// tag id -> model id -> score. Absent tags score 0.
    #[serde(rename = "tags", default)]
    pub tag_scores: BTreeMap<String, BTreeMap<String, f64>>,
    #[serde(default)]
    pub feature: Option<Vec<f64>>,
    #[serde(rename = "thumb", default)]
    pub thumbnail: Option<String>,
}

/// One transcribed sentence with its risk-word counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AudioAnnotation {
    #[serde(rename = "t0")]
    pub start_time: f64,
    #[serde(rename = "t1")]
    pub end_time: f64,
    #[serde(default)]
    pub text: String,
    #[serde(rename = "words", default)]
    pub word_counts: BTreeMap<String, u32>,
    #[serde(rename = "tokens")]
    pub token_count: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VideoRecord {
    pub video_id: String,
    pub duration: f64,
    #[serde(default)]
    pub frames: Vec<FrameAnnotation>,
    #[serde(default)]
    pub audio: Vec<AudioAnnotation>,
    #[serde(default)]
    pub ground_truth: Option<Label>,
}

impl VideoRecord {
    /// Checks every type invariant, naming the first offending field.
    pub fn validate(&self) -> Result<(), CorpusError> {
        let id = self.video_id.as_str();
        if id.is_empty() {
            return Err(CorpusError::invalid(id, "video_id", "empty id"));
        }
        if !(self.duration.is_finite() && self.duration > 0.0) {
            return Err(CorpusError::invalid(id, "duration", "duration must be positive"));
        }

        let mut prev = 0.0;
        let mut feature_len = None;
        for (i, frame) in self.frames.iter().enumerate() {
            let field = |name: &str| format!("frames[{i}].{name}");
            if !(frame.time.is_finite() && frame.time >= 0.0) {
                return Err(CorpusError::invalid(id, field("t"), "time must be >= 0"));
            }
            if frame.time > self.duration {
                return Err(CorpusError::invalid(id, field("t"), "time exceeds duration"));
            }
            if frame.time < prev {
                return Err(CorpusError::invalid(id, field("t"), "frames not sorted by time"));
            }
            prev = frame.time;
            for (tag, models) in &frame.tag_scores {
                for score in models.values() {
                    if !(0.0..=1.0).contains(score) {
                        return Err(CorpusError::invalid(
                            id,
                            field(&format!("tags.{tag}")),
                            "score out of [0,1]",
                        ));
                    }
                }
            }
            if let Some(feature) = &frame.feature {
                if feature.iter().any(|v| !v.is_finite()) {
                    return Err(CorpusError::invalid(id, field("feature"), "non-finite value"));
                }
                match feature_len {
                    None => feature_len = Some(feature.len()),
                    Some(n) if n != feature.len() => {
                        return Err(CorpusError::invalid(
                            id,
                            field("feature"),
                            "feature length differs between frames",
                        ))
                    }
                    _ => {}
                }
            }
        }

        let mut prev = 0.0;
        for (i, clip) in self.audio.iter().enumerate() {
            let field = |name: &str| format!("audio[{i}].{name}");
            if !(clip.start_time.is_finite() && clip.start_time >= 0.0) {
                return Err(CorpusError::invalid(id, field("t0"), "time must be >= 0"));
            }
            if !(clip.end_time.is_finite() && clip.start_time < clip.end_time) {
                return Err(CorpusError::invalid(id, field("t1"), "start_time must be < end_time"));
            }
            if clip.end_time > self.duration {
                return Err(CorpusError::invalid(id, field("t1"), "time exceeds duration"));
            }
            if clip.start_time < prev {
                return Err(CorpusError::invalid(id, field("t0"), "audio not sorted by start time"));
            }
            prev = clip.start_time;
            if clip.token_count == 0 {
                return Err(CorpusError::invalid(id, field("tokens"), "token count must be positive"));
            }
            for (word, &count) in &clip.word_counts {
                if count > clip.token_count {
                    return Err(CorpusError::invalid(
                        id,
                        field(&format!("words.{word}")),
                        "count exceeds token count",
                    ));
                }
            }
        }
        Ok(())
    }

    /// Canonical single-line JSON encoding.
    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("video record serializes")
    }
}

/// Frame sampling interval for a video of the given length, in seconds.
pub fn sampling_interval(duration: f64) -> Result<f64, CorpusError> {
    if !(duration.is_finite() && duration > 0.0) {
        return Err(CorpusError::Domain(duration));
    }
    Ok(if duration < LONG_VIDEO_SECONDS { 1.0 } else { 2.0 })
}

/// Parses a corpus from any reader. Records are returned sorted by id.
pub fn parse_corpus(reader: impl BufRead) -> Result<Vec<VideoRecord>, CorpusError> {
    let mut records = Vec::new();
    let mut ids = HashSet::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: VideoRecord = serde_json::from_str(&line).map_err(|e| CorpusError::Parse {
            line: i + 1,
            message: e.to_string(),
        })?;
        record.validate()?;
        if !ids.insert(record.video_id.clone()) {
            return Err(CorpusError::invalid(&record.video_id, "video_id", "duplicate video id"));
        }
        records.push(record);
    }
    records.sort_by(|a, b| a.video_id.cmp(&b.video_id));
    Ok(records)
}

pub fn load_corpus(path: impl AsRef<Path>) -> Result<Vec<VideoRecord>, CorpusError> {
    parse_corpus(BufReader::new(fs::File::open(path)?))
}

pub fn write_corpus_to(mut out: impl Write, records: &[VideoRecord]) -> io::Result<()> {
    for record in records {
        out.write_all(record.to_line().as_bytes())?;
        out.write_all(b"\n")?;
    }
    out.flush()
}

pub fn write_corpus(path: impl AsRef<Path>, records: &[VideoRecord]) -> io::Result<()> {
    let file = fs::File::create(path)?;
    write_corpus_to(io::BufWriter::new(file), records)
}
