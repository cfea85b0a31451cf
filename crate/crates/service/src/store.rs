//! Append-only review log and versioned model snapshots.
//!
//! Reviews live in `reviews.jsonl`, one JSON object per line, and are synced
//! to disk before an append returns. A final line without its newline is the
//! trace of an interrupted append: it is dropped on open and the file is
//! truncated back to the last complete record.

use std::collections::HashSet;
use std::fs::{File, OpenOptions};
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use vidmod_core::{FilterModel, ReviewLabel};

use crate::error::ServiceError;

pub const REVIEW_LOG: &str = "reviews.jsonl";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AppendError {
    Duplicate,
}

#[derive(Debug)]
pub struct ReviewStore {
    dir: PathBuf,
    file: File,
    reviews: Vec<ReviewLabel>,
    keys: HashSet<(String, String)>,
}

impl ReviewStore {
    /// Opens (creating if needed) the store in `dir` and replays its log.
    pub fn open(dir: impl AsRef<Path>) -> Result<Self, ServiceError> {
        let dir = dir.as_ref().to_path_buf();
        std::fs::create_dir_all(&dir)?;
        let path = dir.join(REVIEW_LOG);
        let mut file = OpenOptions::new().read(true).append(true).create(true).open(&path)?;
        let mut text = String::new();
        file.read_to_string(&mut text)?;

        let complete = match text.rfind('\n') {
            Some(i) => i + 1,
            None => 0,
        };
        if complete < text.len() {
            tracing::warn!(bytes = text.len() - complete, "dropping incomplete trailing review record");
            file.set_len(complete as u64)?;
            file.sync_all()?;
        }

        let mut store = ReviewStore { dir, file, reviews: Vec::new(), keys: HashSet::new() };
        for (i, line) in text[..complete].lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let review: ReviewLabel = serde_json::from_str(line)
                .map_err(|e| ServiceError::ReviewLog { line: i + 1, message: e.to_string() })?;
            store.keys.insert((review.video_id.clone(), review.moderator_id.clone()));
            store.reviews.push(review);
        }
        Ok(store)
    }

    pub fn reviews(&self) -> &[ReviewLabel] {
        &self.reviews
    }

    pub fn len(&self) -> usize {
        self.reviews.len()
    }

    pub fn is_empty(&self) -> bool {
        self.reviews.is_empty()
    }

    pub fn contains(&self, video_id: &str, moderator_id: &str) -> bool {
        self.keys.contains(&(video_id.to_string(), moderator_id.to_string()))
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    /// Stamps the review with a timestamp later than every stored one,
    /// appends it durably and returns the stored record.
    pub fn append(&mut self, mut review: ReviewLabel) -> Result<Result<ReviewLabel, AppendError>, ServiceError> {
        if self.contains(&review.video_id, &review.moderator_id) {
            return Ok(Err(AppendError::Duplicate));
        }
        let now = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_millis() as u64);
        let last = self.reviews.last().map_or(0, |r| r.timestamp);
        review.timestamp = now.max(last + 1);

        let mut line = serde_json::to_string(&review).map_err(|e| ServiceError::Io(e.to_string()))?;
        line.push('\n');
        self.file.write_all(line.as_bytes())?;
        self.file.sync_data()?;

        self.keys.insert((review.video_id.clone(), review.moderator_id.clone()));
        self.reviews.push(review.clone());
        Ok(Ok(review))
    }
}

pub fn snapshot_name(version: u64) -> String {
    format!("model-{version:06}.json")
}

/// Writes the snapshot through a temporary file so a crash never leaves a
/// half-written `model-*.json` behind.
pub fn save_snapshot(dir: &Path, model: &FilterModel) -> Result<PathBuf, ServiceError> {
    let path = dir.join(snapshot_name(model.version));
    let tmp = dir.join(format!(".{}.tmp", snapshot_name(model.version)));
    {
        let mut f = File::create(&tmp)?;
        f.write_all(model.to_json().as_bytes())?;
        f.sync_all()?;
    }
    std::fs::rename(&tmp, &path)?;
    if let Ok(d) = File::open(dir) {
        let _ = d.sync_all();
    }
    Ok(path)
}

/// The highest-versioned snapshot in `dir`, if any.
pub fn latest_snapshot(dir: &Path) -> Result<Option<FilterModel>, ServiceError> {
    let mut best: Option<(u64, PathBuf)> = None;
    let entries = match std::fs::read_dir(dir) {
        Ok(e) => e,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
        Err(e) => return Err(e.into()),
    };
    for entry in entries {
        let path = entry?.path();
        let Some(name) = path.file_name().and_then(|n| n.to_str()) else { continue };
        let Some(version) = name
            .strip_prefix("model-")
            .and_then(|r| r.strip_suffix(".json"))
            .and_then(|v| v.parse::<u64>().ok())
        else {
            continue;
        };
        if best.as_ref().map_or(true, |(v, _)| version > *v) {
            best = Some((version, path));
        }
    }
    best.map(|(_, p)| FilterModel::load(p).map_err(ServiceError::from)).transpose()
}
