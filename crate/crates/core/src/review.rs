//! Moderator verdicts.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::taxonomy::Label;

#[derive(Debug, Error, PartialEq)]
pub enum ReviewError {
    #[error("deviant label `{0}` requires evidence: at least one frame time or risk word")]
    MissingEvidence(Label),
    #[error("moderator id must not be empty")]
    MissingModerator,
    #[error("evidence frame time {0} is not a finite non-negative number")]
    BadFrameTime(f64),
}

/// What the moderator pointed at to justify a deviant verdict.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Evidence {
    #[serde(default)]
    pub frame_times: Vec<f64>,
    #[serde(default)]
    pub tags: Vec<String>,
    #[serde(default)]
    pub words: Vec<String>,
}

impl Evidence {
    pub fn is_empty(&self) -> bool {
        self.frame_times.is_empty() && self.words.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReviewLabel {
    pub video_id: String,
    pub label: Label,
    #[serde(default)]
    pub evidence: Evidence,
    pub moderator_id: String,
    /// Milliseconds since the Unix epoch; non-decreasing within a review log.
    #[serde(default)]
    pub timestamp: u64,
}

impl ReviewLabel {
    pub fn validate(&self) -> Result<(), ReviewError> {
        if self.moderator_id.trim().is_empty() {
            return Err(ReviewError::MissingModerator);
        }
        if let Some(&t) = self
            .evidence
            .frame_times
            .iter()
            .find(|t| !(t.is_finite() && **t >= 0.0))
        {
            return Err(ReviewError::BadFrameTime(t));
        }
        if self.label.is_deviant() && self.evidence.is_empty() {
            return Err(ReviewError::MissingEvidence(self.label));
        }
        Ok(())
    }
}
