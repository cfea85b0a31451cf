//! Segmented risk timeline: fixed windows labelled with their dominant risk
//! category, adjacent equal labels merged into one block.

use serde::{Deserialize, Serialize};

use crate::corpus::VideoRecord;
use crate::risk::{self, RiskError};
use crate::taxonomy::{RiskCategory, RiskTaxonomy};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TimelineConfig {
    /// Window length in seconds.
    pub window: f64,
    /// A window stays neutral unless its best category score exceeds this.
    pub floor: f64,
}

impl Default for TimelineConfig {
    fn default() -> Self {
        TimelineConfig { window: 10.0, floor: 0.3 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimelineSegment {
    pub t0: f64,
    pub t1: f64,
    /// `None` serializes as `"neutral"`.
    #[serde(with = "category_or_neutral")]
    pub category: Option<RiskCategory>,
    pub intensity: f64,
}

mod category_or_neutral {
    use serde::{Deserialize, Deserializer, Serializer};

    use crate::taxonomy::RiskCategory;

    pub fn serialize<S: Serializer>(c: &Option<RiskCategory>, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(c.map_or("neutral", RiskCategory::as_str))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<RiskCategory>, D::Error> {
        let s = String::deserialize(d)?;
        if s == "neutral" {
            Ok(None)
        } else {
            s.parse().map(Some).map_err(serde::de::Error::custom)
        }
    }
}

pub fn build_timeline(
    video: &VideoRecord,
    taxonomy: &RiskTaxonomy,
    config: &TimelineConfig,
) -> Result<Vec<TimelineSegment>, RiskError> {
    assert!(config.window > 0.0, "timeline window must be positive");
    let frames = risk::frame_vectors(video, taxonomy)?;
    let clips = risk::audio_vectors(video, taxonomy)?;

    let n_windows = (video.duration / config.window).ceil().max(1.0) as usize;
    let mut windows = Vec::with_capacity(n_windows);
    for k in 0..n_windows {
        let t0 = k as f64 * config.window;
        let last = k + 1 == n_windows;
        let t1 = if last { video.duration } else { t0 + config.window };

        let mut per_cat = [0.0f64; 4];
        for (frame, v) in video.frames.iter().zip(&frames) {
            let inside = frame.time >= t0 && (frame.time < t1 || (last && frame.time <= t1));
            if inside {
                for (i, &s) in v.scores.iter().enumerate() {
                    let c = taxonomy.tag_category(i).index();
                    per_cat[c] = per_cat[c].max(s);
                }
            }
        }
        for (clip, v) in video.audio.iter().zip(&clips) {
            if clip.start_time < t1 && clip.end_time > t0 {
                for (i, &s) in v.scores.iter().enumerate() {
                    let c = taxonomy.word_category(i).index();
                    per_cat[c] = per_cat[c].max(s);
                }
            }
        }

        // First category in taxonomy order wins ties.
        let (best, intensity) = per_cat
            .iter()
            .enumerate()
            .fold((0, per_cat[0]), |acc, (i, &s)| if s > acc.1 { (i, s) } else { acc });
        let category = (intensity > config.floor).then(|| RiskCategory::ALL[best]);
        windows.push(TimelineSegment { t0, t1, category, intensity });
    }
    Ok(merge_segments(windows))
}

/// Merges runs of adjacent segments sharing a category; intensity is the run maximum.
pub fn merge_segments(segments: Vec<TimelineSegment>) -> Vec<TimelineSegment> {
    let mut out: Vec<TimelineSegment> = Vec::with_capacity(segments.len());
    for seg in segments {
        match out.last_mut() {
            Some(prev) if prev.category == seg.category => {
                prev.t1 = seg.t1;
                prev.intensity = prev.intensity.max(seg.intensity);
            }
            _ => out.push(seg),
        }
    }
    out
}
