//! Risk vectors and the per-video risk value.
//!
//! A frame is summarized by the summed multi-model score of every taxonomy
//! tag, an audio clip by the rate of every risk word. A video's risk value is
//! the mean, over all frames and clips together, of each vector's maximum
//! entry.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{AudioAnnotation, FrameAnnotation, VideoRecord};
use crate::review::ReviewLabel;
use crate::taxonomy::{Label, RiskTaxonomy, TaxonomyError};

#[derive(Debug, Error)]
pub enum RiskError {
    #[error(transparent)]
    Taxonomy(#[from] TaxonomyError),
    #[error("undefined risk: video `{0}` has no frames and no audio clips")]
    EmptyVideo(String),
    #[error("threshold must lie in [0,1], got {0}")]
    Threshold(f64),
    #[error("evaluation window must be positive, got {0} h")]
    Window(f64),
    #[error("no ground truth for reviewed video `{0}`")]
    MissingTruth(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Modality {
    Frame,
    Audio,
}

/// Dense score vector over the taxonomy's tags (frames) or words (audio).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskVector {
    pub kind: Modality,
    pub scores: Vec<f64>,
}

impl RiskVector {
    pub fn zeros(kind: Modality, len: usize) -> Self {
        RiskVector { kind, scores: vec![0.0; len] }
    }

    /// Largest entry and the first index attaining it. `None` for an empty vector.
    pub fn max_entry(&self) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64)> = None;
        for (i, &s) in self.scores.iter().enumerate() {
            if best.is_none_or(|(_, b)| s > b) {
                best = Some((i, s));
            }
        }
        best
    }

    pub fn max(&self) -> f64 {
        self.max_entry().map_or(0.0, |(_, s)| s)
    }
}

/// Sums each tag's scores across models and clamps to 1.
pub fn aggregate_tag_scores(
    frame: &FrameAnnotation,
    taxonomy: &RiskTaxonomy,
) -> Result<RiskVector, RiskError> {
    let mut v = RiskVector::zeros(Modality::Frame, taxonomy.tag_count());
    for (tag, models) in &frame.tag_scores {
        let idx = taxonomy.tag_index(tag)?;
        let sum: f64 = models.values().sum();
        v.scores[idx] = sum.min(1.0);
    }
    Ok(v)
}

/// Per-word occurrence rate `count / token_count`, clamped to 1.
pub fn audio_rates(clip: &AudioAnnotation, taxonomy: &RiskTaxonomy) -> Result<RiskVector, RiskError> {
    let mut v = RiskVector::zeros(Modality::Audio, taxonomy.word_count());
    let tokens = clip.token_count.max(1) as f64;
    for (word, &count) in &clip.word_counts {
        let idx = taxonomy.word_index(word)?;
        v.scores[idx] = (count as f64 / tokens).min(1.0);
    }
    Ok(v)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameRisk {
    pub time: f64,
    pub max_score: f64,
    /// Tag with the largest score, absent when every score is zero.
    pub tag: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AudioRisk {
    pub start: f64,
    pub max_rate: f64,
    pub word: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VideoRisk {
    pub video_id: String,
    pub risk_value: f64,
    pub per_frame: Vec<FrameRisk>,
    pub per_audio: Vec<AudioRisk>,
}

impl VideoRisk {
    /// Recomputes the risk value from the stored per-frame and per-clip maxima.
    pub fn recompute(&self) -> f64 {
        let total: f64 = self.per_frame.iter().map(|f| f.max_score).sum::<f64>()
            + self.per_audio.iter().map(|a| a.max_rate).sum::<f64>();
        total / (self.per_frame.len() + self.per_audio.len()) as f64
    }
}

/// Mean of the per-frame and per-clip maxima, taken jointly over `n + m` items.
pub fn mean_of_maxima(frames: &[RiskVector], clips: &[RiskVector]) -> Option<f64> {
    let count = frames.len() + clips.len();
    if count == 0 {
        return None;
    }
    let total: f64 = frames.iter().chain(clips).map(RiskVector::max).sum();
    Some(total / count as f64)
}

pub fn frame_vectors(video: &VideoRecord, taxonomy: &RiskTaxonomy) -> Result<Vec<RiskVector>, RiskError> {
    video.frames.iter().map(|f| aggregate_tag_scores(f, taxonomy)).collect()
}

pub fn audio_vectors(video: &VideoRecord, taxonomy: &RiskTaxonomy) -> Result<Vec<RiskVector>, RiskError> {
    video.audio.iter().map(|a| audio_rates(a, taxonomy)).collect()
}

pub fn video_risk(video: &VideoRecord, taxonomy: &RiskTaxonomy) -> Result<VideoRisk, RiskError> {
    let frames = frame_vectors(video, taxonomy)?;
    let clips = audio_vectors(video, taxonomy)?;
    let risk_value =
        mean_of_maxima(&frames, &clips).ok_or_else(|| RiskError::EmptyVideo(video.video_id.clone()))?;

    let per_frame = video
        .frames
        .iter()
        .zip(&frames)
        .map(|(f, v)| {
            let best = v.max_entry().filter(|&(_, s)| s > 0.0);
            FrameRisk {
                time: f.time,
                max_score: v.max(),
                tag: best.map(|(i, _)| taxonomy.tag(i).to_string()),
            }
        })
        .collect();
    let per_audio = video
        .audio
        .iter()
        .zip(&clips)
        .map(|(a, v)| {
            let best = v.max_entry().filter(|&(_, s)| s > 0.0);
            AudioRisk {
                start: a.start_time,
                max_rate: v.max(),
                word: best.map(|(i, _)| taxonomy.word(i).to_string()),
            }
        })
        .collect();

    Ok(VideoRisk {
        video_id: video.video_id.clone(),
        risk_value,
        per_frame,
        per_audio,
    })
}

/// How a score exactly equal to the threshold is treated.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    /// `score > threshold` is high risk; boundary scores stay low.
    #[default]
    Strict,
    Inclusive,
}

impl Boundary {
    pub fn is_high(self, score: f64, threshold: f64) -> bool {
        match self {
            Boundary::Strict => score > threshold,
            Boundary::Inclusive => score >= threshold,
        }
    }
}

pub fn check_threshold(threshold: f64) -> Result<f64, RiskError> {
    if (0.0..=1.0).contains(&threshold) {
        Ok(threshold)
    } else {
        Err(RiskError::Threshold(threshold))
    }
}

/// Splits videos into `(high, low)` by risk value, preserving input order.
pub fn filter_high_risk(
    risks: Vec<VideoRisk>,
    threshold: f64,
) -> Result<(Vec<VideoRisk>, Vec<VideoRisk>), RiskError> {
    filter_high_risk_with(risks, threshold, Boundary::Strict)
}

pub fn filter_high_risk_with(
    risks: Vec<VideoRisk>,
    threshold: f64,
    boundary: Boundary,
) -> Result<(Vec<VideoRisk>, Vec<VideoRisk>), RiskError> {
    check_threshold(threshold)?;
    Ok(risks
        .into_iter()
        .partition(|r| boundary.is_high(r.risk_value, threshold)))
}

/// Time efficiency (reviews per hour) and missing rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModerationMetrics {
    pub time_efficiency: f64,
    pub missing_rate: f64,
}

pub fn moderation_metrics(
    reviews: &[ReviewLabel],
    truth: &HashMap<String, Label>,
    window_hours: f64,
) -> Result<ModerationMetrics, RiskError> {
    if !(window_hours.is_finite() && window_hours > 0.0) {
        return Err(RiskError::Window(window_hours));
    }
    let mut deviant = 0usize;
    let mut missed = 0usize;
    for review in reviews {
        let actual = truth
            .get(&review.video_id)
            .ok_or_else(|| RiskError::MissingTruth(review.video_id.clone()))?;
        if actual.is_deviant() {
            deviant += 1;
            if review.label == Label::Normal {
                missed += 1;
            }
        }
    }
    Ok(ModerationMetrics {
        time_efficiency: reviews.len() as f64 / window_hours,
        missing_rate: if deviant == 0 { 0.0 } else { missed as f64 / deviant as f64 },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::review::Evidence;
    use crate::taxonomy::RiskCategory;

    fn frame(time: f64, tags: &[(&str, &[(&str, f64)])]) -> FrameAnnotation {
        FrameAnnotation {
            time,
            tag_scores: tags
                .iter()
                .map(|(t, ms)| (t.to_string(), ms.iter().map(|(m, s)| (m.to_string(), *s)).collect()))
                .collect(),
            feature: None,
            thumbnail: None,
        }
    }

    fn clip(t0: f64, words: &[(&str, u32)], tokens: u32) -> AudioAnnotation {
        AudioAnnotation {
            start_time: t0,
            end_time: t0 + 5.0,
            text: String::new(),
            word_counts: words.iter().map(|(w, c)| (w.to_string(), *c)).collect(),
            token_count: tokens,
        }
    }

    #[test]
    fn sums_models() {
        let tax = RiskTaxonomy::builtin();
        let v = aggregate_tag_scores(&frame(0.0, &[("qr_code", &[("a", 0.4), ("b", 0.3)])]), &tax).unwrap();
        let i = tax.tag_index("qr_code").unwrap();
        assert!((v.scores[i] - 0.7).abs() < 1e-15);
        let j = tax.tag_index("turtle").unwrap();
        assert_eq!(v.scores[j], 0.0);
    }

    #[test]
    fn clamps_sum_to_one() {
        let tax = RiskTaxonomy::builtin();
        let v = aggregate_tag_scores(&frame(0.0, &[("qr_code", &[("a", 0.8), ("b", 0.6)])]), &tax).unwrap();
        assert_eq!(v.scores[tax.tag_index("qr_code").unwrap()], 1.0);
    }

    #[test]
    fn unknown_tag_is_taxonomy_error() {
        let tax = RiskTaxonomy::builtin();
        let err = aggregate_tag_scores(&frame(0.0, &[("unicorn", &[("a", 0.1)])]), &tax).unwrap_err();
        assert!(matches!(err, RiskError::Taxonomy(TaxonomyError::UnknownTag(_))));
    }

    #[test]
    fn word_rates() {
        let tax = RiskTaxonomy::builtin();
        let i = tax.word_index("gamble").unwrap();
        assert_eq!(audio_rates(&clip(0.0, &[("gamble", 5)], 50), &tax).unwrap().scores[i], 0.1);
        assert_eq!(audio_rates(&clip(0.0, &[("gamble", 0)], 50), &tax).unwrap().scores[i], 0.0);
        assert_eq!(audio_rates(&clip(0.0, &[("gamble", 50)], 50), &tax).unwrap().scores[i], 1.0);
    }

    #[test]
    fn eq1_worked_example() {
        let tax = RiskTaxonomy::builtin();
        let r = video_risk(&fixtures::eq1_video(), &tax).unwrap();
        // (0.9 + 0.3 + 0.5) / 3
        assert!((r.risk_value - 1.7 / 3.0).abs() < 1e-12);
        assert_eq!(format!("{:.6}", r.risk_value), "0.566667");
        assert_eq!(r.per_frame[0].tag.as_deref(), Some("qr_code"));
        assert_eq!(r.per_audio[0].word.as_deref(), Some("miracle"));
        assert!((r.recompute() - r.risk_value).abs() < 1e-15);
    }

    #[test]
    fn zero_and_identity_cases() {
        let tax = RiskTaxonomy::builtin();
        let mut v = fixtures::eq1_video();
        v.frames.iter_mut().for_each(|f| f.tag_scores.clear());
        v.audio.iter_mut().for_each(|a| a.word_counts.clear());
        assert_eq!(video_risk(&v, &tax).unwrap().risk_value, 0.0);

        let single = VideoRecord {
            video_id: "one".into(),
            duration: 1.0,
            frames: vec![frame(0.0, &[("weapon", &[("m", 1.0)])])],
            audio: vec![],
            ground_truth: None,
        };
        assert_eq!(video_risk(&single, &tax).unwrap().risk_value, 1.0);
    }

    #[test]
    fn empty_video_is_undefined() {
        let tax = RiskTaxonomy::builtin();
        let v = VideoRecord {
            video_id: "e".into(),
            duration: 1.0,
            frames: vec![],
            audio: vec![],
            ground_truth: None,
        };
        assert!(matches!(video_risk(&v, &tax), Err(RiskError::EmptyVideo(_))));
    }

    fn risk(id: &str, value: f64) -> VideoRisk {
        VideoRisk { video_id: id.into(), risk_value: value, per_frame: vec![], per_audio: vec![] }
    }

    #[test]
    fn threshold_partition() {
        let (high, low) = filter_high_risk(vec![risk("a", 1.7 / 3.0), risk("b", 0.2)], 0.5).unwrap();
        assert_eq!(high.iter().map(|r| r.video_id.as_str()).collect::<Vec<_>>(), ["a"]);
        assert_eq!(low.iter().map(|r| r.video_id.as_str()).collect::<Vec<_>>(), ["b"]);

        let (high, low) = filter_high_risk(vec![risk("a", 0.01), risk("z", 0.0)], 0.0).unwrap();
        assert_eq!(high.len(), 1);
        assert_eq!(low[0].video_id, "z");

        let (high, _) = filter_high_risk(vec![risk("a", 1.0)], 1.0).unwrap();
        assert!(high.is_empty());

        let (high, _) = filter_high_risk_with(vec![risk("a", 0.5)], 0.5, Boundary::Inclusive).unwrap();
        assert_eq!(high.len(), 1);
        assert!(filter_high_risk(vec![], 1.5).is_err());
    }

    fn reviewed(id: &str, label: Label) -> ReviewLabel {
        ReviewLabel {
            video_id: id.into(),
            label,
            evidence: Evidence { frame_times: vec![0.0], ..Default::default() },
            moderator_id: "m".into(),
            timestamp: 0,
        }
    }

    #[test]
    fn te_and_mr() {
        let dev = Label::Deviant(RiskCategory::FalseAdvertising);
        let mut truth = HashMap::new();
        let mut reviews = Vec::new();
        for i in 0..30 {
            let id = format!("v{i}");
            let is_dev = i < 10;
            truth.insert(id.clone(), if is_dev { dev } else { Label::Normal });
            let label = if is_dev && i >= 2 { dev } else { Label::Normal };
            reviews.push(reviewed(&id, label));
        }
        let m = moderation_metrics(&reviews, &truth, 0.5).unwrap();
        assert_eq!(m.time_efficiency, 60.0);
        assert_eq!(m.missing_rate, 0.2);

        let normals: Vec<_> = reviews[10..].to_vec();
        assert_eq!(moderation_metrics(&normals, &truth, 1.0).unwrap().missing_rate, 0.0);

        let orphan = vec![reviewed("nope", Label::Normal)];
        assert!(matches!(moderation_metrics(&orphan, &truth, 1.0), Err(RiskError::MissingTruth(_))));
        assert!(moderation_metrics(&reviews, &truth, 0.0).is_err());
    }
}
