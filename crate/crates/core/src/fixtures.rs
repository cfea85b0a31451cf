//! Small hand-built records shared by tests, benches and the CLI docs.
//! All of them use tags and words from [`RiskTaxonomy::builtin`](crate::RiskTaxonomy::builtin).

use std::collections::BTreeMap;

use crate::corpus::{AudioAnnotation, FrameAnnotation, VideoRecord};

pub fn frame(time: f64, tags: &[(&str, &[(&str, f64)])]) -> FrameAnnotation {
    FrameAnnotation {
        time,
        tag_scores: tags
            .iter()
            .map(|(t, models)| {
                let scores: BTreeMap<String, f64> =
                    models.iter().map(|(m, s)| (m.to_string(), *s)).collect();
                (t.to_string(), scores)
            })
            .collect(),
        feature: None,
        thumbnail: None,
    }
}

pub fn clip(t0: f64, t1: f64, words: &[(&str, u32)], tokens: u32) -> AudioAnnotation {
    AudioAnnotation {
        start_time: t0,
        end_time: t1,
        text: String::new(),
        word_counts: words.iter().map(|(w, c)| (w.to_string(), *c)).collect(),
        token_count: tokens,
    }
}

/// Two frames with maxima 0.9 and 0.3 and one clip with maximum rate 0.5;
/// its risk value is 1.7 / 3.
pub fn eq1_video() -> VideoRecord {
    VideoRecord {
        video_id: "eq1".into(),
        duration: 20.0,
        frames: vec![
            frame(0.0, &[("qr_code", &[("rcnn", 0.9)]), ("turtle", &[("resnet", 0.2)])]),
            frame(1.0, &[("weapon", &[("resnet", 0.3)])]),
        ],
        audio: vec![clip(0.0, 5.0, &[("miracle", 5), ("gamble", 1)], 10)],
        ground_truth: None,
    }
}
