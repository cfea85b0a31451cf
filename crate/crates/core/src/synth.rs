//! Seeded synthetic corpora standing in for the visual and speech detectors.
//!
//! Construction guarantees a clean separation between the two classes:
//!
//! * normal videos: every aggregated tag score and every word rate is ≤ 0.3,
//!   so the risk value is ≤ 0.3;
//! * deviant videos: a contiguous run covering 70–90 % of the frames carries a
//!   ground-truth-category tag scored ≥ 0.92, and a run covering 70–90 % of the
//!   clips carries a ground-truth-category word at rate ≥ 0.75, so the risk
//!   value is at least 0.7 · 0.75 = 0.525.
//!
//! Frames also carry appearance features drawn around a few per-video scene
//! prototypes, so the frame view has recurring scenes to find.

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::corpus::{sampling_interval, AudioAnnotation, CorpusError, FrameAnnotation, VideoRecord};
use crate::taxonomy::{Label, RiskCategory, RiskTaxonomy};

const MODELS: [&str; 3] = ["faster_rcnn", "resnet", "inception"];
const FILLER: [&str; 12] = [
    "this", "one", "is", "really", "nice", "look", "at", "the", "color", "today", "price", "link",
];
const FEATURE_DIM: usize = 8;
pub const CLIP_SECONDS: f64 = 10.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub num_videos: usize,
    /// Exactly `floor(num_videos * deviant_fraction)` videos are deviant.
    pub deviant_fraction: f64,
    pub seed: u64,
    /// Inclusive range of video lengths, whole seconds.
    #[serde(default = "default_durations")]
    pub duration_range: (u32, u32),
}

fn default_durations() -> (u32, u32) {
    (60, 180)
}

impl SynthConfig {
    pub fn new(num_videos: usize, deviant_fraction: f64, seed: u64) -> Self {
        SynthConfig {
            num_videos,
            deviant_fraction,
            seed,
            duration_range: default_durations(),
        }
    }

    pub fn deviant_count(&self) -> usize {
        // The epsilon keeps products like 100 * 0.29 from flooring to 28.
        ((self.num_videos as f64 * self.deviant_fraction) + 1e-9).floor() as usize
    }
}

pub fn synthesize_corpus(
    config: &SynthConfig,
    taxonomy: &RiskTaxonomy,
) -> Result<Vec<VideoRecord>, CorpusError> {
    if !(0.0..=1.0).contains(&config.deviant_fraction) {
        return Err(CorpusError::Config(format!(
            "deviant_fraction {} outside [0,1]",
            config.deviant_fraction
        )));
    }
    if taxonomy.is_empty() {
        return Err(CorpusError::Config("taxonomy has no tags or words".into()));
    }
    for cat in RiskCategory::ALL {
        if taxonomy.tags_in(cat).is_empty() || taxonomy.words_in(cat).is_empty() {
            return Err(CorpusError::Config(format!(
                "category `{cat}` needs at least one tag and one word"
            )));
        }
    }
    let (lo, hi) = config.duration_range;
    if lo < 2 || lo > hi {
        return Err(CorpusError::Config(format!("bad duration range {lo}..={hi}")));
    }

    let mut order: Vec<usize> = (0..config.num_videos).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(config.seed));
    let mut deviant = vec![false; config.num_videos];
    for &i in &order[..config.deviant_count()] {
        deviant[i] = true;
    }

    (0..config.num_videos)
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            rng.set_stream(i as u64 + 1);
            let video = synth_video(&mut rng, format!("vid{i:05}"), deviant[i], config, taxonomy)?;
            video.validate()?;
            Ok(video)
        })
        .collect()
}

fn synth_video(
    rng: &mut ChaCha8Rng,
    video_id: String,
    deviant: bool,
    config: &SynthConfig,
    taxonomy: &RiskTaxonomy,
) -> Result<VideoRecord, CorpusError> {
    let (lo, hi) = config.duration_range;
    let duration = rng.random_range(lo..=hi) as f64;
    let dt = sampling_interval(duration)?;
    let n_frames = (duration / dt).ceil() as usize;
    let n_clips = (duration / CLIP_SECONDS).ceil() as usize;

    let category = deviant.then(|| *RiskCategory::ALL.choose(rng).unwrap());
    let frame_run = category.map(|_| risky_run(rng, n_frames));
    let clip_run = category.map(|_| risky_run(rng, n_clips));

    let features = scene_features(rng, n_frames);
    let frames = (0..n_frames)
        .zip(features)
        .map(|(k, feature)| {
            let risky = frame_run.is_some_and(|(a, b)| (a..b).contains(&k));
            let mut frame = FrameAnnotation {
                time: k as f64 * dt,
                tag_scores: Default::default(),
                feature: Some(feature),
                thumbnail: None,
            };
            background_tags(rng, taxonomy, &mut frame);
            if let (true, Some(cat)) = (risky, category) {
                let tags = taxonomy.tags_in(cat);
                let tag = taxonomy.tag(*tags.choose(rng).unwrap()).to_string();
                let score: f64 = rng.random_range(0.92..=1.0);
                let models = if rng.random_bool(0.4) {
                    let share: f64 = rng.random_range(0.3..0.7);
                    vec![(MODELS[0], score * share), (MODELS[1], score - score * share)]
                } else {
                    vec![(*MODELS.choose(rng).unwrap(), score)]
                };
                frame.tag_scores.insert(
                    tag,
                    models.into_iter().map(|(m, s)| (m.to_string(), s)).collect(),
                );
            }
            frame
        })
        .collect();

    let audio = (0..n_clips)
        .map(|k| {
            let start_time = k as f64 * CLIP_SECONDS;
            let end_time = (start_time + CLIP_SECONDS).min(duration);
            let token_count: u32 = rng.random_range(12..=30);
            let risky = clip_run.is_some_and(|(a, b)| (a..b).contains(&k));
            let mut counts = std::collections::BTreeMap::new();
            if let (true, Some(cat)) = (risky, category) {
                let words = taxonomy.words_in(cat);
                let word = taxonomy.word(*words.choose(rng).unwrap()).to_string();
                let rate: f64 = rng.random_range(0.75..=0.95);
                counts.insert(word, ((rate * token_count as f64).ceil() as u32).min(token_count));
            } else if rng.random_bool(0.4) {
                let w = rng.random_range(0..taxonomy.word_count());
                let max = (0.3 * token_count as f64).floor() as u32;
                counts.insert(taxonomy.word(w).to_string(), rng.random_range(1..=max));
            }
            let text = sentence(rng, &counts, token_count);
            AudioAnnotation {
                start_time,
                end_time,
                text,
                word_counts: counts,
                token_count,
            }
        })
        .collect();

    Ok(VideoRecord {
        video_id,
        duration,
        frames,
        audio,
        ground_truth: Some(category.map_or(Label::Normal, Label::Deviant)),
    })
}

/// Half-open index range covering 70–90 % of `n` items, at least one item.
fn risky_run(rng: &mut ChaCha8Rng, n: usize) -> (usize, usize) {
    let frac: f64 = rng.random_range(0.7..=0.9);
    let len = ((frac * n as f64).ceil() as usize).clamp(1, n);
    let start = rng.random_range(0..=n - len);
    (start, start + len)
}

/// Low-level tag noise, each aggregated score ≤ 0.28.
fn background_tags(rng: &mut ChaCha8Rng, taxonomy: &RiskTaxonomy, frame: &mut FrameAnnotation) {
    let k = rng.random_range(0..=2);
    for _ in 0..k {
        let tag = taxonomy.tag(rng.random_range(0..taxonomy.tag_count())).to_string();
        let score: f64 = rng.random_range(0.02..=0.28);
        let model = MODELS.choose(rng).unwrap().to_string();
        frame.tag_scores.insert(tag, [(model, score)].into_iter().collect());
    }
}

/// Features drawn around 2–4 prototypes; consecutive shots of 5–20 frames
/// each revisit one prototype.
fn scene_features(rng: &mut ChaCha8Rng, n: usize) -> Vec<Vec<f64>> {
    let wide = Normal::new(0.0, 4.0).unwrap();
    let noise = Normal::new(0.0, 0.15).unwrap();
    let n_protos = rng.random_range(2..=4);
    let protos: Vec<Vec<f64>> = (0..n_protos)
        .map(|_| (0..FEATURE_DIM).map(|_| wide.sample(rng)).collect())
        .collect();

    let mut out = Vec::with_capacity(n);
    let mut current = 0;
    while out.len() < n {
        let len = rng.random_range(5..=20);
        let next = rng.random_range(0..n_protos - 1);
        current = if next >= current { next + 1 } else { next };
        for _ in 0..len.min(n - out.len()) {
            out.push(
                protos[current]
                    .iter()
                    .map(|&c| round4(c + noise.sample(rng)))
                    .collect(),
            );
        }
    }
    out
}

fn round4(x: f64) -> f64 {
    (x * 1e4).round() / 1e4
}

fn sentence(
    rng: &mut ChaCha8Rng,
    counts: &std::collections::BTreeMap<String, u32>,
    tokens: u32,
) -> String {
    let mut words: Vec<&str> = counts
        .iter()
        .flat_map(|(w, &c)| std::iter::repeat_n(w.as_str(), c as usize))
        .collect();
    while words.len() < tokens as usize {
        words.push(FILLER.choose(rng).unwrap());
    }
    words.shuffle(rng);
    words.join(" ")
}
