#![allow(dead_code)]

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vidmod_core::{AudioAnnotation, FrameAnnotation, RiskTaxonomy, VideoRecord};

const MODELS: [&str; 3] = ["faster_rcnn", "resnet", "inception"];

/// A valid random record over the builtin taxonomy: up to `max_frames` frames
/// and `max_clips` clips, never both empty.
pub fn random_video(seed: u64, max_frames: usize, max_clips: usize) -> VideoRecord {
    let tax = RiskTaxonomy::builtin();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let duration = rng.random_range(5.0..240.0f64).round();
    let mut n = rng.random_range(0..=max_frames);
    let m = rng.random_range(0..=max_clips);
    if n + m == 0 {
        n = 1;
    }
    let with_features = rng.random_bool(0.5);
    let dim = rng.random_range(2..6);

    let mut times: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..=duration)).collect();
    times.sort_by(f64::total_cmp);
    let frames = times
        .into_iter()
        .map(|time| {
            let mut tag_scores = BTreeMap::new();
            for _ in 0..rng.random_range(0..4) {
                let tag = tax.tag(rng.random_range(0..tax.tag_count())).to_string();
                let models: BTreeMap<String, f64> = (0..rng.random_range(1..=3))
                    .map(|k| (MODELS[k].to_string(), rng.random_range(0.0..=1.0)))
                    .collect();
                tag_scores.insert(tag, models);
            }
            let feature = with_features.then(|| (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect());
            FrameAnnotation { time, tag_scores, feature, thumbnail: None }
        })
        .collect();

    let mut starts: Vec<f64> = (0..m).map(|_| rng.random_range(0.0..duration - 1.0)).collect();
    starts.sort_by(f64::total_cmp);
    let audio = starts
        .into_iter()
        .map(|t0| {
            let t1 = (t0 + rng.random_range(0.5..40.0)).min(duration);
            let token_count = rng.random_range(1..40);
            let word_counts = (0..rng.random_range(0..4))
                .map(|_| {
                    let w = tax.word(rng.random_range(0..tax.word_count())).to_string();
                    (w, rng.random_range(0..=token_count))
                })
                .collect();
            AudioAnnotation { start_time: t0, end_time: t1, text: String::new(), word_counts, token_count }
        })
        .collect();

    let video = VideoRecord { video_id: format!("r{seed}"), duration, frames, audio, ground_truth: None };
    video.validate().expect("generator emits valid records");
    video
}

/// Risk value computed straight from the raw annotations with explicit loops.
pub fn naive_risk(video: &VideoRecord, tax: &RiskTaxonomy) -> f64 {
    let mut total = 0.0;
    for frame in &video.frames {
        let mut best = 0.0f64;
        for (tag, _) in tax.tags() {
            let mut p = 0.0;
            if let Some(models) = frame.tag_scores.get(tag) {
                for s in models.values() {
                    p += s;
                }
            }
            best = best.max(p.min(1.0));
        }
        total += best;
    }
    for clip in &video.audio {
        let mut best = 0.0f64;
        for (word, _) in tax.words() {
            let c = clip.word_counts.get(word).copied().unwrap_or(0);
            best = best.max((c as f64 / clip.token_count as f64).min(1.0));
        }
        total += best;
    }
    total / (video.frames.len() + video.audio.len()) as f64
}

/// Connected components of the "centroids closer than tau" graph by BFS over
/// all pairs, each component sorted, components ordered by smallest member.
pub fn brute_force_components(centroids: &[f64], tau: f64) -> Vec<Vec<usize>> {
    let n = centroids.len();
    let mut seen = vec![false; n];
    let mut out = Vec::new();
    for start in 0..n {
        if seen[start] {
            continue;
        }
        seen[start] = true;
        let mut comp = vec![start];
        let mut queue = vec![start];
        while let Some(a) = queue.pop() {
            for b in 0..n {
                if !seen[b] && (centroids[a] - centroids[b]).abs() < tau {
                    seen[b] = true;
                    comp.push(b);
                    queue.push(b);
                }
            }
        }
        comp.sort_unstable();
        out.push(comp);
    }
    out
}
