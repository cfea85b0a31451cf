mod common;

use proptest::prelude::*;
use vidmod_core::framesum::{
    align_scenes, build_frame_layout, project_frames, scene_glyph, FrameSumConfig, SceneLayout, TsneConfig,
};
use vidmod_core::risk::{Modality, RiskVector};
use vidmod_core::RiskTaxonomy;

fn check_layout(layout: &SceneLayout, eps: f64, tau: f64) -> Result<(), String> {
    let n = layout.frames.len();
    // partition + contiguity
    let mut next = 0;
    for (k, shot) in layout.shots.iter().enumerate() {
        if shot.first != next || shot.last < shot.first {
            return Err(format!("shot {k} is {:?}, expected to start at {next}", (shot.first, shot.last)));
        }
        next = shot.last + 1;
    }
    if next != n {
        return Err(format!("shots cover {next} of {n} frames"));
    }
    // gap soundness
    for i in 0..n.saturating_sub(1) {
        let gap = (layout.frames[i + 1].y - layout.frames[i].y).abs();
        let boundary = layout.shots.iter().any(|s| s.last == i);
        if boundary != (gap > eps) {
            return Err(format!("frame {i}: gap {gap} boundary {boundary}"));
        }
    }
    // each shot in exactly one scene, and scenes are the single-linkage components
    let mut owner = vec![usize::MAX; layout.shots.len()];
    for (si, scene) in layout.scenes.iter().enumerate() {
        for &s in &scene.shot_ids {
            if owner[s] != usize::MAX {
                return Err(format!("shot {s} in two scenes"));
            }
            owner[s] = si;
        }
        let members: Vec<usize> = scene.shot_ids.iter().flat_map(|&s| layout.shots[s].frames()).collect();
        if !members.contains(&scene.representative_frame) {
            return Err(format!("scene {si} representative is not a member"));
        }
    }
    if owner.contains(&usize::MAX) {
        return Err("a shot has no scene".into());
    }
    let mut rows: Vec<usize> = layout.scenes.iter().map(|s| s.row).collect();
    rows.sort_unstable();
    if rows != (0..layout.scenes.len()).collect::<Vec<_>>() {
        return Err(format!("rows {rows:?}"));
    }
    if layout.shots.len() <= 8 {
        let centroids: Vec<f64> = layout.shots.iter().map(|s| s.centroid_y).collect();
        let mut got: Vec<Vec<usize>> = layout.scenes.iter().map(|s| s.shot_ids.clone()).collect();
        got.sort();
        if got != common::brute_force_components(&centroids, tau) {
            return Err(format!("scenes {got:?} differ from oracle"));
        }
    }
    Ok(())
}

#[test]
fn fuzzed_layouts_hold_invariants() {
    let tax = RiskTaxonomy::builtin();
    let cfg = FrameSumConfig::default();
    let mut small = 0;
    for seed in 0..50 {
        let max_frames = if seed % 2 == 0 { 8 } else { 60 };
        let v = common::random_video(1000 + seed, max_frames, 2);
        let layout = build_frame_layout(&v, &tax, &cfg).unwrap();
        if let Err(e) = check_layout(&layout, cfg.eps, cfg.tau) {
            panic!("seed {seed}: {e}");
        }
        if !layout.shots.is_empty() && layout.shots.len() <= 8 {
            small += 1;
        }
    }
    assert!(small >= 20, "only {small} instances exercised the oracle");
}

#[test]
fn alignment_matches_brute_force() {
    let mut runner = proptest::test_runner::TestRunner::default();
    runner
        .run(&prop::collection::vec(0.0..=1.0f64, 1..=8), |centroids| {
            let shots: Vec<_> = centroids
                .iter()
                .enumerate()
                .map(|(i, &c)| vidmod_core::framesum::Shot { first: i, last: i, centroid_y: c })
                .collect();
            for tau in [0.01, 0.05, 0.2] {
                let mut got = align_scenes(&shots, tau);
                got.sort();
                prop_assert_eq!(got, common::brute_force_components(&centroids, tau));
            }
            Ok(())
        })
        .unwrap();
}

fn frame_vec(scores: Vec<f64>) -> RiskVector {
    RiskVector { kind: Modality::Frame, scores }
}

proptest! {
    #[test]
    fn glyph_is_additive_over_splits(
        rows in prop::collection::vec(prop::collection::vec(0.0..=1.0f64, 5), 2..12),
        cut in any::<prop::sample::Index>(),
    ) {
        let frames: Vec<RiskVector> = rows.into_iter().map(frame_vec).collect();
        let k = 1 + cut.index(frames.len() - 1);
        let whole = scene_glyph(&frames);
        let (a, b) = (scene_glyph(&frames[..k]), scene_glyph(&frames[k..]));
        for i in 0..5 {
            prop_assert!((whole.glyph[i] - (a.glyph[i] + b.glyph[i])).abs() < 1e-12);
        }
        prop_assert_eq!(whole.scene_risk, a.scene_risk.max(b.scene_risk));
    }
}

fn two_cluster_fixture(seed: u64) -> Vec<Vec<f64>> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let far = 100.0 / 8f64.sqrt();
    (0..8)
        .map(|i| {
            let offset = if i < 4 { 0.0 } else { far };
            (0..8).map(|_| offset + rng.random_range(-0.05..0.05)).collect()
        })
        .collect()
}

/// Largest 1D gap inside a cluster is smaller than the smallest gap between clusters.
fn separated(y: &[f64]) -> bool {
    let (a, b) = y.split_at(4);
    let spread = |c: &[f64]| c.iter().cloned().fold(f64::MIN, f64::max) - c.iter().cloned().fold(f64::MAX, f64::min);
    let inter = a.iter().flat_map(|p| b.iter().map(move |q| (p - q).abs())).fold(f64::MAX, f64::min);
    spread(a) < inter && spread(b) < inter
}

#[test]
fn two_clusters_separate_for_ten_seeds() {
    let times: Vec<f64> = (0..8).map(f64::from).collect();
    for seed in 0..10 {
        let data = two_cluster_fixture(seed);
        let cfg = TsneConfig { seed, ..Default::default() };
        let y: Vec<f64> = project_frames(&times, &data, &cfg).unwrap().iter().map(|p| p.y).collect();
        assert!(separated(&y), "seed {seed}: {y:?}");
        let again: Vec<f64> = project_frames(&times, &data, &cfg).unwrap().iter().map(|p| p.y).collect();
        assert_eq!(y, again);
    }
}
