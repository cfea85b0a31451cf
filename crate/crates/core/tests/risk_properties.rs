mod common;

use std::collections::BTreeMap;

use proptest::prelude::*;
use vidmod_core::classifier::featurize;
use vidmod_core::risk::{self, aggregate_tag_scores, filter_high_risk, video_risk, VideoRisk};
use vidmod_core::{FilterModel, RiskTaxonomy};

#[test]
fn eq1_matches_naive_oracle_on_1000_videos() {
    let tax = RiskTaxonomy::builtin();
    for seed in 0..1000 {
        let v = common::random_video(seed, 30, 10);
        let engine = video_risk(&v, &tax).unwrap();
        let oracle = common::naive_risk(&v, &tax);
        assert!((engine.risk_value - oracle).abs() <= 1e-12, "seed {seed}: {} vs {oracle}", engine.risk_value);
        assert!((engine.recompute() - engine.risk_value).abs() <= 1e-12);
    }
}

#[test]
fn linear_stage_matches_risk_value() {
    let tax = RiskTaxonomy::builtin();
    let model = FilterModel::linear();
    for seed in 0..300 {
        let v = common::random_video(seed, 20, 8);
        let p = model.predict(&featurize(&v, &tax).unwrap()).unwrap();
        assert!((p - video_risk(&v, &tax).unwrap().risk_value).abs() <= 1e-12, "seed {seed}");
    }
}

proptest! {
    #[test]
    fn risk_is_bounded(seed in any::<u64>()) {
        let tax = RiskTaxonomy::builtin();
        let r = video_risk(&common::random_video(seed, 15, 6), &tax).unwrap().risk_value;
        prop_assert!((0.0..=1.0).contains(&r));
    }

    #[test]
    fn raising_a_tag_score_never_lowers_risk(
        seed in any::<u64>(),
        pick in any::<prop::sample::Index>(),
        bump in 0.0..1.0f64,
    ) {
        let tax = RiskTaxonomy::builtin();
        let mut v = common::random_video(seed, 10, 4);
        prop_assume!(!v.frames.is_empty());
        let before = video_risk(&v, &tax).unwrap().risk_value;
        let f = pick.index(v.frames.len());
        let tag = tax.tag(seed as usize % tax.tag_count()).to_string();
        let scores = v.frames[f].tag_scores.entry(tag).or_default();
        let s = scores.entry("resnet".into()).or_insert(0.0);
        *s = (*s + bump).min(1.0);
        let after = video_risk(&v, &tax).unwrap().risk_value;
        prop_assert!(after >= before, "{after} < {before}");
    }

    #[test]
    fn aggregated_scores_stay_in_unit_interval(scores in prop::collection::vec(0.0..=1.0f64, 1..12)) {
        let tax = RiskTaxonomy::builtin();
        let models: BTreeMap<String, f64> =
            scores.iter().enumerate().map(|(i, &s)| (format!("m{i}"), s)).collect();
        let mut frame = vidmod_core::fixtures::frame(0.0, &[]);
        frame.tag_scores.insert("weapon".into(), models);
        let v = aggregate_tag_scores(&frame, &tax).unwrap();
        prop_assert!(v.scores.iter().all(|s| (0.0..=1.0).contains(s)));
        let expected = scores.iter().sum::<f64>().min(1.0);
        prop_assert_eq!(v.scores[tax.tag_index("weapon").unwrap()], expected);
    }

    #[test]
    fn filter_is_an_order_preserving_partition(
        values in prop::collection::vec(0.0..=1.0f64, 0..40),
        threshold in 0.0..=1.0f64,
    ) {
        let risks: Vec<VideoRisk> = values
            .iter()
            .enumerate()
            .map(|(i, &r)| VideoRisk { video_id: format!("v{i:03}"), risk_value: r, per_frame: vec![], per_audio: vec![] })
            .collect();
        let (high, low) = filter_high_risk(risks.clone(), threshold).unwrap();
        prop_assert_eq!(high.len() + low.len(), risks.len());
        prop_assert!(high.iter().all(|r| r.risk_value > threshold));
        prop_assert!(low.iter().all(|r| r.risk_value <= threshold));
        let ids = |rs: &[VideoRisk]| rs.iter().map(|r| r.video_id.clone()).collect::<Vec<_>>();
        let (hi, lo) = (ids(&high), ids(&low));
        prop_assert!(hi.windows(2).all(|w| w[0] < w[1]));
        prop_assert!(lo.windows(2).all(|w| w[0] < w[1]));
        prop_assert!(hi.iter().all(|id| !lo.contains(id)));
    }
}

#[test]
fn filter_boundaries() {
    let tax = RiskTaxonomy::builtin();
    let risks: Vec<VideoRisk> = (0..20).map(|s| video_risk(&common::random_video(s, 10, 4), &tax).unwrap()).collect();
    let (high, _) = filter_high_risk(risks.clone(), 1.0).unwrap();
    assert!(high.is_empty());
    let (high, low) = filter_high_risk(risks, 0.0).unwrap();
    assert!(high.iter().all(|r| r.risk_value > 0.0));
    assert!(low.iter().all(|r| r.risk_value == 0.0));
    assert!(risk::check_threshold(1.5).is_err());
}
