//! Frame view: frames are projected onto a vertical axis (time runs along the
//! horizontal one), cut into shots wherever the projection jumps, and shots at
//! similar heights are aligned into scenes. Each scene carries a glyph that
//! sums its frames' risk vectors and a representative frame.

pub mod tsne;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::VideoRecord;
use crate::risk::{self, RiskError, RiskVector};
use crate::taxonomy::RiskTaxonomy;

pub use tsne::TsneConfig;

#[derive(Debug, Error)]
pub enum FrameSumError {
    #[error("feature vectors have different lengths ({expected} vs {found} at frame {index})")]
    Shape {
        expected: usize,
        found: usize,
        index: usize,
    },
    #[error("frame projection needs at least one frame")]
    NoFrames,
    #[error(transparent)]
    Risk(#[from] RiskError),
}

/// How scene rows are ordered top to bottom.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SceneOrder {
    /// Highest scene risk on top.
    #[default]
    Risk,
    /// Lowest mean projection coordinate on top.
    Projection,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FrameSumConfig {
    /// Largest projection jump allowed inside a shot.
    pub eps: f64,
    /// Shots whose centroids differ by less than this are aligned.
    pub tau: f64,
    pub perplexity: Option<f64>,
    pub iterations: usize,
    pub seed: u64,
    pub order: SceneOrder,
}

impl Default for FrameSumConfig {
    fn default() -> Self {
        FrameSumConfig {
            eps: 0.08,
            tau: 0.05,
            perplexity: None,
            iterations: 500,
            seed: 0,
            order: SceneOrder::Risk,
        }
    }
}

impl FrameSumConfig {
    pub fn tsne(&self) -> TsneConfig {
        TsneConfig {
            perplexity: self.perplexity,
            iterations: self.iterations,
            seed: self.seed,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProjectedFrame {
    pub frame_index: usize,
    pub time: f64,
    pub y: f64,
}

/// A run of consecutive frames, `first..=last`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Shot {
    pub first: usize,
    pub last: usize,
    pub centroid_y: f64,
}

impl Shot {
    pub fn frames(&self) -> std::ops::RangeInclusive<usize> {
        self.first..=self.last
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub row: usize,
    pub shot_ids: Vec<usize>,
    /// Element-wise sum of member frames' tag vectors.
    pub glyph: Vec<f64>,
    pub representative_frame: usize,
    pub scene_risk: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneLayout {
    pub frames: Vec<ProjectedFrame>,
    pub shots: Vec<Shot>,
    pub scenes: Vec<Scene>,
}

/// Projects frames with 1D t-SNE and rescales to `[0, 1]`.
pub fn project_frames(
    times: &[f64],
    features: &[Vec<f64>],
    config: &TsneConfig,
) -> Result<Vec<ProjectedFrame>, FrameSumError> {
    assert_eq!(times.len(), features.len(), "one time per feature vector");
    let first = features.first().ok_or(FrameSumError::NoFrames)?;
    if let Some((index, f)) = features.iter().enumerate().find(|(_, f)| f.len() != first.len()) {
        return Err(FrameSumError::Shape { expected: first.len(), found: f.len(), index });
    }
    let y = tsne::rescale_unit(&tsne::embed_1d(features, config));
    Ok(times
        .iter()
        .zip(y)
        .enumerate()
        .map(|(frame_index, (&time, y))| ProjectedFrame { frame_index, time, y })
        .collect())
}

/// Starts a new shot between consecutive frames whose projections differ by more than `eps`.
pub fn cluster_shots(projected: &[ProjectedFrame], eps: f64) -> Vec<Shot> {
    let mut shots = Vec::new();
    let mut start = 0;
    for i in 0..projected.len() {
        let boundary = i + 1 == projected.len() || (projected[i + 1].y - projected[i].y).abs() > eps;
        if boundary {
            let members = &projected[start..=i];
            let centroid_y = members.iter().map(|p| p.y).sum::<f64>() / members.len() as f64;
            shots.push(Shot {
                first: projected[start].frame_index,
                last: projected[i].frame_index,
                centroid_y,
            });
            start = i + 1;
        }
    }
    shots
}

/// Single-linkage groups of shots with centroid gaps below `tau`.
///
/// Groups are returned sorted by their first shot; shot ids inside a group
/// are ascending.
pub fn align_scenes(shots: &[Shot], tau: f64) -> Vec<Vec<usize>> {
    // On a line, single-linkage components are runs of the sorted order
    // whose neighbouring gaps are all below tau.
    let mut order: Vec<usize> = (0..shots.len()).collect();
    order.sort_by(|&a, &b| shots[a].centroid_y.total_cmp(&shots[b].centroid_y).then(a.cmp(&b)));

    let mut groups: Vec<Vec<usize>> = Vec::new();
    for (k, &id) in order.iter().enumerate() {
        let linked = k > 0 && (shots[id].centroid_y - shots[order[k - 1]].centroid_y).abs() < tau;
        match groups.last_mut() {
            Some(g) if linked => g.push(id),
            _ => groups.push(vec![id]),
        }
    }
    for g in &mut groups {
        g.sort_unstable();
    }
    groups.sort_by_key(|g| g[0]);
    groups
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneGlyph {
    pub glyph: Vec<f64>,
    /// Position within the given frame list; the first frame wins ties.
    pub representative: usize,
    pub scene_risk: f64,
}

pub fn scene_glyph(frames: &[RiskVector]) -> SceneGlyph {
    assert!(!frames.is_empty(), "scene must contain a frame");
    let mut glyph = vec![0.0; frames[0].scores.len()];
    let mut representative = 0;
    let mut scene_risk = f64::NEG_INFINITY;
    for (i, f) in frames.iter().enumerate() {
        for (g, s) in glyph.iter_mut().zip(&f.scores) {
            *g += s;
        }
        let m = f.max();
        if m > scene_risk {
            scene_risk = m;
            representative = i;
        }
    }
    SceneGlyph { glyph, representative, scene_risk }
}

/// Assigns rows `0..k` to scenes in place.
pub fn order_scenes(scenes: &mut [Scene], shots: &[Shot], frames: &[ProjectedFrame], order: SceneOrder) {
    let first_frame = |s: &Scene| s.shot_ids.iter().map(|&i| shots[i].first).min().unwrap_or(0);
    let mean_y = |s: &Scene| {
        let (sum, n) = s
            .shot_ids
            .iter()
            .flat_map(|&i| shots[i].frames())
            .fold((0.0, 0usize), |(sum, n), f| (sum + frames[f].y, n + 1));
        sum / n.max(1) as f64
    };
    let mut idx: Vec<usize> = (0..scenes.len()).collect();
    idx.sort_by(|&a, &b| {
        let (sa, sb) = (&scenes[a], &scenes[b]);
        let primary = match order {
            SceneOrder::Risk => sb.scene_risk.total_cmp(&sa.scene_risk),
            SceneOrder::Projection => mean_y(sa).total_cmp(&mean_y(sb)),
        };
        primary.then(first_frame(sa).cmp(&first_frame(sb)))
    });
    for (row, i) in idx.into_iter().enumerate() {
        scenes[i].row = row;
    }
}

/// Features used for projection: the frames' own appearance vectors when
/// every frame has one, otherwise the dense tag-score vectors.
pub fn projection_features(video: &VideoRecord, tag_vectors: &[RiskVector]) -> Vec<Vec<f64>> {
    let all_have = video.frames.iter().all(|f| f.feature.is_some());
    if all_have {
        video.frames.iter().map(|f| f.feature.clone().unwrap()).collect()
    } else {
        tag_vectors.iter().map(|v| v.scores.clone()).collect()
    }
}

/// Full frame-view pipeline for one video. A video without frames yields an
/// empty layout.
pub fn build_frame_layout(
    video: &VideoRecord,
    taxonomy: &RiskTaxonomy,
    config: &FrameSumConfig,
) -> Result<SceneLayout, FrameSumError> {
    if video.frames.is_empty() {
        return Ok(SceneLayout { frames: vec![], shots: vec![], scenes: vec![] });
    }
    let vectors = risk::frame_vectors(video, taxonomy)?;
    let times: Vec<f64> = video.frames.iter().map(|f| f.time).collect();
    let frames = project_frames(&times, &projection_features(video, &vectors), &config.tsne())?;
    let shots = cluster_shots(&frames, config.eps);

    let mut scenes: Vec<Scene> = align_scenes(&shots, config.tau)
        .into_iter()
        .map(|shot_ids| {
            let members: Vec<usize> = shot_ids.iter().flat_map(|&s| shots[s].frames()).collect();
            let member_vectors: Vec<RiskVector> = members.iter().map(|&f| vectors[f].clone()).collect();
            let g = scene_glyph(&member_vectors);
            Scene {
                row: 0,
                shot_ids,
                glyph: g.glyph,
                representative_frame: members[g.representative],
                scene_risk: g.scene_risk,
            }
        })
        .collect();
    order_scenes(&mut scenes, &shots, &frames, config.order);
    scenes.sort_by_key(|s| s.row);
    Ok(SceneLayout { frames, shots, scenes })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FramePoint {
    pub idx: usize,
    pub t: f64,
    pub y: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShotView {
    pub frames: Vec<FramePoint>,
    pub centroid: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneView {
    pub row: usize,
    pub shots: Vec<ShotView>,
    pub glyph: BTreeMap<String, f64>,
    pub rep_frame: usize,
    pub scene_risk: f64,
}

/// Wire form served to the moderator console.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameView {
    pub scenes: Vec<SceneView>,
}

impl SceneLayout {
    pub fn to_view(&self, taxonomy: &RiskTaxonomy) -> FrameView {
        let mut scenes: Vec<SceneView> = self
            .scenes
            .iter()
            .map(|scene| SceneView {
                row: scene.row,
                shots: scene
                    .shot_ids
                    .iter()
                    .map(|&s| ShotView {
                        frames: self.shots[s]
                            .frames()
                            .map(|f| FramePoint { idx: f, t: self.frames[f].time, y: self.frames[f].y })
                            .collect(),
                        centroid: self.shots[s].centroid_y,
                    })
                    .collect(),
                glyph: scene
                    .glyph
                    .iter()
                    .enumerate()
                    .map(|(i, &v)| (taxonomy.tag(i).to_string(), v))
                    .collect(),
                rep_frame: scene.representative_frame,
                scene_risk: scene.scene_risk,
            })
            .collect();
        scenes.sort_by_key(|s| s.row);
        FrameView { scenes }
    }
}
