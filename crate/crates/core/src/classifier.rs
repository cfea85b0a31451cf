//! The binary video filter.
//!
//! A fresh filter is the linear stage: it scores a video by its risk value.
//! Once moderators have labelled videos, [`retrain`] fits a one-hidden-layer
//! network on pooled per-tag and per-word statistics and the filter moves to
//! the learned stage. Every retrain bumps the model version.

use std::collections::HashMap;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::VideoRecord;
use crate::review::ReviewLabel;
use crate::risk::{self, RiskError, RiskVector};
use crate::taxonomy::RiskTaxonomy;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("need both classes: got {positives} deviant and {negatives} normal reviews")]
    NeedBothClasses { positives: usize, negatives: usize },
    #[error("feature length {found} does not match model input {expected}")]
    FeatureLength { expected: usize, found: usize },
    #[error("reviewed video `{0}` is not in the corpus")]
    UnknownVideo(String),
    #[error("cannot score a video with no frames and no audio")]
    EmptyVideo,
    #[error("invalid training config: {0}")]
    Config(String),
    #[error(transparent)]
    Risk(#[from] RiskError),
    #[error("model io: {0}")]
    Io(#[from] std::io::Error),
    #[error("model snapshot: {0}")]
    Json(#[from] serde_json::Error),
}

/// Frame and clip score matrices plus their fixed-length pooling.
///
/// `pooled` is `[tag max | tag mean | word max | word mean]`, so its length is
/// `2 * tags + 2 * words`. A missing modality pools to zeros.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMatrixPair {
    pub visual: Vec<Vec<f64>>,
    pub audio: Vec<Vec<f64>>,
    pub pooled: Vec<f64>,
}

fn pool(rows: &[Vec<f64>], width: usize, out: &mut Vec<f64>) {
    let mut max = vec![0.0f64; width];
    let mut sum = vec![0.0f64; width];
    for row in rows {
        for (j, &v) in row.iter().enumerate() {
            max[j] = max[j].max(v);
            sum[j] += v;
        }
    }
    let n = rows.len().max(1) as f64;
    out.extend(max);
    out.extend(sum.into_iter().map(|s| s / n));
}

pub fn featurize(video: &VideoRecord, taxonomy: &RiskTaxonomy) -> Result<FeatureMatrixPair, RiskError> {
    let into_rows = |v: Vec<RiskVector>| v.into_iter().map(|r| r.scores).collect::<Vec<_>>();
    let visual = into_rows(risk::frame_vectors(video, taxonomy)?);
    let audio = into_rows(risk::audio_vectors(video, taxonomy)?);
    let mut pooled = Vec::with_capacity(2 * (taxonomy.tag_count() + taxonomy.word_count()));
    pool(&visual, taxonomy.tag_count(), &mut pooled);
    pool(&audio, taxonomy.word_count(), &mut pooled);
    Ok(FeatureMatrixPair { visual, audio, pooled })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Linear,
    Learned,
}

/// `sigmoid(w2 · tanh(w1 x + b1) + b2)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpWeights {
    /// `hidden × input`, row-major.
    pub w1: Vec<Vec<f64>>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: f64,
}

impl MlpWeights {
    pub fn zeros(input: usize, hidden: usize) -> Self {
        MlpWeights {
            w1: vec![vec![0.0; input]; hidden],
            b1: vec![0.0; hidden],
            w2: vec![0.0; hidden],
            b2: 0.0,
        }
    }

    pub fn input_len(&self) -> usize {
        self.w1.first().map_or(0, Vec::len)
    }

    fn hidden(&self, x: &[f64]) -> Vec<f64> {
        self.w1
            .iter()
            .zip(&self.b1)
            .map(|(row, b)| (row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + b).tanh())
            .collect()
    }

    fn logit(&self, h: &[f64]) -> f64 {
        self.w2.iter().zip(h).map(|(w, v)| w * v).sum::<f64>() + self.b2
    }

    pub fn forward(&self, x: &[f64]) -> f64 {
        sigmoid(self.logit(&self.hidden(x)))
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^z)` without overflow.
fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingMeta {
    pub num_reviews: usize,
    pub final_loss: f64,
    pub seed: u64,
    pub epochs: usize,
    pub learning_rate: f64,
    pub hidden_width: usize,
    pub training_accuracy: f64,
    /// `(epoch, loss)` checkpoints, starting with the untrained loss.
    pub loss_curve: Vec<(usize, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterModel {
    pub version: u64,
    pub stage: Stage,
    pub weights: Option<MlpWeights>,
    pub training_meta: Option<TrainingMeta>,
}

impl Default for FilterModel {
    fn default() -> Self {
        Self::linear()
    }
}

impl FilterModel {
    /// The initial threshold-rule filter, version 0.
    pub fn linear() -> Self {
        FilterModel { version: 0, stage: Stage::Linear, weights: None, training_meta: None }
    }

    /// Score in `[0, 1]`; the linear stage returns the video's risk value.
    pub fn predict(&self, features: &FeatureMatrixPair) -> Result<f64, ModelError> {
        match (self.stage, &self.weights) {
            (Stage::Linear, _) => linear_score(features),
            (Stage::Learned, Some(w)) => {
                if features.pooled.len() != w.input_len() {
                    return Err(ModelError::FeatureLength {
                        expected: w.input_len(),
                        found: features.pooled.len(),
                    });
                }
                Ok(w.forward(&features.pooled))
            }
            (Stage::Learned, None) => Err(ModelError::Config("learned model has no weights".into())),
        }
    }

    pub fn score(&self, video: &VideoRecord, taxonomy: &RiskTaxonomy) -> Result<f64, ModelError> {
        self.predict(&featurize(video, taxonomy)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serializes")
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), ModelError> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ModelError> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }
}

/// Mean of row maxima over both matrices, the same quantity as the risk value.
fn linear_score(features: &FeatureMatrixPair) -> Result<f64, ModelError> {
    let n = features.visual.len() + features.audio.len();
    if n == 0 {
        return Err(ModelError::EmptyVideo);
    }
    let row_max = |r: &Vec<f64>| r.iter().copied().fold(0.0, f64::max);
    let total: f64 = features.visual.iter().chain(&features.audio).map(row_max).sum();
    Ok(total / n as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    /// Full-batch step size. At or below the default the recorded loss
    /// checkpoints do not increase on pooled features in `[0, 1]`.
    pub learning_rate: f64,
    pub seed: u64,
    pub hidden_width: usize,
    pub checkpoint_every: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig { epochs: 500, learning_rate: 0.5, seed: 0, hidden_width: 16, checkpoint_every: 25 }
    }
}

/// Labelled pooled vector; the target is 1.0 for deviant.
pub type Sample = (Vec<f64>, f64);

fn mean_loss(w: &MlpWeights, samples: &[Sample]) -> f64 {
    samples
        .iter()
        .map(|(x, y)| {
            let z = w.logit(&w.hidden(x));
            softplus(z) - y * z
        })
        .sum::<f64>()
        / samples.len() as f64
}

pub fn accuracy(w: &MlpWeights, samples: &[Sample]) -> f64 {
    let correct = samples
        .iter()
        .filter(|(x, y)| (w.forward(x) > 0.5) == (*y > 0.5))
        .count();
    correct as f64 / samples.len().max(1) as f64
}

/// Full-batch gradient descent on mean logistic loss.
pub fn fit(samples: &[Sample], config: &TrainConfig) -> Result<(MlpWeights, Vec<(usize, f64)>), ModelError> {
    if samples.is_empty() {
        return Err(ModelError::Config("no training samples".into()));
    }
    if config.hidden_width == 0 || !(config.learning_rate > 0.0) {
        return Err(ModelError::Config("hidden_width and learning_rate must be positive".into()));
    }
    let input = samples[0].0.len();
    if let Some((x, _)) = samples.iter().find(|(x, _)| x.len() != input) {
        return Err(ModelError::FeatureLength { expected: input, found: x.len() });
    }
    let hidden = config.hidden_width;

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut w = MlpWeights::zeros(input, hidden);
    let a1 = (6.0 / (input + hidden) as f64).sqrt();
    for row in &mut w.w1 {
        for v in row.iter_mut() {
            *v = rng.random_range(-a1..a1);
        }
    }
    let a2 = (6.0 / (hidden + 1) as f64).sqrt();
    for v in &mut w.w2 {
        *v = rng.random_range(-a2..a2);
    }

    let n = samples.len() as f64;
    let every = config.checkpoint_every.max(1);
    let mut curve = vec![(0, mean_loss(&w, samples))];
    let mut g = MlpWeights::zeros(input, hidden);
    for epoch in 1..=config.epochs {
        g.w1.iter_mut().for_each(|r| r.iter_mut().for_each(|v| *v = 0.0));
        g.b1.iter_mut().for_each(|v| *v = 0.0);
        g.w2.iter_mut().for_each(|v| *v = 0.0);
        g.b2 = 0.0;

        for (x, y) in samples {
            let h = w.hidden(x);
            let dz = sigmoid(w.logit(&h)) - y;
            g.b2 += dz;
            for j in 0..hidden {
                g.w2[j] += dz * h[j];
                let dh = dz * w.w2[j] * (1.0 - h[j] * h[j]);
                g.b1[j] += dh;
                for (gw, xv) in g.w1[j].iter_mut().zip(x) {
                    *gw += dh * xv;
                }
            }
        }

        let step = config.learning_rate / n;
        for j in 0..hidden {
            for (wv, gv) in w.w1[j].iter_mut().zip(&g.w1[j]) {
                *wv -= step * gv;
            }
            w.b1[j] -= step * g.b1[j];
            w.w2[j] -= step * g.w2[j];
        }
        w.b2 -= step * g.b2;

        if epoch % every == 0 || epoch == config.epochs {
            curve.push((epoch, mean_loss(&w, samples)));
        }
    }
    if curve.iter().any(|(_, l)| !l.is_finite()) {
        return Err(ModelError::Config("training diverged; lower the learning rate".into()));
    }
    Ok((w, curve))
}

/// Builds training samples from reviews; labels collapse to normal = 0, any category = 1.
pub fn review_samples(
    reviews: &[ReviewLabel],
    corpus: &[VideoRecord],
    taxonomy: &RiskTaxonomy,
) -> Result<Vec<Sample>, ModelError> {
    let by_id: HashMap<&str, &VideoRecord> = corpus.iter().map(|v| (v.video_id.as_str(), v)).collect();
    reviews
        .iter()
        .map(|r| {
            let video = by_id
                .get(r.video_id.as_str())
                .ok_or_else(|| ModelError::UnknownVideo(r.video_id.clone()))?;
            let target = if r.label.is_deviant() { 1.0 } else { 0.0 };
            Ok((featurize(video, taxonomy)?.pooled, target))
        })
        .collect()
}

/// Trains a learned-stage filter from scratch on all given reviews.
/// The result's version is one more than `current`'s.
pub fn retrain(
    current: &FilterModel,
    reviews: &[ReviewLabel],
    corpus: &[VideoRecord],
    taxonomy: &RiskTaxonomy,
    config: &TrainConfig,
) -> Result<FilterModel, ModelError> {
    let positives = reviews.iter().filter(|r| r.label.is_deviant()).count();
    let negatives = reviews.len() - positives;
    if positives == 0 || negatives == 0 {
        return Err(ModelError::NeedBothClasses { positives, negatives });
    }
    let samples = review_samples(reviews, corpus, taxonomy)?;
    let (weights, loss_curve) = fit(&samples, config)?;
    let meta = TrainingMeta {
        num_reviews: reviews.len(),
        final_loss: loss_curve.last().map_or(f64::NAN, |c| c.1),
        seed: config.seed,
        epochs: config.epochs,
        learning_rate: config.learning_rate,
        hidden_width: config.hidden_width,
        training_accuracy: accuracy(&weights, &samples),
        loss_curve,
    };
    Ok(FilterModel {
        version: current.version + 1,
        stage: Stage::Learned,
        weights: Some(weights),
        training_meta: Some(meta),
    })
}
