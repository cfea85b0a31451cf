use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::{Arc, Mutex, RwLock};

use axum::body::Bytes;
use serde::Serialize;
use vidmod_core::audiosum::build_audio_layout;
use vidmod_core::classifier::{retrain, ModelError};
use vidmod_core::corpus::{load_corpus, sampling_interval};
use vidmod_core::framesum::build_frame_layout;
use vidmod_core::risk::video_risk;
use vidmod_core::timeline::build_timeline;
use vidmod_core::{FilterModel, ReviewLabel, RiskTaxonomy, VideoRecord};

use crate::config::ServiceConfig;
use crate::error::{ApiError, ServiceError};
use crate::store::{self, AppendError, ReviewStore};

pub struct Corpus {
    pub videos: Vec<VideoRecord>,
    index: HashMap<String, usize>,
    /// Relative thumbnail paths resolve against this directory.
    pub base_dir: PathBuf,
}

impl Corpus {
    pub fn new(videos: Vec<VideoRecord>, base_dir: PathBuf) -> Self {
        let index = videos.iter().enumerate().map(|(i, v)| (v.video_id.clone(), i)).collect();
        Corpus { videos, index, base_dir }
    }

    pub fn get(&self, id: &str) -> Option<&VideoRecord> {
        self.index.get(id).map(|&i| &self.videos[i])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LayoutKind {
    Video,
    Frames,
    Audio,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QueueItem {
    pub video_id: String,
    pub risk_value: f64,
    pub duration: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReviewReceipt {
    pub accepted: bool,
    pub review_count: usize,
    pub timestamp: u64,
    pub training_triggered: bool,
}

pub struct AppState {
    pub config: ServiceConfig,
    pub taxonomy: RiskTaxonomy,
    pub corpus: Option<Corpus>,
    store: Mutex<ReviewStore>,
    model: RwLock<Arc<FilterModel>>,
    /// Serializes retraining so versions stay strictly increasing.
    train_lock: Mutex<()>,
    layouts: Mutex<HashMap<(String, LayoutKind), Bytes>>,
    scores: Mutex<Option<(u64, Arc<Vec<f64>>)>>,
}

impl AppState {
    /// Loads taxonomy and corpus, replays the review log and restores the
    /// latest model snapshot (or the linear filter when there is none).
    pub fn open(config: ServiceConfig) -> Result<Arc<Self>, ServiceError> {
        config.validate()?;
        let taxonomy = match &config.taxonomy_path {
            Some(p) => RiskTaxonomy::load(p)?,
            None => RiskTaxonomy::builtin(),
        };
        let corpus = match &config.corpus_path {
            Some(p) => {
                let videos = load_corpus(p)?;
                for v in &videos {
                    video_risk(v, &taxonomy).map_err(|e| ServiceError::Config(format!("{}: {e}", v.video_id)))?;
                }
                let base = p.parent().map(PathBuf::from).unwrap_or_default();
                Some(Corpus::new(videos, base))
            }
            None => None,
        };
        let store = ReviewStore::open(&config.data_dir)?;
        let model = store::latest_snapshot(&config.data_dir)?.unwrap_or_else(FilterModel::linear);
        tracing::info!(reviews = store.len(), model_version = model.version, "state restored");
        Ok(Arc::new(AppState {
            config,
            taxonomy,
            corpus,
            store: Mutex::new(store),
            model: RwLock::new(Arc::new(model)),
            train_lock: Mutex::new(()),
            layouts: Mutex::new(HashMap::new()),
            scores: Mutex::new(None),
        }))
    }

    pub fn model(&self) -> Arc<FilterModel> {
        self.model.read().unwrap().clone()
    }

    pub fn reviews(&self) -> Vec<ReviewLabel> {
        self.store.lock().unwrap().reviews().to_vec()
    }

    pub fn corpus(&self) -> Result<&Corpus, ApiError> {
        self.corpus.as_ref().ok_or_else(|| ApiError::conflict("no_corpus", "no corpus loaded"))
    }

    pub fn video(&self, id: &str) -> Result<&VideoRecord, ApiError> {
        self.corpus()?.get(id).ok_or_else(|| ApiError::not_found(format!("unknown video `{id}`")))
    }

    /// Current-model score of every corpus video, in corpus order.
    pub fn scores(&self) -> Result<Arc<Vec<f64>>, ApiError> {
        let corpus = self.corpus()?;
        let model = self.model();
        if let Some((version, scores)) = self.scores.lock().unwrap().as_ref() {
            if *version == model.version {
                return Ok(scores.clone());
            }
        }
        let scores = corpus
            .videos
            .iter()
            .map(|v| model.score(v, &self.taxonomy))
            .collect::<Result<Vec<f64>, ModelError>>()
            .map_err(|e| ApiError::internal(e.to_string()))?;
        let scores = Arc::new(scores);
        *self.scores.lock().unwrap() = Some((model.version, scores.clone()));
        Ok(scores)
    }

    /// Unreviewed videos scoring above `threshold`, highest score first, ties by id.
    pub fn queue(&self, threshold: f64) -> Result<Vec<QueueItem>, ApiError> {
        let corpus = self.corpus()?;
        let scores = self.scores()?;
        let reviewed: std::collections::HashSet<String> =
            self.store.lock().unwrap().reviews().iter().map(|r| r.video_id.clone()).collect();
        let mut items: Vec<QueueItem> = corpus
            .videos
            .iter()
            .zip(scores.iter())
            .filter(|(v, &s)| s > threshold && !reviewed.contains(&v.video_id))
            .map(|(v, &s)| QueueItem { video_id: v.video_id.clone(), risk_value: s, duration: v.duration })
            .collect();
        items.sort_by(|a, b| b.risk_value.total_cmp(&a.risk_value).then_with(|| a.video_id.cmp(&b.video_id)));
        Ok(items)
    }

    /// Serialized layout JSON, computed once per video and kind.
    pub fn layout(&self, id: &str, kind: LayoutKind) -> Result<Bytes, ApiError> {
        let video = self.video(id)?;
        let key = (id.to_string(), kind);
        if let Some(bytes) = self.layouts.lock().unwrap().get(&key) {
            return Ok(bytes.clone());
        }
        let internal = |e: &dyn std::fmt::Display| ApiError::internal(e.to_string());
        let json = match kind {
            LayoutKind::Video => {
                let timeline = build_timeline(video, &self.taxonomy, &self.config.timeline).map_err(|e| internal(&e))?;
                let risk = video_risk(video, &self.taxonomy).map_err(|e| internal(&e))?;
                let interval = sampling_interval(video.duration).map_err(|e| internal(&e))?;
                serde_json::to_vec(&serde_json::json!({
                    "metadata": {
                        "video_id": video.video_id,
                        "duration": video.duration,
                        "frame_count": video.frames.len(),
                        "clip_count": video.audio.len(),
                        "sampling_interval": interval,
                        "frames": video.frames.iter().enumerate()
                            .map(|(i, f)| serde_json::json!({"idx": i, "t": f.time}))
                            .collect::<Vec<_>>(),
                    },
                    "timeline": timeline,
                    "risk": risk,
                }))
            }
            LayoutKind::Frames => {
                let layout = build_frame_layout(video, &self.taxonomy, &self.config.framesum).map_err(|e| internal(&e))?;
                serde_json::to_vec(&layout.to_view(&self.taxonomy))
            }
            LayoutKind::Audio => {
                let layout = build_audio_layout(video, &self.taxonomy, &self.config.audiosum).map_err(|e| internal(&e))?;
                serde_json::to_vec(&layout)
            }
        }
        .map_err(|e| internal(&e))?;
        let bytes = Bytes::from(json);
        self.layouts.lock().unwrap().insert(key, bytes.clone());
        Ok(bytes)
    }

    /// Validates and durably appends a review. The receipt says whether the
    /// auto-retrain interval was reached.
    pub fn submit_review(&self, review: ReviewLabel) -> Result<ReviewReceipt, ApiError> {
        let video = self.video(&review.video_id)?;
        review.validate().map_err(|e| ApiError::unprocessable(e.to_string()))?;
        if let Some(&t) = review.evidence.frame_times.iter().find(|&&t| t > video.duration) {
            return Err(ApiError::unprocessable(format!("evidence frame time {t} is past the video end")));
        }
        if let Some(tag) = review.evidence.tags.iter().find(|t| self.taxonomy.tag_index(t).is_err()) {
            return Err(ApiError::unprocessable(format!("unknown evidence tag `{tag}`")));
        }
        if let Some(word) = review.evidence.words.iter().find(|w| self.taxonomy.word_index(w).is_err()) {
            return Err(ApiError::unprocessable(format!("unknown evidence word `{word}`")));
        }

        let mut store = self.store.lock().unwrap();
        let stored = match store.append(review)? {
            Ok(r) => r,
            Err(AppendError::Duplicate) => {
                return Err(ApiError::conflict("duplicate_review", "this moderator already reviewed this video"))
            }
        };
        let count = store.len();
        let auto_n = self.config.train.auto_n;
        Ok(ReviewReceipt {
            accepted: true,
            review_count: count,
            timestamp: stored.timestamp,
            training_triggered: auto_n > 0 && count % auto_n == 0,
        })
    }

    /// Retrains on a snapshot of the review log, persists the new model and
    /// swaps it in. Blocking; call from a blocking-capable context.
    pub fn train(&self) -> Result<Arc<FilterModel>, ApiError> {
        let corpus = self.corpus()?;
        let _guard = self.train_lock.lock().unwrap();
        let reviews = self.reviews();
        let current = self.model();
        let next = retrain(&current, &reviews, &corpus.videos, &self.taxonomy, &self.config.train.to_train_config())
            .map_err(|e| match e {
                ModelError::NeedBothClasses { .. } => ApiError::conflict("need_both_classes", e.to_string()),
                other => ApiError::internal(other.to_string()),
            })?;
        store::save_snapshot(&self.config.data_dir, &next)?;
        let next = Arc::new(next);
        *self.model.write().unwrap() = next.clone();
        tracing::info!(version = next.version, reviews = reviews.len(), "model retrained");
        Ok(next)
    }
}
