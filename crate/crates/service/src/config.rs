use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use vidmod_core::{AudioSumConfig, FrameSumConfig, RiskCategory, TimelineConfig, TrainConfig};

use crate::error::ServiceError;

/// Prefix of environment variables that override config file values.
pub const ENV_PREFIX: &str = "VIDMOD_";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ServiceConfig {
    /// Annotation corpus. Without one, queue and video endpoints answer 409.
    pub corpus_path: Option<PathBuf>,
    /// Taxonomy file; the builtin taxonomy is used when absent.
    pub taxonomy_path: Option<PathBuf>,
    /// Holds `reviews.jsonl` and `model-NNNNNN.json` snapshots.
    pub data_dir: PathBuf,
    pub threshold: f64,
    pub timeline: TimelineConfig,
    pub framesum: FrameSumConfig,
    pub audiosum: AudioSumConfig,
    pub train: TrainSettings,
    pub palette: Palette,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        ServiceConfig {
            corpus_path: None,
            taxonomy_path: None,
            data_dir: PathBuf::from("vidmod-data"),
            threshold: 0.5,
            timeline: TimelineConfig::default(),
            framesum: FrameSumConfig::default(),
            audiosum: AudioSumConfig::default(),
            train: TrainSettings::default(),
            palette: Palette::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainSettings {
    pub epochs: usize,
    pub lr: f64,
    pub hidden: usize,
    pub seed: u64,
    /// Retrain after every `auto_n` accepted reviews; 0 disables.
    pub auto_n: usize,
}

impl Default for TrainSettings {
    fn default() -> Self {
        let t = TrainConfig::default();
        TrainSettings { epochs: t.epochs, lr: t.learning_rate, hidden: t.hidden_width, seed: t.seed, auto_n: 50 }
    }
}

impl TrainSettings {
    pub fn to_train_config(self) -> TrainConfig {
        TrainConfig {
            epochs: self.epochs,
            learning_rate: self.lr,
            seed: self.seed,
            hidden_width: self.hidden,
            ..TrainConfig::default()
        }
    }
}

/// Category colors for the console, plus the neutral grey.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Palette {
    pub categories: BTreeMap<RiskCategory, String>,
    pub neutral: String,
}

impl Default for Palette {
    fn default() -> Self {
        let colors = ["#e41a1c", "#377eb8", "#4daf4a", "#984ea3"];
        Palette {
            categories: RiskCategory::ALL.iter().copied().zip(colors.iter().map(|c| c.to_string())).collect(),
            neutral: "#bdbdbd".into(),
        }
    }
}

impl ServiceConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, ServiceError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| ServiceError::Io(format!("{}: {e}", path.display())))?;
        let mut config: ServiceConfig =
            serde_json::from_str(&text).map_err(|e| ServiceError::Config(format!("{}: {e}", path.display())))?;
        // Relative paths in the file are taken relative to the file.
        if let Some(base) = path.parent() {
            for p in [&mut config.corpus_path, &mut config.taxonomy_path].into_iter().flatten() {
                if p.is_relative() {
                    *p = base.join(&*p);
                }
            }
            if config.data_dir.is_relative() {
                config.data_dir = base.join(&config.data_dir);
            }
        }
        Ok(config)
    }

    /// Applies `VIDMOD_*` overrides from the given variables.
    ///
    /// | variable | field |
    /// |---|---|
    /// | `VIDMOD_CORPUS_PATH` | `corpus_path` |
    /// | `VIDMOD_TAXONOMY_PATH` | `taxonomy_path` |
    /// | `VIDMOD_DATA_DIR` | `data_dir` |
    /// | `VIDMOD_THRESHOLD` | `threshold` |
    /// | `VIDMOD_TRAIN_EPOCHS`, `_LR`, `_HIDDEN`, `_SEED`, `_AUTO_N` | `train.*` |
    /// | `VIDMOD_FRAMESUM_SEED` | `framesum.seed` |
    pub fn apply_env<I, K, V>(&mut self, vars: I) -> Result<(), ServiceError>
    where
        I: IntoIterator<Item = (K, V)>,
        K: AsRef<str>,
        V: AsRef<str>,
    {
        for (key, value) in vars {
            let Some(name) = key.as_ref().strip_prefix(ENV_PREFIX) else { continue };
            let value = value.as_ref();
            let bad = |e: &dyn std::fmt::Display| ServiceError::Config(format!("{ENV_PREFIX}{name}={value}: {e}"));
            match name {
                "CORPUS_PATH" => self.corpus_path = Some(value.into()),
                "TAXONOMY_PATH" => self.taxonomy_path = Some(value.into()),
                "DATA_DIR" => self.data_dir = value.into(),
                "THRESHOLD" => self.threshold = value.parse().map_err(|e| bad(&e))?,
                "TRAIN_EPOCHS" => self.train.epochs = value.parse().map_err(|e| bad(&e))?,
                "TRAIN_LR" => self.train.lr = value.parse().map_err(|e| bad(&e))?,
                "TRAIN_HIDDEN" => self.train.hidden = value.parse().map_err(|e| bad(&e))?,
                "TRAIN_SEED" => self.train.seed = value.parse().map_err(|e| bad(&e))?,
                "TRAIN_AUTO_N" => self.train.auto_n = value.parse().map_err(|e| bad(&e))?,
                "FRAMESUM_SEED" => self.framesum.seed = value.parse().map_err(|e| bad(&e))?,
                _ => {}
            }
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), ServiceError> {
        if !(0.0..=1.0).contains(&self.threshold) {
            return Err(ServiceError::Config(format!("threshold {} outside [0, 1]", self.threshold)));
        }
        if !(self.timeline.window > 0.0) || !(self.audiosum.slot > 0.0) {
            return Err(ServiceError::Config("timeline window and audio slot must be positive".into()));
        }
        if !(self.framesum.eps > 0.0) || !(self.framesum.tau > 0.0) {
            return Err(ServiceError::Config("framesum eps and tau must be positive".into()));
        }
        Ok(())
    }
}
