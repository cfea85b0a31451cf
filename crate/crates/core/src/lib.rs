//! Risk-aware video moderation engine.
//!
//! Detector annotations ([`corpus`]) are turned into per-frame and per-clip
//! risk vectors and a per-video risk value ([`risk`]). A binary filter
//! ([`classifier`]) starts from the risk-value threshold rule and is retrained
//! on moderator verdicts ([`review`]). Three layouts summarize a video for the
//! moderator: the segmented risk [`timeline`], the frame scene map
//! ([`framesum`]) and the audio word storyline ([`audiosum`]).

pub mod audiosum;
pub mod classifier;
pub mod corpus;
pub mod fixtures;
pub mod framesum;
pub mod review;
pub mod risk;
pub mod synth;
pub mod taxonomy;
pub mod timeline;

pub use audiosum::{AudioLayout, AudioSumConfig, StorylineLayout, WordHistogram};
pub use classifier::{FeatureMatrixPair, FilterModel, Stage, TrainConfig};
pub use corpus::{AudioAnnotation, CorpusError, FrameAnnotation, VideoRecord};
pub use framesum::{FrameSumConfig, SceneLayout};
pub use review::{Evidence, ReviewLabel};
pub use risk::{ModerationMetrics, RiskVector, VideoRisk};
pub use synth::SynthConfig;
pub use taxonomy::{Label, RiskCategory, RiskTaxonomy};
pub use timeline::{TimelineConfig, TimelineSegment};
