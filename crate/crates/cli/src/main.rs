//! `vidmod`: batch entry points around the moderation engine.
//!
//! Scalars print as plain text, structures as JSON; `--json` forces JSON for
//! every command. Failures print `{"code", "message"}` on stderr and exit
//! with 1 (validation) or 2 (I/O).

use std::collections::HashMap;
use std::io::Write;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::json;
use thiserror::Error;
use vidmod_core::audiosum::build_audio_layout;
use vidmod_core::classifier::{retrain, ModelError};
use vidmod_core::corpus::{load_corpus, parse_corpus, write_corpus};
use vidmod_core::framesum::build_frame_layout;
use vidmod_core::risk::{filter_high_risk, moderation_metrics, video_risk, RiskError};
use vidmod_core::synth::synthesize_corpus;
use vidmod_core::taxonomy::TaxonomyError;
use vidmod_core::timeline::build_timeline;
use vidmod_core::{CorpusError, FilterModel, Label, ReviewLabel, RiskTaxonomy, SynthConfig, VideoRecord};
use vidmod_service::{AppState, ServiceConfig, ServiceError};

#[derive(Parser)]
#[command(name = "vidmod", version, about = "Risk-aware video moderation engine")]
struct Cli {
    /// Print JSON for every command, including scalar results.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a seeded synthetic annotation corpus.
    Synth {
        #[arg(long)]
        videos: usize,
        /// Fraction of deviant videos; floor(videos * deviant) are deviant.
        #[arg(long)]
        deviant: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        taxonomy: Option<PathBuf>,
    },
    /// Risk value of one video, or of every video as JSON.
    Risk {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        video: Option<String>,
        #[arg(long)]
        taxonomy: Option<PathBuf>,
    },
    /// Ids of videos whose risk value exceeds the threshold.
    Filter {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        threshold: f64,
        #[arg(long)]
        taxonomy: Option<PathBuf>,
    },
    /// Write timeline.json, frames.json and audio.json for one video.
    Layout {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        video: String,
        #[arg(long)]
        out: PathBuf,
        /// Service config whose timeline/framesum/audiosum settings to use.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        taxonomy: Option<PathBuf>,
    },
    /// Train the learned filter on a review log.
    Train {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        reviews: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Model to continue the version sequence from.
        #[arg(long)]
        from: Option<PathBuf>,
        #[arg(long, default_value_t = 500)]
        epochs: usize,
        #[arg(long, default_value_t = 0.5)]
        lr: f64,
        #[arg(long, default_value_t = 16)]
        hidden: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        taxonomy: Option<PathBuf>,
    },
    /// Time efficiency and missing rate of a review log.
    Eval {
        #[arg(long)]
        reviews: PathBuf,
        /// JSON map of video id to label, or an annotation corpus with ground truth.
        #[arg(long)]
        truth: PathBuf,
        #[arg(long)]
        hours: f64,
    },
    /// Run the review service.
    Serve {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: std::net::IpAddr,
    },
}

#[derive(Debug, Error)]
enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Io(String),
}

impl CliError {
    fn code(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::Validation(_) => "validation",
            CliError::Io(_) => "io",
        }
    }

    fn exit(&self) -> ExitCode {
        match self {
            CliError::Io(_) => ExitCode::from(2),
            _ => ExitCode::from(1),
        }
    }
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

impl From<CorpusError> for CliError {
    fn from(e: CorpusError) -> Self {
        match e {
            CorpusError::Io(_) => CliError::Io(e.to_string()),
            other => CliError::Validation(other.to_string()),
        }
    }
}

impl From<TaxonomyError> for CliError {
    fn from(e: TaxonomyError) -> Self {
        match e {
            TaxonomyError::Io(_) => CliError::Io(e.to_string()),
            other => CliError::Validation(other.to_string()),
        }
    }
}

impl From<RiskError> for CliError {
    fn from(e: RiskError) -> Self {
        CliError::Validation(e.to_string())
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        match e {
            ModelError::Io(_) => CliError::Io(e.to_string()),
            other => CliError::Validation(other.to_string()),
        }
    }
}

impl From<ServiceError> for CliError {
    fn from(e: ServiceError) -> Self {
        match e {
            ServiceError::Io(_) => CliError::Io(e.to_string()),
            ServiceError::Corpus(c) => c.into(),
            ServiceError::Taxonomy(t) => t.into(),
            other => CliError::Validation(other.to_string()),
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => return report(&CliError::Usage(e.to_string().trim().to_string())),
    };
    let mut out = std::io::stdout().lock();
    match run(cli, &mut out).and_then(|()| out.flush().map_err(|e| CliError::Io(e.to_string()))) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => report(&e),
    }
}

fn report(e: &CliError) -> ExitCode {
    eprintln!("{}", json!({ "code": e.code(), "message": e.to_string() }));
    e.exit()
}

fn taxonomy(path: &Option<PathBuf>) -> Result<RiskTaxonomy, CliError> {
    Ok(match path {
        Some(p) => RiskTaxonomy::load(p)?,
        None => RiskTaxonomy::builtin(),
    })
}

fn find<'a>(corpus: &'a [VideoRecord], id: &str) -> Result<&'a VideoRecord, CliError> {
    corpus
        .iter()
        .find(|v| v.video_id == id)
        .ok_or_else(|| CliError::Validation(format!("video `{id}` is not in the corpus")))
}

fn corpus_at(path: &Path) -> Result<Vec<VideoRecord>, CliError> {
    load_corpus(path).map_err(|e| match e {
        CorpusError::Io(_) => io_err(path, e),
        other => CliError::from(other),
    })
}

fn to_json(value: &impl serde::Serialize) -> String {
    serde_json::to_string(value).expect("serializable")
}

fn write_out(out: &mut impl Write, text: &str) -> Result<(), CliError> {
    writeln!(out, "{text}").map_err(|e| CliError::Io(e.to_string()))
}

fn load_reviews(path: &Path) -> Result<Vec<ReviewLabel>, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, line)| {
            serde_json::from_str(line)
                .map_err(|e| CliError::Validation(format!("{} line {}: {e}", path.display(), i + 1)))
        })
        .collect()
}

fn load_truth(path: &Path) -> Result<HashMap<String, Label>, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    if let Ok(map) = serde_json::from_str::<HashMap<String, Label>>(&text) {
        return Ok(map);
    }
    let corpus = parse_corpus(text.as_bytes())?;
    Ok(corpus
        .into_iter()
        .filter_map(|v| v.ground_truth.map(|l| (v.video_id, l)))
        .collect())
}

fn run(cli: Cli, out: &mut impl Write) -> Result<(), CliError> {
    match cli.command {
        Command::Synth { videos, deviant, seed, out: path, taxonomy: tax } => {
            let tax = taxonomy(&tax)?;
            let config = SynthConfig::new(videos, deviant, seed);
            let corpus = synthesize_corpus(&config, &tax)?;
            write_corpus(&path, &corpus).map_err(|e| io_err(&path, e))?;
            if cli.json {
                let deviants = corpus.iter().filter(|v| v.ground_truth.is_some_and(|l| l.is_deviant())).count();
                write_out(out, &to_json(&json!({ "videos": corpus.len(), "deviant": deviants, "out": path })))?;
            }
        }
        Command::Risk { corpus, video, taxonomy: tax } => {
            let tax = taxonomy(&tax)?;
            let corpus = corpus_at(&corpus)?;
            match video {
                Some(id) => {
                    let risk = video_risk(find(&corpus, &id)?, &tax)?;
                    if cli.json {
                        write_out(out, &to_json(&risk))?;
                    } else {
                        write_out(out, &format!("{:.6}", risk.risk_value))?;
                    }
                }
                None => {
                    let risks = corpus.iter().map(|v| video_risk(v, &tax)).collect::<Result<Vec<_>, _>>()?;
                    write_out(out, &to_json(&risks))?;
                }
            }
        }
        Command::Filter { corpus, threshold, taxonomy: tax } => {
            let tax = taxonomy(&tax)?;
            let corpus = corpus_at(&corpus)?;
            let risks = corpus.iter().map(|v| video_risk(v, &tax)).collect::<Result<Vec<_>, _>>()?;
            let (high, low) = filter_high_risk(risks, threshold)?;
            if cli.json {
                let ids = |rs: &[vidmod_core::VideoRisk]| rs.iter().map(|r| r.video_id.clone()).collect::<Vec<_>>();
                write_out(out, &to_json(&json!({ "high": ids(&high), "low": ids(&low) })))?;
            } else {
                for r in &high {
                    write_out(out, &r.video_id)?;
                }
            }
        }
        Command::Layout { corpus, video, out: dir, config, taxonomy: tax } => {
            let tax = taxonomy(&tax)?;
            let settings = match config {
                Some(p) => ServiceConfig::load(p)?,
                None => ServiceConfig::default(),
            };
            let corpus = corpus_at(&corpus)?;
            let v = find(&corpus, &video)?;
            let timeline = build_timeline(v, &tax, &settings.timeline)?;
            let frames = build_frame_layout(v, &tax, &settings.framesum)
                .map_err(|e| CliError::Validation(e.to_string()))?
                .to_view(&tax);
            let audio = build_audio_layout(v, &tax, &settings.audiosum)?;
            std::fs::create_dir_all(&dir).map_err(|e| io_err(&dir, e))?;
            let files = [
                ("timeline", dir.join("timeline.json"), to_json(&timeline)),
                ("frames", dir.join("frames.json"), to_json(&frames)),
                ("audio", dir.join("audio.json"), to_json(&audio)),
            ];
            for (_, path, body) in &files {
                std::fs::write(path, body).map_err(|e| io_err(path, e))?;
            }
            if cli.json {
                let map: serde_json::Map<String, serde_json::Value> =
                    files.iter().map(|(k, p, _)| (k.to_string(), json!(p))).collect();
                write_out(out, &to_json(&map))?;
            } else {
                for (_, path, _) in &files {
                    write_out(out, &path.display().to_string())?;
                }
            }
        }
        Command::Train { corpus, reviews, out: path, from, epochs, lr, hidden, seed, taxonomy: tax } => {
            let tax = taxonomy(&tax)?;
            let corpus = corpus_at(&corpus)?;
            let reviews = load_reviews(&reviews)?;
            for r in &reviews {
                r.validate().map_err(|e| CliError::Validation(format!("review of `{}`: {e}", r.video_id)))?;
            }
            let current = match from {
                Some(p) => FilterModel::load(p)?,
                None => FilterModel::linear(),
            };
            let config = vidmod_core::TrainConfig { epochs, learning_rate: lr, seed, hidden_width: hidden, ..Default::default() };
            let model = retrain(&current, &reviews, &corpus, &tax, &config)?;
            model.save(&path).map_err(|e| io_err(&path, e))?;
            if cli.json {
                let meta = json!({ "version": model.version, "stage": model.stage, "training_meta": model.training_meta });
                write_out(out, &to_json(&meta))?;
            } else {
                write_out(out, &model.version.to_string())?;
            }
        }
        Command::Eval { reviews, truth, hours } => {
            let reviews = load_reviews(&reviews)?;
            let truth = load_truth(&truth)?;
            let metrics = moderation_metrics(&reviews, &truth, hours)?;
            write_out(out, &to_json(&metrics))?;
        }
        Command::Serve { config, port, host } => {
            let mut settings = match config {
                Some(p) => ServiceConfig::load(p)?,
                None => ServiceConfig::default(),
            };
            settings.apply_env(std::env::vars())?;
            serve(settings, SocketAddr::new(host, port), out)?;
        }
    }
    Ok(())
}

fn serve(config: ServiceConfig, addr: SocketAddr, out: &mut impl Write) -> Result<(), CliError> {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()),
        )
        .with_writer(std::io::stderr)
        .init();
    let state = AppState::open(config)?;
    let runtime = tokio::runtime::Runtime::new().map_err(|e| CliError::Io(e.to_string()))?;
    runtime.block_on(async {
        let listener = tokio::net::TcpListener::bind(addr).await.map_err(|e| CliError::Io(format!("{addr}: {e}")))?;
        let bound = listener.local_addr().map_err(|e| CliError::Io(e.to_string()))?;
        write_out(out, &format!("listening on http://{bound}"))?;
        out.flush().map_err(|e| CliError::Io(e.to_string()))?;
        vidmod_service::serve_listener(state, listener).await.map_err(CliError::from)
    })
}
