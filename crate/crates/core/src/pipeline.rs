//! Subcommand implementations: each reads its upstream artifacts from the output
//! directory, writes its own, and records their digests in `<subcommand>.manifest.json`.

use std::fs;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};

use serde::{de::DeserializeOwned, Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::amr::{GraphDiagnostics, GraphDump};
use crate::config::{ConfigError, GeneratorKind, PipelineConfig};
use crate::dataset::{attach_coref, attach_penman_dir, load_dataset, DatasetError, DocumentRecord};
use crate::decoder::{decode_all, DecodeError, DecodeStage, Generator, OracleGenerator, RemoteGenerator};
use crate::eval::{gold_records, score, GoldRecord, PredictionRecord, ScoreReport};
use crate::prompts::{TemplateError, TemplateStore};
use crate::staging::{emit_stage_instances, to_jsonl, EventWindow, StageDiagnostic, StageId, StagingError};

pub const DOCUMENTS: &str = "documents.jsonl";
pub const GRAPHS: &str = "graphs.jsonl";
pub const STAGE_DIAGNOSTICS: &str = "stage_diagnostics.jsonl";
pub const TRAINER_CONFIG: &str = "trainer_config.json";
pub const PREDICTIONS: &str = "predictions.jsonl";
pub const GOLD: &str = "gold.jsonl";
pub const SCORE_JSON: &str = "score.json";
pub const SCORE_TEXT: &str = "score.txt";

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("missing {path}; run `cup {producer}` first")]
    MissingArtifact { path: PathBuf, producer: &'static str },
    #[error("{path}:{line}: {message}")]
    Artifact { path: PathBuf, line: usize, message: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{0} is required for this subcommand")]
    MissingSetting(&'static str),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Template(#[from] TemplateError),
    #[error(transparent)]
    Staging(#[from] StagingError),
    #[error(transparent)]
    Decode(#[from] DecodeError),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub file: String,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub subcommand: String,
    pub files: Vec<ManifestEntry>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

struct ArtifactWriter<'a> {
    dir: &'a Path,
    entries: Vec<ManifestEntry>,
}

impl<'a> ArtifactWriter<'a> {
    fn new(dir: &'a Path) -> Result<Self, PipelineError> {
        fs::create_dir_all(dir).map_err(|source| PipelineError::Io { path: dir.to_path_buf(), source })?;
        Ok(ArtifactWriter { dir, entries: Vec::new() })
    }

    fn write(&mut self, name: &str, bytes: &[u8]) -> Result<(), PipelineError> {
        let path = self.dir.join(name);
        fs::write(&path, bytes).map_err(|source| PipelineError::Io { path, source })?;
        self.entries.push(ManifestEntry {
            file: name.to_string(),
            bytes: bytes.len() as u64,
            sha256: sha256_hex(bytes),
        });
        Ok(())
    }

    fn write_path(&mut self, path: &Path, bytes: &[u8]) -> Result<(), PipelineError> {
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            fs::create_dir_all(parent).map_err(|source| PipelineError::Io { path: parent.to_path_buf(), source })?;
        }
        fs::write(path, bytes).map_err(|source| PipelineError::Io { path: path.to_path_buf(), source })?;
        self.entries.push(ManifestEntry {
            file: path.display().to_string(),
            bytes: bytes.len() as u64,
            sha256: sha256_hex(bytes),
        });
        Ok(())
    }

    fn finish(mut self, subcommand: &str) -> Result<Manifest, PipelineError> {
        let manifest = Manifest { subcommand: subcommand.to_string(), files: std::mem::take(&mut self.entries) };
        let mut text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        text.push('\n');
        let path = self.dir.join(format!("{}.manifest.json", subcommand));
        fs::write(&path, text).map_err(|source| PipelineError::Io { path, source })?;
        Ok(manifest)
    }
}

fn jsonl<T: Serialize>(items: impl IntoIterator<Item = T>) -> String {
    let mut s = String::new();
    for item in items {
        s.push_str(&serde_json::to_string(&item).expect("records serialize"));
        s.push('\n');
    }
    s
}

fn read_jsonl<T: DeserializeOwned>(path: &Path, producer: &'static str) -> Result<Vec<T>, PipelineError> {
    if !path.exists() {
        return Err(PipelineError::MissingArtifact { path: path.to_path_buf(), producer });
    }
    let file = fs::File::open(path).map_err(|source| PipelineError::Io { path: path.to_path_buf(), source })?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|source| PipelineError::Io { path: path.to_path_buf(), source })?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| PipelineError::Artifact {
            path: path.to_path_buf(),
            line: i + 1,
            message: e.to_string(),
        })?);
    }
    Ok(out)
}

pub fn load_documents(config: &PipelineConfig) -> Result<Vec<DocumentRecord>, PipelineError> {
    read_jsonl(&config.output_dir.join(DOCUMENTS), "ingest")
}

fn load_templates(config: &PipelineConfig) -> Result<TemplateStore, PipelineError> {
    let path = config.templates.as_ref().ok_or(PipelineError::MissingSetting("templates"))?;
    Ok(TemplateStore::load(path)?)
}

/// Reads the annotation file with its coreference chains and sentence graphs.
pub fn ingest(config: &PipelineConfig) -> Result<Manifest, PipelineError> {
    config.validate()?;
    let input = config.input.as_ref().ok_or(PipelineError::MissingSetting("input"))?;
    let mut docs = load_dataset(input, config.dataset_kind)?;
    if let Some(coref) = &config.coref {
        attach_coref(&mut docs, coref)?;
    }
    if let Some(dir) = &config.penman_dir {
        attach_penman_dir(&mut docs, dir)?;
    }
    for d in &docs {
        d.validate()?;
    }
    let events: usize = docs.iter().map(|d| d.events.len()).sum();
    let args: usize = docs.iter().flat_map(|d| &d.events).map(|e| e.gold_args.len()).sum();
    log::info!("ingested {} documents, {} events, {} arguments", docs.len(), events, args);
    let mut w = ArtifactWriter::new(&config.output_dir)?;
    w.write(DOCUMENTS, jsonl(&docs).as_bytes())?;
    w.finish("ingest")
}

#[derive(Debug, Serialize)]
struct GraphLine<'a> {
    doc_id: &'a str,
    event_index: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    graph: Option<GraphDump>,
    diagnostics: &'a GraphDiagnostics,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<&'a str>,
}

pub fn windows(config: &PipelineConfig) -> Result<Vec<EventWindow>, PipelineError> {
    Ok(EventWindow::build_all(&load_documents(config)?, config.max_sentences))
}

/// Builds the document graph of every event window.
pub fn graph(config: &PipelineConfig) -> Result<Manifest, PipelineError> {
    config.validate()?;
    let windows = windows(config)?;
    let lines = windows.iter().map(|w| GraphLine {
        doc_id: &w.doc.doc_id,
        event_index: w.event_index,
        graph: w.graph.as_ref().map(|g| g.to_dump(&w.doc.doc_id)),
        diagnostics: &w.graph_diagnostics,
        error: w.graph_error.as_deref(),
    });
    let text = jsonl(lines);
    let failures = windows.iter().filter(|w| w.graph_error.is_some()).count();
    if failures > 0 {
        log::warn!("{} of {} windows have no document graph", failures, windows.len());
    }
    let mut w = ArtifactWriter::new(&config.output_dir)?;
    w.write(GRAPHS, text.as_bytes())?;
    w.finish("graph")
}

#[derive(Debug, Serialize)]
struct TrainerStage {
    stage: StageId,
    file: String,
    learning_rate: f64,
    batch_size: usize,
}

#[derive(Debug, Serialize)]
struct TrainerHandoff<'a> {
    alpha: f64,
    seed: u64,
    model: &'a str,
    gradient_accumulation: usize,
    max_sequence_length: usize,
    stages: Vec<TrainerStage>,
}

/// Writes one staged-instance file per curriculum stage and the trainer settings.
pub fn stage(config: &PipelineConfig) -> Result<Manifest, PipelineError> {
    config.validate()?;
    let templates = load_templates(config)?;
    let windows = windows(config)?;
    let mut w = ArtifactWriter::new(&config.output_dir)?;
    let mut diagnostics: Vec<(StageId, StageDiagnostic)> = Vec::new();
    let mut trainer_stages = Vec::new();
    for (k, stage) in StageId::ALL.into_iter().enumerate() {
        let out = emit_stage_instances(&windows, stage, &templates, config.alpha)?;
        log::info!("{}: {} instances, {} diagnostics", stage.name(), out.instances.len(), out.diagnostics.len());
        w.write(&stage.file_name(), to_jsonl(&out.instances).as_bytes())?;
        diagnostics.extend(out.diagnostics.into_iter().map(|d| (stage, d)));
        trainer_stages.push(TrainerStage {
            stage,
            file: stage.file_name(),
            learning_rate: config.trainer.learning_rates[k],
            batch_size: config.trainer.batch_sizes[k],
        });
    }
    #[derive(Serialize)]
    struct DiagLine<'a> {
        stage: StageId,
        #[serde(flatten)]
        diagnostic: &'a StageDiagnostic,
    }
    w.write(
        STAGE_DIAGNOSTICS,
        jsonl(diagnostics.iter().map(|(stage, d)| DiagLine { stage: *stage, diagnostic: d })).as_bytes(),
    )?;
    let handoff = TrainerHandoff {
        alpha: config.alpha,
        seed: config.seed,
        model: &config.trainer.model,
        gradient_accumulation: config.trainer.gradient_accumulation,
        max_sequence_length: config.trainer.max_sequence_length,
        stages: trainer_stages,
    };
    let mut text = serde_json::to_string_pretty(&handoff).expect("trainer settings serialize");
    text.push('\n');
    w.write(TRAINER_CONFIG, text.as_bytes())?;
    w.finish("stage")
}

/// Flattens per-event predictions into one record per (doc, event, role).
pub fn prediction_records(
    windows: &[EventWindow],
    predictions: &[crate::decoder::Prediction],
) -> Vec<PredictionRecord> {
    let mut out = Vec::new();
    for (w, p) in windows.iter().zip(predictions) {
        for (role, values) in p {
            out.push(PredictionRecord {
                doc_id: w.doc.doc_id.clone(),
                event_index: w.event_index,
                role: role.clone(),
                predictions: values.clone(),
            });
        }
    }
    out.sort_by(|a, b| (&a.doc_id, a.event_index, &a.role).cmp(&(&b.doc_id, b.event_index, &b.role)));
    out
}

#[derive(Debug, Clone, Default)]
pub struct DecodeOptions {
    /// Where to write predictions instead of `<output_dir>/predictions.jsonl`.
    pub predictions_out: Option<PathBuf>,
}

pub fn make_generator(
    config: &PipelineConfig,
    windows: &[EventWindow],
    templates: &TemplateStore,
) -> Result<Box<dyn Generator>, PipelineError> {
    Ok(match config.generator {
        GeneratorKind::Oracle => Box::new(OracleGenerator::new(windows, templates)),
        GeneratorKind::Remote => {
            let endpoint = config.endpoint.as_deref().ok_or(PipelineError::MissingSetting("endpoint"))?;
            Box::new(RemoteGenerator::new(endpoint))
        }
    })
}

/// Decodes every event with the configured generator and stages.
pub fn decode(config: &PipelineConfig, options: &DecodeOptions) -> Result<Manifest, PipelineError> {
    config.validate()?;
    let templates = load_templates(config)?;
    let windows = windows(config)?;
    let generator = make_generator(config, &windows, &templates)?;
    let stages: Vec<DecodeStage> = config.stages.clone();
    let predictions = decode_all(&windows, &templates, generator.as_ref(), &stages)?;
    let records = prediction_records(&windows, &predictions);
    let gold = gold_records(&windows);
    let mut w = ArtifactWriter::new(&config.output_dir)?;
    match &options.predictions_out {
        Some(path) => w.write_path(path, jsonl(&records).as_bytes())?,
        None => w.write(PREDICTIONS, jsonl(&records).as_bytes())?,
    }
    w.write(GOLD, jsonl(&gold).as_bytes())?;
    w.finish("decode")
}

#[derive(Debug, Clone, Default)]
pub struct EvalOptions {
    pub predictions: Option<PathBuf>,
    pub gold: Option<PathBuf>,
    /// Also count gold arguments removed by truncation.
    pub include_dropped: bool,
}

pub fn evaluate(config: &PipelineConfig, options: &EvalOptions) -> Result<(ScoreReport, Manifest), PipelineError> {
    let pred_path = options.predictions.clone().unwrap_or_else(|| config.output_dir.join(PREDICTIONS));
    let gold_path = options.gold.clone().unwrap_or_else(|| config.output_dir.join(GOLD));
    let predictions: Vec<PredictionRecord> = read_jsonl(&pred_path, "decode")?;
    let gold: Vec<GoldRecord> = read_jsonl(&gold_path, "decode")?;
    let report = score(&predictions, &gold, options.include_dropped);
    let mut w = ArtifactWriter::new(&config.output_dir)?;
    let mut json = serde_json::to_string_pretty(&report).expect("report serializes");
    json.push('\n');
    w.write(SCORE_JSON, json.as_bytes())?;
    w.write(SCORE_TEXT, report.to_text().as_bytes())?;
    Ok((report, w.finish("eval")?))
}
