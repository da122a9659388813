use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use cup::config::{GeneratorKind, PipelineConfig};
use cup::dataset::DatasetKind;
use cup::decoder::DecodeStage;
use cup::pipeline::{self, DecodeOptions, EvalOptions, Manifest, PipelineError};

/// Curriculum-staged prompt construction and pipeline decoding for event argument extraction.
#[derive(Debug, Parser)]
#[command(name = "cup", version)]
struct Cli {
    #[command(flatten)]
    settings: Settings,
    #[command(subcommand)]
    command: Command,
}

/// Every setting may come from the config file, a `CUP_*` variable or a flag, in
/// increasing order of precedence.
#[derive(Debug, Args)]
struct Settings {
    /// TOML configuration file.
    #[arg(long, global = true, env = "CUP_CONFIG")]
    config: Option<PathBuf>,
    #[arg(long, global = true, env = "CUP_DATASET_KIND")]
    dataset_kind: Option<DatasetKind>,
    /// Annotation file (line-delimited JSON).
    #[arg(long, global = true, env = "CUP_INPUT")]
    input: Option<PathBuf>,
    /// Coreference chains file.
    #[arg(long, global = true, env = "CUP_COREF")]
    coref: Option<PathBuf>,
    /// Directory of `<doc_id>.amr` sentence graph files.
    #[arg(long, global = true, env = "CUP_PENMAN_DIR")]
    penman_dir: Option<PathBuf>,
    /// Template file (line-delimited `{event_type, template, roles}`).
    #[arg(long, global = true, env = "CUP_TEMPLATES")]
    templates: Option<PathBuf>,
    #[arg(long, global = true, env = "CUP_MAX_SENTENCES")]
    max_sentences: Option<usize>,
    /// Loss weight of graph-prompt instances.
    #[arg(long, global = true, env = "CUP_ALPHA")]
    alpha: Option<f64>,
    #[arg(long, global = true, env = "CUP_OUTPUT_DIR")]
    output_dir: Option<PathBuf>,
    #[arg(long, global = true, env = "CUP_SEED")]
    seed: Option<u64>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Read annotations, coreference chains and sentence graphs into documents.jsonl.
    Ingest,
    /// Build the document graph of every event window into graphs.jsonl.
    Graph,
    /// Write the four staged-instance files and the trainer settings.
    Stage,
    /// Decode every event and write predictions.jsonl and gold.jsonl.
    Decode {
        #[arg(long, env = "CUP_GENERATOR")]
        generator: Option<GeneratorKind>,
        /// Base URL of the generation service.
        #[arg(long, env = "CUP_ENDPOINT")]
        endpoint: Option<String>,
        /// Comma-separated subset of cent,neigh,doc.
        #[arg(long, env = "CUP_STAGES", value_delimiter = ',')]
        stages: Option<Vec<DecodeStage>>,
        /// Write predictions here instead of the output directory.
        #[arg(long)]
        predictions_out: Option<PathBuf>,
    },
    /// Score predictions against gold and write score.json and score.txt.
    Eval {
        #[arg(long)]
        predictions: Option<PathBuf>,
        #[arg(long)]
        gold: Option<PathBuf>,
        /// Also count gold arguments removed by truncation.
        #[arg(long)]
        include_dropped: bool,
    },
}

fn resolve(settings: &Settings) -> Result<PipelineConfig, PipelineError> {
    let mut c = match &settings.config {
        Some(path) => PipelineConfig::load(path)?,
        None => PipelineConfig::default(),
    };
    if let Some(v) = settings.dataset_kind {
        c.dataset_kind = v;
    }
    if let Some(v) = &settings.input {
        c.input = Some(v.clone());
    }
    if let Some(v) = &settings.coref {
        c.coref = Some(v.clone());
    }
    if let Some(v) = &settings.penman_dir {
        c.penman_dir = Some(v.clone());
    }
    if let Some(v) = &settings.templates {
        c.templates = Some(v.clone());
    }
    if let Some(v) = settings.max_sentences {
        c.max_sentences = v;
    }
    if let Some(v) = settings.alpha {
        c.alpha = v;
    }
    if let Some(v) = &settings.output_dir {
        c.output_dir = v.clone();
    }
    if let Some(v) = settings.seed {
        c.seed = v;
    }
    Ok(c)
}

fn report(manifest: &Manifest) {
    for f in &manifest.files {
        println!("{}  {}", f.sha256, f.file);
    }
}

fn run(cli: Cli) -> Result<(), PipelineError> {
    let mut config = resolve(&cli.settings)?;
    match cli.command {
        Command::Ingest => report(&pipeline::ingest(&config)?),
        Command::Graph => report(&pipeline::graph(&config)?),
        Command::Stage => report(&pipeline::stage(&config)?),
        Command::Decode { generator, endpoint, stages, predictions_out } => {
            if let Some(g) = generator {
                config.generator = g;
            }
            if let Some(e) = endpoint {
                config.endpoint = Some(e);
            }
            if let Some(mut s) = stages {
                s.sort();
                s.dedup();
                config.stages = s;
            }
            report(&pipeline::decode(&config, &DecodeOptions { predictions_out })?)
        }
        Command::Eval { predictions, gold, include_dropped } => {
            let (score, _) = pipeline::evaluate(&config, &EvalOptions { predictions, gold, include_dropped })?;
            print!("{}", score.to_text());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e);
            ExitCode::FAILURE
        }
    }
}
