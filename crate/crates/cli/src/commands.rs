//! Subcommand implementations.

use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use repetition_core::dataset::synthetic::{synthesize_corpus, write_corpus, SyntheticConfig};
use repetition_core::dataset::{write_jsonl, read_jsonl, Dataset, DatasetConfig, EncodedSong};
use repetition_core::eval::{evaluate_variant, test_motifs, EvalOptions, EvalReport};
use repetition_core::generator::{classify_tokens, generate_piece, render_midi, GenerationOptions, GenerationRequest};
use repetition_core::model::checkpoint;
use repetition_core::model::{classification_accuracy, train, ModelConfig, ModelState, Variant};
use repetition_core::rules::{Classifier, RepetitionType};
use repetition_core::symbolic::MotifRecord;

use crate::files::{self, ingest_dir, load_config, load_motif};
use crate::labels::{parse_label_list, LabelList};
use crate::service::{self, ServiceConfig};
use crate::{CliError, CliResult};

#[derive(Debug, Parser)]
#[command(name = "repetition", version, about = "Motif repetition analysis, training and generation")]
pub struct Cli {
    /// Log level filter (error, warn, info, debug, trace).
    #[arg(long, global = true, default_value = "info", env = "REPETITION_LOG")]
    pub log_level: String,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Tokenize every MIDI file under a directory into motif records.
    Ingest(IngestArgs),
    /// Pair, label and split motif records into a dataset directory.
    BuildDataset(BuildDatasetArgs),
    /// Train a model on a dataset directory.
    Train(TrainArgs),
    /// Generate a piece from a motif and a list of repetition labels.
    Generate(GenerateArgs),
    /// Print the repetition type relating two motifs.
    Classify(ClassifyArgs),
    /// Matching rates of generated repetitions on a dataset's test split.
    Evaluate(EvaluateArgs),
    /// Run the HTTP/JSON service.
    Serve(ServeArgs),
    /// Write a synthetic MIDI corpus with one planted repetition per song.
    SynthCorpus(SynthArgs),
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    pub midi_dir: PathBuf,
    #[arg(short, long)]
    pub output: PathBuf,
    /// Skip unreadable files instead of failing.
    #[arg(long)]
    pub skip_invalid: bool,
}

#[derive(Debug, Args)]
pub struct BuildDatasetArgs {
    pub motifs: PathBuf,
    /// Dataset config (TOML or JSON): window, holdout_songs, seed, similarity_threshold.
    #[arg(short, long)]
    pub config: Option<PathBuf>,
    #[arg(short, long)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    pub dataset: PathBuf,
    /// Model config (TOML or JSON); omitted keys keep their defaults.
    #[arg(short, long)]
    pub config: Option<PathBuf>,
    #[arg(short, long)]
    pub output: PathBuf,
    #[arg(long)]
    pub variant: Option<Variant>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub max_steps: Option<usize>,
    /// Per-step loss log as CSV.
    #[arg(long)]
    pub log: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    /// Checkpoint; without one, StR/TrR copy the remaining attributes from the input.
    #[arg(short, long)]
    pub model: Option<PathBuf>,
    /// Motif as JSON tokens or a MIDI file (first non-empty bar).
    #[arg(short, long)]
    pub input: PathBuf,
    /// Comma-separated labels; `TrR:-2` fixes the transposition.
    #[arg(short, long, value_parser = parse_label_list)]
    pub labels: LabelList,
    #[arg(short, long)]
    pub output: PathBuf,
    /// Also write the piece as JSON.
    #[arg(long)]
    pub json: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Derive every step from the input motif instead of the previous output.
    #[arg(long)]
    pub no_chaining: bool,
}

#[derive(Debug, Args)]
pub struct ClassifyArgs {
    #[arg(short = 'a', long)]
    pub motif_a: PathBuf,
    #[arg(short = 'b', long)]
    pub motif_b: PathBuf,
    /// Print the transposition or symmetry detail after the label.
    #[arg(long)]
    pub detail: bool,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(short, long)]
    pub model: PathBuf,
    #[arg(short, long)]
    pub dataset: PathBuf,
    /// Defaults to the variant the model was trained as.
    #[arg(long)]
    pub variant: Option<Variant>,
    #[arg(short, long)]
    pub output: Option<PathBuf>,
    /// Fixed TrR transposition instead of the model's suggestion.
    #[arg(long, allow_hyphen_values = true)]
    pub transposition: Option<i32>,
    #[arg(long)]
    pub max_motifs: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(short, long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(short, long)]
    pub output: PathBuf,
    #[arg(long, default_value_t = 120)]
    pub songs_per_type: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

pub fn run(command: Command) -> CliResult<()> {
    match command {
        Command::Ingest(a) => ingest(a),
        Command::BuildDataset(a) => build_dataset(a),
        Command::Train(a) => train_cmd(a),
        Command::Generate(a) => generate(a),
        Command::Classify(a) => classify(a),
        Command::Evaluate(a) => evaluate(a),
        Command::Serve(a) => serve(a),
        Command::SynthCorpus(a) => synth(a),
    }
}

fn out(line: impl std::fmt::Display) {
    let mut stdout = std::io::stdout().lock();
    let _ = writeln!(stdout, "{line}");
}

fn ingest(a: IngestArgs) -> CliResult<()> {
    if !a.midi_dir.is_dir() {
        return Err(CliError::io(&a.midi_dir, std::io::Error::new(std::io::ErrorKind::NotFound, "not a directory")));
    }
    let (records, report) = ingest_dir(&a.midi_dir, a.skip_invalid)?;
    write_jsonl(&a.output, &records).map_err(|e| with_path(&a.output, e))?;
    log::info!(
        "{} files, {} skipped, {} motifs -> {}",
        report.files,
        report.skipped.len(),
        report.motifs,
        a.output.display()
    );
    Ok(())
}

fn with_path(path: &Path, e: repetition_core::Error) -> CliError {
    match e {
        repetition_core::Error::Io(io) => CliError::io(path, io),
        other => other.into(),
    }
}

fn build_dataset(a: BuildDatasetArgs) -> CliResult<()> {
    let config: DatasetConfig = match &a.config {
        Some(p) => load_config(p)?,
        None => DatasetConfig::default(),
    };
    config.validate()?;
    if !a.motifs.is_file() {
        return Err(CliError::io(&a.motifs, std::io::Error::new(std::io::ErrorKind::NotFound, "no such file")));
    }
    let records: Vec<MotifRecord> = read_jsonl(&a.motifs).map_err(|e| with_path(&a.motifs, e))?;
    let songs = EncodedSong::from_records(records)?;
    let dataset = Dataset::build(&songs, &config)?;
    dataset.write(&a.output).map_err(|e| with_path(&a.output, e))?;
    let info = &dataset.info;
    log::info!(
        "{} songs, {} pairs, kept {} (train {}, test {}), ambiguous rate {:.4}",
        info.report.songs,
        info.report.pairs_considered,
        info.report.kept,
        info.train.total,
        info.test.total,
        info.ambiguous_rate
    );
    for s in &info.train.labels {
        out(format!("{:<4} {:>6} {:>7.2}% avg {:.1} rows", s.label, s.count, s.percentage, s.avg_length));
    }
    Ok(())
}

fn read_dataset(dir: &Path) -> CliResult<Dataset> {
    if !dir.is_dir() {
        return Err(CliError::io(dir, std::io::Error::new(std::io::ErrorKind::NotFound, "not a dataset directory")));
    }
    Dataset::read(dir).map_err(|e| with_path(dir, e))
}

fn train_cmd(a: TrainArgs) -> CliResult<()> {
    let mut config: ModelConfig = match &a.config {
        Some(p) => load_config(p)?,
        None => ModelConfig::default(),
    };
    if let Some(v) = a.variant {
        config.variant = v;
    }
    if let Some(s) = a.seed {
        config.seed = s;
    }
    if let Some(n) = a.max_steps {
        config.max_steps = n;
    }
    config.validate()?;
    let dataset = read_dataset(&a.dataset)?;
    let examples: Vec<_> = dataset.train.iter().map(|s| s.to_training_example()).collect();
    log::info!("training {} on {} samples for at most {} steps", config.variant, examples.len(), config.max_steps);
    let outcome = train(&examples, &config)?;
    checkpoint::save(&outcome.state, &a.output).map_err(|e| with_path(&a.output, e))?;
    if let Some(log_path) = &a.log {
        let mut csv = Vec::new();
        outcome.write_csv(&mut csv).map_err(|e| CliError::io(log_path, e))?;
        files::write(log_path, &csv)?;
    }
    let test: Vec<_> = dataset.test.iter().map(|s| s.to_training_example()).collect();
    let windows = outcome.window_means(config.stop_window);
    log::info!(
        "{} steps, converged: {}, last window mean loss {:.3}",
        outcome.log.len(),
        outcome.converged,
        windows.last().copied().unwrap_or(f64::NAN)
    );
    if !test.is_empty() {
        out(format!("held-out accuracy {:.4}", classification_accuracy(&outcome.state, &test)?));
    }
    Ok(())
}

fn load_model(path: &Path) -> CliResult<ModelState> {
    if !path.is_file() {
        return Err(CliError::io(path, std::io::Error::new(std::io::ErrorKind::NotFound, "no such checkpoint")));
    }
    checkpoint::load(path).map_err(|e| with_path(path, e))
}

fn generate(a: GenerateArgs) -> CliResult<()> {
    let model = a.model.as_deref().map(load_model).transpose()?;
    let motif = load_motif(&a.input)?;
    let steps = a.labels.0;
    let mut req = GenerationRequest::new(motif, steps.iter().map(|s| s.label).collect());
    if steps.iter().any(|s| s.t.is_some()) {
        req.t = steps.iter().map(|s| s.t).collect();
    }
    req.seed = a.seed;
    req.chaining = !a.no_chaining;
    let options = GenerationOptions {
        rules: model.as_ref().is_none_or(|m| m.config.variant.uses_rules()),
        copy_without_model: true,
    };
    let piece = generate_piece(&req, model.as_ref(), options)?;
    files::write(&a.output, &render_midi(&piece)?)?;
    if let Some(p) = &a.json {
        let json = serde_json::to_vec_pretty(&piece).map_err(repetition_core::Error::from)?;
        files::write(p, &json)?;
    }
    for (i, m) in piece.motifs.iter().enumerate().skip(1) {
        let v = m.verdict.as_ref();
        let got = v.map_or("-", |v| v.label.as_str());
        let detail = v.and_then(|v| v.detail.as_deref()).map(|d| format!(" ({d})")).unwrap_or_default();
        let requested = m.requested.map(|r| r.as_str()).unwrap_or("-");
        let t = m.t.map(|t| format!(" t={t}")).unwrap_or_default();
        out(format!("bar {i}: requested {requested}{t}, classified {got}{detail}"));
        if m.clamped > 0 {
            log::warn!("bar {i}: {} pitches clamped to the MIDI range", m.clamped);
        }
    }
    Ok(())
}

fn classify(a: ClassifyArgs) -> CliResult<()> {
    let x = load_motif(&a.motif_a)?;
    let y = load_motif(&a.motif_b)?;
    let label = classify_tokens(&x, &y, &Classifier::default())?;
    match label.detail() {
        Some(d) if a.detail => out(format!("{label} {d}")),
        _ => out(label),
    }
    Ok(())
}

fn evaluate(a: EvaluateArgs) -> CliResult<()> {
    let model = load_model(&a.model)?;
    let variant = a.variant.unwrap_or(model.config.variant);
    if variant.uses_repetition_matrix() != model.config.variant.uses_repetition_matrix() {
        log::warn!("evaluating as {variant} a model trained as {}", model.config.variant);
    }
    let dataset = read_dataset(&a.dataset)?;
    let motifs = test_motifs(&dataset.test);
    let options = EvalOptions {
        transposition: a.transposition,
        seed: a.seed,
        max_motifs: a.max_motifs,
        labels: RepetitionType::ALL.to_vec(),
    };
    let report = evaluate_variant(variant, Some(&model), &motifs, &options)?;
    print!("{}", EvalReport::table(&[&report]));
    if let Some(p) = &a.output {
        let json = serde_json::to_vec_pretty(&report).map_err(repetition_core::Error::from)?;
        files::write(p, &json)?;
    }
    Ok(())
}

fn serve(a: ServeArgs) -> CliResult<()> {
    let mut config: ServiceConfig = match &a.config {
        Some(p) => load_config(p)?,
        None => ServiceConfig::default(),
    };
    config.apply_env(|k| std::env::var(k).ok());
    let state = service::AppState::load(&config)?;
    let runtime = tokio::runtime::Runtime::new().map_err(|e| CliError::io(Path::new("tokio runtime"), e))?;
    runtime.block_on(service::serve(config, state))
}

fn synth(a: SynthArgs) -> CliResult<()> {
    let config = SyntheticConfig {
        songs_per_type: a.songs_per_type,
        seed: a.seed,
        ..Default::default()
    };
    let songs = synthesize_corpus(&config, &Classifier::default())?;
    write_corpus(&songs, &a.output).map_err(|e| with_path(&a.output, e))?;
    log::info!("{} songs -> {}", songs.len(), a.output.display());
    Ok(())
}
