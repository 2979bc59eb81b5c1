//! Pipeline stages behind the `sspt` command: ingest, index, generate,
//! train, evaluate and the related-versus-unrelated passage experiment.

mod config;

pub use config::{CorpusSection, Overrides, OutputSection, PipelineConfig, TrainSection};

use std::fs::{self, File};
use std::io::{BufReader, BufWriter};
use std::path::Path;

use anyhow::{bail, Context, Result};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use sspt::analysis::{HeuristicAnnotator, StopList};
use sspt::corpus::{ingest_corpus, segment_passages, DocumentStore, IngestOptions, Passage};
use sspt::generator::{
    dataset_stats, generate_with, read_instances, write_instances, DatasetStats, GenerationReport, SpanSelectionInstance,
};
use sspt::index::{passages_digest, InvertedIndex};
use sspt::model::{
    build_vocab, encode_all, evaluate, load_checkpoint, save_checkpoint, train, unrelated_passage_experiment,
    Checkpoint, EncodeStats, EvalMetrics, LossTrace, SwapReport,
};

/// Version of every JSON report layout.
pub const SCHEMA_VERSION: u32 = 1;

/// A report tagged with its command and schema version.
#[derive(Debug, Clone, Serialize)]
pub struct Envelope<'a, T> {
    pub schema_version: u32,
    pub command: &'a str,
    pub seed: Option<u64>,
    #[serde(flatten)]
    pub body: T,
}

pub fn to_json<T: Serialize>(command: &str, seed: Option<u64>, body: T) -> Result<String> {
    let env = Envelope { schema_version: SCHEMA_VERSION, command, seed, body };
    Ok(serde_json::to_string_pretty(&env)? + "\n")
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// SHA-256 of a file's contents, hex encoded.
pub fn file_digest(path: &Path) -> Result<String> {
    let bytes = fs::read(path).with_context(|| format!("cannot read {}", path.display()))?;
    Ok(hex(&Sha256::digest(bytes)))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("cannot create directory {}", dir.display()))?;
    }
    Ok(BufWriter::new(File::create(path).with_context(|| format!("cannot create {}", path.display()))?))
}

fn open(path: &Path, what: &str) -> Result<BufReader<File>> {
    let file = File::open(path).with_context(|| format!("missing {what} {}; run the producing command first", path.display()))?;
    Ok(BufReader::new(file))
}

pub struct Corpus {
    pub store: DocumentStore,
    pub passages: Vec<Passage>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IngestReport {
    pub documents: usize,
    pub passages: usize,
    pub characters: usize,
}

pub fn load_corpus(cfg: &PipelineConfig) -> Result<Corpus> {
    let path = cfg.corpus_path()?;
    let store = ingest_corpus(path, &IngestOptions { format: cfg.corpus.format })
        .with_context(|| format!("cannot ingest corpus {}", path.display()))?;
    let (lo, hi) = cfg.generator.passage_len_bounds;
    let passages = segment_passages(&store, lo, hi);
    log::info!("ingested {} documents into {} passages", store.len(), passages.len());
    Ok(Corpus { store, passages })
}

impl Corpus {
    pub fn report(&self) -> IngestReport {
        IngestReport {
            documents: self.store.len(),
            passages: self.passages.len(),
            characters: self.store.iter().map(|d| d.text.chars().count()).sum(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexReport {
    pub passages: usize,
    pub vocabulary: usize,
    pub avg_length: f64,
    pub source_digest: String,
}

pub fn index_report(index: &InvertedIndex) -> IndexReport {
    IndexReport {
        passages: index.passage_count(),
        vocabulary: index.vocabulary_size(),
        avg_length: index.avg_length(),
        source_digest: hex(index.source_digest()),
    }
}

pub fn write_index(index: &InvertedIndex, path: &Path) -> Result<()> {
    index.write_to(create(path)?).with_context(|| format!("cannot write index {}", path.display()))
}

/// Reads the index file when present and built from `passages`; builds it
/// in memory otherwise.
pub fn load_or_build_index(cfg: &PipelineConfig, passages: &[Passage]) -> Result<InvertedIndex> {
    let path = cfg.index_path();
    if path.exists() {
        let index = InvertedIndex::read_from(open(&path, "index")?)
            .with_context(|| format!("cannot read index {}", path.display()))?;
        if index.source_digest() == &passages_digest(passages) {
            return Ok(index);
        }
        log::warn!("index {} does not match the corpus; rebuilding in memory", path.display());
    }
    Ok(InvertedIndex::build(passages)?)
}

pub fn annotator(cfg: &PipelineConfig) -> Result<HeuristicAnnotator> {
    let stop_list = match &cfg.corpus.stop_list {
        Some(p) => StopList::load(p).with_context(|| format!("cannot read stop list {}", p.display()))?,
        None => StopList::builtin(),
    };
    Ok(cfg.generator.annotator(stop_list))
}

pub fn generate(
    cfg: &PipelineConfig,
    corpus: &Corpus,
    index: &InvertedIndex,
) -> Result<(Vec<SpanSelectionInstance>, GenerationReport)> {
    cfg.seed()?;
    let annotator = annotator(cfg)?;
    let mut out = Vec::new();
    let report = generate_with(&corpus.store, &corpus.passages, index, &cfg.generator, &cfg.bm25, &annotator, |i| {
        out.push(i);
        Ok(())
    })?;
    log::info!("generated {} instances ({} impossible)", report.emitted, report.impossible);
    Ok((out, report))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerateReport {
    pub generation: GenerationReport,
    pub dataset: DatasetStats,
}

pub fn write_dataset(instances: &[SpanSelectionInstance], path: &Path) -> Result<()> {
    write_instances(instances, create(path)?).with_context(|| format!("cannot write dataset {}", path.display()))
}

pub fn write_generation_report(report: &GenerationReport, path: &Path) -> Result<()> {
    serde_json::to_writer_pretty(create(path)?, report).with_context(|| format!("cannot write {}", path.display()))
}

pub fn read_generation_report(path: &Path) -> Result<GenerationReport> {
    serde_json::from_reader(open(path, "generation report")?).with_context(|| format!("cannot read {}", path.display()))
}

pub fn read_dataset(path: &Path) -> Result<Vec<SpanSelectionInstance>> {
    read_instances(open(path, "dataset")?).with_context(|| format!("cannot read dataset {}", path.display()))
}

/// Seeded train/held-out partition of a dataset.
pub struct Split {
    pub train: Vec<SpanSelectionInstance>,
    pub eval: Vec<SpanSelectionInstance>,
}

pub fn split_dataset(cfg: &PipelineConfig, instances: &[SpanSelectionInstance]) -> Result<Split> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed()?);
    rng.set_stream(1);
    let mut order: Vec<usize> = (0..instances.len()).collect();
    order.shuffle(&mut rng);
    let n_eval = (instances.len() as f64 * cfg.train.eval_fraction).round() as usize;
    let (eval_idx, train_idx) = order.split_at(n_eval);
    let pick = |idx: &[usize], cap: Option<usize>| -> Vec<SpanSelectionInstance> {
        let mut idx = idx[..idx.len().min(cap.unwrap_or(usize::MAX))].to_vec();
        idx.sort_unstable();
        idx.into_iter().map(|i| instances[i].clone()).collect()
    };
    Ok(Split {
        train: pick(train_idx, cfg.train.max_instances),
        eval: pick(eval_idx, cfg.train.max_eval_instances),
    })
}

pub struct TrainOutcome {
    pub checkpoint: Checkpoint,
    pub trace: LossTrace,
    pub report: TrainReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub instances: usize,
    pub truncated_answers: usize,
    pub vocabulary: usize,
    pub parameters: usize,
    pub steps: usize,
    pub epoch_losses: Vec<f64>,
    pub params_digest: String,
}

pub fn train_model(cfg: &PipelineConfig, instances: &[SpanSelectionInstance]) -> Result<TrainOutcome> {
    if instances.is_empty() {
        bail!("no training instances; generate a dataset first");
    }
    let vocab = build_vocab(instances, cfg.model.vocab_size);
    let (encoded, stats): (_, EncodeStats) = encode_all(instances, &vocab, &cfg.model)?;
    let trained = train(&encoded, vocab.len(), &cfg.model, cfg.seed()?)?;
    let report = TrainReport {
        instances: stats.encoded,
        truncated_answers: stats.truncated_answers,
        vocabulary: vocab.len(),
        parameters: trained.params.parameter_count(),
        steps: trained.trace.steps.len(),
        epoch_losses: trained.trace.epochs.clone(),
        params_digest: trained.params.digest(),
    };
    let checkpoint = Checkpoint { config: cfg.model.clone(), vocab, params: trained.params };
    Ok(TrainOutcome { checkpoint, trace: trained.trace, report })
}

pub fn write_checkpoint(checkpoint: &Checkpoint, path: &Path) -> Result<()> {
    save_checkpoint(checkpoint, create(path)?).with_context(|| format!("cannot write checkpoint {}", path.display()))
}

pub fn read_checkpoint(path: &Path) -> Result<Checkpoint> {
    load_checkpoint(open(path, "checkpoint")?).with_context(|| format!("cannot read checkpoint {}", path.display()))
}

pub fn write_loss_trace(trace: &LossTrace, path: &Path) -> Result<()> {
    trace.write_csv(create(path)?).with_context(|| format!("cannot write {}", path.display()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub metrics: EvalMetrics,
    pub impossible_gold: usize,
    pub truncated_answers: usize,
}

pub fn evaluate_model(checkpoint: &Checkpoint, instances: &[SpanSelectionInstance]) -> Result<EvalReport> {
    let (encoded, stats) = encode_all(instances, &checkpoint.vocab, &checkpoint.config)?;
    let metrics = evaluate(&checkpoint.params, &encoded, &checkpoint.config)?;
    Ok(EvalReport {
        metrics,
        impossible_gold: encoded.iter().filter(|e| !e.possible_target).count(),
        truncated_answers: stats.truncated_answers,
    })
}

pub fn swap_experiment(
    cfg: &PipelineConfig,
    checkpoint: &Checkpoint,
    instances: &[SpanSelectionInstance],
    corpus: &Corpus,
    index: &InvertedIndex,
) -> Result<SwapReport> {
    Ok(unrelated_passage_experiment(
        &checkpoint.params,
        &checkpoint.config,
        &checkpoint.vocab,
        instances,
        &corpus.passages,
        index,
        cfg.seed()?,
    )?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AllReport {
    pub ingest: IngestReport,
    pub index: IndexReport,
    pub generate: GenerateReport,
    pub train: TrainReport,
    pub eval: EvalReport,
    pub swap: SwapReport,
}

/// Every stage in order, writing dataset, index, checkpoint, loss trace and
/// report under the output directory.
pub fn run_all(cfg: &PipelineConfig) -> Result<AllReport> {
    cfg.seed()?;
    let corpus = load_corpus(cfg)?;
    let index = InvertedIndex::build(&corpus.passages)?;
    write_index(&index, &cfg.index_path())?;
    let (instances, generation) = generate(cfg, &corpus, &index)?;
    write_dataset(&instances, &cfg.dataset_path())?;
    let generate = GenerateReport { dataset: dataset_stats(&instances), generation };
    write_generation_report(&generate.generation, &cfg.generation_report_path())?;
    let split = split_dataset(cfg, &instances)?;
    let trained = train_model(cfg, &split.train)?;
    write_checkpoint(&trained.checkpoint, &cfg.checkpoint_path())?;
    write_loss_trace(&trained.trace, &cfg.loss_path())?;
    let eval = evaluate_model(&trained.checkpoint, &split.eval)?;
    let swap = swap_experiment(cfg, &trained.checkpoint, &split.eval, &corpus, &index)?;
    let report = AllReport {
        ingest: corpus.report(),
        index: index_report(&index),
        generate,
        train: trained.report,
        eval,
        swap,
    };
    let json = to_json("all", cfg.seed, &report)?;
    fs::write(cfg.report_path(), json).with_context(|| format!("cannot write {}", cfg.report_path().display()))?;
    Ok(report)
}
