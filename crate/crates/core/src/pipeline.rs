//! End-to-end steps behind the command-line tool: preprocess, train and
//! predict. Every step is deterministic given its options.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::checkpoint::{AnyModel, Checkpoint, ModelKind};
use crate::corpus::{
    load_reviews, masked_from_clean, seq2seq_from_clean, split_corpus, CleanRecord, CsvSchema,
    FramingConfig, MaskedStepExample, Seq2SeqExample, SplitRatios, Vocabulary,
};
use crate::error::{Error, Result};
use crate::evalmetrics::PredictionRecord;
use crate::files::{create_output, read_jsonl, write_jsonl, write_output};
use crate::maskedlm::{MaskedLmModel, TransformerConfig};
use crate::numcore::AdamConfig;
use crate::seq2seq::{Seq2SeqConfig, Seq2SeqModel};
use crate::train::{fit, write_history, FitConfig, HistoryEntry};

pub const SPLITS: [&str; 3] = ["train", "validation", "test"];
pub const DEFAULT_VOCAB_CAP: usize = 16_000;
pub const DEFAULT_SEED: u64 = 42;

pub const VOCAB_FILE: &str = "vocab.json";
pub const MANIFEST_FILE: &str = "manifest.json";

/// `{split}.jsonl`: framed examples.
pub fn examples_path(dir: &Path, split: &str) -> PathBuf {
    dir.join(format!("{split}.jsonl"))
}

/// `{split}.records.jsonl`: cleaned records, used for prediction.
pub fn records_path(dir: &Path, split: &str) -> PathBuf {
    dir.join(format!("{split}.records.jsonl"))
}

#[derive(Clone, Debug)]
pub struct PreprocessOptions {
    pub input: PathBuf,
    pub outdir: PathBuf,
    pub model: ModelKind,
    pub seed: u64,
    pub ratios: SplitRatios,
    pub vocab_cap: usize,
    pub schema: CsvSchema,
    pub framing: FramingConfig,
    pub strict: bool,
    pub force: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitCounts {
    pub records: usize,
    pub examples: usize,
    /// Masked LM only: records whose full context would not fit.
    pub dropped_too_long: usize,
}

/// Describes a preprocessed dataset directory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub model_kind: ModelKind,
    pub seed: u64,
    pub ratios: SplitRatios,
    pub vocab_cap: usize,
    pub vocab_size: usize,
    pub framing: FramingConfig,
    pub input_rows: usize,
    pub malformed_rows: usize,
    pub dropped_empty: usize,
    pub train: SplitCounts,
    pub validation: SplitCounts,
    pub test: SplitCounts,
}

impl Manifest {
    pub fn load(dir: &Path) -> Result<Self> {
        let path = dir.join(MANIFEST_FILE);
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::data(format!("{}: {e}", path.display())))
    }
}

pub fn load_vocab(dir: &Path) -> Result<Vocabulary> {
    let path = dir.join(VOCAB_FILE);
    let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::data(format!("{}: {e}", path.display())))
}

fn frame_split(
    records: &[CleanRecord],
    vocab: &Vocabulary,
    opts: &PreprocessOptions,
    dir: &Path,
    split: &str,
) -> Result<SplitCounts> {
    let mut counts = SplitCounts {
        records: records.len(),
        ..SplitCounts::default()
    };
    let path = examples_path(dir, split);
    match opts.model {
        ModelKind::BilstmSeq2seq => {
            let examples: Vec<Seq2SeqExample> = records
                .iter()
                .map(|r| seq2seq_from_clean(r, vocab, &opts.framing))
                .collect();
            counts.examples = examples.len();
            write_jsonl(&path, &examples, opts.force)?;
        }
        ModelKind::MaskedLm => {
            let mut examples: Vec<MaskedStepExample> = Vec::new();
            for r in records {
                match masked_from_clean(r, vocab, &opts.framing) {
                    Ok(ex) => examples.extend(ex),
                    Err(_) => counts.dropped_too_long += 1,
                }
            }
            counts.examples = examples.len();
            write_jsonl(&path, &examples, opts.force)?;
        }
    }
    write_jsonl(&records_path(dir, split), records, opts.force)?;
    Ok(counts)
}

/// CSV → cleaned records → seeded split → vocabulary (training split only)
/// → framed examples per split.
pub fn preprocess(opts: &PreprocessOptions) -> Result<Manifest> {
    opts.ratios.validate()?;
    let report = load_reviews(&opts.input, &opts.schema, opts.strict)?;
    let input_rows = report.records.len() + report.dropped_empty + report.malformed;
    let mut dropped_empty = report.dropped_empty;
    let mut clean = Vec::with_capacity(report.records.len());
    for r in &report.records {
        match CleanRecord::from_review(r) {
            Ok(c) => clean.push(c),
            Err(_) => dropped_empty += 1,
        }
    }
    log::info!(
        "{}: {} usable records ({} empty after cleaning, {} malformed)",
        opts.input.display(),
        clean.len(),
        dropped_empty,
        report.malformed
    );
    let split = split_corpus(&clean, opts.ratios, opts.seed)?;
    let texts: Vec<&str> = split
        .train
        .iter()
        .flat_map(|r| [r.title.as_str(), r.text.as_str()])
        .collect();
    let vocab = Vocabulary::build(&texts, opts.vocab_cap)?;

    std::fs::create_dir_all(&opts.outdir).map_err(|e| Error::io(&opts.outdir, e))?;
    let vocab_json = serde_json::to_vec_pretty(&vocab)?;
    write_output(&opts.outdir.join(VOCAB_FILE), &vocab_json, opts.force)?;
    let train = frame_split(&split.train, &vocab, opts, &opts.outdir, "train")?;
    let validation = frame_split(&split.validation, &vocab, opts, &opts.outdir, "validation")?;
    let test = frame_split(&split.test, &vocab, opts, &opts.outdir, "test")?;

    let manifest = Manifest {
        model_kind: opts.model,
        seed: opts.seed,
        ratios: opts.ratios,
        vocab_cap: opts.vocab_cap,
        vocab_size: vocab.len(),
        framing: opts.framing,
        input_rows,
        malformed_rows: report.malformed,
        dropped_empty,
        train,
        validation,
        test,
    };
    write_output(
        &opts.outdir.join(MANIFEST_FILE),
        &serde_json::to_vec_pretty(&manifest)?,
        opts.force,
    )?;
    Ok(manifest)
}

/// Model size presets.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    Tiny,
    #[default]
    Desk,
    /// Full-size architecture of each model family.
    Full,
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tiny" => Ok(Preset::Tiny),
            "desk" => Ok(Preset::Desk),
            "full" => Ok(Preset::Full),
            other => Err(Error::invalid(format!(
                "unknown preset {other:?} (tiny, desk, full)"
            ))),
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Preset::Tiny => "tiny",
            Preset::Desk => "desk",
            Preset::Full => "full",
        })
    }
}

pub fn seq2seq_config(preset: Preset, vocab_size: usize, framing: &FramingConfig) -> Seq2SeqConfig {
    let base = match preset {
        Preset::Tiny => Seq2SeqConfig::tiny(vocab_size),
        Preset::Desk => Seq2SeqConfig::desk(vocab_size),
        Preset::Full => Seq2SeqConfig::full(vocab_size),
    };
    Seq2SeqConfig {
        max_source_len: framing.max_source_len,
        max_target_len: framing.max_target_len,
        ..base
    }
}

pub fn transformer_config(
    preset: Preset,
    vocab_size: usize,
    framing: &FramingConfig,
) -> TransformerConfig {
    let base = match preset {
        Preset::Tiny => TransformerConfig::tiny(vocab_size),
        Preset::Desk => TransformerConfig::desk(vocab_size),
        Preset::Full => TransformerConfig::base(vocab_size),
    };
    TransformerConfig {
        max_len: framing.max_context_len,
        ..base
    }
}

/// Default epochs: 20 with patience 3 for the BiLSTM, 5 for the masked LM.
pub fn default_epochs(kind: ModelKind) -> usize {
    match kind {
        ModelKind::BilstmSeq2seq => 20,
        ModelKind::MaskedLm => 5,
    }
}

pub fn default_patience(kind: ModelKind) -> Option<usize> {
    match kind {
        ModelKind::BilstmSeq2seq => Some(3),
        ModelKind::MaskedLm => None,
    }
}

pub const DEFAULT_BATCH: usize = 128;

#[derive(Clone, Debug)]
pub struct TrainOptions {
    pub data_dir: PathBuf,
    /// Must match the dataset when given.
    pub model: Option<ModelKind>,
    pub preset: Preset,
    pub epochs: Option<usize>,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub patience: Option<usize>,
    pub seed: u64,
    pub checkpoint: PathBuf,
    pub history: Option<PathBuf>,
    pub force: bool,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub kind: ModelKind,
    pub history: Vec<HistoryEntry>,
    pub checkpoint: Checkpoint,
}

pub fn train(opts: &TrainOptions) -> Result<TrainOutcome> {
    let manifest = Manifest::load(&opts.data_dir)?;
    let kind = manifest.model_kind;
    if let Some(m) = opts.model {
        if m != kind {
            return Err(Error::invalid(format!(
                "--model {m} but {} was preprocessed for {kind}",
                opts.data_dir.display()
            )));
        }
    }
    if opts.batch_size == 0 {
        return Err(Error::invalid("batch size must be positive"));
    }
    if !(opts.learning_rate.is_finite() && opts.learning_rate > 0.0) {
        return Err(Error::invalid("learning rate must be positive"));
    }
    let vocab = load_vocab(&opts.data_dir)?;
    if vocab.len() != manifest.vocab_size {
        return Err(Error::data(format!(
            "vocabulary has {} entries, manifest says {}",
            vocab.len(),
            manifest.vocab_size
        )));
    }
    // Refuse before spending time on training.
    if opts.checkpoint.exists() && !opts.force {
        return Err(Error::AlreadyExists(opts.checkpoint.clone()));
    }
    if let Some(h) = &opts.history {
        if h.exists() && !opts.force {
            return Err(Error::AlreadyExists(h.clone()));
        }
    }
    let fit_cfg = FitConfig {
        epochs: opts.epochs.unwrap_or_else(|| default_epochs(kind)),
        batch_size: opts.batch_size,
        adam: AdamConfig {
            learning_rate: opts.learning_rate,
            ..AdamConfig::default()
        },
        seed: opts.seed,
        patience: opts.patience,
    };
    let log_epoch = |h: &HistoryEntry| {
        log::info!(
            "epoch {}: loss {:.4} acc {:.4} val_acc {}",
            h.epoch,
            h.train_loss,
            h.train_acc,
            h.val_acc.map_or("-".to_string(), |a| format!("{a:.4}"))
        )
    };
    let (model, history) = match kind {
        ModelKind::BilstmSeq2seq => {
            let train: Vec<Seq2SeqExample> = read_jsonl(&examples_path(&opts.data_dir, "train"))?;
            let val: Vec<Seq2SeqExample> =
                read_jsonl(&examples_path(&opts.data_dir, "validation"))?;
            check_examples(&train, "train")?;
            let cfg = seq2seq_config(opts.preset, vocab.len(), &manifest.framing);
            let mut model = Seq2SeqModel::new(cfg, opts.seed)?;
            let history = fit(&mut model, &train, &val, &fit_cfg, log_epoch)?;
            (AnyModel::Seq2Seq(model), history)
        }
        ModelKind::MaskedLm => {
            let train: Vec<MaskedStepExample> =
                read_jsonl(&examples_path(&opts.data_dir, "train"))?;
            let val: Vec<MaskedStepExample> =
                read_jsonl(&examples_path(&opts.data_dir, "validation"))?;
            check_examples(&train, "train")?;
            let cfg = transformer_config(opts.preset, vocab.len(), &manifest.framing);
            let mut model = MaskedLmModel::new(cfg, opts.seed)?;
            let history = fit(&mut model, &train, &val, &fit_cfg, log_epoch)?;
            (AnyModel::MaskedLm(model), history)
        }
    };
    let checkpoint = Checkpoint::new(model, vocab)?;
    checkpoint.save(&opts.checkpoint, opts.force)?;
    if let Some(h) = &opts.history {
        let out = create_output(h, opts.force)?;
        write_history(out, &history)?;
    }
    Ok(TrainOutcome {
        kind,
        history,
        checkpoint,
    })
}

fn check_examples<T>(examples: &[T], split: &str) -> Result<()> {
    if examples.is_empty() {
        return Err(Error::data(format!("{split} split has no examples")));
    }
    Ok(())
}

/// Predict a title for every record. Output order follows the input.
pub fn predict_records(
    checkpoint: &Checkpoint,
    records: &[CleanRecord],
) -> Result<Vec<PredictionRecord>> {
    let kind = checkpoint.kind().as_str();
    records
        .par_iter()
        .map(|r| {
            let ids = checkpoint.predict_ids(&r.text)?;
            Ok(PredictionRecord {
                id: r.id.clone(),
                review_text: r.text.clone(),
                original_title: r.title.clone(),
                predicted_title: checkpoint.vocab.decode(&ids),
                model_kind: kind.to_string(),
            })
        })
        .collect()
}

#[derive(Clone, Debug)]
pub struct PredictOptions {
    pub checkpoint: PathBuf,
    /// A `{split}.records.jsonl` file.
    pub records: PathBuf,
    pub output: PathBuf,
    pub limit: Option<usize>,
    pub force: bool,
}

pub fn predict(opts: &PredictOptions) -> Result<Vec<PredictionRecord>> {
    let checkpoint = Checkpoint::load(&opts.checkpoint)?;
    let mut records: Vec<CleanRecord> = read_jsonl(&opts.records)?;
    if let Some(n) = opts.limit {
        records.truncate(n);
    }
    if records.is_empty() {
        return Err(Error::data(format!(
            "{}: no records",
            opts.records.display()
        )));
    }
    let preds = predict_records(&checkpoint, &records)?;
    write_jsonl(&opts.output, &preds, opts.force)?;
    Ok(preds)
}
