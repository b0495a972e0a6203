use std::io::Write;
use std::net::{IpAddr, SocketAddr};
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};

use hashgen::annotate::{self, ScoreStore, ServiceState};
use hashgen::checkpoint::ModelKind;
use hashgen::corpus::{CsvSchema, FramingConfig, SplitRatios};
use hashgen::evalmetrics::{self, MetricSummary};
use hashgen::files::{create_output, write_output};
use hashgen::pipeline::{self, Preset};
use hashgen::{Error, Result};

/// Review-to-hashtag generation: preprocess, train, predict, evaluate and annotate.
#[derive(Parser, Debug)]
#[command(name = "hashgen", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// CSV of reviews → vocabulary, split record files and framed examples.
    Preprocess(PreprocessArgs),
    /// Train a model on a preprocessed dataset and write a checkpoint.
    Train(TrainArgs),
    /// Predict titles for a split's records.
    Predict(PredictArgs),
    /// BLEU, NIST and METEOR report for a predictions file.
    Evaluate(EvaluateArgs),
    /// Length and creativity statistics for a predictions file.
    Stats(StatsArgs),
    /// Word frequencies as `word<TAB>count` lines.
    Wordcloud(WordcloudArgs),
    /// Score titles in the terminal (0 bad, 5 partial, 1 good).
    Annotate(AnnotateArgs),
    /// Run the annotation HTTP API.
    Serve(ServeArgs),
}

#[derive(Args, Debug)]
struct PreprocessArgs {
    /// Review CSV with a header row.
    #[arg(long)]
    input: PathBuf,
    /// Framing to produce: bilstm or maskedlm.
    #[arg(long)]
    model: ModelKind,
    /// Output directory.
    #[arg(long, env = "HASHGEN_DATA_DIR", default_value = "data")]
    outdir: PathBuf,
    #[arg(long, default_value_t = pipeline::DEFAULT_SEED)]
    seed: u64,
    /// Train, validation and test fractions.
    #[arg(long, default_value = "0.70,0.15,0.15")]
    split: SplitRatios,
    /// Vocabulary size including the 6 special tokens.
    #[arg(long, default_value_t = pipeline::DEFAULT_VOCAB_CAP)]
    vocab_cap: usize,
    #[arg(long, default_value = "review_title")]
    title_column: String,
    #[arg(long, default_value = "review_text")]
    text_column: String,
    /// Column holding record ids; rows are numbered `row-N` otherwise.
    #[arg(long)]
    id_column: Option<String>,
    /// Fail on malformed rows or duplicate ids instead of skipping them.
    #[arg(long)]
    strict: bool,
    /// Overwrite existing outputs.
    #[arg(long)]
    force: bool,
}

#[derive(Args, Debug)]
struct TrainArgs {
    /// Preprocessed dataset directory.
    #[arg(long, env = "HASHGEN_DATA_DIR", default_value = "data")]
    data: PathBuf,
    /// Expected model kind; must match the dataset.
    #[arg(long)]
    model: Option<ModelKind>,
    /// Model size: tiny, desk or full.
    #[arg(long, default_value_t = Preset::Desk)]
    preset: Preset,
    /// Epochs [default: 20 for bilstm, 5 for maskedlm].
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long, default_value_t = pipeline::DEFAULT_BATCH)]
    batch: usize,
    /// Adam learning rate.
    #[arg(long, default_value_t = 1e-3)]
    lr: f64,
    /// Early-stopping patience in epochs, 0 to disable [default: 3 for bilstm, off for maskedlm].
    #[arg(long)]
    patience: Option<usize>,
    #[arg(long, default_value_t = pipeline::DEFAULT_SEED)]
    seed: u64,
    /// Checkpoint path [default: <data>/model.json].
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// Per-epoch history, JSON lines [default: <data>/history.jsonl].
    #[arg(long)]
    history: Option<PathBuf>,
    /// Rayon worker threads (results do not depend on it).
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long)]
    force: bool,
}

#[derive(Args, Debug)]
struct PredictArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    /// Dataset directory holding `<split>.records.jsonl`.
    #[arg(long, env = "HASHGEN_DATA_DIR", default_value = "data")]
    data: PathBuf,
    #[arg(long, default_value = "test")]
    split: String,
    /// Explicit records file; overrides --data/--split.
    #[arg(long)]
    records: Option<PathBuf>,
    /// Predictions output, JSON lines.
    #[arg(long)]
    out: PathBuf,
    /// Only the first N records.
    #[arg(long)]
    limit: Option<usize>,
    #[arg(long)]
    force: bool,
}

#[derive(Args, Debug)]
struct EvaluateArgs {
    #[arg(long)]
    preds: PathBuf,
    /// Report output, JSON.
    #[arg(long)]
    report: PathBuf,
    #[arg(long)]
    force: bool,
}

#[derive(Args, Debug)]
struct StatsArgs {
    #[arg(long)]
    preds: PathBuf,
    /// Also write the statistics as JSON.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    force: bool,
}

#[derive(Clone, Copy, Debug, clap::ValueEnum)]
enum TextField {
    Predicted,
    Original,
    Review,
}

#[derive(Args, Debug)]
struct WordcloudArgs {
    #[arg(long)]
    preds: PathBuf,
    /// Which text to count.
    #[arg(long, value_enum, default_value_t = TextField::Predicted)]
    field: TextField,
    /// Keep the K most frequent words.
    #[arg(long)]
    top: Option<usize>,
    /// TSV output; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    force: bool,
}

#[derive(Args, Debug)]
struct PoolArgs {
    /// Predictions files whose titles form the item pool.
    #[arg(long, required = true, num_args = 1..)]
    preds: Vec<PathBuf>,
    /// Score store, JSON lines (appended to).
    #[arg(long, default_value = "scores.jsonl")]
    store: PathBuf,
    /// Leave the reviews' original titles out of the pool.
    #[arg(long)]
    no_original: bool,
}

#[derive(Args, Debug)]
struct AnnotateArgs {
    #[command(flatten)]
    pool: PoolArgs,
    #[arg(long)]
    annotator: String,
    /// Fraction of the pool to present, rounded up.
    #[arg(long, default_value_t = 1.0)]
    sample: f64,
    #[arg(long, default_value_t = pipeline::DEFAULT_SEED)]
    seed: u64,
    /// Show which model (or the original) produced each title.
    #[arg(long)]
    reveal: bool,
}

#[derive(Args, Debug)]
struct ServeArgs {
    #[command(flatten)]
    pool: PoolArgs,
    #[arg(long, default_value = "127.0.0.1")]
    host: IpAddr,
    #[arg(long, default_value_t = 8080)]
    port: u16,
    /// Static UI bundle served at `/`.
    #[arg(long)]
    ui_dir: Option<PathBuf>,
}

fn schema(a: &PreprocessArgs) -> CsvSchema {
    CsvSchema {
        title_column: a.title_column.clone(),
        text_column: a.text_column.clone(),
        id_column: a.id_column.clone(),
    }
}

fn preprocess(a: PreprocessArgs) -> Result<()> {
    let m = pipeline::preprocess(&pipeline::PreprocessOptions {
        input: a.input.clone(),
        outdir: a.outdir.clone(),
        model: a.model,
        seed: a.seed,
        ratios: a.split,
        vocab_cap: a.vocab_cap,
        schema: schema(&a),
        framing: FramingConfig::default(),
        strict: a.strict,
        force: a.force,
    })?;
    println!(
        "{}: {} rows, {} malformed, {} empty; vocabulary {}",
        a.outdir.display(),
        m.input_rows,
        m.malformed_rows,
        m.dropped_empty,
        m.vocab_size
    );
    for (name, c) in [
        ("train", &m.train),
        ("validation", &m.validation),
        ("test", &m.test),
    ] {
        println!(
            "  {name:<10} {:>7} records {:>8} examples {:>5} too long",
            c.records, c.examples, c.dropped_too_long
        );
    }
    Ok(())
}

fn train(a: TrainArgs) -> Result<()> {
    if let Some(n) = a.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::invalid(format!("--threads: {e}")))?;
    }
    let kind = match a.model {
        Some(k) => k,
        None => pipeline::Manifest::load(&a.data)?.model_kind,
    };
    let patience = match a.patience {
        Some(0) => None,
        Some(p) => Some(p),
        None => pipeline::default_patience(kind),
    };
    let checkpoint = a.checkpoint.unwrap_or_else(|| a.data.join("model.json"));
    let history = a.history.unwrap_or_else(|| a.data.join("history.jsonl"));
    let out = pipeline::train(&pipeline::TrainOptions {
        data_dir: a.data,
        model: a.model,
        preset: a.preset,
        epochs: a.epochs,
        batch_size: a.batch,
        learning_rate: a.lr,
        patience,
        seed: a.seed,
        checkpoint: checkpoint.clone(),
        history: Some(history),
        force: a.force,
    })?;
    let last = out.history.last();
    println!(
        "{} trained for {} epochs (train acc {:.4}); checkpoint {}",
        out.kind,
        out.history.len(),
        last.map_or(0.0, |h| h.train_acc),
        checkpoint.display()
    );
    Ok(())
}

fn predict(a: PredictArgs) -> Result<()> {
    let records = a
        .records
        .unwrap_or_else(|| pipeline::records_path(&a.data, &a.split));
    let preds = pipeline::predict(&pipeline::PredictOptions {
        checkpoint: a.checkpoint,
        records,
        output: a.out.clone(),
        limit: a.limit,
        force: a.force,
    })?;
    println!("{} predictions written to {}", preds.len(), a.out.display());
    Ok(())
}

fn metric_line(name: &str, m: &MetricSummary) -> String {
    let cv = m
        .cv_percent
        .map_or("n/a".to_string(), |c| format!("{c:.2}"));
    format!(
        "{name:<7} {:.4} ± {:.4} %CV: {cv}  normalized mean {:.4}",
        m.mean, m.sd, m.normalized_mean
    )
}

fn evaluate(a: EvaluateArgs) -> Result<()> {
    // Refuse before computing.
    if a.report.exists() && !a.force {
        return Err(Error::AlreadyExists(a.report));
    }
    let r = evalmetrics::evaluate_file(&a.preds)?;
    write_output(&a.report, &serde_json::to_vec_pretty(&r)?, a.force)?;
    println!(
        "{} rows ({} malformed lines skipped)",
        r.rows, r.skipped_lines
    );
    println!("{}", metric_line("BLEU", &r.bleu));
    println!("{}", metric_line("NIST", &r.nist));
    println!("{}", metric_line("METEOR", &r.meteor));
    println!("original length  {}", r.lengths.original_display);
    println!("predicted length {}", r.lengths.predicted_display);
    Ok(())
}

fn stats(a: StatsArgs) -> Result<()> {
    let (records, skipped) = evalmetrics::read_predictions(&a.preds)?;
    if records.is_empty() {
        return Err(Error::data(format!(
            "{}: no valid prediction lines",
            a.preds.display()
        )));
    }
    let s = evalmetrics::stats_report(&records)?;
    println!(
        "rows                {} ({skipped} malformed lines skipped)",
        s.rows
    );
    println!("original length     {}", s.lengths.original_display);
    println!("predicted length    {}", s.lengths.predicted_display);
    println!("unique predictions  {}", s.creativity.unique_predictions);
    println!(
        "vocabulary used     {} of {} ({:.2}%)",
        s.creativity.vocab_used_count,
        s.creativity.original_vocab_size,
        s.creativity.vocab_used_percent
    );
    if let Some(out) = &a.out {
        write_output(out, &serde_json::to_vec_pretty(&s)?, a.force)?;
    }
    Ok(())
}

fn wordcloud(a: WordcloudArgs) -> Result<()> {
    let (records, _) = evalmetrics::read_predictions(&a.preds)?;
    let texts: Vec<&str> = records
        .iter()
        .map(|r| match a.field {
            TextField::Predicted => r.predicted_title.as_str(),
            TextField::Original => r.original_title.as_str(),
            TextField::Review => r.review_text.as_str(),
        })
        .collect();
    let freqs = evalmetrics::word_frequencies(&texts, a.top);
    match &a.out {
        Some(path) => {
            let mut w = create_output(path, a.force)?;
            evalmetrics::write_frequencies_tsv(&mut w, &freqs)?;
            w.flush().map_err(|e| Error::io(path, e))?;
        }
        None => evalmetrics::write_frequencies_tsv(std::io::stdout().lock(), &freqs)?,
    }
    Ok(())
}

fn pool(p: &PoolArgs) -> Result<(Vec<annotate::AnnotationItem>, ScoreStore)> {
    let items = annotate::load_items(&p.preds, !p.no_original)?;
    let store = ScoreStore::open(&p.store)?;
    Ok((items, store))
}

fn annotate_cmd(a: AnnotateArgs) -> Result<()> {
    let (items, store) = pool(&a.pool)?;
    let sample = annotate::sample_items(&items, a.sample, a.seed)?;
    let stdin = std::io::stdin();
    let outcome = annotate::run_session(
        &sample,
        &store,
        &a.annotator,
        a.reveal,
        stdin.lock(),
        std::io::stdout(),
    )?;
    log::info!(
        "{}: {} new scores, {} previously scored, {} left",
        store.path().display(),
        outcome.scored,
        outcome.already_scored,
        outcome.remaining
    );
    let s = annotate::summarize(&items, &store.read_all()?);
    let fmt = |x: Option<f64>| x.map_or("-".to_string(), |v| format!("{v:.3}"));
    println!(
        "metricF {} ± {} over {} scores ({:.2}% of {} items)",
        fmt(s.overall.summary.mean),
        fmt(s.overall.summary.sd),
        s.overall.summary.count,
        s.overall.summary.coverage_percent,
        s.total_items
    );
    Ok(())
}

fn serve(a: ServeArgs) -> Result<()> {
    let (items, store) = pool(&a.pool)?;
    if let Some(dir) = &a.ui_dir {
        if !dir.join("index.html").is_file() {
            return Err(Error::invalid(format!("{}: no index.html", dir.display())));
        }
    }
    let state = Arc::new(ServiceState::new(items, store));
    let runtime = tokio::runtime::Runtime::new().map_err(|e| Error::io("tokio runtime", e))?;
    runtime.block_on(annotate::serve(
        state,
        a.ui_dir.as_deref(),
        SocketAddr::new(a.host, a.port),
    ))
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Preprocess(a) => preprocess(a),
        Command::Train(a) => train(a),
        Command::Predict(a) => predict(a),
        Command::Evaluate(a) => evaluate(a),
        Command::Stats(a) => stats(a),
        Command::Wordcloud(a) => wordcloud(a),
        Command::Annotate(a) => annotate_cmd(a),
        Command::Serve(a) => serve(a),
    }
}

/// 1 for bad invocations, 2 for problems with the data.
fn exit_code(e: &Error) -> u8 {
    match e {
        Error::InvalidArgument(_) | Error::AlreadyExists(_) => 1,
        _ => 2,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
