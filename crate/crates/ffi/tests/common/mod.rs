use std::path::{Path, PathBuf};

use hashgen::checkpoint::ModelKind;
use hashgen::corpus::{CsvSchema, FramingConfig};
use hashgen::pipeline;

/// Preprocess the bundled sample reviews and train a tiny model into `dir`.
pub fn train_tiny(dir: &Path, kind: ModelKind) -> PathBuf {
    let input = Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/data/sample_reviews.csv");
    pipeline::preprocess(&pipeline::PreprocessOptions {
        input,
        outdir: dir.to_path_buf(),
        model: kind,
        seed: 42,
        ratios: Default::default(),
        vocab_cap: pipeline::DEFAULT_VOCAB_CAP,
        schema: CsvSchema::default(),
        framing: FramingConfig::default(),
        strict: false,
        force: false,
    })
    .unwrap();
    let checkpoint = dir.join("model.json");
    pipeline::train(&pipeline::TrainOptions {
        data_dir: dir.to_path_buf(),
        model: Some(kind),
        preset: pipeline::Preset::Tiny,
        epochs: Some(3),
        batch_size: 32,
        learning_rate: 3e-3,
        patience: None,
        seed: 1,
        checkpoint: checkpoint.clone(),
        history: None,
        force: false,
    })
    .unwrap();
    checkpoint
}
