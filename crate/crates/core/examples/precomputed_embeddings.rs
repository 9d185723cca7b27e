//! Train with frozen per-token embeddings read from an `RSME` file instead
//! of the built-in lookup table.
//!
//! Real embeddings come from an offline encoder; here each token gets a
//! deterministic pseudo-random vector so the example is self-contained.
//!
//! ```bash
//! cargo run --release --example precomputed_embeddings
//! ```

use std::collections::HashMap;
use std::error::Error;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rsmlp::model::{EmbeddingRecord, EncoderKind, ModelConfig, PrecomputedEmbeddings};
use rsmlp::text::{build_joint, parse_corpus, TokenizeMode};
use rsmlp::train::{evaluate, train, Split, TrainConfig};

const DIM: usize = 32;

pub fn run_example() -> Result<f64, Box<dyn Error>> {
    let examples = parse_corpus(
        include_str!("../data/toy_dialogues.jsonl"),
        TokenizeMode::Char,
    )
    .examples;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut table: HashMap<String, Vec<f32>> = HashMap::new();
    let mut records = Vec::new();
    for (i, e) in examples.iter().enumerate() {
        let joint = build_joint(e);
        let mut data = Vec::with_capacity(joint.len() * DIM);
        for tok in &joint.tokens {
            let v = table
                .entry(tok.clone())
                .or_insert_with(|| (0..DIM).map(|_| rng.gen_range(-1.0..1.0)).collect());
            data.extend_from_slice(v);
        }
        records.push(EmbeddingRecord {
            ordinal: i as u32,
            rows: joint.len(),
            dim: DIM,
            data,
        });
    }
    let embeddings = PrecomputedEmbeddings { records };

    let path = std::env::temp_dir().join(format!("rsmlp-toy-{}.rsme", std::process::id()));
    embeddings.write(&path)?;
    let loaded = PrecomputedEmbeddings::read(&path)?;
    std::fs::remove_file(&path)?;
    println!(
        "RSME: {} records, bit-exact reload: {}",
        loaded.len(),
        loaded == embeddings
    );

    let model_config = ModelConfig {
        dim: DIM,
        bottleneck: 16,
        encoder: EncoderKind::Precomputed,
        ..ModelConfig::default()
    };
    let config = TrainConfig {
        epochs: 150,
        lr: 1e-3,
        ..TrainConfig::default()
    };
    let split = Split::new(&examples).with_embeddings(&loaded);
    let outcome = train(split, None, model_config, &config)?;
    let report = evaluate(&outcome.model, split)?;
    println!(
        "{} parameters (no embedding table), EM {:.2}, cell accuracy {:.2}",
        outcome.model.model.params().scalar_count(),
        report.em,
        report.cell_accuracy
    );
    Ok(report.cell_accuracy)
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    run_example().map(|_| ())
}
