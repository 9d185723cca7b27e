//! Check backpropagated gradients of the full model against central
//! differences, in 64-bit floats.
//!
//! ```bash
//! cargo run --release --example gradient_check
//! ```

use std::error::Error;

use rsmlp::model::{gradient_check, GradCheck, ModelConfig, Rsmlp};
use rsmlp::text::{build_vocab, parse_corpus, TokenizeMode};
use rsmlp::train::loss_batch;

pub const TOY: &str = include_str!("../data/toy_dialogues.jsonl");

pub fn config(vocab_size: usize) -> ModelConfig {
    ModelConfig {
        max_len: 16,
        block: 4,
        dim: 8,
        bottleneck: 4,
        hidden_local: 8,
        hidden_global: 8,
        ..ModelConfig::with_vocab(vocab_size)
    }
}

pub fn run_example() -> Result<GradCheck, Box<dyn Error>> {
    let examples = parse_corpus(TOY, TokenizeMode::Char).examples;
    // one dialogue of each kind: substitute, append, rename, prepend
    let picked: Vec<_> = [0, 8, 16, 24]
        .iter()
        .map(|&i| examples[i].clone())
        .collect();
    let vocab = build_vocab(&picked, TokenizeMode::Char)?;
    let config = config(vocab.len());
    let batch = loss_batch(&picked, &vocab, &config, [0.5, 1.5, 1.0])?;

    let mut model = Rsmlp::<f64>::new(config, 1)?;
    model.fill_uniform(2, 0.5);
    let report = gradient_check(&mut model, &batch, 1e-5)?;
    println!(
        "{} parameters checked, max relative error {:.3e}, max absolute error {:.3e}",
        report.checked, report.max_rel_error, report.max_abs_error
    );
    Ok(report)
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    run_example().map(|_| ())
}
