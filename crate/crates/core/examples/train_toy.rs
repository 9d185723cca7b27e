//! Train on the bundled toy dialogues until the model memorizes them, then
//! evaluate, rewrite the first dialogue and round-trip the checkpoint.
//!
//! ```bash
//! cargo run --release --example train_toy
//! ```

use std::error::Error;

use rsmlp::model::ModelConfig;
use rsmlp::text::{parse_corpus, TokenizeMode};
use rsmlp::train::{evaluate, train, EvalReport, Split, TrainConfig, TrainedModel};

pub const TOY: &str = include_str!("../data/toy_dialogues.jsonl");

/// The default learning rate is tuned for long runs over large corpora;
/// memorizing 32 dialogues in a few hundred epochs needs a larger step.
pub fn overfit_config() -> TrainConfig {
    TrainConfig {
        epochs: 300,
        batch_size: 8,
        lr: 1e-3,
        seed: 0,
        class_weights: None,
    }
}

pub fn run_example() -> Result<(TrainedModel, EvalReport), Box<dyn Error>> {
    let examples = parse_corpus(TOY, TokenizeMode::Char).examples;
    let outcome = train(
        Split::new(&examples),
        None,
        ModelConfig::default(),
        &overfit_config(),
    )?;
    println!("class weights {:?}", outcome.class_weights);
    for h in outcome
        .history
        .iter()
        .filter(|h| h.epoch % 50 == 0 || h.epoch == 1)
    {
        println!("epoch {:4}  loss {:.5}", h.epoch, h.mean_loss);
    }

    let report = evaluate(&outcome.model, Split::new(&examples))?;
    println!(
        "EM {:.2}  cell accuracy {:.2}  BLEU-4 {:.2}",
        report.em, report.cell_accuracy, report.bleu4
    );

    let model = outcome.model;
    let out = model.rewrite_text(&["深圳的气候怎么样", "十分潮湿"], "为什么会这样")?;
    println!("rewrite: {out}");

    let path = std::env::temp_dir().join(format!("rsmlp-toy-{}.ckpt", std::process::id()));
    model.save(&path)?;
    let back = TrainedModel::load(&path)?;
    println!(
        "checkpoint {} bytes, reload equal: {}",
        std::fs::metadata(&path)?.len(),
        back == model
    );
    std::fs::remove_file(&path)?;
    std::fs::remove_file(TrainedModel::vocab_path(&path))?;
    Ok((model, report))
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    run_example().map(|_| ())
}
