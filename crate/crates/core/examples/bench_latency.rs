//! Single-dialogue inference latency at a few sequence lengths.
//!
//! ```bash
//! cargo run --release --example bench_latency
//! ```

use std::error::Error;

use rsmlp::model::ModelConfig;
use rsmlp::text::{parse_corpus, TokenizeMode};
use rsmlp::train::{bench, train, BenchReport, Split, TrainConfig};

pub fn run_example() -> Result<Vec<BenchReport>, Box<dyn Error>> {
    let examples = parse_corpus(
        include_str!("../data/toy_dialogues.jsonl"),
        TokenizeMode::Char,
    )
    .examples;
    let config = TrainConfig {
        epochs: 0,
        ..TrainConfig::default()
    };
    // bench a realistic vocabulary size; latency does not depend on the weights
    let model = train(Split::new(&examples), None, ModelConfig::default(), &config)?.model;
    let mut reports = Vec::new();
    for len in [16, 32, 64] {
        let r = bench(&model, len, 200)?;
        println!(
            "L={:3}  p50 {:.3} ms  p95 {:.3} ms",
            r.len, r.p50_ms, r.p95_ms
        );
        reports.push(r);
    }
    println!("{}", reports[0].to_json());
    Ok(reports)
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    run_example().map(|_| ())
}
