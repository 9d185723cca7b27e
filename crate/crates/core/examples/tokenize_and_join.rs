//! Tokenize a dialogue, join it into one sequence and map it to ids.
//!
//! ```bash
//! cargo run --example tokenize_and_join
//! ```

use std::error::Error;

use rsmlp::text::{build_joint, build_vocab, DialogueExample, TokenizeMode};

pub fn run_example() -> Result<(), Box<dyn Error>> {
    let example = DialogueExample::from_text(
        &["深圳的气候怎么样", "十分潮湿"],
        "为什么会这样",
        Some("深圳的气候为什么会十分潮湿"),
        TokenizeMode::Char,
    )?;
    let joint = build_joint(&example);
    println!(
        "joint ({} tokens, M = {}, N = {}):",
        joint.len(),
        joint.m(),
        joint.n()
    );
    println!("  context:    {}", joint.context().join(" "));
    println!("  incomplete: {}", joint.incomplete().join(" "));

    let vocab = build_vocab(std::slice::from_ref(&example), TokenizeMode::Char)?;
    println!("ids: {:?}", vocab.encode(&joint.tokens));
    println!("vocabulary: {} entries", vocab.len());

    // a context too long for the model is cut from the left, whole turns first
    let (short, dropped) = example
        .truncate_left(12)
        .ok_or("utterance alone is too long")?;
    println!(
        "truncated to 12: dropped {dropped}, context {:?}",
        short.context
    );

    let words = DialogueExample::from_text(
        &["where did you park", "by the gate"],
        "why there",
        None,
        TokenizeMode::Word,
    )?;
    println!("word mode: {:?}", build_joint(&words).tokens);
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    run_example()
}
