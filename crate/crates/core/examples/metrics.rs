//! Scoring rewrites: exact match, BLEU, ROUGE and restoration scores.
//!
//! ```bash
//! cargo run --example metrics
//! ```

use std::error::Error;

use rsmlp::text::{tokenize, TokenizeMode};
use rsmlp::train::metrics::{bleu, exact_match, restoration_score, rouge_l, rouge_n, ROUGE_L_BETA};

pub struct Scores {
    pub bleu1: f64,
    pub rouge1: f64,
    pub restoration_r1: f64,
}

pub fn run_example() -> Result<Scores, Box<dyn Error>> {
    let chars = |s: &str| tokenize(s, TokenizeMode::Char);

    let (pred, gold) = (chars("为什么会")?, chars("为什么会这样")?);
    let bleu1 = bleu(&[(&pred, &gold)], 1);
    let rouge1 = rouge_n(&pred, &gold, 1);
    println!("pred {} / gold {}", pred.concat(), gold.concat());
    println!("  EM      {:6.2}", exact_match(&pred, &gold));
    println!("  BLEU-1  {bleu1:6.2}   brevity penalty only");
    println!("  BLEU-4  {:6.2}", bleu(&[(&pred, &gold)], 4));
    println!("  ROUGE-1 {rouge1:6.2}");
    println!("  ROUGE-2 {:6.2}", rouge_n(&pred, &gold, 2));
    println!(
        "  ROUGE-L {:6.2}   beta {ROUGE_L_BETA}",
        rouge_l(&pred, &gold)
    );

    let x = chars("为什么会这样")?;
    let gold = chars("深圳的气候为什么会十分潮湿")?;
    let pred = chars("为什么会十分潮湿")?;
    println!(
        "restoration, pred {} / gold {}",
        pred.concat(),
        gold.concat()
    );
    let mut r1 = 0.0;
    for n in 1..=3 {
        let s = restoration_score(&pred, &gold, &x, n);
        println!("  n={n}  P {:6.2}  R {:6.2}  F {:6.2}", s.p, s.r, s.f);
        if n == 1 {
            r1 = s.r;
        }
    }
    Ok(Scores {
        bleu1,
        rouge1,
        restoration_r1: r1,
    })
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    run_example().map(|_| ())
}
