//! Derive the gold edit matrix for a dialogue, print it, then turn it back
//! into the rewrite.
//!
//! ```bash
//! cargo run --example derive_edits
//! ```

use std::error::Error;

use rsmlp::edit::{apply_edits, derive_edit_matrix, extract_program, EditLabel};
use rsmlp::text::{build_joint, DialogueExample, TokenizeMode};

pub fn run_example() -> Result<String, Box<dyn Error>> {
    let example = DialogueExample::from_text(
        &["深圳的气候怎么样", "十分潮湿"],
        "为什么会这样",
        Some("深圳的气候为什么会十分潮湿"),
        TokenizeMode::Char,
    )?;
    let joint = build_joint(&example);
    let matrix = derive_edit_matrix(&example, &joint)?;

    print!("{:>6}", "");
    for x in joint.incomplete() {
        print!("{x:>3}");
    }
    println!("{:>3}", "$");
    for (m, tok) in joint.context().iter().enumerate() {
        print!("{tok:>6}");
        for n in 0..matrix.cols() {
            let c = match matrix.get(m, n) {
                EditLabel::None => ".",
                label => label.code(),
            };
            print!("{c:>4}");
        }
        println!();
    }
    println!(
        "lossy: {}, dropped tokens: {}",
        matrix.lossy(),
        matrix.dropped_tokens
    );

    let program = extract_program(&matrix);
    for (n, col) in program
        .columns
        .iter()
        .enumerate()
        .filter(|(_, c)| !c.is_empty())
    {
        println!(
            "column {n}: insert {:?} substitute {:?}",
            col.inserts, col.substitute
        );
    }
    let rewrite = apply_edits(joint.incomplete(), &program, joint.context())?.concat();
    println!("rewrite: {rewrite}");
    Ok(rewrite)
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    run_example().map(|_| ())
}
