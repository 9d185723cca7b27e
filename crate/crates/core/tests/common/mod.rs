#![allow(dead_code)]

use rand::seq::SliceRandom;
use rand::Rng;
use rsmlp::text::{parse_corpus, DialogueExample, TokenizeMode};

pub const TOY: &str = include_str!("../../data/toy_dialogues.jsonl");
pub const WEATHER_DIALOGUE: (&[&str], &str, &str) = (
    &["深圳的气候怎么样", "十分潮湿"],
    "为什么会这样",
    "深圳的气候为什么会十分潮湿",
);

pub fn toy() -> Vec<DialogueExample> {
    let corpus = parse_corpus(TOY, TokenizeMode::Char);
    assert!(corpus.errors.is_empty(), "{:?}", corpus.errors);
    corpus.examples
}

pub fn weather_dialogue() -> DialogueExample {
    let (context, x, gold) = WEATHER_DIALOGUE;
    DialogueExample::from_text(context, x, Some(gold), TokenizeMode::Char).unwrap()
}

#[derive(Debug, Clone, Copy)]
enum Edit {
    Insert,
    Substitute(usize),
}

/// A random dialogue whose rewrite applies 0 to 3 insert or substitute
/// edits to `x`, each copying a contiguous span of one context turn.
///
/// Context and `x` draw from disjoint alphabets, `x` has no repeated token
/// and edits are separated by at least one untouched `x` token, so the
/// rewrite has exactly one edit script in the matrix encoding.
pub fn synthetic_triple<R: Rng>(rng: &mut R) -> DialogueExample {
    let turns = rng.gen_range(1..=3);
    let context: Vec<Vec<String>> = (0..turns)
        .map(|_| {
            let len = rng.gen_range(2..=8);
            (0..len)
                .map(|_| format!("c{}", rng.gen_range(0..12)))
                .collect()
        })
        .collect();

    let k = rng.gen_range(0..=3);
    let edits: Vec<Edit> = (0..k)
        .map(|_| {
            if rng.gen_bool(0.5) {
                Edit::Insert
            } else {
                Edit::Substitute(rng.gen_range(1..=2))
            }
        })
        .collect();
    // untouched runs around the edits; inner runs are never empty
    let mut runs: Vec<usize> = (0..=k)
        .map(|i| {
            let min = usize::from(i > 0 && i < k);
            rng.gen_range(min..=min + 2)
        })
        .collect();
    let consumed: usize = edits
        .iter()
        .map(|e| match e {
            Edit::Insert => 0,
            Edit::Substitute(l) => *l,
        })
        .sum();
    if runs.iter().sum::<usize>() + consumed == 0 {
        runs[0] = 1;
    }
    let n = runs.iter().sum::<usize>() + consumed;
    let mut alphabet: Vec<usize> = (0..26).collect();
    alphabet.shuffle(rng);
    let x: Vec<String> = alphabet[..n].iter().map(|i| format!("x{i}")).collect();

    let mut rewrite = Vec::new();
    let mut pos = 0;
    for (i, &run) in runs.iter().enumerate() {
        rewrite.extend_from_slice(&x[pos..pos + run]);
        pos += run;
        let Some(edit) = edits.get(i) else { break };
        let turn = &context[rng.gen_range(0..turns)];
        let len = rng.gen_range(1..=3.min(turn.len()));
        let start = rng.gen_range(0..=turn.len() - len);
        rewrite.extend_from_slice(&turn[start..start + len]);
        if let Edit::Substitute(l) = edit {
            pos += l;
        }
    }
    DialogueExample::new(context, x, Some(rewrite)).unwrap()
}
