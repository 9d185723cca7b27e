use std::fmt;
use std::path::Path;

use serde::Deserialize;

use super::{DialogueExample, TextError, TokenizeMode};

#[derive(Debug, Deserialize)]
struct RawExample {
    context: Vec<String>,
    incomplete: String,
    #[serde(default)]
    rewrite: Option<String>,
}

/// A line that failed to parse. Line numbers are 1-based.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LineError {
    pub line: usize,
    pub reason: String,
}

impl fmt::Display for LineError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}: {}", self.line, self.reason)
    }
}

/// Parsed examples in file order, plus the lines that were skipped.
#[derive(Debug, Clone, Default)]
pub struct Corpus {
    pub examples: Vec<DialogueExample>,
    pub errors: Vec<LineError>,
}

pub fn parse_corpus(text: &str, mode: TokenizeMode) -> Corpus {
    let mut corpus = Corpus::default();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let parsed = serde_json::from_str::<RawExample>(line)
            .map_err(|e| e.to_string())
            .and_then(|raw| {
                DialogueExample::from_text(
                    &raw.context,
                    &raw.incomplete,
                    raw.rewrite.as_deref(),
                    mode,
                )
                .map_err(|e| e.to_string())
            });
        match parsed {
            Ok(example) => corpus.examples.push(example),
            Err(reason) => corpus.errors.push(LineError {
                line: i + 1,
                reason,
            }),
        }
    }
    corpus
}

/// Reads a JSONL corpus. Bad lines are collected in [`Corpus::errors`]; the
/// call only fails when the file cannot be read or no line parses.
pub fn load_corpus(path: &Path, mode: TokenizeMode) -> Result<Corpus, TextError> {
    let text = std::fs::read_to_string(path).map_err(|source| TextError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let corpus = parse_corpus(&text, mode);
    if corpus.examples.is_empty() {
        return Err(TextError::NoValidLines {
            path: path.display().to_string(),
            errors: corpus.errors,
        });
    }
    Ok(corpus)
}
