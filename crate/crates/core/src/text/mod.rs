//! Tokenization, vocabulary, dialogue joining and corpus I/O.
//!
//! Dialogues are flattened into a single [`JointSequence`]: the context turns
//! joined by a `[SEP]` token, followed directly by the incomplete utterance.
//! The boundary index `M` separates the two halves.

mod corpus;
mod tokenize;
mod vocab;

pub use corpus::{load_corpus, parse_corpus, Corpus, LineError};
pub use tokenize::{tokenize, TokenizeMode};
pub use vocab::{build_vocab, Token, Vocabulary, PAD, PAD_ID, SEP, SEP_ID, UNK, UNK_ID};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum TextError {
    #[error("input is empty after trimming")]
    EmptyInput,
    #[error("dialogue has no context utterance")]
    NoContext,
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("no line of {path} parsed ({} errors, first: {})", .errors.len(), .errors.first().map(|e| e.to_string()).unwrap_or_default())]
    NoValidLines {
        path: String,
        errors: Vec<LineError>,
    },
    #[error("malformed vocabulary file at line {line}: {reason}")]
    BadVocab { line: usize, reason: String },
}

/// One training or evaluation instance.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DialogueExample {
    pub context: Vec<Vec<String>>,
    pub incomplete: Vec<String>,
    pub rewrite: Option<Vec<String>>,
}

impl DialogueExample {
    pub fn new(
        context: Vec<Vec<String>>,
        incomplete: Vec<String>,
        rewrite: Option<Vec<String>>,
    ) -> Result<Self, TextError> {
        if context.is_empty() {
            return Err(TextError::NoContext);
        }
        if incomplete.is_empty() || context.iter().any(|u| u.is_empty()) {
            return Err(TextError::EmptyInput);
        }
        Ok(Self {
            context,
            incomplete,
            rewrite,
        })
    }

    /// Tokenizes raw strings into an example.
    pub fn from_text<S: AsRef<str>>(
        context: &[S],
        incomplete: &str,
        rewrite: Option<&str>,
        mode: TokenizeMode,
    ) -> Result<Self, TextError> {
        let context = context
            .iter()
            .map(|u| tokenize(u.as_ref(), mode))
            .collect::<Result<Vec<_>, _>>()?;
        let incomplete = tokenize(incomplete, mode)?;
        let rewrite = rewrite.map(|r| tokenize(r, mode)).transpose()?;
        Self::new(context, incomplete, rewrite)
    }

    /// Length of the joined context, `[SEP]` tokens included.
    pub fn context_len(&self) -> usize {
        self.context.iter().map(Vec::len).sum::<usize>() + self.context.len() - 1
    }

    pub fn joint_len(&self) -> usize {
        self.context_len() + self.incomplete.len()
    }

    /// Drops tokens from the left of the context until the joint sequence fits
    /// in `max_len`. A `[SEP]` left dangling at the front is dropped too.
    ///
    /// Returns the shortened example and the number of leading joint tokens
    /// removed, or `None` when the incomplete utterance alone leaves no room
    /// for a context token.
    pub fn truncate_left(&self, max_len: usize) -> Option<(DialogueExample, usize)> {
        let len = self.joint_len();
        if len <= max_len {
            return Some((self.clone(), 0));
        }
        if self.incomplete.len() + 1 > max_len {
            return None;
        }
        let mut to_drop = len - max_len;
        let mut dropped = 0;
        let mut context: Vec<Vec<String>> = self.context.clone();
        while to_drop > 0 {
            let turns = context.len();
            let first = &mut context[0];
            if first.len() <= to_drop && turns > 1 {
                // whole turn plus its trailing separator
                let n = first.len() + 1;
                context.remove(0);
                dropped += n;
                to_drop = to_drop.saturating_sub(n);
            } else {
                first.drain(..to_drop);
                dropped += to_drop;
                to_drop = 0;
            }
        }
        let example = DialogueExample {
            context,
            incomplete: self.incomplete.clone(),
            rewrite: self.rewrite.clone(),
        };
        Some((example, dropped))
    }
}

/// The `[SEP]`-joined context followed by the incomplete utterance.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct JointSequence {
    pub tokens: Vec<String>,
    pub boundary: usize,
}

impl JointSequence {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn context(&self) -> &[String] {
        &self.tokens[..self.boundary]
    }

    pub fn incomplete(&self) -> &[String] {
        &self.tokens[self.boundary..]
    }

    /// Context length `M`.
    pub fn m(&self) -> usize {
        self.boundary
    }

    /// Incomplete length `N`.
    pub fn n(&self) -> usize {
        self.tokens.len() - self.boundary
    }

    pub fn is_sep_row(&self, m: usize) -> bool {
        self.tokens[m] == SEP
    }
}

pub fn build_joint(example: &DialogueExample) -> JointSequence {
    let mut tokens = Vec::with_capacity(example.joint_len());
    for (i, utterance) in example.context.iter().enumerate() {
        if i > 0 {
            tokens.push(SEP.to_string());
        }
        tokens.extend(utterance.iter().cloned());
    }
    let boundary = tokens.len();
    tokens.extend(example.incomplete.iter().cloned());
    JointSequence { tokens, boundary }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ex(ctx: &[&str], x: &str) -> DialogueExample {
        DialogueExample::from_text(ctx, x, None, TokenizeMode::Char).unwrap()
    }

    #[test]
    fn joint_of_weather_dialogue_dialogue() {
        let joint = build_joint(&ex(&["深圳的气候怎么样", "十分潮湿"], "为什么会这样"));
        assert_eq!(joint.m(), 13);
        assert_eq!(joint.n(), 6);
        assert_eq!(joint.len(), 19);
        assert_eq!(joint.tokens[8], SEP);
        assert_eq!(joint.incomplete().concat(), "为什么会这样");
    }

    #[test]
    fn joint_single_and_double_context() {
        let joint = build_joint(&ex(&["a"], "b"));
        assert_eq!(joint.tokens, vec!["a", "b"]);
        assert_eq!(joint.boundary, 1);

        let joint = build_joint(&ex(&["a", "b"], "c"));
        assert_eq!(joint.tokens, vec!["a", SEP, "b", "c"]);
        assert_eq!(joint.boundary, 3);
    }

    #[test]
    fn example_requires_context() {
        let empty: [&str; 0] = [];
        assert!(matches!(
            DialogueExample::from_text(&empty, "x", None, TokenizeMode::Char),
            Err(TextError::NoContext)
        ));
    }

    #[test]
    fn truncation_keeps_recent_turns() {
        let e = ex(&["abcd", "ef", "gh"], "xy");
        // joint: abcd|ef|gh xy = 4+1+2+1+2+2 = 12
        assert_eq!(e.joint_len(), 12);
        let (t, dropped) = e.truncate_left(7).unwrap();
        assert_eq!(dropped, 5);
        assert_eq!(t.context, vec![vec!["e", "f"], vec!["g", "h"]]);
        // dropping "ef" leaves a dangling separator, which goes too
        let (t, dropped) = e.truncate_left(5).unwrap();
        assert_eq!(t.context, vec![vec!["g", "h"]]);
        assert_eq!(dropped, 8);
        assert_eq!(build_joint(&t).len(), 4);
        assert!(e.truncate_left(2).is_none());
    }

    #[test]
    fn truncation_drops_dangling_separator() {
        let e = ex(&["abc", "de"], "x");
        // abc|de x = 7; to 4 drops "abc|" exactly
        let (t, dropped) = e.truncate_left(4).unwrap();
        assert_eq!(dropped, 4);
        assert_eq!(t.context, vec![vec!["d", "e"]]);
        // to 5 needs 2: partial trim of first turn
        let (t, dropped) = e.truncate_left(5).unwrap();
        assert_eq!(dropped, 2);
        assert_eq!(build_joint(&t).tokens[0], "c");
    }
}
