//! Edit supervision: derive token-level edit matrices from gold rewrites and
//! apply edit programs back onto the incomplete utterance.
//!
//! A matrix has one row per context position and `N + 1` columns: one per
//! incomplete token plus a trailing sentinel column for appends.

mod derive;
mod lcs;
mod program;

pub use derive::{derive_edit_matrix, source_spans};
pub use lcs::{diff_spans, lcs, lcs_len, DiffSpan, DiffTag, Side};
pub use program::{apply_edits, extract_program, ColumnEdits, EditProgram};

use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum EditError {
    #[error("example has no gold rewrite")]
    MissingGold,
    #[error("malformed edit program: {0}")]
    MalformedProgram(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum EditLabel {
    #[default]
    None,
    Substitute,
    Insert,
}

impl EditLabel {
    pub const ALL: [EditLabel; 3] = [EditLabel::None, EditLabel::Substitute, EditLabel::Insert];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    /// Short code used in label files; `None` cells are never written.
    pub fn code(self) -> &'static str {
        match self {
            EditLabel::None => "N",
            EditLabel::Substitute => "S",
            EditLabel::Insert => "I",
        }
    }
}

/// `rows x cols` grid of labels, row-major. `cols` is `N + 1`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EditMatrix {
    rows: usize,
    cols: usize,
    labels: Vec<EditLabel>,
    /// Number of supervision tokens the edit space could not express.
    pub dropped_tokens: usize,
}

impl EditMatrix {
    pub fn new(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            labels: vec![EditLabel::None; rows * cols],
            dropped_tokens: 0,
        }
    }

    pub fn from_labels(rows: usize, cols: usize, labels: Vec<EditLabel>) -> Self {
        assert_eq!(labels.len(), rows * cols, "label grid size mismatch");
        Self {
            rows,
            cols,
            labels,
            dropped_tokens: 0,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn lossy(&self) -> bool {
        self.dropped_tokens > 0
    }

    pub fn get(&self, m: usize, n: usize) -> EditLabel {
        self.labels[m * self.cols + n]
    }

    pub fn set(&mut self, m: usize, n: usize, label: EditLabel) {
        self.labels[m * self.cols + n] = label;
    }

    pub fn labels(&self) -> &[EditLabel] {
        &self.labels
    }

    pub fn is_all_none(&self) -> bool {
        self.labels.iter().all(|&l| l == EditLabel::None)
    }

    /// Non-`None` cells as `(row, col, label)` in row-major order.
    pub fn cells(&self) -> Vec<(usize, usize, EditLabel)> {
        self.labels
            .iter()
            .enumerate()
            .filter(|(_, &l)| l != EditLabel::None)
            .map(|(i, &l)| (i / self.cols, i % self.cols, l))
            .collect()
    }
}
