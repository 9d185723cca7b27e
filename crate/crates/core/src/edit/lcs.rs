//! Longest common subsequence and [ADD]/[DEL] span extraction.

use std::ops::Range;

/// Aligned `(index in a, index in b)` pairs of one longest common subsequence.
///
/// Uses a suffix-length table and walks forward, taking a match whenever the
/// heads agree, otherwise skipping from `a` when that keeps the optimum and
/// from `b` only when it must. The result is the leftmost alignment in `a`.
pub fn lcs<T: PartialEq>(a: &[T], b: &[T]) -> Vec<(usize, usize)> {
    let (n, m) = (a.len(), b.len());
    let width = m + 1;
    let mut table = vec![0u32; (n + 1) * width];
    for i in (0..n).rev() {
        for j in (0..m).rev() {
            table[i * width + j] = if a[i] == b[j] {
                table[(i + 1) * width + j + 1] + 1
            } else {
                table[(i + 1) * width + j].max(table[i * width + j + 1])
            };
        }
    }
    let mut pairs = Vec::with_capacity(table[0] as usize);
    let (mut i, mut j) = (0, 0);
    while i < n && j < m {
        if a[i] == b[j] {
            pairs.push((i, j));
            i += 1;
            j += 1;
        } else if table[(i + 1) * width + j] >= table[i * width + j + 1] {
            i += 1;
        } else {
            j += 1;
        }
    }
    pairs
}

pub fn lcs_len<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    lcs(a, b).len()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Incomplete,
    Rewrite,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DiffTag {
    Add,
    Del,
}

/// A maximal run of non-LCS tokens on one side.
///
/// `slot` counts the LCS anchors strictly before the span, so a `Del` and an
/// `Add` with the same slot sit in the same gap and can be paired.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DiffSpan {
    pub side: Side,
    pub tag: DiffTag,
    pub range: Range<usize>,
    pub slot: usize,
}

/// Spans of `x` (incomplete) and `y` (rewrite) outside their LCS, ordered by
/// slot with the `Del` span of a slot before its `Add` span.
pub fn diff_spans<T: PartialEq>(x: &[T], y: &[T]) -> Vec<DiffSpan> {
    let anchors = lcs(x, y);
    let mut spans = Vec::new();
    let (mut prev_x, mut prev_y) = (0, 0);
    let ends = anchors
        .iter()
        .copied()
        .chain(std::iter::once((x.len(), y.len())));
    for (slot, (ax, ay)) in ends.enumerate() {
        if prev_x < ax {
            spans.push(DiffSpan {
                side: Side::Incomplete,
                tag: DiffTag::Del,
                range: prev_x..ax,
                slot,
            });
        }
        if prev_y < ay {
            spans.push(DiffSpan {
                side: Side::Rewrite,
                tag: DiffTag::Add,
                range: prev_y..ay,
                slot,
            });
        }
        prev_x = ax + 1;
        prev_y = ay + 1;
    }
    spans
}
