use std::ops::Range;

use super::lcs::{lcs, DiffTag};
use super::{diff_spans, EditError, EditLabel, EditMatrix};
use crate::text::{DialogueExample, JointSequence, SEP};

/// Splits `wanted` into pieces copied from `context`.
///
/// Greedily takes the longest prefix that occurs contiguously in the context
/// after the previous piece, preferring the rightmost (most recent)
/// occurrence. Tokens with no such occurrence are skipped and counted.
/// Returned ranges are strictly increasing and never cover a `[SEP]`.
pub fn source_spans<S: AsRef<str>>(wanted: &[S], context: &[String]) -> (Vec<Range<usize>>, usize) {
    let mut spans: Vec<Range<usize>> = Vec::new();
    let mut dropped = 0;
    let mut floor = 0;
    let mut p = 0;
    while p < wanted.len() {
        let found = (p + 1..=wanted.len())
            .rev()
            .find_map(|q| rightmost_occurrence(&wanted[p..q], context, floor).map(|s| (q, s)));
        match found {
            Some((q, start)) => {
                let end = start + (q - p);
                spans.push(start..end);
                floor = end;
                p = q;
            }
            None => {
                dropped += 1;
                p += 1;
            }
        }
    }
    (spans, dropped)
}

fn rightmost_occurrence<S: AsRef<str>>(
    needle: &[S],
    hay: &[String],
    floor: usize,
) -> Option<usize> {
    let k = needle.len();
    if hay.len() < floor + k {
        return None;
    }
    (floor..=hay.len() - k).rev().find(|&s| {
        hay[s..s + k]
            .iter()
            .zip(needle)
            .all(|(h, n)| h != SEP && h == n.as_ref())
    })
}

/// Builds the gold edit matrix for `example` over its joint sequence.
///
/// Within each LCS gap, a deleted run of `x` paired with an added run of the
/// rewrite becomes `Substitute` cells (source rows x deleted columns). An
/// unpaired added run becomes `Insert` cells in the column of the next anchor,
/// or the sentinel column when nothing follows. Added tokens that cannot be
/// copied from the context, and deletions with no paired addition, are
/// counted in `dropped_tokens`.
pub fn derive_edit_matrix(
    example: &DialogueExample,
    joint: &JointSequence,
) -> Result<EditMatrix, EditError> {
    let rewrite = example.rewrite.as_ref().ok_or(EditError::MissingGold)?;
    let x = joint.incomplete();
    let context = joint.context();
    let n = x.len();
    let mut matrix = EditMatrix::new(joint.m(), n + 1);

    let anchors = lcs(x, rewrite);
    let spans = diff_spans(x, rewrite);
    let slots = anchors.len() + 1;
    let mut dels: Vec<Option<Range<usize>>> = vec![None; slots];
    let mut adds: Vec<Option<Range<usize>>> = vec![None; slots];
    for span in spans {
        match span.tag {
            DiffTag::Del => dels[span.slot] = Some(span.range),
            DiffTag::Add => adds[span.slot] = Some(span.range),
        }
    }

    for slot in 0..slots {
        match (&dels[slot], &adds[slot]) {
            (Some(del), Some(add)) => {
                let (sources, dropped) = source_spans(&rewrite[add.clone()], context);
                matrix.dropped_tokens += dropped;
                for src in sources {
                    for m in src {
                        for col in del.clone() {
                            matrix.set(m, col, EditLabel::Substitute);
                        }
                    }
                }
            }
            (None, Some(add)) => {
                let anchor = anchors.get(slot).map_or(n, |&(ix, _)| ix);
                let (sources, dropped) = source_spans(&rewrite[add.clone()], context);
                matrix.dropped_tokens += dropped;
                for src in sources {
                    for m in src {
                        matrix.set(m, anchor, EditLabel::Insert);
                    }
                }
            }
            (Some(del), None) => matrix.dropped_tokens += del.len(),
            (None, None) => {}
        }
    }
    Ok(matrix)
}

#[cfg(test)]
#[allow(clippy::single_range_in_vec_init)]
mod tests {
    use super::*;
    use crate::text::{build_joint, TokenizeMode};

    fn example(ctx: &[&str], x: &str, y: &str) -> DialogueExample {
        DialogueExample::from_text(ctx, x, Some(y), TokenizeMode::Char).unwrap()
    }

    fn derive(e: &DialogueExample) -> EditMatrix {
        derive_edit_matrix(e, &build_joint(e)).unwrap()
    }

    #[test]
    fn weather_dialogue_cells() {
        let e = example(
            &["深圳的气候怎么样", "十分潮湿"],
            "为什么会这样",
            "深圳的气候为什么会十分潮湿",
        );
        let matrix = derive(&e);
        assert_eq!((matrix.rows(), matrix.cols()), (13, 7));
        assert!(!matrix.lossy());
        let mut expected = Vec::new();
        for m in 0..5 {
            expected.push((m, 0, EditLabel::Insert));
        }
        for m in 9..13 {
            expected.push((m, 4, EditLabel::Substitute));
            expected.push((m, 5, EditLabel::Substitute));
        }
        expected.sort_by_key(|&(m, n, _)| (m, n));
        assert_eq!(matrix.cells(), expected);
    }

    #[test]
    fn unchanged_rewrite_is_all_none() {
        let matrix = derive(&example(&["ab"], "cd", "cd"));
        assert!(matrix.is_all_none());
        assert!(!matrix.lossy());
    }

    #[test]
    fn unsourceable_token_is_dropped() {
        let matrix = derive(&example(&["ab"], "cd", "czd"));
        assert_eq!(matrix.dropped_tokens, 1);
        assert!(matrix.lossy());
        assert!(matrix.is_all_none());
    }

    #[test]
    fn missing_gold() {
        let e = DialogueExample::from_text(&["a"], "b", None, TokenizeMode::Char).unwrap();
        assert_eq!(
            derive_edit_matrix(&e, &build_joint(&e)),
            Err(EditError::MissingGold)
        );
    }

    #[test]
    fn append_uses_sentinel_column() {
        let matrix = derive(&example(&["ab"], "c", "cab"));
        assert_eq!(
            matrix.cells(),
            vec![(0, 1, EditLabel::Insert), (1, 1, EditLabel::Insert)]
        );
    }

    #[test]
    fn most_recent_occurrence_is_preferred() {
        // "ab" appears in both turns; the later turn sources it.
        let matrix = derive(&example(&["ab", "ab"], "c", "abc"));
        assert_eq!(
            matrix.cells(),
            vec![(3, 0, EditLabel::Insert), (4, 0, EditLabel::Insert)]
        );
    }

    #[test]
    fn unpaired_deletion_is_counted() {
        let matrix = derive(&example(&["ab"], "cd", "c"));
        assert_eq!(matrix.dropped_tokens, 1);
    }

    #[test]
    fn partial_source_keeps_prefix() {
        let ctx: Vec<String> = ["a", "b", SEP, "c"].iter().map(|s| s.to_string()).collect();
        let (spans, dropped) = source_spans(&["a", "b", "z", "c"], &ctx);
        assert_eq!(spans, vec![0..2, 3..4]);
        assert_eq!(dropped, 1);
        // pieces must move forward through the context
        let (spans, dropped) = source_spans(&["c", "a"], &ctx);
        assert_eq!(spans, vec![3..4]);
        assert_eq!(dropped, 1);
    }

    #[test]
    fn separator_rows_never_labelled() {
        let e = example(&["ab", "cd"], "x", "abxcd");
        let joint = build_joint(&e);
        let matrix = derive(&e);
        for n in 0..matrix.cols() {
            assert_eq!(matrix.get(2, n), EditLabel::None);
        }
        assert!(joint.is_sep_row(2));
    }
}
