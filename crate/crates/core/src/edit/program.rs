use std::ops::Range;

use super::{EditError, EditLabel, EditMatrix};
use crate::text::SEP;

/// Edits anchored at one column of the incomplete utterance.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ColumnEdits {
    /// Context spans emitted before the column's token.
    pub inserts: Vec<Range<usize>>,
    /// Context spans replacing the column's token.
    pub substitute: Vec<Range<usize>>,
}

impl ColumnEdits {
    pub fn is_empty(&self) -> bool {
        self.inserts.is_empty() && self.substitute.is_empty()
    }
}

/// Per-column edits over `N + 1` columns; the last one is the append sentinel.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EditProgram {
    pub columns: Vec<ColumnEdits>,
}

impl EditProgram {
    pub fn empty(n: usize) -> Self {
        Self {
            columns: vec![ColumnEdits::default(); n + 1],
        }
    }

    pub fn is_empty(&self) -> bool {
        self.columns.iter().all(ColumnEdits::is_empty)
    }

    /// Paints the program into a `rows x (N + 1)` label grid.
    pub fn to_matrix(&self, rows: usize) -> EditMatrix {
        let mut matrix = EditMatrix::new(rows, self.columns.len());
        for (n, col) in self.columns.iter().enumerate() {
            for m in col.inserts.iter().cloned().flatten() {
                matrix.set(m, n, EditLabel::Insert);
            }
            for m in col.substitute.iter().cloned().flatten() {
                matrix.set(m, n, EditLabel::Substitute);
            }
        }
        matrix
    }
}

fn runs(rows: usize, mut hit: impl FnMut(usize) -> bool) -> Vec<Range<usize>> {
    let mut out = Vec::new();
    let mut start = None;
    for m in 0..=rows {
        let on = m < rows && hit(m);
        match (on, start) {
            (true, None) => start = Some(m),
            (false, Some(s)) => {
                out.push(s..m);
                start = None;
            }
            _ => {}
        }
    }
    out
}

/// Reads maximal row runs per column. `Substitute` in the sentinel column has
/// no token to replace and is ignored.
pub fn extract_program(matrix: &EditMatrix) -> EditProgram {
    let rows = matrix.rows();
    let sentinel = matrix.cols() - 1;
    let columns = (0..matrix.cols())
        .map(|n| ColumnEdits {
            inserts: runs(rows, |m| matrix.get(m, n) == EditLabel::Insert),
            substitute: if n == sentinel {
                Vec::new()
            } else {
                runs(rows, |m| matrix.get(m, n) == EditLabel::Substitute)
            },
        })
        .collect();
    EditProgram { columns }
}

fn validate(program: &EditProgram, n: usize, m: usize) -> Result<(), EditError> {
    if program.columns.len() != n + 1 {
        return Err(EditError::MalformedProgram(format!(
            "program has {} columns, utterance needs {}",
            program.columns.len(),
            n + 1
        )));
    }
    if !program.columns[n].substitute.is_empty() {
        return Err(EditError::MalformedProgram(
            "sentinel column cannot substitute".into(),
        ));
    }
    for (col, edits) in program.columns.iter().enumerate() {
        for span in edits.inserts.iter().chain(&edits.substitute) {
            if span.start >= span.end || span.end > m {
                return Err(EditError::MalformedProgram(format!(
                    "span {span:?} at column {col} outside context of length {m}"
                )));
            }
        }
    }
    Ok(())
}

/// Applies `program` to the incomplete utterance `x`.
///
/// Walking the columns left to right: insert spans are emitted first, then
/// the column's token unless it belongs to a run of substituted columns. A
/// substituted run emits the union of its source rows once, at its first
/// column. `[SEP]` tokens are never emitted.
pub fn apply_edits<S: AsRef<str>>(
    x: &[S],
    program: &EditProgram,
    context: &[S],
) -> Result<Vec<String>, EditError> {
    let n = x.len();
    validate(program, n, context.len())?;
    let emit = |out: &mut Vec<String>, rows: &mut dyn Iterator<Item = usize>| {
        for m in rows {
            let tok = context[m].as_ref();
            if tok != SEP {
                out.push(tok.to_string());
            }
        }
    };

    let mut out = Vec::with_capacity(n);
    let mut col = 0;
    while col < n {
        let edits = &program.columns[col];
        emit(&mut out, &mut edits.inserts.iter().cloned().flatten());
        if edits.substitute.is_empty() {
            out.push(x[col].as_ref().to_string());
            col += 1;
            continue;
        }
        let mut end = col + 1;
        while end < n && !program.columns[end].substitute.is_empty() {
            end += 1;
        }
        let mut rows: Vec<usize> = program.columns[col..end]
            .iter()
            .flat_map(|c| c.substitute.iter().cloned().flatten())
            .collect();
        rows.sort_unstable();
        rows.dedup();
        emit(&mut out, &mut rows.into_iter());
        // inserts anchored inside a run land after its source
        for later in &program.columns[col + 1..end] {
            emit(&mut out, &mut later.inserts.iter().cloned().flatten());
        }
        col = end;
    }
    emit(
        &mut out,
        &mut program.columns[n].inserts.iter().cloned().flatten(),
    );
    Ok(out)
}

#[cfg(test)]
#[allow(clippy::single_range_in_vec_init)]
mod tests {
    use super::*;
    use crate::edit::derive_edit_matrix;
    use crate::text::{build_joint, DialogueExample, TokenizeMode};

    fn toks(s: &str) -> Vec<String> {
        s.chars().map(String::from).collect()
    }

    #[test]
    fn weather_dialogue_program_and_rewrite() {
        let e = DialogueExample::from_text(
            &["深圳的气候怎么样", "十分潮湿"],
            "为什么会这样",
            Some("深圳的气候为什么会十分潮湿"),
            TokenizeMode::Char,
        )
        .unwrap();
        let joint = build_joint(&e);
        let program = extract_program(&derive_edit_matrix(&e, &joint).unwrap());
        let mut expected = EditProgram::empty(6);
        expected.columns[0].inserts = vec![0..5];
        expected.columns[4].substitute = vec![9..13];
        expected.columns[5].substitute = vec![9..13];
        assert_eq!(program, expected);
        let out = apply_edits(joint.incomplete(), &program, joint.context()).unwrap();
        assert_eq!(out.concat(), "深圳的气候为什么会十分潮湿");
    }

    #[test]
    fn empty_program_is_identity() {
        let x = toks("abc");
        let out = apply_edits(&x, &EditProgram::empty(3), &toks("zz")).unwrap();
        assert_eq!(out, x);
        assert!(extract_program(&EditMatrix::new(4, 4)).is_empty());
    }

    #[test]
    fn sentinel_insert_appends() {
        let mut p = EditProgram::empty(2);
        p.columns[2].inserts = vec![1..3];
        let out = apply_edits(&toks("ab"), &p, &toks("xyz")).unwrap();
        assert_eq!(out.concat(), "abyz");
    }

    #[test]
    fn separated_insert_runs_stay_in_context_order() {
        let mut m = EditMatrix::new(6, 2);
        for r in [4, 0, 1] {
            m.set(r, 0, EditLabel::Insert);
        }
        let p = extract_program(&m);
        assert_eq!(p.columns[0].inserts, vec![0..2, 4..5]);
        assert_eq!(p.to_matrix(6), m);
    }

    #[test]
    fn separator_tokens_not_emitted() {
        let ctx: Vec<String> = vec!["a".into(), SEP.into(), "b".into()];
        let mut p = EditProgram::empty(1);
        p.columns[0].inserts = vec![0..3];
        let out = apply_edits(&toks("x"), &p, &ctx).unwrap();
        assert_eq!(out.concat(), "abx");
    }

    #[test]
    fn out_of_range_program_rejected() {
        let mut p = EditProgram::empty(1);
        p.columns[0].inserts = vec![0..9];
        assert!(matches!(
            apply_edits(&toks("x"), &p, &toks("ab")),
            Err(EditError::MalformedProgram(_))
        ));
        assert!(apply_edits(&toks("xy"), &EditProgram::empty(1), &toks("ab")).is_err());
        let mut p = EditProgram::empty(1);
        p.columns[1].substitute = vec![0..1];
        assert!(apply_edits(&toks("x"), &p, &toks("ab")).is_err());
    }

    #[test]
    fn sentinel_substitute_ignored_on_extract() {
        let mut m = EditMatrix::new(2, 2);
        m.set(0, 1, EditLabel::Substitute);
        assert!(extract_program(&m).is_empty());
    }

    #[test]
    fn substitute_run_emits_union_once() {
        let mut p = EditProgram::empty(3);
        p.columns[0].substitute = vec![0..1];
        p.columns[1].substitute = vec![0..2];
        let out = apply_edits(&toks("abc"), &p, &toks("xy")).unwrap();
        assert_eq!(out.concat(), "xyc");
    }
}
