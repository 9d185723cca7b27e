use serde::Serialize;

use crate::edit::derive_edit_matrix;
use crate::text::DialogueExample;

use super::metrics::{
    bleu, exact_match, rouge_l, rouge_n, Prf, RestorationCounts, BLEU_SMOOTHING_FROM_ORDER,
    ROUGE_L_BETA,
};
use super::{prepare, record, Split, TrainError, TrainedModel};
use crate::edit::{apply_edits, extract_program};

/// Fixed metric settings, repeated in every report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricConstants {
    pub bleu: &'static str,
    pub bleu_smoothing_from_order: usize,
    pub rouge: &'static str,
    pub rouge_l_beta: f64,
    pub restoration: &'static str,
}

impl Default for MetricConstants {
    fn default() -> Self {
        Self {
            bleu: "corpus-level, uniform weights, brevity penalty, add-one smoothing",
            bleu_smoothing_from_order: BLEU_SMOOTHING_FROM_ORDER,
            rouge: "sentence-level, averaged over examples; n-gram recall and LCS F",
            rouge_l_beta: ROUGE_L_BETA,
            restoration: "micro-averaged over n-grams containing a token of gold minus x",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RestorationReport {
    pub n1: Prf,
    pub n2: Prf,
    pub n3: Prf,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub constants: MetricConstants,
    pub examples: usize,
    pub truncated: usize,
    /// Examples whose incomplete utterance alone exceeds the model length;
    /// scored with the utterance unchanged.
    pub overlong: usize,
    pub em: f64,
    pub bleu1: f64,
    pub bleu2: f64,
    pub bleu4: f64,
    pub rouge1: f64,
    pub rouge2: f64,
    pub rouge_l: f64,
    pub restoration: RestorationReport,
    /// Percentage of non-separator cells labelled like the gold matrix.
    pub cell_accuracy: f64,
    /// Share of examples whose gold rewrite is not fully expressible.
    pub lossy_fraction: f64,
}

impl EvalReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

struct Outcome {
    pred: Vec<String>,
    gold: Vec<String>,
    x: Vec<String>,
    cells_right: usize,
    cells: usize,
    lossy: bool,
    truncated: bool,
    overlong: bool,
}

/// Worker count for evaluation: `RSMLP_THREADS` when set, otherwise the
/// machine's parallelism.
pub fn thread_count() -> usize {
    std::env::var("RSMLP_THREADS")
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

fn score_one(model: &TrainedModel, split: &Split<'_>, i: usize) -> Result<Outcome, TrainError> {
    let example: &DialogueExample = &split.examples[i];
    let gold = example.rewrite.clone().ok_or(TrainError::MissingGold(i))?;
    let config = model.config();
    let Some(p) = prepare(example, &model.vocab, config, record(split, config, i)?)? else {
        return Ok(Outcome {
            pred: example.incomplete.clone(),
            gold,
            x: example.incomplete.clone(),
            cells_right: 0,
            cells: 0,
            lossy: false,
            truncated: false,
            overlong: true,
        });
    };
    let target = derive_edit_matrix(&p.example, &p.joint)?;
    let predicted = model.model.forward(&p.input)?.grid;
    let program = extract_program(&predicted);
    let pred = apply_edits(p.joint.incomplete(), &program, p.joint.context())?;
    let (mut cells_right, mut cells) = (0, 0);
    for m in (0..target.rows()).filter(|&m| !p.joint.is_sep_row(m)) {
        for n in 0..target.cols() {
            cells += 1;
            cells_right += (target.get(m, n) == predicted.get(m, n)) as usize;
        }
    }
    Ok(Outcome {
        pred,
        gold,
        x: example.incomplete.clone(),
        cells_right,
        cells,
        lossy: target.lossy(),
        truncated: p.dropped > 0,
        overlong: false,
    })
}

/// Rewrites every example in parallel over frozen weights and scores the
/// results against the gold rewrites. The report does not depend on the
/// number of threads.
pub fn evaluate(model: &TrainedModel, split: Split<'_>) -> Result<EvalReport, TrainError> {
    let total = split.examples.len();
    if total == 0 {
        return Err(TrainError::EmptyCorpus);
    }
    let threads = thread_count().min(total);
    let chunk = total.div_ceil(threads);
    let results: Vec<Result<Outcome, TrainError>> = std::thread::scope(|s| {
        let handles: Vec<_> = (0..threads)
            .map(|t| {
                let split = &split;
                s.spawn(move || {
                    (t * chunk..((t + 1) * chunk).min(total))
                        .map(|i| score_one(model, split, i))
                        .collect::<Vec<_>>()
                })
            })
            .collect();
        handles
            .into_iter()
            .flat_map(|h| h.join().expect("evaluation worker panicked"))
            .collect()
    });
    let outcomes = results.into_iter().collect::<Result<Vec<_>, _>>()?;

    let n = total as f64;
    let mean = |f: &dyn Fn(&Outcome) -> f64| outcomes.iter().map(f).sum::<f64>() / n;
    let pairs: Vec<(&[String], &[String])> = outcomes
        .iter()
        .map(|o| (&o.pred[..], &o.gold[..]))
        .collect();
    let mut restoration = [RestorationCounts::default(); 3];
    for o in &outcomes {
        for (k, counts) in restoration.iter_mut().enumerate() {
            counts.add(&o.pred, &o.gold, &o.x, k + 1);
        }
    }
    let (right, cells) = outcomes
        .iter()
        .fold((0, 0), |(r, c), o| (r + o.cells_right, c + o.cells));
    Ok(EvalReport {
        constants: MetricConstants::default(),
        examples: total,
        truncated: outcomes.iter().filter(|o| o.truncated).count(),
        overlong: outcomes.iter().filter(|o| o.overlong).count(),
        em: mean(&|o| exact_match(&o.pred, &o.gold)),
        bleu1: bleu(&pairs, 1),
        bleu2: bleu(&pairs, 2),
        bleu4: bleu(&pairs, 4),
        rouge1: mean(&|o| rouge_n(&o.pred, &o.gold, 1)),
        rouge2: mean(&|o| rouge_n(&o.pred, &o.gold, 2)),
        rouge_l: mean(&|o| rouge_l(&o.pred, &o.gold)),
        restoration: RestorationReport {
            n1: restoration[0].score(),
            n2: restoration[1].score(),
            n3: restoration[2].score(),
        },
        cell_accuracy: if cells == 0 {
            0.0
        } else {
            100.0 * right as f64 / cells as f64
        },
        lossy_fraction: outcomes.iter().filter(|o| o.lossy).count() as f64 / n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModelConfig;
    use crate::text::{parse_corpus, TokenizeMode};
    use crate::train::{train, TrainConfig};

    #[test]
    fn untrained_report_scores_x() {
        let data = parse_corpus(
            include_str!("../../data/toy_dialogues.jsonl"),
            TokenizeMode::Char,
        )
        .examples;
        let out = train(
            Split::new(&data),
            None,
            ModelConfig::default(),
            &TrainConfig {
                epochs: 0,
                ..Default::default()
            },
        )
        .unwrap();
        let report = evaluate(&out.model, Split::new(&data)).unwrap();
        assert_eq!(report.examples, 32);
        assert_eq!(report.em, 0.0);
        assert_eq!(report.lossy_fraction, 0.0);
        assert!(report.cell_accuracy > 50.0 && report.cell_accuracy < 100.0);
        // x is never a restoration, so nothing predicted counts
        assert_eq!(report.restoration.n1.p, 0.0);
        let json = report.to_json();
        assert!(json.contains("\"rouge_l_beta\": 1.2"));
        assert_eq!(
            evaluate(&out.model, Split::new(&data)).unwrap().to_json(),
            json
        );
    }

    #[test]
    fn missing_gold_and_empty() {
        let data = parse_corpus(
            include_str!("../../data/toy_dialogues.jsonl"),
            TokenizeMode::Char,
        )
        .examples;
        let out = train(
            Split::new(&data[..2]),
            None,
            ModelConfig::default(),
            &TrainConfig {
                epochs: 0,
                ..Default::default()
            },
        )
        .unwrap();
        let mut nogold = data[0].clone();
        nogold.rewrite = None;
        assert!(matches!(
            evaluate(&out.model, Split::new(&[nogold])),
            Err(TrainError::MissingGold(0))
        ));
        assert!(matches!(
            evaluate(&out.model, Split::new(&[])),
            Err(TrainError::EmptyCorpus)
        ));
    }
}
