//! Training, rewriting, evaluation and latency benchmarking.

mod bench;
mod config;
mod eval;
pub mod metrics;

pub use bench::{bench, BenchReport};
pub use config::{RunConfig, KEYS as CONFIG_KEYS};
pub use eval::{evaluate, thread_count, EvalReport, MetricConstants, RestorationReport};

use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::edit::{apply_edits, derive_edit_matrix, extract_program, EditError, EditMatrix};
use crate::model::{
    EmbeddingRecord, EncoderKind, LossBatch, ModelConfig, ModelError, ModelInput,
    PrecomputedEmbeddings, Rsmlp,
};
use crate::tensor::ops::Mode;
use crate::tensor::{read_checkpoint, write_checkpoint, Adam, Scalar, Tape, Tensor, TensorError};
use crate::text::{
    build_joint, build_vocab, DialogueExample, JointSequence, TextError, Vocabulary,
};

#[derive(Debug, Error)]
pub enum TrainError {
    #[error(transparent)]
    Text(#[from] TextError),
    #[error(transparent)]
    Edit(#[from] EditError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error("config line {line}: {reason}")]
    Config { line: usize, reason: String },
    #[error("training corpus is empty")]
    EmptyCorpus,
    #[error("all {0} training examples are too long to fit the model")]
    AllOverlong(usize),
    #[error("example {0} has no gold rewrite")]
    MissingGold(usize),
    #[error("embeddings: {0}")]
    Embeddings(String),
    #[error("non-finite gradient in epoch {0}")]
    NonFinite(usize),
    #[error("bench: {0}")]
    Bench(String),
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl TrainError {
    /// Usage mistakes as opposed to bad data.
    pub fn is_config(&self) -> bool {
        matches!(self, TrainError::Config { .. } | TrainError::Bench(_))
            || matches!(self, TrainError::Model(ModelError::InvalidConfig(_)))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    /// Examples per optimizer step.
    pub batch_size: usize,
    pub lr: f64,
    pub seed: u64,
    /// `None`, `Substitute`, `Insert` loss weights; inverse label frequency
    /// when unset.
    pub class_weights: Option<[f64; 3]>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 20,
            batch_size: 8,
            lr: 1e-5,
            seed: 0,
            class_weights: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |reason: &str| TrainError::Config {
            line: 0,
            reason: reason.to_string(),
        };
        if self.batch_size == 0 {
            return Err(bad("batch_size must be positive"));
        }
        if !(self.lr.is_finite() && self.lr > 0.0) {
            return Err(bad("lr must be positive"));
        }
        if let Some(ws) = self.class_weights {
            if ws.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
                return Err(bad("class weights must be positive"));
            }
        }
        Ok(())
    }
}

/// Examples plus, for the precomputed encoder, their embeddings in the same
/// order.
#[derive(Debug, Clone, Copy)]
pub struct Split<'a> {
    pub examples: &'a [DialogueExample],
    pub embeddings: Option<&'a PrecomputedEmbeddings>,
}

impl<'a> Split<'a> {
    pub fn new(examples: &'a [DialogueExample]) -> Self {
        Self {
            examples,
            embeddings: None,
        }
    }

    pub fn with_embeddings(mut self, embeddings: &'a PrecomputedEmbeddings) -> Self {
        self.embeddings = Some(embeddings);
        self
    }
}

/// An example cut to fit the model and mapped to ids.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub example: DialogueExample,
    pub joint: JointSequence,
    pub input: ModelInput<f32>,
    /// Leading joint tokens removed by left truncation.
    pub dropped: usize,
}

/// Left-truncates `example` to the model's length and attaches its
/// embedding rows. `Ok(None)` when the incomplete utterance alone is too long.
pub fn prepare(
    example: &DialogueExample,
    vocab: &Vocabulary,
    config: &ModelConfig,
    record: Option<&EmbeddingRecord>,
) -> Result<Option<Prepared>, TrainError> {
    let Some((example, dropped)) = example.truncate_left(config.max_len) else {
        return Ok(None);
    };
    let joint = build_joint(&example);
    let mut input = ModelInput::from_joint(&joint, vocab);
    if config.encoder == EncoderKind::Precomputed {
        let record = record.ok_or_else(|| {
            TrainError::Embeddings("precomputed encoder needs an RSME file".into())
        })?;
        let full = joint.len() + dropped;
        if record.rows != full || record.dim != config.dim {
            return Err(TrainError::Embeddings(format!(
                "record {} is [{}, {}], expected [{full}, {}]",
                record.ordinal, record.rows, record.dim, config.dim
            )));
        }
        let rows = record.data[dropped * record.dim..].to_vec();
        input = input.with_embeddings(Tensor::new(&[joint.len(), record.dim], rows)?);
    }
    Ok(Some(Prepared {
        example,
        joint,
        input,
        dropped,
    }))
}

fn record<'a>(
    split: &Split<'a>,
    config: &ModelConfig,
    i: usize,
) -> Result<Option<&'a EmbeddingRecord>, TrainError> {
    if config.encoder != EncoderKind::Precomputed {
        return Ok(None);
    }
    let e = split
        .embeddings
        .ok_or_else(|| TrainError::Embeddings("precomputed encoder needs an RSME file".into()))?;
    if e.len() != split.examples.len() {
        return Err(TrainError::Embeddings(format!(
            "{} records for {} examples",
            e.len(),
            split.examples.len()
        )));
    }
    Ok(e.get(i))
}

/// Cell labels row-major, and which cells count toward the loss.
pub fn cell_targets<T: Scalar>(
    gold: &EditMatrix,
    input: &ModelInput<T>,
) -> (Vec<usize>, Vec<bool>) {
    let cols = gold.cols();
    let labels = gold.labels().iter().map(|l| l.index()).collect();
    let mask = (0..gold.rows() * cols)
        .map(|c| !input.is_sep_row(c / cols))
        .collect();
    (labels, mask)
}

/// A pooled 64-bit batch with gold cell targets, as used by gradient checks.
/// Examples are left-truncated to the model length; ones that cannot fit
/// are left out.
pub fn loss_batch(
    examples: &[DialogueExample],
    vocab: &Vocabulary,
    config: &ModelConfig,
    weights: [f64; 3],
) -> Result<LossBatch, TrainError> {
    let mut batch = LossBatch {
        inputs: Vec::new(),
        labels: Vec::new(),
        mask: Vec::new(),
        weights,
    };
    for (i, example) in examples.iter().enumerate() {
        if example.rewrite.is_none() {
            return Err(TrainError::MissingGold(i));
        }
        let Some((example, _)) = example.truncate_left(config.max_len) else {
            continue;
        };
        let joint = build_joint(&example);
        let input = ModelInput::<f64>::from_joint(&joint, vocab);
        let (labels, mask) = cell_targets(&derive_edit_matrix(&example, &joint)?, &input);
        batch.labels.extend(labels);
        batch.mask.extend(mask);
        batch.inputs.push(input);
    }
    if batch.inputs.is_empty() {
        return Err(TrainError::AllOverlong(examples.len()));
    }
    Ok(batch)
}

/// Inverse label frequency over the unmasked cells, scaled to mean 1.
pub fn inverse_frequency(labels: &[Vec<usize>], masks: &[Vec<bool>]) -> [f64; 3] {
    let mut counts = [0usize; 3];
    for (ls, ms) in labels.iter().zip(masks) {
        for (&l, &m) in ls.iter().zip(ms) {
            if m {
                counts[l] += 1;
            }
        }
    }
    let inv = counts.map(|c| 1.0 / c.max(1) as f64);
    let mean = inv.iter().sum::<f64>() / 3.0;
    inv.map(|w| w / mean)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochLog {
    pub epoch: usize,
    pub mean_loss: f64,
    pub median_loss: f64,
    pub dev_em: Option<f64>,
}

pub struct TrainOutcome {
    /// Best dev-EM model, or the last one without a dev split.
    pub model: TrainedModel,
    pub best_epoch: Option<usize>,
    pub history: Vec<EpochLog>,
    pub truncated: usize,
    pub skipped: usize,
    pub class_weights: [f64; 3],
}

/// Fits a fresh model on `train`. The vocabulary is built from the training
/// examples; `model_config.vocab_size` is overwritten to match it.
pub fn train(
    train: Split<'_>,
    dev: Option<Split<'_>>,
    model_config: ModelConfig,
    config: &TrainConfig,
) -> Result<TrainOutcome, TrainError> {
    config.validate()?;
    if train.examples.is_empty() {
        return Err(TrainError::EmptyCorpus);
    }
    let vocab = build_vocab(train.examples, model_config.mode)?;
    let model_config = ModelConfig {
        vocab_size: vocab.len(),
        ..model_config
    };
    let mut model = Rsmlp::<f32>::new(model_config, config.seed)?;

    let mut prepared = Vec::new();
    let (mut truncated, mut skipped) = (0, 0);
    for (i, example) in train.examples.iter().enumerate() {
        if example.rewrite.is_none() {
            return Err(TrainError::MissingGold(i));
        }
        match prepare(
            example,
            &vocab,
            &model_config,
            record(&train, &model_config, i)?,
        )? {
            Some(p) => {
                truncated += (p.dropped > 0) as usize;
                prepared.push(p);
            }
            None => skipped += 1,
        }
    }
    if prepared.is_empty() {
        return Err(TrainError::AllOverlong(skipped));
    }
    let mut labels = Vec::with_capacity(prepared.len());
    let mut masks = Vec::with_capacity(prepared.len());
    for p in &prepared {
        let gold = derive_edit_matrix(&p.example, &p.joint)?;
        let (l, m) = cell_targets(&gold, &p.input);
        labels.push(l);
        masks.push(m);
    }
    let class_weights = config
        .class_weights
        .unwrap_or_else(|| inverse_frequency(&labels, &masks));
    let weights = class_weights.map(|w| w as f32);

    let adam = Adam::with_lr(config.lr);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..prepared.len()).collect();
    let mut history = Vec::with_capacity(config.epochs);
    let mut best: Option<(f64, usize, Rsmlp<f32>)> = None;

    for epoch in 1..=config.epochs {
        order.shuffle(&mut rng);
        let mut losses = Vec::new();
        for batch in order.chunks(config.batch_size) {
            let mut tape = Tape::new();
            let inputs: Vec<&ModelInput<f32>> = batch.iter().map(|&i| &prepared[i].input).collect();
            let out = model.forward_batch(&mut tape, &inputs, Mode::Train)?;
            let batch_labels: Vec<usize> = batch
                .iter()
                .flat_map(|&i| labels[i].iter().copied())
                .collect();
            let batch_mask: Vec<bool> = batch
                .iter()
                .flat_map(|&i| masks[i].iter().copied())
                .collect();
            if !batch_mask.iter().any(|&m| m) {
                continue;
            }
            let loss =
                tape.weighted_cross_entropy(out.logits, &batch_labels, &weights, &batch_mask)?;
            losses.push(tape.value(loss).item() as f64);
            tape.backward(loss, model.params_mut())?;
            if !model.params().grads_finite() {
                return Err(TrainError::NonFinite(epoch));
            }
            if let Some(stats) = &out.batch_stats {
                model.update_running(stats);
            }
            adam.step(model.params_mut());
        }
        let mean_loss = losses.iter().sum::<f64>() / losses.len().max(1) as f64;
        let median_loss = median(&mut losses);
        let dev_em = match dev {
            Some(split) => {
                let snapshot = TrainedModel {
                    model: model.clone(),
                    vocab: vocab.clone(),
                };
                Some(evaluate(&snapshot, split)?.em)
            }
            None => None,
        };
        if let Some(em) = dev_em {
            if best.as_ref().is_none_or(|(b, _, _)| em > *b) {
                best = Some((em, epoch, model.clone()));
            }
        }
        history.push(EpochLog {
            epoch,
            mean_loss,
            median_loss,
            dev_em,
        });
    }
    let (best_epoch, model) = match best {
        Some((_, epoch, m)) => (Some(epoch), m),
        None => (None, model),
    };
    Ok(TrainOutcome {
        model: TrainedModel { model, vocab },
        best_epoch,
        history,
        truncated,
        skipped,
        class_weights,
    })
}

fn median(values: &mut [f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    values.sort_by(f64::total_cmp);
    let mid = values.len() / 2;
    if values.len().is_multiple_of(2) {
        (values[mid - 1] + values[mid]) / 2.0
    } else {
        values[mid]
    }
}

/// Output of one rewrite.
#[derive(Debug, Clone, PartialEq)]
pub struct Rewrite {
    pub tokens: Vec<String>,
    /// `None` when the incomplete utterance alone exceeds the model length
    /// and `tokens` is the utterance unchanged.
    pub grid: Option<EditMatrix>,
    pub dropped: usize,
}

/// A model together with the vocabulary it was trained on.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    pub model: Rsmlp<f32>,
    pub vocab: Vocabulary,
}

impl TrainedModel {
    /// Where the vocabulary of the checkpoint at `path` lives.
    pub fn vocab_path(path: &Path) -> PathBuf {
        let mut s = path.as_os_str().to_owned();
        s.push(".vocab");
        PathBuf::from(s)
    }

    pub fn config(&self) -> &ModelConfig {
        self.model.config()
    }

    pub fn checkpoint_bytes(&self) -> Result<Vec<u8>, TrainError> {
        Ok(self.model.to_checkpoint().to_bytes()?)
    }

    pub fn save(&self, path: &Path) -> Result<(), TrainError> {
        write_checkpoint(path, &self.model.to_checkpoint())?;
        self.vocab.save(&Self::vocab_path(path))?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, TrainError> {
        let model = Rsmlp::from_checkpoint(&read_checkpoint(path)?)?;
        let vocab = Vocabulary::load(&Self::vocab_path(path), model.config().mode)?;
        if vocab.len() != model.config().vocab_size {
            return Err(ModelError::IncompatibleCheckpoint(format!(
                "vocabulary has {} entries, checkpoint expects {}",
                vocab.len(),
                model.config().vocab_size
            ))
            .into());
        }
        Ok(Self { model, vocab })
    }

    /// Forward, argmax, program extraction and application. An all-`None`
    /// grid returns the incomplete utterance unchanged.
    pub fn rewrite(
        &self,
        example: &DialogueExample,
        record: Option<&EmbeddingRecord>,
    ) -> Result<Rewrite, TrainError> {
        let Some(p) = prepare(example, &self.vocab, self.config(), record)? else {
            return Ok(Rewrite {
                tokens: example.incomplete.clone(),
                grid: None,
                dropped: 0,
            });
        };
        let prediction = self.model.forward(&p.input)?;
        let program = extract_program(&prediction.grid);
        let tokens = apply_edits(p.joint.incomplete(), &program, p.joint.context())?;
        Ok(Rewrite {
            tokens,
            grid: Some(prediction.grid),
            dropped: p.dropped,
        })
    }

    /// Rewrites raw text. With no context turn there is nothing to copy from
    /// and the utterance comes back as tokenized.
    pub fn rewrite_text<S: AsRef<str>>(
        &self,
        context: &[S],
        utterance: &str,
    ) -> Result<String, TrainError> {
        let mode = self.config().mode;
        let turns: Vec<&str> = context
            .iter()
            .map(|s| s.as_ref())
            .filter(|s| !s.trim().is_empty())
            .collect();
        if turns.is_empty() {
            let x = crate::text::tokenize(utterance, mode)?;
            return Ok(mode.detokenize(&x));
        }
        let example = DialogueExample::from_text(&turns, utterance, None, mode)?;
        let out = self.rewrite(&example, None)?;
        Ok(mode.detokenize(&out.tokens))
    }
}
