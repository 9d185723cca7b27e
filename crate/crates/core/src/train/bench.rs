use std::time::Instant;

use serde::Serialize;

use crate::edit::{apply_edits, extract_program};
use crate::model::{EncoderKind, ModelInput};
use crate::tensor::Tensor;
use crate::text::{SEP_ID, UNK_ID};

use super::{TrainError, TrainedModel};

pub const WARMUP: usize = 10;
pub const MIN_ITERS: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchReport {
    pub len: usize,
    pub iters: usize,
    pub warmup: usize,
    pub p50_ms: f64,
    pub p95_ms: f64,
    pub mean_ms: f64,
    pub param_count: usize,
    pub checkpoint_bytes: usize,
    pub hardware: String,
}

impl BenchReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

fn hardware_note() -> String {
    let cores = std::thread::available_parallelism().map_or(1, |n| n.get());
    format!(
        "{}-{}, {cores} logical cores available, measured on 1 thread",
        std::env::consts::ARCH,
        std::env::consts::OS
    )
}

/// Nearest-rank percentile of sorted samples.
fn percentile(sorted: &[f64], q: f64) -> f64 {
    let rank = ((q * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len());
    sorted[rank - 1]
}

/// A dialogue of `len` joint tokens: two context turns filling three
/// quarters of the sequence, then the incomplete utterance.
fn synthetic_input(model: &TrainedModel, len: usize) -> ModelInput<f32> {
    let config = model.config();
    let words = (model.vocab.len() as u32).saturating_sub(UNK_ID + 1).max(1);
    let boundary = (len * 3 / 4).clamp(1, len - 1);
    let mut ids: Vec<u32> = (0..len as u32).map(|i| UNK_ID + 1 + i % words).collect();
    if boundary >= 3 {
        ids[boundary / 2] = SEP_ID;
    }
    let mut input = ModelInput {
        ids,
        boundary,
        embeddings: None,
    };
    if config.encoder == EncoderKind::Precomputed {
        let data = (0..len * config.dim)
            .map(|i| ((i % 17) as f32 - 8.0) / 8.0)
            .collect();
        input.embeddings = Some(Tensor::new(&[len, config.dim], data).expect("shape matches data"));
    }
    input
}

/// Times single-dialogue forward plus decoding on the calling thread.
pub fn bench(model: &TrainedModel, len: usize, iters: usize) -> Result<BenchReport, TrainError> {
    let max = model.config().max_len;
    if len < 2 || len > max {
        return Err(TrainError::Bench(format!(
            "len must be in 2..={max}, got {len}"
        )));
    }
    if iters < MIN_ITERS {
        return Err(TrainError::Bench(format!(
            "iters must be at least {MIN_ITERS}, got {iters}"
        )));
    }
    let input = synthetic_input(model, len);
    let tokens = model.vocab.decode(&input.ids);
    let (context, x) = tokens.split_at(input.boundary);
    let run = || -> Result<usize, TrainError> {
        let grid = model.model.forward(&input)?.grid;
        let program = extract_program(&grid);
        Ok(apply_edits(x, &program, context)?.len())
    };
    for _ in 0..WARMUP {
        std::hint::black_box(run()?);
    }
    let mut samples = Vec::with_capacity(iters);
    for _ in 0..iters {
        let start = Instant::now();
        std::hint::black_box(run()?);
        samples.push(start.elapsed().as_secs_f64() * 1e3);
    }
    let mean_ms = samples.iter().sum::<f64>() / iters as f64;
    samples.sort_by(f64::total_cmp);
    Ok(BenchReport {
        len,
        iters,
        warmup: WARMUP,
        p50_ms: percentile(&samples, 0.5),
        p95_ms: percentile(&samples, 0.95),
        mean_ms,
        param_count: model.model.params().scalar_count(),
        checkpoint_bytes: model.checkpoint_bytes()?.len(),
        hardware: hardware_note(),
    })
}
