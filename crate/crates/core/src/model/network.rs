use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::edit::{EditLabel, EditMatrix};
use crate::tensor::ops::{Mode, RunningStats};
use crate::tensor::{BatchStats, Checkpoint, ParamId, ParamStore, Scalar, Tape, Tensor, Var};
use crate::text::{JointSequence, Vocabulary, SEP_ID};

use super::{EncoderKind, ModelConfig, ModelError};

const RUNNING_MEAN: &str = "bn_running.mean";
const RUNNING_VAR: &str = "bn_running.var";
const ADAM_M: &str = "adam.m.";
const ADAM_V: &str = "adam.v.";
const ADAM_STEP: &str = "adam.step";
const META_CONFIG: &str = "meta.config";

/// One dialogue ready for the network.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelInput<T> {
    pub ids: Vec<u32>,
    /// Context length `M`; `ids[boundary..]` is the incomplete utterance.
    pub boundary: usize,
    /// `[L, D]` rows for the precomputed encoder.
    pub embeddings: Option<Tensor<T>>,
}

impl<T: Scalar> ModelInput<T> {
    pub fn from_joint(joint: &JointSequence, vocab: &Vocabulary) -> Self {
        Self {
            ids: vocab.encode(&joint.tokens),
            boundary: joint.boundary,
            embeddings: None,
        }
    }

    pub fn with_embeddings(mut self, rows: Tensor<T>) -> Self {
        self.embeddings = Some(rows);
        self
    }

    pub fn m(&self) -> usize {
        self.boundary
    }

    pub fn n(&self) -> usize {
        self.ids.len() - self.boundary
    }

    pub fn cells(&self) -> usize {
        self.m() * (self.n() + 1)
    }

    pub fn is_sep_row(&self, m: usize) -> bool {
        self.ids[m] == SEP_ID
    }
}

/// Argmax labels plus raw logits `[M * (N + 1), 3]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction<T> {
    pub grid: EditMatrix,
    pub logits: Tensor<T>,
}

/// What a pooled train-mode forward leaves behind for the optimizer.
pub struct StepOutput<T> {
    pub logits: Var,
    pub batch_stats: Option<BatchStats<T>>,
    /// Row offset of each example's cells in the pooled logits.
    pub offsets: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Ids {
    embed: Option<ParamId>,
    local_w1: ParamId,
    local_b1: ParamId,
    local_w2: ParamId,
    local_b2: ParamId,
    local_proj_w: ParamId,
    local_proj_b: ParamId,
    global_w3: ParamId,
    global_b3: ParamId,
    global_w4: ParamId,
    global_b4: ParamId,
    global_proj_w: ParamId,
    global_proj_b: ParamId,
    bilinear: ParamId,
    sentinel: ParamId,
    bn_gamma: ParamId,
    bn_beta: ParamId,
    cls_w: ParamId,
    cls_b: ParamId,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Rsmlp<T> {
    config: ModelConfig,
    params: ParamStore<T>,
    ids: Ids,
    running: RunningStats<T>,
}

enum Init {
    Glorot,
    Zeros,
    Ones,
}

impl<T: Scalar> Rsmlp<T> {
    /// Glorot-uniform weights, zero biases, unit batchnorm scale. The
    /// classifier weights start at zero so an untrained model predicts `None`
    /// everywhere.
    pub fn new(config: ModelConfig, seed: u64) -> Result<Self, ModelError> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = ParamStore::new();
        let (b, d, s) = (config.block, config.dim, config.bottleneck);
        let (hl, hg, l) = (config.hidden_local, config.hidden_global, config.max_len);
        let mut add = |name: &str, shape: &[usize], init: Init| -> Result<ParamId, ModelError> {
            let n: usize = shape.iter().product();
            let data = match init {
                Init::Zeros => vec![T::zero(); n],
                Init::Ones => vec![T::one(); n],
                Init::Glorot => {
                    let (fan_in, fan_out) = (shape[0], shape[shape.len() - 1]);
                    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
                    (0..n)
                        .map(|_| T::of_f64(rng.gen_range(-limit..limit)))
                        .collect()
                }
            };
            Ok(params.add(name, Tensor::new(shape, data)?)?)
        };
        let embed = match config.encoder {
            EncoderKind::Lookup => Some(add("embed.table", &[config.vocab_size, d], Init::Glorot)?),
            EncoderKind::Precomputed => None,
        };
        let ids = Ids {
            embed,
            local_w1: add("local.mix_w1", &[b, hl], Init::Glorot)?,
            local_b1: add("local.mix_b1", &[hl], Init::Zeros)?,
            local_w2: add("local.mix_w2", &[hl, b], Init::Glorot)?,
            local_b2: add("local.mix_b2", &[b], Init::Zeros)?,
            local_proj_w: add("local.proj_w", &[d, s], Init::Glorot)?,
            local_proj_b: add("local.proj_b", &[s], Init::Zeros)?,
            global_w3: add("global.mix_w3", &[l, hg], Init::Glorot)?,
            global_b3: add("global.mix_b3", &[hg], Init::Zeros)?,
            global_w4: add("global.mix_w4", &[hg, l], Init::Glorot)?,
            global_b4: add("global.mix_b4", &[l], Init::Zeros)?,
            global_proj_w: add("global.proj_w", &[s, d], Init::Glorot)?,
            global_proj_b: add("global.proj_b", &[d], Init::Zeros)?,
            bilinear: add("sim.bilinear", &[d, d], Init::Glorot)?,
            sentinel: add("sim.sentinel", &[1, d], Init::Zeros)?,
            bn_gamma: add("head.bn_gamma", &[3], Init::Ones)?,
            bn_beta: add("head.bn_beta", &[3], Init::Zeros)?,
            cls_w: add("head.cls_w", &[3, 3], Init::Zeros)?,
            cls_b: add("head.cls_b", &[3], Init::Zeros)?,
        };
        Ok(Self {
            config,
            params,
            ids,
            running: RunningStats::new(3),
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    /// Overwrites every parameter with uniform draws from `[-scale, scale)`,
    /// so that gradient checks see no weight parked at zero.
    pub fn fill_uniform(&mut self, seed: u64, scale: f64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for p in self.params.iter_mut() {
            for v in p.value.data_mut() {
                *v = T::of_f64(rng.gen_range(-scale..scale));
            }
        }
    }

    pub fn params(&self) -> &ParamStore<T> {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamStore<T> {
        &mut self.params
    }

    pub fn running_stats(&self) -> &RunningStats<T> {
        &self.running
    }

    pub fn update_running(&mut self, stats: &BatchStats<T>) {
        self.running.update(&stats.mean, &stats.var, stats.count);
    }

    pub fn param_id(&self, name: &str) -> Option<ParamId> {
        self.params.find(name)
    }

    fn check_input(&self, input: &ModelInput<T>) -> Result<(), ModelError> {
        let len = input.ids.len();
        if input.boundary == 0 || input.boundary >= len {
            return Err(ModelError::BadInput(format!(
                "boundary {} leaves an empty side of a {len}-token sequence",
                input.boundary
            )));
        }
        if len > self.config.max_len {
            return Err(ModelError::SequenceTooLong {
                len,
                max: self.config.max_len,
            });
        }
        Ok(())
    }

    /// Embeds the joint sequence and pads it to a block multiple by repeating
    /// the last row.
    pub fn encode(&self, tape: &mut Tape<T>, input: &ModelInput<T>) -> Result<Var, ModelError> {
        self.check_input(input)?;
        let len = input.ids.len();
        let rows = match (self.config.encoder, &input.embeddings) {
            (EncoderKind::Lookup, _) => {
                let table = self.ids.embed.expect("lookup encoder has a table");
                let vocab = self.config.vocab_size;
                let ids: Vec<usize> = input
                    .ids
                    .iter()
                    .map(|&id| {
                        if (id as usize) < vocab {
                            id as usize
                        } else {
                            crate::text::UNK_ID as usize
                        }
                    })
                    .collect();
                tape.gather(&self.params, table, &ids)?
            }
            (EncoderKind::Precomputed, Some(e)) => {
                if e.shape() != [len, self.config.dim] {
                    return Err(ModelError::BadInput(format!(
                        "precomputed embeddings {:?} do not match [{len}, {}]",
                        e.shape(),
                        self.config.dim
                    )));
                }
                tape.leaf(e.clone())
            }
            (EncoderKind::Precomputed, None) => {
                return Err(ModelError::BadInput(
                    "precomputed encoder needs embeddings for every input".into(),
                ))
            }
        };
        Ok(tape.replicate_pad(rows, self.config.padded_len(len))?)
    }

    /// Block-local mixing: each `[B, D]` block is mixed along its B rows by a
    /// shared MLP, then projected from D to S channels.
    pub fn local_unit(&self, tape: &mut Tape<T>, a: Var) -> Result<Var, ModelError> {
        let p = &self.params;
        let per_channel = tape.block_transpose(a, self.config.block)?;
        let (w1, b1) = (
            tape.param(p, self.ids.local_w1),
            tape.param(p, self.ids.local_b1),
        );
        let h = tape.linear(per_channel, w1, b1)?;
        let h = tape.gelu(h);
        let (w2, b2) = (
            tape.param(p, self.ids.local_w2),
            tape.param(p, self.ids.local_b2),
        );
        let mixed = tape.linear(h, w2, b2)?;
        let mixed = tape.block_transpose(mixed, self.config.dim)?;
        let (pw, pb) = (
            tape.param(p, self.ids.local_proj_w),
            tape.param(p, self.ids.local_proj_b),
        );
        Ok(tape.linear(mixed, pw, pb)?)
    }

    /// Sequence-wide mixing over `max_len` rows followed by the S to D
    /// projection. `a` is the encoder output, added back when residual is on.
    pub fn global_unit(&self, tape: &mut Tape<T>, z: Var, a: Var) -> Result<Var, ModelError> {
        let p = &self.params;
        let rows = tape.value(z).rows();
        let full = tape.replicate_pad(z, self.config.max_len)?;
        let per_channel = tape.transpose(full)?;
        let (w3, b3) = (
            tape.param(p, self.ids.global_w3),
            tape.param(p, self.ids.global_b3),
        );
        let h = tape.linear(per_channel, w3, b3)?;
        let h = tape.gelu(h);
        let (w4, b4) = (
            tape.param(p, self.ids.global_w4),
            tape.param(p, self.ids.global_b4),
        );
        let mixed = tape.linear(h, w4, b4)?;
        let mixed = tape.transpose(mixed)?;
        let mixed = tape.slice_rows(mixed, 0, rows)?;
        let (pw, pb) = (
            tape.param(p, self.ids.global_proj_w),
            tape.param(p, self.ids.global_proj_b),
        );
        let out = tape.linear(mixed, pw, pb)?;
        if self.config.residual {
            Ok(tape.add(out, a)?)
        } else {
            Ok(out)
        }
    }

    /// `[M * (N + 1), 3]` features: dot, cosine and bilinear scores between
    /// every context row and every incomplete row. The sentinel column queries
    /// with the last incomplete row plus a learned offset, which starts at
    /// zero.
    pub fn similarity_features(
        &self,
        tape: &mut Tape<T>,
        z: Var,
        m: usize,
        n: usize,
    ) -> Result<Var, ModelError> {
        if m == 0 || n == 0 || m + n > tape.value(z).rows() {
            return Err(ModelError::BadInput(format!("cannot split {m} + {n} rows")));
        }
        let context = tape.slice_rows(z, 0, m)?;
        let tokens = tape.slice_rows(z, m, m + n)?;
        let last = tape.slice_rows(z, m + n - 1, m + n)?;
        let offset = tape.param(&self.params, self.ids.sentinel);
        let end = tape.add(last, offset)?;
        let query = tape.concat_rows(&[tokens, end])?;
        let query_t = tape.transpose(query)?;
        let dot = tape.matmul(context, query_t)?;
        let cos = tape.cosine(context, query)?;
        let wb = tape.param(&self.params, self.ids.bilinear);
        let projected = tape.matmul(context, wb)?;
        let bilinear = tape.matmul(projected, query_t)?;
        Ok(tape.stack_channels(&[dot, cos, bilinear])?)
    }

    pub fn classify_cells(
        &self,
        tape: &mut Tape<T>,
        features: Var,
        mode: Mode,
    ) -> Result<(Var, Option<BatchStats<T>>), ModelError> {
        let p = &self.params;
        let (gamma, beta) = (
            tape.param(p, self.ids.bn_gamma),
            tape.param(p, self.ids.bn_beta),
        );
        let (normed, stats) = tape.batchnorm(features, gamma, beta, &self.running, mode)?;
        let (w, b) = (tape.param(p, self.ids.cls_w), tape.param(p, self.ids.cls_b));
        Ok((tape.linear(normed, w, b)?, stats))
    }

    /// Features for one example, up to (not including) the classifier.
    pub fn features(&self, tape: &mut Tape<T>, input: &ModelInput<T>) -> Result<Var, ModelError> {
        let a = self.encode(tape, input)?;
        let z = self.local_unit(tape, a)?;
        let z = self.global_unit(tape, z, a)?;
        self.similarity_features(tape, z, input.m(), input.n())
    }

    /// Pools the cells of every input into one classifier batch.
    pub fn forward_batch(
        &self,
        tape: &mut Tape<T>,
        inputs: &[&ModelInput<T>],
        mode: Mode,
    ) -> Result<StepOutput<T>, ModelError> {
        if inputs.is_empty() {
            return Err(ModelError::BadInput("empty batch".into()));
        }
        let mut feats = Vec::with_capacity(inputs.len());
        let mut offsets = Vec::with_capacity(inputs.len());
        let mut offset = 0;
        for input in inputs {
            feats.push(self.features(tape, input)?);
            offsets.push(offset);
            offset += input.cells();
        }
        let pooled = if feats.len() == 1 {
            feats[0]
        } else {
            tape.concat_rows(&feats)?
        };
        let (logits, batch_stats) = self.classify_cells(tape, pooled, mode)?;
        Ok(StepOutput {
            logits,
            batch_stats,
            offsets,
        })
    }

    /// Eval-mode prediction for one dialogue.
    pub fn forward(&self, input: &ModelInput<T>) -> Result<Prediction<T>, ModelError> {
        let mut tape = Tape::new();
        let out = self.forward_batch(&mut tape, &[input], Mode::Eval)?;
        let logits = tape.value(out.logits).clone();
        let grid = argmax_grid(&logits, input);
        Ok(Prediction { grid, logits })
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        let mut ckpt = Checkpoint::default();
        let f32s = |t: &Tensor<T>| t.data().iter().map(|v| v.as_f32()).collect::<Vec<f32>>();
        for (_, p) in self.params.iter() {
            ckpt.push(p.name.clone(), p.value.shape(), f32s(&p.value));
        }
        let to32 = |v: &[T]| v.iter().map(|x| x.as_f32()).collect::<Vec<f32>>();
        ckpt.push(RUNNING_MEAN, &[3], to32(&self.running.mean));
        ckpt.push(RUNNING_VAR, &[3], to32(&self.running.var));
        for (_, p) in self.params.iter() {
            let (m, v) = p.moments();
            ckpt.push(format!("{ADAM_M}{}", p.name), m.shape(), f32s(m));
            ckpt.push(format!("{ADAM_V}{}", p.name), v.shape(), f32s(v));
        }
        ckpt.push(ADAM_STEP, &[1], vec![self.params.step() as f32]);
        ckpt.push(META_CONFIG, &[10], self.config.to_meta());
        ckpt
    }

    /// Rebuilds a model from a checkpoint, taking the config it carries.
    pub fn from_checkpoint(ckpt: &Checkpoint) -> Result<Self, ModelError> {
        let meta = ckpt
            .get(META_CONFIG)
            .ok_or_else(|| ModelError::IncompatibleCheckpoint("missing meta.config".into()))?;
        let config = ModelConfig::from_meta(&meta.data)?;
        Self::from_checkpoint_with(config, ckpt)
    }

    /// Loads a checkpoint into `config`; fails if the checkpoint was written
    /// for a different config.
    pub fn from_checkpoint_with(
        config: ModelConfig,
        ckpt: &Checkpoint,
    ) -> Result<Self, ModelError> {
        let incompatible = |msg: String| ModelError::IncompatibleCheckpoint(msg);
        if let Some(meta) = ckpt.get(META_CONFIG) {
            if meta.data != config.to_meta() {
                return Err(incompatible(
                    "checkpoint was written for a different config".into(),
                ));
            }
        }
        let mut model = Self::new(config, 0)?;
        let fetch = |name: &str, shape: &[usize]| -> Result<Tensor<T>, ModelError> {
            let t = ckpt
                .get(name)
                .ok_or_else(|| incompatible(format!("missing tensor {name}")))?;
            if t.shape != shape {
                return Err(incompatible(format!(
                    "{name} has shape {:?}, expected {shape:?}",
                    t.shape
                )));
            }
            Ok(Tensor::new(
                shape,
                t.data.iter().map(|&v| T::of_f32(v)).collect(),
            )?)
        };
        let names: Vec<(ParamId, String, Vec<usize>)> = model
            .params
            .iter()
            .map(|(id, p)| (id, p.name.clone(), p.value.shape().to_vec()))
            .collect();
        for (id, name, shape) in names {
            let value = fetch(&name, &shape)?;
            let m = fetch(&format!("{ADAM_M}{name}"), &shape)?;
            let v = fetch(&format!("{ADAM_V}{name}"), &shape)?;
            model.params.get_mut(id).value = value;
            model.params.set_moments(id, m, v);
        }
        model.running.mean = fetch(RUNNING_MEAN, &[3])?.into_data();
        model.running.var = fetch(RUNNING_VAR, &[3])?.into_data();
        let step = fetch(ADAM_STEP, &[1])?.item().as_f64();
        model.params.set_step(step as u64);
        Ok(model)
    }

    /// Same weights in another float width.
    pub fn cast<U: Scalar>(&self) -> Rsmlp<U> {
        Rsmlp {
            config: self.config,
            params: self.params.cast(),
            ids: self.ids,
            running: RunningStats {
                mean: self
                    .running
                    .mean
                    .iter()
                    .map(|v| U::of_f64(v.as_f64()))
                    .collect(),
                var: self
                    .running
                    .var
                    .iter()
                    .map(|v| U::of_f64(v.as_f64()))
                    .collect(),
            },
        }
    }
}

/// Per-cell argmax; ties resolve toward `None`, then `Substitute`. `[SEP]`
/// rows are never edited.
pub(crate) fn argmax_grid<T: Scalar>(logits: &Tensor<T>, input: &ModelInput<T>) -> EditMatrix {
    let (m, cols) = (input.m(), input.n() + 1);
    let mut grid = EditMatrix::new(m, cols);
    for row in 0..m {
        if input.is_sep_row(row) {
            continue;
        }
        for col in 0..cols {
            let scores = logits.row(row * cols + col);
            let mut best = 0;
            for k in 1..scores.len() {
                if scores[k] > scores[best] {
                    best = k;
                }
            }
            grid.set(
                row,
                col,
                EditLabel::from_index(best).expect("three classes"),
            );
        }
    }
    grid
}
