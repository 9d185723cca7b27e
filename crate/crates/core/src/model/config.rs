use crate::text::TokenizeMode;

use super::ModelError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EncoderKind {
    /// Trainable id -> vector table.
    #[default]
    Lookup,
    /// Frozen per-example embeddings read from an `RSME` file.
    Precomputed,
}

impl std::str::FromStr for EncoderKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "lookup" => Ok(EncoderKind::Lookup),
            "precomputed" => Ok(EncoderKind::Precomputed),
            other => Err(format!(
                "unknown encoder {other:?} (expected lookup|precomputed)"
            )),
        }
    }
}

impl EncoderKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EncoderKind::Lookup => "lookup",
            EncoderKind::Precomputed => "precomputed",
        }
    }
}

/// Network dimensions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModelConfig {
    /// Longest joint sequence the global unit mixes over.
    pub max_len: usize,
    /// Length of each non-overlapping local block.
    pub block: usize,
    /// Embedding width.
    pub dim: usize,
    /// Bottleneck width after the local unit; must be below `dim`.
    pub bottleneck: usize,
    pub hidden_local: usize,
    pub hidden_global: usize,
    pub vocab_size: usize,
    pub encoder: EncoderKind,
    pub residual: bool,
    pub mode: TokenizeMode,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            max_len: 64,
            block: 8,
            dim: 64,
            bottleneck: 32,
            hidden_local: 64,
            hidden_global: 128,
            vocab_size: 3,
            encoder: EncoderKind::Lookup,
            residual: false,
            mode: TokenizeMode::Char,
        }
    }
}

impl ModelConfig {
    pub fn with_vocab(vocab_size: usize) -> Self {
        Self {
            vocab_size,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let dims = [
            ("max_len", self.max_len),
            ("block", self.block),
            ("dim", self.dim),
            ("bottleneck", self.bottleneck),
            ("hidden_local", self.hidden_local),
            ("hidden_global", self.hidden_global),
        ];
        if let Some((name, _)) = dims.iter().find(|(_, v)| *v == 0) {
            return Err(ModelError::InvalidConfig(format!(
                "{name} must be at least 1"
            )));
        }
        if !self.max_len.is_multiple_of(self.block) {
            return Err(ModelError::InvalidConfig(format!(
                "max_len {} is not a multiple of block {}",
                self.max_len, self.block
            )));
        }
        if self.bottleneck >= self.dim {
            return Err(ModelError::InvalidConfig(format!(
                "bottleneck {} must be smaller than dim {}",
                self.bottleneck, self.dim
            )));
        }
        if self.encoder == EncoderKind::Lookup && self.vocab_size < 3 {
            return Err(ModelError::InvalidConfig(
                "lookup encoder needs the three reserved tokens".into(),
            ));
        }
        Ok(())
    }

    /// Number of trainable scalars, counted from the layer shapes.
    pub fn param_count(&self) -> usize {
        let (b, d, s) = (self.block, self.dim, self.bottleneck);
        let (hl, hg, l) = (self.hidden_local, self.hidden_global, self.max_len);
        let embed = match self.encoder {
            EncoderKind::Lookup => self.vocab_size * d,
            EncoderKind::Precomputed => 0,
        };
        let local = (b * hl + hl) + (hl * b + b) + (d * s + s);
        let global = (l * hg + hg) + (hg * l + l) + (s * d + d);
        let similarity = d * d + d;
        let head = 3 + 3 + 3 * 3 + 3;
        embed + local + global + similarity + head
    }

    /// Length after padding to whole blocks.
    pub fn padded_len(&self, len: usize) -> usize {
        len.div_ceil(self.block) * self.block
    }

    pub(crate) fn to_meta(self) -> Vec<f32> {
        [
            self.max_len,
            self.block,
            self.dim,
            self.bottleneck,
            self.hidden_local,
            self.hidden_global,
            self.vocab_size,
            self.encoder as usize,
            self.residual as usize,
            self.mode as usize,
        ]
        .iter()
        .map(|&v| v as f32)
        .collect()
    }

    pub(crate) fn from_meta(meta: &[f32]) -> Result<Self, ModelError> {
        let bad = || ModelError::IncompatibleCheckpoint("malformed meta.config".into());
        if meta.len() != 10 || meta.iter().any(|v| *v < 0.0 || v.fract() != 0.0) {
            return Err(bad());
        }
        let u = |i: usize| meta[i] as usize;
        let config = Self {
            max_len: u(0),
            block: u(1),
            dim: u(2),
            bottleneck: u(3),
            hidden_local: u(4),
            hidden_global: u(5),
            vocab_size: u(6),
            encoder: match u(7) {
                0 => EncoderKind::Lookup,
                1 => EncoderKind::Precomputed,
                _ => return Err(bad()),
            },
            residual: match u(8) {
                0 => false,
                1 => true,
                _ => return Err(bad()),
            },
            mode: match u(9) {
                0 => TokenizeMode::Char,
                1 => TokenizeMode::Word,
                _ => return Err(bad()),
            },
        };
        config.validate()?;
        Ok(config)
    }
}
