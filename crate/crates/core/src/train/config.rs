//! Flat `key = value` run configuration.
//!
//! ```text
//! # training
//! epochs = 200
//! batch_size = 8
//! lr = 0.001
//! seed = 7
//! class_weights = 1.0, 4.0, 4.0
//! # model
//! max_len = 64
//! block = 8
//! dim = 64
//! bottleneck = 32
//! hidden_local = 64
//! hidden_global = 128
//! residual = false
//! encoder = lookup
//! mode = char
//! train_embeddings = train.rsme
//! dev_embeddings = dev.rsme
//! ```
//!
//! Blank lines and `#` comments are ignored; unknown or repeated keys are
//! errors.

use std::collections::HashSet;
use std::path::PathBuf;
use std::str::FromStr;

use crate::model::ModelConfig;

use super::{TrainConfig, TrainError};

pub const KEYS: &[&str] = &[
    "epochs",
    "batch_size",
    "lr",
    "seed",
    "class_weights",
    "max_len",
    "block",
    "dim",
    "bottleneck",
    "hidden_local",
    "hidden_global",
    "residual",
    "encoder",
    "mode",
    "train_embeddings",
    "dev_embeddings",
];

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunConfig {
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub train_embeddings: Option<PathBuf>,
    pub dev_embeddings: Option<PathBuf>,
}

fn parse<T: FromStr>(line: usize, key: &str, value: &str) -> Result<T, TrainError>
where
    T::Err: std::fmt::Display,
{
    value.parse().map_err(|e| TrainError::Config {
        line,
        reason: format!("{key}: {e}"),
    })
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, TrainError> {
        let mut config = RunConfig::default();
        let mut seen = HashSet::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let err = |reason: String| TrainError::Config { line, reason };
            let (key, value) = content
                .split_once('=')
                .ok_or_else(|| err(format!("expected key = value, got {content:?}")))?;
            let (key, value) = (key.trim(), value.trim());
            if !KEYS.contains(&key) {
                return Err(err(format!("unknown key {key:?}")));
            }
            if !seen.insert(key.to_string()) {
                return Err(err(format!("duplicate key {key:?}")));
            }
            let (m, t) = (&mut config.model, &mut config.train);
            match key {
                "epochs" => t.epochs = parse(line, key, value)?,
                "batch_size" => t.batch_size = parse(line, key, value)?,
                "lr" => t.lr = parse(line, key, value)?,
                "seed" => t.seed = parse(line, key, value)?,
                "class_weights" => {
                    let ws = value
                        .split(',')
                        .map(|w| parse::<f64>(line, key, w.trim()))
                        .collect::<Result<Vec<_>, _>>()?;
                    let ws: [f64; 3] = ws
                        .try_into()
                        .map_err(|_| err("class_weights needs three values".into()))?;
                    t.class_weights = Some(ws);
                }
                "max_len" => m.max_len = parse(line, key, value)?,
                "block" => m.block = parse(line, key, value)?,
                "dim" => m.dim = parse(line, key, value)?,
                "bottleneck" => m.bottleneck = parse(line, key, value)?,
                "hidden_local" => m.hidden_local = parse(line, key, value)?,
                "hidden_global" => m.hidden_global = parse(line, key, value)?,
                "residual" => m.residual = parse(line, key, value)?,
                "encoder" => m.encoder = parse(line, key, value)?,
                "mode" => m.mode = parse(line, key, value)?,
                "train_embeddings" => config.train_embeddings = Some(PathBuf::from(value)),
                "dev_embeddings" => config.dev_embeddings = Some(PathBuf::from(value)),
                _ => unreachable!("key list and match arms agree"),
            }
        }
        config.train.validate()?;
        Ok(config)
    }
}
