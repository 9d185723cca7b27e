//! The `rsmlp` command line.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error. Payloads go to
//! stdout, diagnostics to stderr.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::Serialize;

use crate::edit::derive_edit_matrix;
use crate::model::{EncoderKind, PrecomputedEmbeddings};
use crate::text::{build_joint, load_corpus, Corpus, TokenizeMode};
use crate::train::{bench, evaluate, train, RunConfig, Split, TrainError, TrainedModel};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;

/// Delimiter between context turns in `rewrite --context`.
pub const TURN_DELIMITER: &str = "||";

#[derive(Debug, Parser)]
#[command(
    name = "rsmlp",
    version,
    about = "Incomplete utterance rewriting with an edit-matrix MLP"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Derive gold edit matrices for a JSONL corpus.
    DeriveLabels {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        #[arg(long, default_value = "char")]
        mode: TokenizeMode,
    },
    /// Train a model and write a checkpoint.
    Train {
        #[arg(long)]
        train: PathBuf,
        #[arg(long)]
        dev: Option<PathBuf>,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score a checkpoint on a JSONL corpus with gold rewrites.
    Eval {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        report: Option<PathBuf>,
        #[arg(long)]
        embeddings: Option<PathBuf>,
    },
    /// Rewrite one utterance given its context turns joined by "||".
    Rewrite {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, allow_hyphen_values = true)]
        context: String,
        #[arg(long, allow_hyphen_values = true)]
        utterance: String,
    },
    /// Time single-dialogue inference.
    Bench {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, default_value_t = 32)]
        len: usize,
        #[arg(long, default_value_t = 100)]
        iters: usize,
    },
}

enum Failure {
    Usage(String),
    Data(String),
}

impl From<TrainError> for Failure {
    fn from(e: TrainError) -> Self {
        if e.is_config() {
            Failure::Usage(e.to_string())
        } else {
            Failure::Data(e.to_string())
        }
    }
}

fn data<E: std::fmt::Display>(e: E) -> Failure {
    Failure::Data(e.to_string())
}

pub fn run<I, T>(argv: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let text = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(stdout, "{text}");
                    EXIT_OK
                }
                _ => {
                    let _ = write!(stderr, "{text}");
                    EXIT_USAGE
                }
            };
        }
    };
    let result = match cli.command {
        Command::DeriveLabels {
            input,
            output,
            mode,
        } => derive_labels(&input, &output, mode, stderr),
        Command::Train {
            train,
            dev,
            config,
            out,
        } => train_cmd(
            &train,
            dev.as_deref(),
            config.as_deref(),
            &out,
            stdout,
            stderr,
        ),
        Command::Eval {
            model,
            data,
            report,
            embeddings,
        } => eval_cmd(
            &model,
            &data,
            report.as_deref(),
            embeddings.as_deref(),
            stdout,
        ),
        Command::Rewrite {
            model,
            context,
            utterance,
        } => rewrite_cmd(&model, &context, &utterance, stdout),
        Command::Bench { model, len, iters } => bench_cmd(&model, len, iters, stdout),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(Failure::Usage(msg)) => {
            let _ = writeln!(stderr, "error: {msg}");
            EXIT_USAGE
        }
        Err(Failure::Data(msg)) => {
            let _ = writeln!(stderr, "error: {msg}");
            EXIT_DATA
        }
    }
}

fn read_corpus(path: &Path, mode: TokenizeMode, stderr: &mut dyn Write) -> Result<Corpus, Failure> {
    let corpus = load_corpus(path, mode).map_err(data)?;
    for e in &corpus.errors {
        let _ = writeln!(stderr, "warning: {}: skipped {e}", path.display());
    }
    Ok(corpus)
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), Failure> {
    std::fs::write(path, bytes)
        .map_err(|e| Failure::Data(format!("cannot write {}: {e}", path.display())))
}

#[derive(Serialize)]
struct LabelLine {
    line: usize,
    m: usize,
    n: usize,
    cells: Vec<(usize, usize, &'static str)>,
    lossy: bool,
    dropped: usize,
}

fn derive_labels(
    input: &Path,
    output: &Path,
    mode: TokenizeMode,
    stderr: &mut dyn Write,
) -> Result<(), Failure> {
    let corpus = read_corpus(input, mode, stderr)?;
    let mut out = String::new();
    let (mut lossy, mut dropped, mut missing) = (0, 0, 0);
    for (i, example) in corpus.examples.iter().enumerate() {
        let joint = build_joint(example);
        let Ok(matrix) = derive_edit_matrix(example, &joint) else {
            missing += 1;
            continue;
        };
        lossy += matrix.lossy() as usize;
        dropped += matrix.dropped_tokens;
        let line = LabelLine {
            line: i,
            m: matrix.rows(),
            n: matrix.cols() - 1,
            cells: matrix
                .cells()
                .into_iter()
                .map(|(m, n, l)| (m, n, l.code()))
                .collect(),
            lossy: matrix.lossy(),
            dropped: matrix.dropped_tokens,
        };
        out.push_str(&serde_json::to_string(&line).expect("label line serializes"));
        out.push('\n');
    }
    write_file(output, out.as_bytes())?;
    let total = corpus.examples.len() - missing;
    let pct = if total == 0 {
        0.0
    } else {
        100.0 * lossy as f64 / total as f64
    };
    let _ = writeln!(
        stderr,
        "derived {total} examples: {lossy} lossy ({pct:.1}%), {dropped} dropped tokens, {missing} without rewrite, {} bad lines",
        corpus.errors.len()
    );
    Ok(())
}

fn read_embeddings(path: Option<&Path>) -> Result<Option<PrecomputedEmbeddings>, Failure> {
    path.map(|p| PrecomputedEmbeddings::read(p).map_err(data))
        .transpose()
}

#[derive(Serialize)]
struct TrainSummary {
    checkpoint: String,
    examples: usize,
    epochs: usize,
    best_epoch: Option<usize>,
    final_loss: Option<f64>,
    best_dev_em: Option<f64>,
    truncated: usize,
    skipped: usize,
    class_weights: [f64; 3],
    param_count: usize,
}

fn train_cmd(
    train_path: &Path,
    dev_path: Option<&Path>,
    config_path: Option<&Path>,
    out: &Path,
    stdout: &mut dyn Write,
    stderr: &mut dyn Write,
) -> Result<(), Failure> {
    let config = match config_path {
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| Failure::Data(format!("cannot read {}: {e}", p.display())))?;
            RunConfig::parse(&text)?
        }
        None => RunConfig::default(),
    };
    let mode = config.model.mode;
    let train_corpus = read_corpus(train_path, mode, stderr)?;
    let dev_corpus = dev_path.map(|p| read_corpus(p, mode, stderr)).transpose()?;
    let precomputed = config.model.encoder == EncoderKind::Precomputed;
    if precomputed
        && (config.train_embeddings.is_none()
            || (dev_path.is_some() && config.dev_embeddings.is_none()))
    {
        return Err(Failure::Usage(
            "precomputed encoder needs train_embeddings (and dev_embeddings with --dev)".into(),
        ));
    }
    let train_emb = read_embeddings(config.train_embeddings.as_deref())?;
    let dev_emb = read_embeddings(config.dev_embeddings.as_deref())?;
    let mut train_split = Split::new(&train_corpus.examples);
    if let Some(e) = &train_emb {
        train_split = train_split.with_embeddings(e);
    }
    let dev_split = dev_corpus.as_ref().map(|c| {
        let s = Split::new(&c.examples);
        match &dev_emb {
            Some(e) => s.with_embeddings(e),
            None => s,
        }
    });
    let outcome = train(train_split, dev_split, config.model, &config.train)?;
    for h in &outcome.history {
        let dev = h
            .dev_em
            .map(|em| format!(" dev_em {em:.2}"))
            .unwrap_or_default();
        let _ = writeln!(
            stderr,
            "epoch {} loss {:.6} median {:.6}{dev}",
            h.epoch, h.mean_loss, h.median_loss
        );
    }
    if outcome.truncated + outcome.skipped > 0 {
        let _ = writeln!(
            stderr,
            "left-truncated {} examples, skipped {} overlong",
            outcome.truncated, outcome.skipped
        );
    }
    outcome.model.save(out)?;
    let summary = TrainSummary {
        checkpoint: out.display().to_string(),
        examples: train_corpus.examples.len(),
        epochs: config.train.epochs,
        best_epoch: outcome.best_epoch,
        final_loss: outcome.history.last().map(|h| h.mean_loss),
        best_dev_em: outcome
            .best_epoch
            .and_then(|e| outcome.history.get(e - 1))
            .and_then(|h| h.dev_em),
        truncated: outcome.truncated,
        skipped: outcome.skipped,
        class_weights: outcome.class_weights,
        param_count: outcome.model.model.params().scalar_count(),
    };
    let _ = writeln!(
        stdout,
        "{}",
        serde_json::to_string_pretty(&summary).expect("summary serializes")
    );
    Ok(())
}

fn eval_cmd(
    model_path: &Path,
    data_path: &Path,
    report_path: Option<&Path>,
    embeddings: Option<&Path>,
    stdout: &mut dyn Write,
) -> Result<(), Failure> {
    let model = TrainedModel::load(model_path)?;
    let mut sink = std::io::sink();
    let corpus = read_corpus(data_path, model.config().mode, &mut sink)?;
    let emb = read_embeddings(embeddings)?;
    if model.config().encoder == EncoderKind::Precomputed && emb.is_none() {
        return Err(Failure::Usage("this model needs --embeddings".into()));
    }
    let mut split = Split::new(&corpus.examples);
    if let Some(e) = &emb {
        split = split.with_embeddings(e);
    }
    let json = evaluate(&model, split)?.to_json();
    if let Some(p) = report_path {
        write_file(p, format!("{json}\n").as_bytes())?;
    }
    let _ = writeln!(stdout, "{json}");
    Ok(())
}

fn rewrite_cmd(
    model_path: &Path,
    context: &str,
    utterance: &str,
    stdout: &mut dyn Write,
) -> Result<(), Failure> {
    let model = TrainedModel::load(model_path)?;
    if model.config().encoder == EncoderKind::Precomputed {
        return Err(Failure::Usage(
            "rewrite needs a lookup-encoder model".into(),
        ));
    }
    if utterance.trim().is_empty() {
        return Err(Failure::Usage("--utterance is empty".into()));
    }
    let turns: Vec<&str> = context.split(TURN_DELIMITER).collect();
    let text = model.rewrite_text(&turns, utterance)?;
    let _ = writeln!(stdout, "{text}");
    Ok(())
}

fn bench_cmd(
    model_path: &Path,
    len: usize,
    iters: usize,
    stdout: &mut dyn Write,
) -> Result<(), Failure> {
    let model = TrainedModel::load(model_path)?;
    let mut report = bench(&model, len, iters)?;
    report.checkpoint_bytes = std::fs::metadata(model_path).map_err(data)?.len() as usize;
    let _ = writeln!(stdout, "{}", report.to_json());
    Ok(())
}
