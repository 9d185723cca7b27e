//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! ```bash
//! cargo test --test acceptance
//! ```

mod common;

use std::time::{Duration, Instant};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rsmlp::edit::{apply_edits, derive_edit_matrix, extract_program, EditLabel};
use rsmlp::model::{gradient_check, ModelConfig, Rsmlp};
use rsmlp::text::{build_joint, build_vocab, TokenizeMode};
use rsmlp::train::metrics::{bleu, exact_match, restoration_score, rouge_l, rouge_n};
use rsmlp::train::{bench, evaluate, loss_batch, train, Split, TrainConfig};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn round_trip() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let (mut exact, mut lossy) = (0, 0);
    for _ in 0..1000 {
        let example = common::synthetic_triple(&mut rng);
        let joint = build_joint(&example);
        let matrix = derive_edit_matrix(&example, &joint).map_err(|e| e.to_string())?;
        lossy += matrix.lossy() as usize;
        let out = apply_edits(
            joint.incomplete(),
            &extract_program(&matrix),
            joint.context(),
        )
        .map_err(|e| e.to_string())?;
        exact += (Some(&out) == example.rewrite.as_ref()) as usize;
    }
    let elapsed = start.elapsed();
    check(
        exact == 1000 && lossy == 0 && elapsed < Duration::from_secs(10),
        format!("{exact}/1000 exact, {lossy} lossy, {elapsed:.2?}"),
    )
}

fn weather_dialogue_edit_path() -> Outcome {
    let example = common::weather_dialogue();
    let joint = build_joint(&example);
    let matrix = derive_edit_matrix(&example, &joint).map_err(|e| e.to_string())?;
    let out = apply_edits(
        joint.incomplete(),
        &extract_program(&matrix),
        joint.context(),
    )
    .map_err(|e| e.to_string())?
    .concat();
    check(out == "深圳的气候为什么会十分潮湿", out)
}

fn gradient() -> Outcome {
    let start = Instant::now();
    let examples = common::toy();
    let picked: Vec<_> = [0, 8, 16, 24]
        .iter()
        .map(|&i| examples[i].clone())
        .collect();
    let vocab = build_vocab(&picked, TokenizeMode::Char).map_err(|e| e.to_string())?;
    let config = ModelConfig {
        max_len: 16,
        block: 4,
        dim: 8,
        bottleneck: 4,
        hidden_local: 8,
        hidden_global: 8,
        ..ModelConfig::with_vocab(vocab.len())
    };
    let batch = loss_batch(&picked, &vocab, &config, [0.5, 1.5, 1.0]).map_err(|e| e.to_string())?;
    let mut model = Rsmlp::<f64>::new(config, 1).map_err(|e| e.to_string())?;
    model.fill_uniform(2, 0.5);
    let r = gradient_check(&mut model, &batch, 1e-5).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    check(
        r.max_rel_error < 1e-4 && elapsed < Duration::from_secs(120),
        format!(
            "{} entries, max relative error {:.2e}, {elapsed:.2?}",
            r.checked, r.max_rel_error
        ),
    )
}

fn overfit() -> Outcome {
    let start = Instant::now();
    let examples = common::toy();
    let config = TrainConfig {
        epochs: 300,
        batch_size: 8,
        lr: 1e-3,
        seed: 0,
        class_weights: None,
    };
    let out = train(Split::new(&examples), None, ModelConfig::default(), &config)
        .map_err(|e| e.to_string())?;
    let report = evaluate(&out.model, Split::new(&examples)).map_err(|e| e.to_string())?;
    let (context, x, _) = common::WEATHER_DIALOGUE;
    let rewrite = out
        .model
        .rewrite_text(context, x)
        .map_err(|e| e.to_string())?;
    let mut sep_edits = 0;
    for e in &examples {
        let joint = build_joint(e);
        let r = out.model.rewrite(e, None).map_err(|e| e.to_string())?;
        let grid = r.grid.ok_or("toy example over length")?;
        for m in (0..grid.rows()).filter(|&m| joint.is_sep_row(m)) {
            sep_edits += (0..grid.cols())
                .filter(|&n| grid.get(m, n) != EditLabel::None)
                .count();
        }
    }
    // epoch-median losses, compared across 25-epoch windows
    let windows: Vec<f64> = out
        .history
        .chunks(25)
        .map(|w| {
            let mut m: Vec<f64> = w.iter().map(|h| h.median_loss).collect();
            m.sort_by(f64::total_cmp);
            m[m.len() / 2]
        })
        .collect();
    let monotone = windows.windows(2).all(|p| p[1] <= p[0] * 1.05);
    let elapsed = start.elapsed();
    check(
        report.cell_accuracy >= 95.0
            && report.em >= 90.0
            && rewrite == "深圳的气候为什么会十分潮湿"
            && monotone
            && sep_edits == 0
            && elapsed < Duration::from_secs(300),
        format!(
            "{} epochs, cell accuracy {:.2}, EM {:.2}, weather dialogue rewrite {rewrite}, loss windows non-increasing {monotone}, [SEP]-row edits {sep_edits}, {elapsed:.2?}",
            config.epochs, report.cell_accuracy, report.em
        ),
    )
}

fn metric_oracles() -> Outcome {
    let chars = |s: &str| s.chars().map(String::from).collect::<Vec<_>>();
    let close = |a: f64, b: f64| (a - b).abs() <= 0.05;
    let (short, full) = (chars("为什么会"), chars("为什么会这样"));
    let bleu1 = bleu(&[(&short, &full)], 1);
    let rouge1 = rouge_n(&short, &full, 1);
    let gold = chars("深圳的气候为什么会十分潮湿");
    let r1 = restoration_score(&chars("为什么会十分潮湿"), &gold, &full, 1).r;
    let same = restoration_score(&full, &full, &full, 1);
    let perfect = restoration_score(&gold, &gold, &full, 2);
    let cases = [
        ("BLEU-1 brevity", close(bleu1, 60.65)),
        ("ROUGE-1 recall", close(rouge1, 66.67)),
        ("restoration R1", close(r1, 44.44)),
        ("EM equal", exact_match(&full, &full) == 100.0),
        ("EM one char off", exact_match(&short, &full) == 0.0),
        ("identical BLEU-4", close(bleu(&[(&full, &full)], 4), 100.0)),
        ("identical ROUGE-L", close(rouge_l(&full, &full), 100.0)),
        (
            "disjoint BLEU",
            bleu(&[(&chars("甲乙"), &chars("丙丁"))], 1) == 0.0,
        ),
        (
            "nothing restored",
            (same.p, same.r, same.f) == (0.0, 0.0, 0.0),
        ),
        (
            "perfect restoration",
            (perfect.p, perfect.r, perfect.f) == (100.0, 100.0, 100.0),
        ),
    ];
    let failed: Vec<&str> = cases.iter().filter(|c| !c.1).map(|c| c.0).collect();
    check(
        failed.is_empty(),
        format!("BLEU-1 {bleu1:.2}, ROUGE-1 {rouge1:.2}, R1 {r1:.2}, failed {failed:?}"),
    )
}

/// p50 at L=32 may exceed p50 at L=64 by at most this factor.
const BENCH_NOISE: f64 = 1.25;

fn footprint() -> Outcome {
    let vocab_size = 21_128;
    let config = ModelConfig::with_vocab(vocab_size);
    let model = Rsmlp::<f32>::new(config, 0).map_err(|e| e.to_string())?;
    let params = model.params().scalar_count();
    let closed_form = vocab_size * 64
        + (8 * 64 + 64 + 64 * 8 + 8 + 64 * 32 + 32)
        + (64 * 128 + 128 + 128 * 64 + 64 + 32 * 64 + 64)
        + (64 * 64 + 64)
        + (3 + 3 + 9 + 3);
    let bytes = model
        .to_checkpoint()
        .to_bytes()
        .map_err(|e| e.to_string())?
        .len();

    let examples = common::toy();
    let trained = train(
        Split::new(&examples),
        None,
        ModelConfig::default(),
        &TrainConfig {
            epochs: 0,
            ..Default::default()
        },
    )
    .map_err(|e| e.to_string())?
    .model;
    let b64 = bench(&trained, 64, 300).map_err(|e| e.to_string())?;
    let b32 = bench(&trained, 32, 300).map_err(|e| e.to_string())?;
    let complete = [&b32, &b64].iter().all(|r| {
        r.p50_ms > 0.0
            && r.p95_ms >= r.p50_ms
            && r.mean_ms > 0.0
            && r.param_count > 0
            && r.checkpoint_bytes > 0
            && !r.hardware.is_empty()
    });
    check(
        params == closed_form && params < 5_000_000 && bytes < 30_000_000 && complete && b32.p50_ms <= b64.p50_ms * BENCH_NOISE,
        format!(
            "{params} params (closed form {closed_form}), checkpoint {:.1} MB, p50 L=32 {:.3} ms vs L=64 {:.3} ms, report complete {complete}",
            bytes as f64 / 1e6,
            b32.p50_ms,
            b64.p50_ms
        ),
    )
}

fn determinism() -> Outcome {
    let examples = common::toy();
    let config = TrainConfig {
        epochs: 20,
        batch_size: 4,
        lr: 1e-3,
        seed: 17,
        class_weights: None,
    };
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut files = Vec::new();
    let mut reports = Vec::new();
    for (run, threads) in [(0, "1"), (1, "3")] {
        let out = train(
            Split::new(&examples[..24]),
            Some(Split::new(&examples[24..])),
            ModelConfig::default(),
            &config,
        )
        .map_err(|e| e.to_string())?;
        let path = dir.path().join(format!("run{run}.ckpt"));
        out.model.save(&path).map_err(|e| e.to_string())?;
        files.push(std::fs::read(&path).map_err(|e| e.to_string())?);
        std::env::set_var("RSMLP_THREADS", threads);
        reports.push(
            evaluate(&out.model, Split::new(&examples))
                .map_err(|e| e.to_string())?
                .to_json(),
        );
        std::env::remove_var("RSMLP_THREADS");
    }
    let same_ckpt = files[0] == files[1];
    let same_report = reports[0] == reports[1];
    check(
        same_ckpt && same_report,
        format!(
            "checkpoints identical {same_ckpt} ({} bytes), eval reports identical {same_report}",
            files[0].len()
        ),
    )
}

fn main() {
    let criteria: [Criterion; 7] = [
        (
            "round-trip supervision on 1000 synthetic triples",
            round_trip,
        ),
        (
            "weather dialogue end-to-end through the edit engine",
            weather_dialogue_edit_path,
        ),
        ("gradient check in 64-bit", gradient),
        ("overfit the 32 toy dialogues", overfit),
        ("metric oracles", metric_oracles),
        ("model footprint and bench", footprint),
        ("determinism", determinism),
    ];
    let mut failures = 0;
    for (name, run) in criteria {
        match run() {
            Ok(detail) => println!("PASS  {name}: {detail}"),
            Err(detail) => {
                failures += 1;
                println!("FAIL  {name}: {detail}");
            }
        }
    }
    println!(
        "acceptance: {} passed, {failures} failed",
        criteria.len() - failures
    );
    if failures > 0 {
        std::process::exit(1);
    }
}
