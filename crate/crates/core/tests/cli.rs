mod common;

use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::OnceLock;

use rsmlp::cli::{run, EXIT_DATA, EXIT_OK, EXIT_USAGE};
use tempfile::TempDir;

struct Output {
    code: i32,
    stdout: String,
    stderr: String,
}

fn rsmlp(args: &[&str]) -> Output {
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let argv = std::iter::once("rsmlp").chain(args.iter().copied());
    let code = run(argv, &mut out, &mut err);
    Output {
        code,
        stdout: String::from_utf8(out).unwrap(),
        stderr: String::from_utf8(err).unwrap(),
    }
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

struct Trained {
    _dir: TempDir,
    corpus: PathBuf,
    model: PathBuf,
    summary: String,
}

/// The toy corpus memorized once through the CLI, shared by the tests below.
fn trained() -> &'static Trained {
    static CELL: OnceLock<Trained> = OnceLock::new();
    CELL.get_or_init(|| {
        let dir = tempfile::tempdir().unwrap();
        let corpus = dir.path().join("toy.jsonl");
        std::fs::write(&corpus, common::TOY).unwrap();
        let config = dir.path().join("run.conf");
        std::fs::write(
            &config,
            "# memorize the toy corpus\nepochs = 300\nlr = 0.001\nseed = 0\n",
        )
        .unwrap();
        let model = dir.path().join("toy.ckpt");
        let out = rsmlp(&[
            "train",
            "--train",
            s(&corpus),
            "--config",
            s(&config),
            "--out",
            s(&model),
        ]);
        assert_eq!(out.code, EXIT_OK, "{}", out.stderr);
        Trained {
            _dir: dir,
            corpus,
            model,
            summary: out.stdout,
        }
    })
}

#[test]
fn train_summary_is_json() {
    let t = trained();
    let v: serde_json::Value = serde_json::from_str(&t.summary).unwrap();
    assert_eq!(v["examples"], 32);
    assert_eq!(v["epochs"], 300);
    assert!(t.model.exists());
}

#[test]
fn rewrite_weather_dialogue() {
    let t = trained();
    let out = rsmlp(&[
        "rewrite",
        "--model",
        s(&t.model),
        "--context",
        "深圳的气候怎么样||十分潮湿",
        "--utterance",
        "为什么会这样",
    ]);
    assert_eq!(out.code, EXIT_OK, "{}", out.stderr);
    assert_eq!(out.stdout, "深圳的气候为什么会十分潮湿\n");
}

#[test]
fn eval_writes_identical_report() {
    let t = trained();
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("report.json");
    let out = rsmlp(&[
        "eval",
        "--model",
        s(&t.model),
        "--data",
        s(&t.corpus),
        "--report",
        s(&report),
    ]);
    assert_eq!(out.code, EXIT_OK, "{}", out.stderr);
    assert_eq!(std::fs::read_to_string(&report).unwrap(), out.stdout);
    let v: serde_json::Value = serde_json::from_str(&out.stdout).unwrap();
    assert_eq!(v["em"], 100.0);
    assert_eq!(v["examples"], 32);
    assert_eq!(v["constants"]["rouge_l_beta"], 1.2);
    let again = rsmlp(&["eval", "--model", s(&t.model), "--data", s(&t.corpus)]);
    assert_eq!(again.stdout, out.stdout);
}

#[test]
fn bench_reports_every_field() {
    let t = trained();
    let out = rsmlp(&[
        "bench",
        "--model",
        s(&t.model),
        "--len",
        "24",
        "--iters",
        "100",
    ]);
    assert_eq!(out.code, EXIT_OK, "{}", out.stderr);
    let v: serde_json::Value = serde_json::from_str(&out.stdout).unwrap();
    for key in [
        "p50_ms",
        "p95_ms",
        "mean_ms",
        "param_count",
        "checkpoint_bytes",
    ] {
        assert!(v[key].as_f64().unwrap() > 0.0, "{key}");
    }
    assert_eq!(
        v["checkpoint_bytes"],
        std::fs::metadata(&t.model).unwrap().len()
    );
    assert!(!v["hardware"].as_str().unwrap().is_empty());
    let bad = rsmlp(&["bench", "--model", s(&t.model), "--len", "500"]);
    assert_eq!(bad.code, EXIT_USAGE);
}

#[test]
fn derive_labels_writes_cells() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("in.jsonl");
    let output = dir.path().join("out.jsonl");
    std::fs::write(
        &input,
        "{\"context\": [\"深圳的气候怎么样\", \"十分潮湿\"], \"incomplete\": \"为什么会这样\", \"rewrite\": \"深圳的气候为什么会十分潮湿\"}\n\
         not json\n\
         {\"context\": [\"我想喝茶\"], \"incomplete\": \"什么\", \"rewrite\": \"什么咖啡\"}\n",
    )
    .unwrap();
    let out = rsmlp(&[
        "derive-labels",
        "--input",
        s(&input),
        "--output",
        s(&output),
    ]);
    assert_eq!(out.code, EXIT_OK, "{}", out.stderr);
    assert!(out.stdout.is_empty());
    assert!(out.stderr.contains("1 lossy"), "{}", out.stderr);
    assert!(out.stderr.contains("line 2"), "{}", out.stderr);
    let lines: Vec<serde_json::Value> = std::fs::read_to_string(&output)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(lines.len(), 2);
    assert_eq!(lines[0]["m"], 13);
    assert_eq!(lines[0]["n"], 6);
    assert_eq!(lines[0]["cells"][0], serde_json::json!([0, 0, "I"]));
    assert_eq!(lines[0]["cells"].as_array().unwrap().len(), 5 + 8);
    assert_eq!(lines[0]["lossy"], false);
    assert_eq!(lines[1]["lossy"], true);
    assert_eq!(lines[1]["dropped"], 2);
}

#[test]
fn usage_errors_exit_one() {
    for args in [
        vec![],
        vec!["frobnicate"],
        vec![
            "rewrite",
            "--model",
            "m",
            "--context",
            "a",
            "--utterance",
            "b",
            "--shout",
        ],
        vec!["eval", "--model", "m"],
    ] {
        let out = rsmlp(&args);
        assert_eq!(out.code, EXIT_USAGE, "{args:?}");
        assert!(out.stdout.is_empty());
        assert!(!out.stderr.is_empty());
    }
    assert_eq!(rsmlp(&["--help"]).code, EXIT_OK);
}

#[test]
fn bad_config_is_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("toy.jsonl");
    std::fs::write(&corpus, common::TOY).unwrap();
    let config = dir.path().join("bad.conf");
    std::fs::write(&config, "epochs = 1\nwarp_speed = 9\n").unwrap();
    let out = rsmlp(&[
        "train",
        "--train",
        s(&corpus),
        "--config",
        s(&config),
        "--out",
        s(&dir.path().join("m")),
    ]);
    assert_eq!(out.code, EXIT_USAGE);
    assert!(out.stderr.contains("warp_speed"));
}

#[test]
fn missing_files_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let nowhere = dir.path().join("missing.jsonl");
    let out = rsmlp(&[
        "derive-labels",
        "--input",
        s(&nowhere),
        "--output",
        s(&dir.path().join("o")),
    ]);
    assert_eq!(out.code, EXIT_DATA);
    let out = rsmlp(&[
        "train",
        "--train",
        s(&nowhere),
        "--out",
        s(&dir.path().join("m")),
    ]);
    assert_eq!(out.code, EXIT_DATA);
    let out = rsmlp(&[
        "rewrite",
        "--model",
        s(&nowhere),
        "--context",
        "a",
        "--utterance",
        "b",
    ]);
    assert_eq!(out.code, EXIT_DATA);
    let junk = dir.path().join("junk.ckpt");
    std::fs::write(&junk, b"RSMCnope").unwrap();
    let out = rsmlp(&["eval", "--model", s(&junk), "--data", s(&nowhere)]);
    assert_eq!(out.code, EXIT_DATA);
}

#[test]
fn binary_exit_codes() {
    let bin = env!("CARGO_BIN_EXE_rsmlp");
    let status = Command::new(bin).arg("--nope").output().unwrap();
    assert_eq!(status.status.code(), Some(EXIT_USAGE));
    assert!(status.stdout.is_empty());
    let status = Command::new(bin)
        .args(["bench", "--model", "/nonexistent/model.ckpt"])
        .output()
        .unwrap();
    assert_eq!(status.status.code(), Some(EXIT_DATA));
}
