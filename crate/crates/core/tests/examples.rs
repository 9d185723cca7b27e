// The examples double as smoke tests; each exposes `run_example`.

#[allow(dead_code)]
#[path = "../examples/bench_latency.rs"]
mod bench_latency;
#[allow(dead_code)]
#[path = "../examples/derive_edits.rs"]
mod derive_edits;
#[allow(dead_code)]
#[path = "../examples/gradient_check.rs"]
mod gradient_check;
#[allow(dead_code)]
#[path = "../examples/metrics.rs"]
mod metrics;
#[allow(dead_code)]
#[path = "../examples/precomputed_embeddings.rs"]
mod precomputed_embeddings;
#[allow(dead_code)]
#[path = "../examples/tokenize_and_join.rs"]
mod tokenize_and_join;

#[test]
fn tokenize_and_join_runs() {
    tokenize_and_join::run_example().unwrap();
}

#[test]
fn derive_edits_restores_weather_dialogue() {
    assert_eq!(
        derive_edits::run_example().unwrap(),
        "深圳的气候为什么会十分潮湿"
    );
}

#[test]
fn metrics_example_values() {
    let s = metrics::run_example().unwrap();
    assert!((s.bleu1 - 60.65).abs() < 0.05);
    assert!((s.rouge1 - 66.7).abs() < 0.05);
    assert!((s.restoration_r1 - 44.4).abs() < 0.05);
}

#[test]
fn gradient_check_example_passes() {
    let r = gradient_check::run_example().unwrap();
    assert!(r.max_rel_error < 1e-4, "{r:?}");
}

#[test]
fn bench_example_reports() {
    let reports = bench_latency::run_example().unwrap();
    assert_eq!(reports.len(), 3);
    assert!(reports.iter().all(|r| r.p50_ms > 0.0));
}

#[test]
fn precomputed_example_learns() {
    assert!(precomputed_embeddings::run_example().unwrap() > 90.0);
}
