use std::hint::black_box;
use std::path::PathBuf;
use std::sync::Arc;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use screening_bench::{assessments, document, words};
use screening_core::decide::rank_candidates;
use screening_core::ingest::{prepare_record, TokenEstimator};
use screening_core::metrics::{bleu, rouge_l, BleuConfig};
use screening_core::runtime::{Pipeline, RunConfig, RunStore, StageBackendSet};
use screening_core::{MockBackend, SharedBackend};

fn text_metrics(c: &mut Criterion) {
    let mut group = c.benchmark_group("text_metrics");
    for n in [50usize, 200, 800] {
        let cand = words(n, 1);
        let reference = words(n, 2);
        group.bench_with_input(BenchmarkId::new("rouge_l", n), &n, |b, _| {
            b.iter(|| rouge_l(black_box(&cand), black_box(&reference)))
        });
        let cfg = BleuConfig::default();
        group.bench_with_input(BenchmarkId::new("bleu", n), &n, |b, _| {
            b.iter(|| bleu(black_box(&cand), black_box(&reference), &cfg))
        });
    }
    group.finish();
}

fn segmentation(c: &mut Criterion) {
    let doc = document("bench", 80, 7);
    let estimator = TokenEstimator::default();
    c.bench_function("prepare_record_80_sentences", |b| {
        b.iter(|| prepare_record(black_box(&doc), &estimator))
    });
}

fn ranking(c: &mut Criterion) {
    let items = assessments(1000, 3);
    c.bench_function("rank_1000_candidates", |b| {
        b.iter(|| rank_candidates(black_box(&items)))
    });
}

fn mock_pipeline(c: &mut Criterion) {
    let fixtures = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/resumes");
    let rt = tokio::runtime::Runtime::new().expect("runtime");
    let dir = tempfile::tempdir().expect("tempdir");
    let store = RunStore::new(dir.path());
    let cfg = RunConfig {
        corpus: fixtures,
        store_root: dir.path().to_path_buf(),
        ..RunConfig::default()
    };
    let backend: SharedBackend = Arc::new(MockBackend::new());
    let pipeline =
        Pipeline::with_backends(cfg, StageBackendSet::uniform(backend)).expect("valid config");
    let mut group = c.benchmark_group("pipeline");
    group.sample_size(10);
    group.bench_function("mock_fixture_run", |b| {
        b.to_async(&rt)
            .iter(|| async { pipeline.run(&store).await.expect("run") })
    });
    group.finish();
}

criterion_group!(benches, text_metrics, segmentation, ranking, mock_pipeline);
criterion_main!(benches);
