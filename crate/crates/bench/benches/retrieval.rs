use std::hint::black_box;
use std::sync::Arc;

use coachqa_core::fixtures::{planted, random_corpus};
use coachqa_core::{
    pipeline_answer, AnalyzerConfig, Bm25Params, Bm25Retriever, DenseIndex, DenseRetriever, Embedder, InvertedIndex,
    ReferenceEmbedder, ReferenceReader, Retriever,
};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

fn bm25(c: &mut Criterion) {
    let mut group = c.benchmark_group("bm25");
    for n in [1_000usize, 10_000] {
        let store = random_corpus(7, n, 5_000, 120);
        group.bench_with_input(BenchmarkId::new("build", n), &store, |b, store| {
            b.iter(|| InvertedIndex::build(store, AnalyzerConfig::default(), Bm25Params::default()).unwrap())
        });
        let index = InvertedIndex::build(&store, AnalyzerConfig::default(), Bm25Params::default()).unwrap();
        group.bench_with_input(BenchmarkId::new("search_k10", n), &index, |b, index| {
            b.iter(|| index.search(black_box("w12 w340 w7 w2210 w99"), 10).unwrap())
        });
    }
    group.finish();
}

fn dense(c: &mut Criterion) {
    let mut group = c.benchmark_group("dense");
    let embedder = ReferenceEmbedder::new(256, 0).unwrap();
    for n in [1_000usize, 10_000] {
        let store = random_corpus(11, n, 5_000, 120);
        let index = DenseIndex::build(&store, &embedder).unwrap();
        let query = embedder.embed("w12 w340 w7 w2210 w99").unwrap();
        group.bench_with_input(BenchmarkId::new("search_k10", n), &index, |b, index| {
            b.iter(|| index.search(black_box(&query), 10).unwrap())
        });
    }
    group.finish();
}

fn end_to_end(c: &mut Criterion) {
    let f = planted(200, 2_000);
    let index = Arc::new(InvertedIndex::build(&f.store, AnalyzerConfig::default(), Bm25Params::default()).unwrap());
    let reader = ReferenceReader::from_index(&index, 30);
    let sparse = Bm25Retriever::new(index);
    let embedder: Arc<dyn Embedder> = Arc::new(ReferenceEmbedder::new(256, 0).unwrap());
    let dense = DenseRetriever::new(Arc::new(DenseIndex::build(&f.store, embedder.as_ref()).unwrap()), embedder);
    let question = f.dataset.records()[17].question.clone();

    let mut group = c.benchmark_group("ask");
    for retriever in [&sparse as &dyn Retriever, &dense] {
        group.bench_function(retriever.name(), |b| {
            b.iter(|| {
                let hits = retriever.retrieve(black_box(&question), 5).unwrap();
                pipeline_answer(&question, &hits, &reader, &f.store).unwrap()
            })
        });
    }
    group.finish();
}

criterion_group!(benches, bm25, dense, end_to_end);
criterion_main!(benches);
