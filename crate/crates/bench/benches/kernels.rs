use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use seminmt::decoding::{beam_search, default_max_len};
use seminmt::semisup::{joint_objective, reconstruction_grads, reconstruction_marginal, supervised_batch, LatentSearch};
use seminmt::ObjectiveWeights;
use seminmt_bench::{Fixture, Scale};

fn supervised(c: &mut Criterion) {
    let f = Fixture::new(Scale::DESK, 1).unwrap();
    c.bench_function("supervised_batch/desk", |b| b.iter(|| supervised_batch(&f.s2t, black_box(&f.pairs)).unwrap()));
    let (x, y) = &f.pairs[0];
    c.bench_function("log_prob_grad/desk", |b| b.iter(|| f.s2t.log_prob_grad(black_box(x.ids()), y.ids()).unwrap()));
}

fn search(c: &mut Criterion) {
    let f = Fixture::new(Scale::DESK, 2).unwrap();
    let x = f.pairs[0].0.ids();
    let mut group = c.benchmark_group("beam_search/desk");
    for width in [1, 5, 20] {
        group.bench_with_input(BenchmarkId::from_parameter(width), &width, |b, &w| {
            b.iter(|| beam_search(&f.s2t, black_box(x), w, w.min(10), default_max_len(x.len())).unwrap())
        });
    }
    group.finish();
}

fn reconstruction(c: &mut Criterion) {
    let f = Fixture::new(Scale::DESK, 3).unwrap();
    let y = f.pairs[0].1.ids();
    let mut group = c.benchmark_group("reconstruction/desk");
    for k in [1, 5, 10] {
        let search = LatentSearch::new(k);
        group.bench_with_input(BenchmarkId::new("marginal", k), &search, |b, &s| {
            b.iter(|| reconstruction_marginal(&f.t2s, &f.s2t, black_box(y), s).unwrap())
        });
        let (_, set) = reconstruction_marginal(&f.t2s, &f.s2t, y, search).unwrap();
        group.bench_with_input(BenchmarkId::new("grads", k), &set, |b, set| {
            b.iter(|| reconstruction_grads(&f.t2s, &f.s2t, black_box(y), set).unwrap())
        });
    }
    group.finish();
}

fn joint(c: &mut Criterion) {
    let f = Fixture::new(Scale::TINY, 4).unwrap();
    let mono = f.targets();
    let weights = ObjectiveWeights::new(0.1, 0.0).unwrap();
    c.bench_function("joint_objective/tiny_k10", |b| {
        b.iter(|| {
            joint_objective(&f.s2t, &f.t2s, &f.pairs, &mono, &[], weights, LatentSearch::new(10)).unwrap()
        })
    });
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(10);
    targets = supervised, search, reconstruction, joint
}
criterion_main!(benches);
