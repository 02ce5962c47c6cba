use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use fedtopic::federation::fedavg;
use fedtopic::metrics::perplexity;
use fedtopic::pruning::{select_mask, GradientAccumulator, PruneMask};
use fedtopic::rng;
use fedtopic::topic_model::Trainer;
use fedtopic_bench::fixture;

fn train_steps(c: &mut Criterion) {
    let f = fixture(100);
    let mask = PruneMask::all_ones(&f.params);
    let mut trainer = Trainer::new(f.config.clone(), f.params.clone(), f.corpus.len()).unwrap();
    let mut stream = rng::stream(1, &[]);
    c.bench_function("train_10_steps_h100", |b| {
        b.iter(|| trainer.run(f.corpus.docs(), 10, &mut stream, &mask, None).unwrap())
    });
}

fn mask_selection(c: &mut Criterion) {
    let f = fixture(100);
    let mut z = GradientAccumulator::zeros_for(&f.params);
    let mut trainer = Trainer::new(f.config.clone(), f.params.clone(), f.corpus.len()).unwrap();
    let mask = PruneMask::all_ones(&f.params);
    trainer
        .run(f.corpus.docs(), 5, &mut rng::stream(2, &[]), &mask, Some(&mut z))
        .unwrap();
    c.bench_function("select_mask_h100", |b| {
        b.iter(|| select_mask(black_box(&trainer.params), &z, 0.2, 2e-3).unwrap())
    });
}

fn aggregation(c: &mut Criterion) {
    let f = fixture(100);
    let models = vec![f.params.clone(); 10];
    let weights: Vec<f64> = (1..=10).map(f64::from).collect();
    c.bench_function("fedavg_10_clients_h100", |b| {
        b.iter(|| fedavg(black_box(&models), &weights).unwrap())
    });
}

fn evaluation(c: &mut Criterion) {
    let f = fixture(100);
    c.bench_function("perplexity_2000_docs_h100", |b| {
        b.iter(|| perplexity(black_box(&f.params), &f.corpus).unwrap())
    });
}

criterion_group!(benches, train_steps, mask_selection, aggregation, evaluation);
criterion_main!(benches);
