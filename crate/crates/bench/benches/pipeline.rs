use criterion::{black_box, criterion_group, criterion_main, Criterion};

use ihc2he_bench::{bimodal_histogram, label_pair, random_tensor, toy_models};
use ihc2he_core::evaluation::{accuracy_curve, match_instances};
use ihc2he_core::synthetic::five_discs;
use ihc2he_core::translation::Trainer;
use ihc2he_core::{otsu_threshold, segment_classical, ClassicalParams, TranslationConfig};

fn scoring(c: &mut Criterion) {
    let hist = bimodal_histogram(1);
    c.bench_function("otsu_threshold", |b| b.iter(|| otsu_threshold(black_box(&hist))));

    let (pred, gt) = label_pair(256, 7);
    c.bench_function("match_instances_256", |b| {
        b.iter(|| match_instances(black_box(&pred), black_box(&gt), 0.5))
    });
    c.bench_function("accuracy_curve_256", |b| {
        b.iter(|| accuracy_curve(black_box(&pred), black_box(&gt), 0.5, 1.0, 0.05))
    });
}

fn segmentation(c: &mut Criterion) {
    let (img, _) = five_discs();
    let params = ClassicalParams::default();
    c.bench_function("segment_classical_128", |b| {
        b.iter(|| segment_classical(black_box(&img), &params))
    });
}

fn translation(c: &mut Criterion) {
    let (config, models) = toy_models();
    let x = random_tensor(3, 64, 1);
    c.bench_function("generator_forward_64", |b| b.iter(|| models.gen_ab.predict(black_box(&x))));

    let mut trainer = Trainer::new(TranslationConfig {
        deterministic: true,
        ..config
    })
    .unwrap();
    let a = [random_tensor(3, 64, 2)];
    let bb = [random_tensor(3, 64, 3)];
    let mut group = c.benchmark_group("training");
    group.sample_size(10);
    group.bench_function("train_step_64", |b| b.iter(|| trainer.train_step(&a, &bb).unwrap()));
    group.finish();
}

criterion_group!(benches, scoring, segmentation, translation);
criterion_main!(benches);
