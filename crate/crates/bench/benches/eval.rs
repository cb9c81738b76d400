use std::collections::BTreeMap;

use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use cogstyle_core::eval::{binary_auc, EffectSpec, PlantedShift};
use cogstyle_core::features::Pca;
use cogstyle_core::{
    cross_validate, fit_logistic, generate_synthetic, CognitiveStyleClass, CvConfig, FeatureTable,
};

const PRIORS: [f64; 4] = [0.06, 0.17, 0.11, 0.66];

fn synthetic(n: usize, n_features: usize) -> (FeatureTable, BTreeMap<String, CognitiveStyleClass>) {
    let spec = EffectSpec {
        n_features,
        shifts: vec![PlantedShift {
            feature: 0,
            class: CognitiveStyleClass::DownCisDownInf,
            d: 0.8,
        }],
    };
    generate_synthetic(n, 1, &PRIORS, &spec).unwrap()
}

fn bench_fit(c: &mut Criterion) {
    let mut group = c.benchmark_group("fit_logistic");
    for d in [8, 64] {
        let (table, labels) = synthetic(500, d);
        let ids: Vec<&str> = table.ids().collect();
        let x = table.matrix(ids.iter().copied()).unwrap();
        let y: Vec<usize> = ids.iter().map(|id| labels[*id].index()).collect();
        group.bench_with_input(BenchmarkId::from_parameter(d), &d, |b, _| {
            b.iter(|| fit_logistic(black_box(&x), black_box(&y), 4, 1.0).unwrap())
        });
    }
    group.finish();
}

fn bench_cv(c: &mut Criterion) {
    let (table, labels) = synthetic(500, 16);
    c.bench_function("cross_validate/500x16", |b| {
        b.iter(|| cross_validate(black_box(&table), black_box(&labels), &CvConfig::new("bench")).unwrap())
    });
    let mut cfg = CvConfig::new("bench-pca");
    cfg.reduce_to = Some(4);
    c.bench_function("cross_validate/500x16/pca4", |b| {
        b.iter(|| cross_validate(black_box(&table), black_box(&labels), &cfg).unwrap())
    });
}

fn bench_auc(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let scores: Vec<f64> = (0..10_000).map(|_| rng.gen()).collect();
    let labels: Vec<bool> = (0..10_000).map(|_| rng.gen_bool(0.3)).collect();
    c.bench_function("binary_auc/10000", |b| {
        b.iter(|| binary_auc(black_box(&scores), black_box(&labels)).unwrap())
    });
}

fn bench_pca(c: &mut Criterion) {
    let mut group = c.benchmark_group("pca_fit");
    for (n, d) in [(500, 64), (120, 845)] {
        let (table, _) = synthetic(n, d);
        let ids: Vec<&str> = table.ids().collect();
        group.bench_with_input(BenchmarkId::from_parameter(format!("{n}x{d}")), &ids, |b, ids| {
            b.iter(|| Pca::fit(black_box(&table), ids, 16).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, bench_fit, bench_cv, bench_auc, bench_pca);
criterion_main!(benches);
