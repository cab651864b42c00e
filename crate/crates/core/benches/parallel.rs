//! Hot paths that fan out through `par`. Group names carry the build mode,
//! so running once with default features and once with
//! `--no-default-features` leaves both sets side by side in the criterion
//! report.

use criterion::{criterion_group, criterion_main, BatchSize, Criterion};

use styleprobe::attribution::{integrated_gradients, smoothgrad, zeros_like};
use styleprobe::classifier::{Architecture, ClassifierModel, Normalization};
use styleprobe::directions::sample_latent_dataset_with;
use styleprobe::generator::{Generator, GeneratorGeometry};
use styleprobe::inversion::{invert, InversionConfig};
use styleprobe::numeric::Rng;
use styleprobe::par;
use styleprobe::scenario::{make_dataset, toy_faces, DatasetConfig};

fn mode() -> &'static str {
    if par::is_parallel() {
        "parallel"
    } else {
        "sequential"
    }
}

fn benches(c: &mut Criterion) {
    let g = Generator::new(GeneratorGeometry::default()).unwrap();
    let scene = toy_faces();
    let model = ClassifierModel::initialize(
        "toy-faces",
        Architecture::default(),
        Normalization::default(),
        &mut Rng::new(1),
    )
    .unwrap();
    let target = g
        .synthesize_style(&g.sample_style(&mut Rng::new(2)), &scene)
        .unwrap();

    let mut group = c.benchmark_group(mode());
    group.sample_size(10);

    group.bench_function("render_dataset_256", |b| {
        let cfg = DatasetConfig {
            n_train: 192,
            n_val: 64,
            ..Default::default()
        };
        b.iter(|| make_dataset(&g, &scene, &cfg).unwrap())
    });
    group.bench_function("latent_labels_2000", |b| {
        b.iter(|| {
            sample_latent_dataset_with(&g, 1600, 400, 3, |w| {
                Ok(scene.label_of(&g.decode_style(w, &scene)?))
            })
            .unwrap()
        })
    });
    group.bench_function("smoothgrad_25", |b| {
        b.iter(|| smoothgrad(&model, &target, 25, 0.1, 0).unwrap())
    });
    group.bench_function("integrated_gradients_128", |b| {
        let base = zeros_like(&target);
        b.iter(|| integrated_gradients(&model, &target, &base, 128).unwrap())
    });
    group.bench_function("invert_4x50", |b| {
        let cfg = InversionConfig {
            restarts: 4,
            steps: 50,
            ..Default::default()
        };
        b.iter_batched(
            || cfg.clone(),
            |cfg| invert(&g, &target, &scene, &cfg).unwrap(),
            BatchSize::SmallInput,
        )
    });
    group.finish();
}

criterion_group!(parallel, benches);
criterion_main!(parallel);
