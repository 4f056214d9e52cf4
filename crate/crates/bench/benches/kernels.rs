use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use placegan::data::{canny_mask, synthesize_paired_domains, CANNY_HIGH, CANNY_LOW};
use placegan::features::StackNormalization;
use placegan::placerec::{distance_matrix, nearest_neighbor, sequence_matches};
use placegan::tensor::{conv2d, conv2d_backward, transposed_conv2d, ConvSpec};
use placegan::{Generator, GeneratorConfig, TrainerState, TrainingConfig};
use placegan::{DiscriminatorConfig, Tensor};
use placegan_bench::{random_features, random_tensor};

fn convolutions(c: &mut Criterion) {
    let mut group = c.benchmark_group("conv");
    // encoder layers of the default generator at batch 4
    for (cin, cout, size) in [(3, 64, 64), (64, 128, 32), (128, 256, 16), (256, 512, 8)] {
        let spec = ConvSpec::new(cin, cout, 4, 2, 1);
        let x: Tensor<f32> = random_tensor(&[4, cin, size, size], 1);
        let w: Tensor<f32> = random_tensor(&[cout, cin, 4, 4], 2);
        let b: Tensor<f32> = Tensor::zeros(&[cout]);
        let id = format!("{cin}x{size}->{cout}");
        group.bench_with_input(BenchmarkId::new("forward", &id), &(), |bench, _| {
            bench.iter(|| conv2d(black_box(&x), &w, &b, &spec).unwrap())
        });
        let y = conv2d(&x, &w, &b, &spec).unwrap();
        group.bench_with_input(BenchmarkId::new("backward", &id), &(), |bench, _| {
            bench.iter(|| conv2d_backward(black_box(&y), Some(&x), &w, &spec).unwrap())
        });
        let back = ConvSpec::new(cout, cin, 4, 2, 1);
        let bt: Tensor<f32> = Tensor::zeros(&[cin]);
        group.bench_with_input(BenchmarkId::new("transposed", &id), &(), |bench, _| {
            bench.iter(|| transposed_conv2d(black_box(&y), &w, &bt, &back).unwrap())
        });
    }
    group.finish();
}

fn networks(c: &mut Criterion) {
    let mut group = c.benchmark_group("networks");
    group.sample_size(10);
    let g = Generator::<f32>::new(GeneratorConfig::default()).unwrap();
    let x: Tensor<f32> = random_tensor(&[1, 3, 64, 64], 3);
    group.bench_function("translate one image", |bench| bench.iter(|| g.infer(black_box(&x)).unwrap()));

    let small = [16, 32, 64, 128];
    let gcfg = GeneratorConfig { encoder_channels: small.to_vec(), ..Default::default() };
    let dcfg = DiscriminatorConfig { encoder_channels: small.to_vec(), feature_dim: 256, ..Default::default() };
    let state = TrainerState::<f32>::new(TrainingConfig::default(), gcfg, dcfg).unwrap();
    let a: Tensor<f32> = random_tensor(&[4, 3, 64, 64], 4);
    let b: Tensor<f32> = random_tensor(&[4, 3, 64, 64], 5);
    group.bench_function("train step (quarter width)", |bench| {
        bench.iter_batched(|| state.clone(), |mut s| s.train_step(&a, &b).unwrap(), criterion::BatchSize::LargeInput)
    });
    group.finish();
}

fn matching(c: &mut Criterion) {
    let mut group = c.benchmark_group("matching");
    group.sample_size(10);
    let q = random_features(1000, 512, 6);
    let d = random_features(1000, 512, 7);
    group.bench_function("distance matrix 1000x1000x512", |bench| {
        bench.iter(|| nearest_neighbor(&distance_matrix(black_box(&q), &d).unwrap()))
    });
    group.bench_function("sequence matches n=5", |bench| {
        bench.iter(|| sequence_matches(black_box(&q), &d, 5, StackNormalization::PerFrame).unwrap())
    });
    group.finish();
}

fn edges(c: &mut Criterion) {
    let (a, _) = synthesize_paired_domains(0, 1, 64).unwrap();
    c.bench_function("canny 64x64", |bench| {
        bench.iter(|| canny_mask(black_box(&a[0].pixels), CANNY_LOW, CANNY_HIGH).unwrap())
    });
}

criterion_group!(benches, convolutions, networks, matching, edges);
criterion_main!(benches);
