use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use gfr_bayes::harness::{run_sweep, Execution, ExperimentConfig};
use gfr_bayes::posterior::{EntropyMode, LossConstants, PosteriorContext};
use gfr_bayes::model::ModelConfig;
use gfr_bayes::sample::CensoredSample;

fn experiment(repetitions: usize) -> ExperimentConfig {
    format!(
        "r = 15\ntheta = 1.5\nlambda1 = 0.1\nlambda2 = 0.2\nrho = 0.5\nc1 = 5\nc2 = 10\n\
         repetitions = {repetitions}\nseed = 1\nsweep.n = 20, 50, 100\n"
    )
    .parse()
    .unwrap()
}

fn sweep(c: &mut Criterion) {
    let mut group = c.benchmark_group("sweep");
    group.sample_size(10);
    for reps in [50, 200] {
        let cfg = experiment(reps);
        group.bench_with_input(BenchmarkId::new("sequential", reps), &cfg, |b, cfg| {
            b.iter(|| run_sweep(cfg, Execution::Sequential).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("parallel", reps), &cfg, |b, cfg| {
            b.iter(|| run_sweep(cfg, Execution::Parallel).unwrap())
        });
    }
    group.finish();
}

fn estimators(c: &mut Criterion) {
    let cfg = ModelConfig::new(1.5, 0.1, 0.2, 0.5).unwrap();
    let times: Vec<f64> = (1..=15).map(|i| 0.3 * i as f64).collect();
    let sample = CensoredSample::new(50, 15, times).unwrap();
    let loss = LossConstants::new(5.0, 10.0).unwrap();
    c.bench_function("estimate r=15", |b| {
        b.iter(|| {
            let ctx = PosteriorContext::new(cfg, &sample).unwrap();
            ctx.estimate(&loss, EntropyMode::DropDivergent).unwrap()
        })
    });
}

criterion_group!(benches, sweep, estimators);
criterion_main!(benches);
