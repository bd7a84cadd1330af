use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use lq_bench::{batch, config, context, critic};
use lq_core::agent::{lql_update, nclql_update, policy_actions, Algorithm};
use lq_core::nn::{AdamState, NoiseLevel};
use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn critic_passes(c: &mut Criterion) {
    let mut group = c.benchmark_group("critic");
    let q = critic(Algorithm::Nclql, 0);
    for n in [1usize, 256, 2048] {
        let b = batch(n, 1);
        group.throughput(Throughput::Elements(n as u64));
        group.bench_with_input(BenchmarkId::new("values", n), &b, |bench, b| {
            bench.iter(|| {
                q.values(b.states.view(), b.actions.view(), NoiseLevel::Shared(0.001))
                    .unwrap()
            })
        });
        group.bench_with_input(BenchmarkId::new("action_gradients", n), &b, |bench, b| {
            bench.iter(|| {
                q.action_gradients(b.states.view(), b.actions.view(), NoiseLevel::Shared(0.001))
                    .unwrap()
            })
        });
    }
    group.finish();
}

fn sampling(c: &mut Criterion) {
    let mut group = c.benchmark_group("policy");
    group.sample_size(10);
    for alg in [Algorithm::Lql, Algorithm::Nclql] {
        let q = critic(alg, 0);
        let ctx = context(alg);
        for n in [1usize, 1000] {
            let states = Array2::zeros((n, 1));
            group.throughput(Throughput::Elements(n as u64));
            group.bench_function(BenchmarkId::new(format!("{alg:?}"), n), |bench| {
                bench.iter(|| {
                    policy_actions(&q, states.view(), &ctx.schedule, &ctx.sampler_config(7))
                        .unwrap()
                })
            });
        }
    }
    group.finish();
}

fn updates(c: &mut Criterion) {
    let mut group = c.benchmark_group("update");
    group.sample_size(20);
    let b = batch(256, 2);
    for alg in [Algorithm::Lql, Algorithm::Nclql] {
        let mut q = critic(alg, 0);
        let target = q.clone();
        let mut opt = AdamState::new(q.mlp(), config(alg).critic.adam());
        let ctx = context(alg);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        group.bench_function(format!("{alg:?}"), |bench| {
            bench.iter(|| match alg {
                Algorithm::Lql => {
                    lql_update(&mut q, &mut opt, &target, &b, &ctx, &mut rng).unwrap()
                }
                Algorithm::Nclql => {
                    nclql_update(&mut q, &mut opt, &target, &b, &ctx, &mut rng).unwrap()
                }
            })
        });
    }
    group.finish();
}

criterion_group!(benches, critic_passes, sampling, updates);
criterion_main!(benches);
