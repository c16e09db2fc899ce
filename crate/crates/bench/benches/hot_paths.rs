use criterion::{black_box, criterion_group, criterion_main, BatchSize, Criterion, Throughput};
use hftmm_bench::{book_stream, sim_ticks};
use hftmm_core::agents::FixedSpread;
use hftmm_core::book::{BookConfig, OrderBook};
use hftmm_core::env::{run_event_loop, LatencyConfig, SessionConfig};
use hftmm_core::rl::Mlp;
use hftmm_core::sim::{MarketSim, SimParams};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn book_apply(c: &mut Criterion) {
    let (snap, msgs) = book_stream(1, 20_000);
    let mut g = c.benchmark_group("book");
    g.throughput(Throughput::Elements(msgs.len() as u64));
    g.bench_function("apply_20k", |b| {
        b.iter_batched(
            || OrderBook::from_snapshot(&snap, BookConfig::default()).unwrap(),
            |mut book| {
                for m in &msgs {
                    black_box(book.apply(m).unwrap());
                }
                book
            },
            BatchSize::LargeInput,
        )
    });
    g.finish();
}

fn sim_generate(c: &mut Criterion) {
    let mut g = c.benchmark_group("sim");
    g.throughput(Throughput::Elements(10_000));
    g.bench_function("next_tick_10k", |b| {
        b.iter(|| {
            let mut sim = MarketSim::new(SimParams::fast_feed()).unwrap();
            for _ in 0..10_000 {
                black_box(sim.next_tick());
            }
        })
    });
    g.finish();
}

fn mlp(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let net = Mlp::new(&[12, 64, 64, 101], &mut rng);
    let x: Vec<f64> = (0..12).map(|i| i as f64 * 0.1 - 0.5).collect();
    let grad_out = vec![0.01; 101];
    let mut grads = vec![0.0; net.param_count()];
    c.bench_function("mlp/forward", |b| b.iter(|| black_box(net.forward(black_box(&x)).unwrap())));
    c.bench_function("mlp/forward_backward", |b| {
        b.iter(|| {
            let cache = net.forward_cached(black_box(&x)).unwrap();
            net.backward(&cache, &grad_out, &mut grads);
        })
    });
}

fn session(c: &mut Criterion) {
    let ticks = sim_ticks(5, 50_000);
    let config = SessionConfig {
        latency: LatencyConfig::new(20, 40),
        record_trace: false,
        ..Default::default()
    };
    let mut g = c.benchmark_group("session");
    g.throughput(Throughput::Elements(ticks.len() as u64));
    g.sample_size(20);
    g.bench_function("fixed_spread_50k", |b| {
        b.iter(|| black_box(run_event_loop(ticks.clone(), config, &mut FixedSpread).total_reward()))
    });
    g.finish();
}

criterion_group!(benches, book_apply, sim_generate, mlp, session);
criterion_main!(benches);
