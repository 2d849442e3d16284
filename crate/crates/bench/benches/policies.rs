use std::hint::black_box;

use abr5g_core::abr::{AbrPolicy, Mpc, MpcParams, PolicyKind};
use abr5g_core::scenarios::Scenario;
use abr5g_core::simulator::{run_session, SimConfig};
use abr5g_core::BitrateLadder;
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

fn mpc_horizon(c: &mut Criterion) {
    let ladder = BitrateLadder::uhd();
    let sim = SimConfig::default();
    let trace = Scenario::Concert.synthesize(2).unwrap();
    let mut policy = Mpc::new(MpcParams::default());
    let obs = run_session(&trace, &mut policy, &ladder, &sim).unwrap().observations;
    let mut group = c.benchmark_group("mpc/plan");
    for horizon in [1, 3, 5] {
        let mpc = Mpc::new(MpcParams {
            horizon,
            ..MpcParams::default()
        });
        group.bench_with_input(BenchmarkId::from_parameter(horizon), &horizon, |b, _| {
            b.iter(|| {
                obs.iter()
                    .step_by(13)
                    .map(|o| mpc.plan(black_box(o), &ladder, 12_000.0))
                    .sum::<usize>()
            })
        });
    }
    group.finish();
}

fn baselines(c: &mut Criterion) {
    let ladder = BitrateLadder::uhd();
    let sim = SimConfig {
        total_chunks: 100,
        ..SimConfig::default()
    };
    let trace = Scenario::Driving.synthesize(4).unwrap();
    let kinds = [
        PolicyKind::Bb(Default::default()),
        PolicyKind::Rb(Default::default()),
        PolicyKind::Bola(Default::default()),
        PolicyKind::RobustMpc {
            horizon: 5,
            metric: abr5g_core::MetricId::Hd,
        },
    ];
    let mut group = c.benchmark_group("session/100 chunks");
    for kind in &kinds {
        group.bench_function(kind.label(), |b| {
            b.iter(|| {
                let (mut policy, l) = kind.build(&ladder, &sim).unwrap();
                let policy: &mut dyn AbrPolicy = policy.as_mut();
                run_session(&trace, policy, &l, &sim).unwrap()
            })
        });
    }
    group.finish();
}

criterion_group!(benches, mpc_horizon, baselines);
criterion_main!(benches);
