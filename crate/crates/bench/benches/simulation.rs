use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use lncsim::oracle::{default_horizon, min_apdd, min_completion};
use lncsim::schemes::cauchy_row;
use lncsim::sfm::{pair_wants, random_sfm, two_packet_triangle};
use lncsim::{ChannelSpec, EliminationState, Field, MemoryMode, MonteCarlo, SchemeSpec, Session};

fn absorb(c: &mut Criterion) {
    let field = Field::gf256();
    let mut group = c.benchmark_group("absorb_full_rank");
    for k in [8usize, 32, 64] {
        let rows: Vec<_> = (1..=k).map(|t| cauchy_row(&field, k, t).unwrap()).collect();
        group.bench_with_input(BenchmarkId::from_parameter(k), &rows, |b, rows| {
            b.iter(|| {
                let mut state = EliminationState::new(field.clone(), k);
                for r in rows {
                    state.absorb(black_box(r)).unwrap();
                }
                state.rank()
            })
        });
    }
    group.finish();
}

fn session(c: &mut Criterion) {
    let sfm = random_sfm(10, 12, 0.5, 7).unwrap();
    let channel = ChannelSpec::uniform(10, 0.3).unwrap();
    let mut group = c.benchmark_group("session_n10_k12");
    for (name, scheme, field, memory) in [
        ("rlnc", SchemeSpec::Rlnc, Field::gf256(), MemoryMode::FullMemory),
        ("mds", SchemeSpec::Mds, Field::gf256(), MemoryMode::FullMemory),
        ("idnc-greedy", SchemeSpec::IdncGreedy, Field::gf2(), MemoryMode::Memoryless),
    ] {
        let mut seed = 0u64;
        group.bench_function(name, |b| {
            b.iter(|| {
                seed += 1;
                let mut s = Session::new(sfm.clone(), channel.clone(), field.clone(), &scheme, memory, seed).unwrap();
                s.run(1000).unwrap().overall
            })
        });
    }
    group.finish();
}

fn monte_carlo(c: &mut Criterion) {
    let sfm = lncsim::Sfm::from_rows(&["1111", "1010", "0110"]);
    let channel = ChannelSpec::uniform(3, 0.5).unwrap();
    let mc = MonteCarlo {
        sfm,
        channel: channel.clone(),
        field: Field::gf256(),
        scheme: SchemeSpec::Mds,
        memory: MemoryMode::FullMemory,
        trials: 10_000,
        master_seed: 1,
        max_slots: lncsim::session::default_max_slots(4, &channel),
    };
    c.bench_function("monte_carlo_mds_10k_trials", |b| b.iter(|| mc.run().unwrap().u.mean));
}

fn oracle(c: &mut Criterion) {
    let gf2 = Field::gf2();
    let a14 = pair_wants(4).unwrap();
    let random = random_sfm(5, 5, 0.5, 3).unwrap();
    let triangle = two_packet_triangle();
    c.bench_function("oracle_completion_a1_k4", |b| {
        b.iter(|| min_completion(&a14, &gf2, default_horizon(&a14)).unwrap().optimum)
    });
    c.bench_function("oracle_apdd_triangle", |b| {
        b.iter(|| min_apdd(&triangle, &gf2, default_horizon(&triangle)).unwrap().optimum)
    });
    c.bench_function("oracle_apdd_random_n5_k5", |b| {
        b.iter(|| min_apdd(&random, &gf2, default_horizon(&random)).unwrap().optimum)
    });
}

criterion_group!(benches, absorb, session, monte_carlo, oracle);
criterion_main!(benches);
