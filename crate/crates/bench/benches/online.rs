use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use nwrob::harness::generator::{gen_instance, GenParams};
use nwrob::harness::{run_with_oracle, OracleTable, RunConfig, Variant};
use nwrob::pcsc::{PcscState, Scheme};
use nwrob::ZeroedSet;
use std::hint::black_box;

fn instance() -> nwrob::Instance {
    let p = GenParams::parse(["nodes=12", "terminals=6", "pairs=8", "arrivals=48", "M=4"]).unwrap();
    gen_instance("random-geometric", &p, 2024).unwrap()
}

fn full_runs(c: &mut Criterion) {
    let inst = instance();
    let mut group = c.benchmark_group("run");
    for v in Variant::ALL {
        let cfg = RunConfig::for_instance(v, 1, &inst);
        group.bench_with_input(BenchmarkId::from_parameter(v), &cfg, |b, cfg| {
            b.iter(|| run_with_oracle(black_box(&inst), cfg, None).unwrap())
        });
    }
    group.finish();
}

fn oracle(c: &mut Criterion) {
    let inst = instance();
    c.bench_function("oracle_table", |b| b.iter(|| OracleTable::build(black_box(&inst)).unwrap()));
}

fn distances(c: &mut Criterion) {
    let g = instance().graph.subdivide_edges().unwrap();
    let none = ZeroedSet::empty(g.len());
    c.bench_function("dijkstra", |b| b.iter(|| g.distances_from(Some(&none), black_box(0))));
}

fn set_cover(c: &mut Criterion) {
    let mut group = c.benchmark_group("pcsc_arrivals");
    let schemes = [
        ("randomized", Scheme::RandomizedThreshold { seed: 3, arrival_cap: 256 }),
        ("dual", Scheme::DualGreedy { skip_covered: true }),
    ];
    for (name, scheme) in schemes {
        group.bench_function(name, |b| {
            b.iter(|| {
                let mut st = PcscState::new((1..=12).map(|c| c as f64).collect(), scheme.clone()).unwrap();
                let elems: Vec<_> = (0..12usize)
                    .map(|e| st.add_element(&[e % 12, (e * 5 + 1) % 12, (e * 7 + 3) % 12]).unwrap())
                    .collect();
                for i in 0..200usize {
                    st.arrive(elems[i * 7 % 12], 1.0 + (i % 5) as f64).unwrap();
                }
                st
            })
        });
    }
    group.finish();
}

criterion_group!(benches, full_runs, oracle, distances, set_cover);
criterion_main!(benches);
