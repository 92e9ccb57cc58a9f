use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use nodal_core::exec::{is_parallel, map_trials};
use nodal_core::field::GridPlan;
use nodal_core::harness::sphere_trial;

fn census_trials(c: &mut Criterion) {
    let workers = std::thread::available_parallelism()
        .map(|n| n.get())
        .unwrap_or(1)
        .max(2);
    let mut group = c.benchmark_group(if is_parallel() {
        "census-parallel-build"
    } else {
        "census-sequential-build"
    });
    group.sample_size(10);
    for n in [20usize, 60] {
        let plan = GridPlan::for_degree(n, 8).unwrap();
        let idx: Vec<u64> = (0..16).collect();
        for w in [1, workers] {
            group.bench_with_input(BenchmarkId::new(format!("workers-{w}"), n), &n, |b, _| {
                b.iter(|| {
                    map_trials(&idx, w, |&i| {
                        sphere_trial(&plan, 7, i, false).unwrap().n_loop
                    })
                })
            });
        }
    }
    group.finish();
}

criterion_group!(benches, census_trials);
criterion_main!(benches);
