use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use signac_bench::{generate_corpus, BenchmarkConfig};
use signac_core::{parse_filter, JobId, Project};

fn metadata_ops(c: &mut Criterion) {
    let config = BenchmarkConfig::default();
    let sizes = [100, 1_000];
    let dirs: Vec<_> = sizes
        .iter()
        .map(|&n| {
            let dir = tempfile::tempdir().expect("tempdir");
            generate_corpus(dir.path(), &config, n).expect("corpus");
            (n, dir)
        })
        .collect();

    let mut group = c.benchmark_group("metadata");
    group.sample_size(20);
    for (n, dir) in &dirs {
        let project = Project::get(dir.path()).unwrap();
        let jobs = project.jobs().unwrap();
        let id: JobId = jobs[jobs.len() / 2].id().clone();
        let sp = jobs[jobs.len() / 2].statepoint().as_map().clone();
        let rich = parse_filter(&sp).unwrap().unwrap();

        group.bench_with_input(BenchmarkId::new("open_by_id", n), &id, |b, id| {
            b.iter(|| project.open_job_by_id(black_box(id)).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("rich_search", n), &rich, |b, f| {
            b.iter(|| project.find_jobs(Some(black_box(f))).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("fresh_iteration", n), dir.path(), |b, root| {
            b.iter(|| Project::get(root).unwrap().jobs().unwrap().len())
        });
        group.bench_function(BenchmarkId::new("count", n), |b| b.iter(|| project.num_jobs().unwrap()));
    }
    group.finish();
}

criterion_group!(benches, metadata_ops);
criterion_main!(benches);
