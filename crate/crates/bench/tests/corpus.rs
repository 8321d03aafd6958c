use std::fs;
use std::path::Path;

use sha2::{Digest, Sha256};
use signac_bench::{
    corpus_dir, generate_corpus, prepare_corpora, run_benchmarks, BenchError, BenchmarkConfig, INDEX_KEY,
};
use signac_core::Project;

fn tree_digest(root: &Path) -> Vec<u8> {
    let mut files: Vec<_> = walk(root);
    files.sort();
    let mut hasher = Sha256::new();
    for path in files {
        hasher.update(path.strip_prefix(root).unwrap().to_string_lossy().as_bytes());
        hasher.update([0]);
        hasher.update(fs::read(&path).unwrap());
    }
    hasher.finalize().to_vec()
}

fn walk(dir: &Path) -> Vec<std::path::PathBuf> {
    let mut out = Vec::new();
    for entry in fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        if path.is_dir() {
            out.extend(walk(&path));
        } else {
            out.push(path);
        }
    }
    out
}

fn small(sizes: Vec<usize>) -> BenchmarkConfig {
    BenchmarkConfig {
        sizes,
        repetitions: 2,
        seed: 7,
        ..BenchmarkConfig::default()
    }
}

#[test]
fn empty_corpus_is_a_valid_project() {
    let dir = tempfile::tempdir().unwrap();
    let project = generate_corpus(dir.path(), &small(vec![0]), 0).unwrap();
    assert_eq!(project.num_jobs().unwrap(), 0);
    assert!(Project::get(dir.path()).unwrap().jobs().unwrap().is_empty());
}

#[test]
fn statepoints_have_the_configured_shape() {
    let dir = tempfile::tempdir().unwrap();
    let config = small(vec![50]);
    let project = generate_corpus(dir.path(), &config, 50).unwrap();
    let jobs = project.jobs().unwrap();
    assert_eq!(jobs.len(), 50);
    let mut indices: Vec<u64> = jobs
        .iter()
        .map(|j| j.statepoint()[INDEX_KEY].as_u64().unwrap())
        .collect();
    indices.sort_unstable();
    assert_eq!(indices, (0..50).collect::<Vec<_>>());
    for job in &jobs {
        let sp = job.statepoint();
        assert_eq!(sp.len(), config.keys_per_statepoint);
        for (k, v) in sp.iter().filter(|(k, _)| k.as_str() != INDEX_KEY) {
            assert_eq!(v.as_str().unwrap().len(), config.value_length, "{k}");
        }
        // about 1 kB on disk
        let bytes = fs::metadata(job.workspace().join("signac_statepoint.json"))
            .unwrap()
            .len();
        assert!((500..=2000).contains(&bytes), "{bytes} bytes");
    }
}

#[test]
fn same_seed_same_bytes() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    generate_corpus(a.path(), &small(vec![30]), 30).unwrap();
    generate_corpus(b.path(), &small(vec![30]), 30).unwrap();
    assert_eq!(tree_digest(a.path()), tree_digest(b.path()));

    let c = tempfile::tempdir().unwrap();
    let other = BenchmarkConfig {
        seed: 8,
        ..small(vec![30])
    };
    generate_corpus(c.path(), &other, 30).unwrap();
    assert_ne!(tree_digest(a.path()), tree_digest(c.path()));
}

#[test]
fn refuses_non_empty_target() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("keep.txt"), "x").unwrap();
    let err = generate_corpus(dir.path(), &small(vec![1]), 1).unwrap_err();
    assert!(matches!(err, BenchError::TargetNotEmpty(_)), "{err}");
}

#[test]
fn benchmarks_do_not_modify_corpora() {
    let base = tempfile::tempdir().unwrap();
    let config = small(vec![20, 200]);
    assert_eq!(prepare_corpora(base.path(), &config).unwrap(), [20, 200]);
    assert!(prepare_corpora(base.path(), &config).unwrap().is_empty());
    let before = tree_digest(base.path());
    let report = run_benchmarks(base.path(), &config).unwrap();
    assert_eq!(tree_digest(base.path()), before);

    assert_eq!(report.measurements.len(), 12);
    for m in &report.measurements {
        assert!(m.min > 0.0 && m.min <= m.mean, "{m:?}");
        assert!((m.normalized * m.divisor as f64 - m.min).abs() <= 1e-12 * m.min.max(1.0));
    }
    let json = serde_json::to_string(&report).unwrap();
    assert_eq!(
        serde_json::from_str::<signac_bench::BenchmarkReport>(&json).unwrap(),
        report
    );
}

#[test]
fn missing_or_wrong_corpora_are_reported() {
    let base = tempfile::tempdir().unwrap();
    let err = run_benchmarks(base.path(), &small(vec![10])).unwrap_err();
    assert!(matches!(err, BenchError::MissingCorpus { n: 10, .. }), "{err}");

    generate_corpus(&corpus_dir(base.path(), 10), &small(vec![10]), 5).unwrap();
    let err = run_benchmarks(base.path(), &small(vec![10])).unwrap_err();
    assert!(matches!(err, BenchError::CorpusSize { n: 10, found: 5, .. }), "{err}");
}
