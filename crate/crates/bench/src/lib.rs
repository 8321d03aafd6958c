//! Synthetic workspaces and scaling measurements for metadata operations.
//!
//! Six operation categories are timed on corpora of increasing size:
//!
//! | # | operation                              | expected |
//! |---|----------------------------------------|----------|
//! | 1 | select a job by known id               | O(1)     |
//! | 2 | search with a rich filter (all keys)   | O(N)     |
//! | 3 | search with a lean filter (one key)    | O(N)     |
//! | 4 | first full iteration, fresh session    | O(N)     |
//! | 5 | repeated iteration, same session       | O(N)     |
//! | 6 | determine the data space size          | O(N)     |
//!
//! Corpora hold state points only, no payload files.

use std::fmt;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use rand::distr::{Alphanumeric, SampleString};
use rand::seq::IndexedRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::Map;

use signac_core::{Filter, JobId, Project, ProjectError, StatePoint};

/// State point key holding the job's position in the corpus.
pub const INDEX_KEY: &str = "index";
const KEY_CHARS: &str = "abcdefghijklmnopqrstuvwxyz";
/// Ids looked up per timed batch in category 1.
const LOOKUP_BATCH: usize = 200;

#[derive(Debug, thiserror::Error)]
pub enum BenchError {
    #[error("{0} is not empty; corpora are generated into clean directories")]
    TargetNotEmpty(PathBuf),
    #[error("no corpus of size {n} at {path}")]
    MissingCorpus { n: usize, path: PathBuf },
    #[error("corpus at {path} holds {found} jobs, expected {n}")]
    CorpusSize { n: usize, found: usize, path: PathBuf },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error(transparent)]
    Project(#[from] ProjectError),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BenchmarkConfig {
    /// Corpus sizes, ascending.
    pub sizes: Vec<usize>,
    /// Including the index key.
    pub keys_per_statepoint: usize,
    pub value_length: usize,
    pub repetitions: usize,
    pub seed: u64,
}

impl Default for BenchmarkConfig {
    fn default() -> Self {
        Self {
            sizes: vec![100, 1_000, 10_000],
            keys_per_statepoint: 10,
            value_length: 100,
            repetitions: 3,
            seed: 0,
        }
    }
}

impl BenchmarkConfig {
    pub fn validate(&self) -> Result<(), BenchError> {
        let bad = |m: &str| Err(BenchError::InvalidConfig(m.to_owned()));
        if self.sizes.is_empty() {
            return bad("at least one size is required");
        }
        if self.sizes.windows(2).any(|w| w[0] >= w[1]) {
            return bad("sizes must be strictly ascending");
        }
        if self.keys_per_statepoint == 0 || self.keys_per_statepoint > KEY_CHARS.len() + 1 {
            return bad("keys_per_statepoint must be between 1 and 27");
        }
        if self.repetitions == 0 {
            return bad("repetitions must be at least 1");
        }
        Ok(())
    }
}

/// Directory of the corpus of size `n` below `base`.
pub fn corpus_dir(base: &Path, n: usize) -> PathBuf {
    base.join(format!("n{n}"))
}

/// Creates a project with `n` jobs in `root`, which must be missing or
/// empty. Output depends only on `(config, n)`.
pub fn generate_corpus(root: &Path, config: &BenchmarkConfig, n: usize) -> Result<Project, BenchError> {
    config.validate()?;
    let io_err = |source| BenchError::Io {
        path: root.to_path_buf(),
        source,
    };
    match fs::read_dir(root) {
        Ok(mut entries) => {
            if entries.next().is_some() {
                return Err(BenchError::TargetNotEmpty(root.to_path_buf()));
            }
        }
        Err(e) if e.kind() == io::ErrorKind::NotFound => fs::create_dir_all(root).map_err(io_err)?,
        Err(e) => return Err(io_err(e)),
    }
    let project = Project::init("bench", root)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let keys: Vec<String> = KEY_CHARS
        .chars()
        .take(config.keys_per_statepoint - 1)
        .map(String::from)
        .collect();
    for i in 0..n {
        let mut sp = StatePoint::new();
        sp.insert(INDEX_KEY, i);
        for key in &keys {
            sp.insert(key.clone(), Alphanumeric.sample_string(&mut rng, config.value_length));
        }
        project.open_job(sp)?.init()?;
    }
    Ok(project)
}

/// Generates every configured corpus below `base` that does not exist yet.
/// Returns the sizes that were generated.
pub fn prepare_corpora(base: &Path, config: &BenchmarkConfig) -> Result<Vec<usize>, BenchError> {
    let mut generated = Vec::new();
    for &n in &config.sizes {
        let dir = corpus_dir(base, n);
        if !dir.join(signac_core::project::CONFIG_FILE).is_file() {
            generate_corpus(&dir, config, n)?;
            generated.push(n);
        }
    }
    Ok(generated)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Category {
    SelectById,
    RichSearch,
    LeanSearch,
    FirstIteration,
    RepeatedIteration,
    Count,
}

impl Category {
    pub const ALL: [Category; 6] = [
        Category::SelectById,
        Category::RichSearch,
        Category::LeanSearch,
        Category::FirstIteration,
        Category::RepeatedIteration,
        Category::Count,
    ];

    pub fn number(self) -> u8 {
        match self {
            Category::SelectById => 1,
            Category::RichSearch => 2,
            Category::LeanSearch => 3,
            Category::FirstIteration => 4,
            Category::RepeatedIteration => 5,
            Category::Count => 6,
        }
    }

    pub fn is_constant(self) -> bool {
        self == Category::SelectById
    }

    /// Expected complexity order evaluated at `n`.
    pub fn divisor(self, n: usize) -> u64 {
        if self.is_constant() {
            1
        } else {
            n.max(1) as u64
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Category::SelectById => "select by id",
            Category::RichSearch => "rich search",
            Category::LeanSearch => "lean search",
            Category::FirstIteration => "first iteration",
            Category::RepeatedIteration => "repeated iteration",
            Category::Count => "count",
        };
        write!(f, "{} ({name})", self.number())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Measurement {
    pub category: Category,
    pub n: usize,
    /// Seconds.
    pub min: f64,
    /// Seconds.
    pub mean: f64,
    pub divisor: u64,
    /// `min / divisor`
    pub normalized: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub config: BenchmarkConfig,
    pub measurements: Vec<Measurement>,
}

impl BenchmarkReport {
    pub fn get(&self, category: Category, n: usize) -> Option<&Measurement> {
        self.measurements.iter().find(|m| m.category == category && m.n == n)
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut sizes: Vec<usize> = self.measurements.iter().map(|m| m.n).collect();
        sizes.sort_unstable();
        sizes.dedup();
        sizes
    }
}

fn summarize(category: Category, n: usize, samples: &[Duration]) -> Measurement {
    let secs: Vec<f64> = samples.iter().map(Duration::as_secs_f64).collect();
    let min = secs.iter().copied().fold(f64::INFINITY, f64::min);
    let mean = secs.iter().sum::<f64>() / secs.len() as f64;
    let divisor = category.divisor(n);
    Measurement {
        category,
        n,
        min,
        mean,
        divisor,
        normalized: min / divisor as f64,
    }
}

fn open_corpus(base: &Path, n: usize) -> Result<Project, BenchError> {
    let dir = corpus_dir(base, n);
    if !dir.join(signac_core::project::CONFIG_FILE).is_file() {
        return Err(BenchError::MissingCorpus { n, path: dir });
    }
    let project = Project::get(&dir)?;
    let found = project.num_jobs()?;
    if found != n {
        return Err(BenchError::CorpusSize { n, found, path: dir });
    }
    Ok(project)
}

fn timed<T>(f: impl FnOnce() -> T) -> (Duration, T) {
    let start = Instant::now();
    let value = f();
    (start.elapsed(), value)
}

fn equality_filter(sp: &StatePoint, keys: &[&String]) -> Filter {
    let mut doc = Map::new();
    for key in keys {
        doc.insert((*key).clone(), sp[key.as_str()].clone());
    }
    signac_core::parse_filter(&doc)
        .expect("equality filters parse")
        .expect("at least one key")
}

/// Measures all six categories on corpora previously generated below
/// `base`. Repetitions run sequentially; the reported statistic is the
/// minimum, with the mean alongside.
pub fn run_benchmarks(base: &Path, config: &BenchmarkConfig) -> Result<BenchmarkReport, BenchError> {
    config.validate()?;
    let mut measurements = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x5eed);
    for &n in &config.sizes {
        let corpus = open_corpus(base, n)?;
        let mut samples: Vec<Vec<Duration>> = vec![Vec::new(); Category::ALL.len()];

        for _ in 0..config.repetitions {
            // 4: cold in-process cache; the OS page cache stays warm
            let fresh = Project::get(corpus.root())?;
            let (t, jobs) = timed(|| fresh.jobs());
            let jobs = jobs?;
            samples[3].push(t);
            if jobs.is_empty() {
                continue;
            }
            let ids: Vec<JobId> = jobs.iter().map(|j| j.id().clone()).collect();

            // 1
            let batch: Vec<&JobId> = (0..LOOKUP_BATCH)
                .map(|_| ids.choose(&mut rng).expect("non-empty"))
                .collect();
            let (t, found) = timed(|| {
                batch
                    .iter()
                    .map(|id| fresh.open_job_by_id(id).map(|_| ()))
                    .collect::<Result<Vec<_>, _>>()
            });
            found?;
            samples[0].push(t / LOOKUP_BATCH as u32);

            let sample = jobs.choose(&mut rng).expect("non-empty").statepoint().clone();
            let mut keys: Vec<&String> = sample.keys().collect();
            keys.sort();
            let rich = equality_filter(&sample, &keys);
            let lean_key = keys
                .iter()
                .copied()
                .find(|k| k.as_str() != INDEX_KEY)
                .unwrap_or(keys[0]);
            let lean = equality_filter(&sample, &[lean_key]);

            // 2 and 3
            let (t, hits) = timed(|| fresh.find_jobs(Some(&rich)));
            debug_assert_eq!(hits.as_ref().map(Vec::len).unwrap_or(0), 1);
            hits?;
            samples[1].push(t);
            let (t, hits) = timed(|| fresh.find_jobs(Some(&lean)));
            hits?;
            samples[2].push(t);

            // 5 and 6
            let (t, again) = timed(|| fresh.jobs());
            again?;
            samples[4].push(t);
            let (t, count) = timed(|| fresh.num_jobs());
            count?;
            samples[5].push(t);
        }
        for (category, s) in Category::ALL.into_iter().zip(&samples) {
            if !s.is_empty() {
                measurements.push(summarize(category, n, s));
            }
        }
    }
    Ok(BenchmarkReport {
        config: config.clone(),
        measurements,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    /// Largest allowed time ratio for constant-time categories.
    pub constant: f64,
    /// Largest allowed per-item time ratio for linear categories.
    pub linear: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            constant: 5.0,
            linear: 3.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingCheck {
    pub category: Category,
    /// Largest over smallest of the compared quantity.
    pub ratio: f64,
    pub tolerance: f64,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingVerdict {
    pub checks: Vec<ScalingCheck>,
}

impl ScalingVerdict {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &ScalingCheck> {
        self.checks.iter().filter(|c| !c.passed)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PreconditionError {
    #[error("scaling needs at least two corpus sizes, the report has {0}")]
    TooFewSizes(usize),
    #[error("smallest and largest sizes ({0}, {1}) differ by less than 10x")]
    NarrowRange(usize, usize),
    #[error("no measurement for category {0} at N = {1}")]
    Missing(Category, usize),
}

/// Checks that category 1 stays flat (time ratio between the smallest and
/// largest corpus at most `tolerances.constant`) and that categories 2 to 6
/// grow linearly (per-item time ratio across all sizes at most
/// `tolerances.linear`). Ratios are symmetric: largest over smallest.
pub fn assert_scaling(report: &BenchmarkReport, tolerances: Tolerances) -> Result<ScalingVerdict, PreconditionError> {
    let sizes: Vec<usize> = report.sizes().into_iter().filter(|&n| n > 0).collect();
    let (Some(&small), Some(&large)) = (sizes.first(), sizes.last()) else {
        return Err(PreconditionError::TooFewSizes(0));
    };
    if sizes.len() < 2 {
        return Err(PreconditionError::TooFewSizes(sizes.len()));
    }
    if large < small * 10 {
        return Err(PreconditionError::NarrowRange(small, large));
    }
    let mut checks = Vec::new();
    for category in Category::ALL {
        let at = |n: usize| report.get(category, n).ok_or(PreconditionError::Missing(category, n));
        let (values, tolerance, what): (Vec<(usize, f64)>, f64, &str) = if category.is_constant() {
            (
                vec![(small, at(small)?.min), (large, at(large)?.min)],
                tolerances.constant,
                "time",
            )
        } else {
            (
                sizes
                    .iter()
                    .map(|&n| Ok((n, at(n)?.min / n as f64)))
                    .collect::<Result<_, _>>()?,
                tolerances.linear,
                "time per item",
            )
        };
        let lo = values.iter().map(|v| v.1).fold(f64::INFINITY, f64::min);
        let hi = values.iter().map(|v| v.1).fold(0.0, f64::max);
        let ratio = if lo > 0.0 { hi / lo } else { f64::INFINITY };
        let listing: Vec<String> = values.iter().map(|(n, v)| format!("N={n}: {v:.3e} s")).collect();
        checks.push(ScalingCheck {
            category,
            ratio,
            tolerance,
            passed: ratio <= tolerance,
            detail: format!("{what} {}; ratio {ratio:.2} (limit {tolerance})", listing.join(", ")),
        });
    }
    Ok(ScalingVerdict { checks })
}
