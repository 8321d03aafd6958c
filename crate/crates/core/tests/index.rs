mod support;

use std::collections::BTreeSet;
use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::time::SystemTime;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Map, Value};
use signac_core::index::{crawl_workspace, export, read_ndjson, FormatRule, IndexRecord, NdjsonSink};
use signac_core::query::parse_filter_value;
use signac_core::{Project, StatePoint};

fn corpus(n: usize, seed: u64) -> (tempfile::TempDir, Project) {
    let dir = tempfile::tempdir().unwrap();
    let project = Project::init("idx", dir.path()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for i in 0..n {
        let mut sp = support::random_doc(&mut rng);
        sp.insert("i".into(), json!(i));
        let job = project.open_job(StatePoint::from_map(sp)).unwrap();
        job.init().unwrap();
        if rng.random_bool(0.5) {
            let doc = support::random_doc(&mut rng);
            job.update_document(|d| d.extend(doc)).unwrap();
        }
        if rng.random_bool(0.3) {
            fs::write(job.fn_path("V.txt").unwrap(), format!("{i}\n")).unwrap();
        }
    }
    (dir, project)
}

fn rules() -> Vec<FormatRule> {
    vec![FormatRule::new("*.txt", "TextFile").unwrap()]
}

fn crawl(project: &Project) -> Vec<IndexRecord> {
    crawl_workspace(project, rules()).collect::<Result<_, _>>().unwrap()
}

#[test]
fn index_is_complete_and_deterministic() {
    let (_d, project) = corpus(60, 1);
    let first = crawl(&project);
    assert_eq!(first.len(), project.num_jobs().unwrap());
    let ids: BTreeSet<_> = first.iter().map(|r| r.id.clone()).collect();
    assert_eq!(ids.len(), first.len());
    assert_eq!(crawl(&project), first);
}

/// Raw exported object viewed the way filters address jobs: state point
/// keys at the top, the document under `doc`.
fn flatten(raw: &Value) -> Map<String, Value> {
    let mut view = raw["statepoint"].as_object().unwrap().clone();
    view.insert("doc".into(), raw["document"].clone());
    view
}

#[test]
fn exported_ndjson_selects_the_same_jobs_as_find_jobs() {
    let (dir, project) = corpus(200, 2);
    let out = dir.path().join("index.ndjson");
    let mut sink = NdjsonSink::create(&out).unwrap();
    assert_eq!(export(crawl(&project), &mut sink).unwrap(), 200);
    drop(sink);

    let raw: Vec<Value> = fs::read_to_string(&out)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(raw.len(), 200);
    let parsed = read_ndjson(BufReader::new(fs::File::open(&out).unwrap())).unwrap();
    assert_eq!(parsed, crawl(&project));

    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for round in 0..60 {
        let mut filter = support::random_filter(&mut rng);
        if round % 3 == 0 {
            // address the document too
            let (k, v) = filter
                .as_object()
                .unwrap()
                .iter()
                .next()
                .map(|(k, v)| (k.clone(), v.clone()))
                .unwrap();
            if !k.starts_with('$') {
                filter = json!({ format!("doc.{k}"): v });
            }
        }
        let expected: BTreeSet<String> = raw
            .iter()
            .filter(|r| support::reference_matches(&filter, &flatten(r)))
            .map(|r| r["_id"].as_str().unwrap().to_owned())
            .collect();
        let parsed_filter = parse_filter_value(&filter).unwrap();
        let found: BTreeSet<String> = project
            .find_jobs(parsed_filter.as_ref())
            .unwrap()
            .iter()
            .map(|j| j.id().to_string())
            .collect();
        assert_eq!(found, expected, "{filter}");
    }
}

fn snapshot(root: &Path) -> Vec<(PathBuf, Vec<u8>, Option<SystemTime>)> {
    let mut out: Vec<_> = walkdir::WalkDir::new(root)
        .into_iter()
        .map(|e| e.unwrap())
        .map(|e| {
            let meta = e.metadata().unwrap();
            let data = if meta.is_file() {
                fs::read(e.path()).unwrap()
            } else {
                Vec::new()
            };
            (e.path().to_path_buf(), data, meta.modified().ok())
        })
        .collect();
    out.sort();
    out
}

#[test]
fn crawling_never_writes_into_the_workspace() {
    let (_d, project) = corpus(40, 4);
    let before = snapshot(project.workspace_dir());
    let records = crawl(&project);
    assert_eq!(records.len(), 40);
    assert_eq!(snapshot(project.workspace_dir()), before);
}
