//! Replays the checked-in fuzz corpora through the fuzzed entry points with
//! the same round-trip assertions as the fuzz targets.

use std::path::{Path, PathBuf};

use parc_core::gateway::protocol::decode_response;
use parc_core::prompt::TemplateRegistry;
use parc_core::runner::{
    decode_embedding_cache, encode_embedding_cache, parse_dataset, ExperimentConfig, RunManifest, Task,
};
use parc_core::vector_store::{build_pool, decode_pool, encode_pool, parse_pool_records};

fn seeds(target: &str) -> Vec<(PathBuf, Vec<u8>)> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fuzz/corpus").join(target);
    let mut out: Vec<(PathBuf, Vec<u8>)> = std::fs::read_dir(&dir)
        .unwrap_or_else(|e| panic!("{}: {e}", dir.display()))
        .map(|e| {
            let p = e.unwrap().path();
            let bytes = std::fs::read(&p).unwrap();
            (p, bytes)
        })
        .collect();
    out.sort();
    assert!(!out.is_empty(), "no seeds for {target}");
    out
}

#[test]
fn pool_seeds() {
    let mut built = 0;
    for (path, data) in seeds("pool_jsonl") {
        let Ok(records) = parse_pool_records(data.as_slice()) else { continue };
        for dim in [1, 3, 4, 8] {
            if let Ok(pool) = build_pool(records.clone(), dim) {
                assert_eq!(decode_pool(&encode_pool(&pool)).unwrap(), pool, "{}", path.display());
                built += 1;
            }
        }
    }
    assert!(built > 0);
    for (path, data) in seeds("pool_cache") {
        let pool = decode_pool(&data).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        assert_eq!(encode_pool(&pool), data);
    }
}

#[test]
fn registry_seeds() {
    for (path, data) in seeds("template_registry") {
        let registry = TemplateRegistry::parse(std::str::from_utf8(&data).unwrap())
            .unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        let again = TemplateRegistry::parse(&registry.to_toml()).unwrap();
        assert_eq!(again.templates(), registry.templates());
    }
}

#[test]
fn config_seeds() {
    for (path, data) in seeds("experiment_config") {
        let source = std::str::from_utf8(&data).unwrap();
        let (body, overrides) = match source.split_once("\n---\n") {
            Some((body, rest)) => (body, rest.lines().map(String::from).collect()),
            None => (source, Vec::new()),
        };
        let config = ExperimentConfig::parse(body, Path::new("/fuzz"), &overrides)
            .unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        config.validate().unwrap();
    }
}

#[test]
fn dataset_seeds() {
    let mut parsed = 0;
    for (_, data) in seeds("dataset_jsonl") {
        for task in [Task::Classification, Task::Summarization] {
            parsed += parse_dataset(data.as_slice(), task).map_or(0, |e| e.len());
        }
    }
    assert!(parsed > 0);
}

#[test]
fn response_seeds() {
    for (path, data) in seeds("backend_response") {
        let r = decode_response(&data).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        assert_eq!(decode_response(&serde_json::to_vec(&r).unwrap()).unwrap(), r);
    }
}

#[test]
fn manifest_seeds() {
    for (path, data) in seeds("manifest_json") {
        let m = RunManifest::from_json(&data).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        assert_eq!(m.to_json().as_bytes(), data.as_slice());
    }
}

#[test]
fn embedding_cache_seeds() {
    for (path, data) in seeds("embedding_cache") {
        let (dim, entries) = decode_embedding_cache(&data).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        assert_eq!(encode_embedding_cache(dim, &entries), data);
    }
}
