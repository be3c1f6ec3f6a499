use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{Result, RunnerError};
use crate::gateway::{BackendDescriptor, BackendKind, LabelOptionSet};
use crate::metrics::Average;
use crate::prompt::{PromptTemplate, TemplateRegistry, TemplateStyle, BUILTIN_PREFIX, BUILTIN_REGISTRIES};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Classification,
    Summarization,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BackendsConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generation: Option<BackendDescriptor>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fill_mask: Option<BackendDescriptor>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub embedding: Option<BackendDescriptor>,
}

impl BackendsConfig {
    pub fn get(&self, kind: BackendKind) -> Option<&BackendDescriptor> {
        match kind {
            BackendKind::Generation => self.generation.as_ref(),
            BackendKind::FillMask => self.fill_mask.as_ref(),
            BackendKind::Embedding => self.embedding.as_ref(),
        }
    }

    fn slots_mut(&mut self) -> [(BackendKind, &mut Option<BackendDescriptor>); 3] {
        [
            (BackendKind::Generation, &mut self.generation),
            (BackendKind::FillMask, &mut self.fill_mask),
            (BackendKind::Embedding, &mut self.embedding),
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Limits {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_examples: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_prompt_chars: Option<usize>,
    #[serde(default = "default_parallelism")]
    pub parallelism: usize,
}

impl Default for Limits {
    fn default() -> Self {
        Limits {
            max_examples: None,
            max_prompt_chars: None,
            parallelism: default_parallelism(),
        }
    }
}

fn default_parallelism() -> usize {
    4
}

fn default_k_values() -> Vec<usize> {
    vec![0]
}

fn default_registries() -> Vec<String> {
    BUILTIN_REGISTRIES
        .iter()
        .map(|(name, _)| format!("{BUILTIN_PREFIX}{name}"))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub task: Task,
    pub dataset_path: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pool_path: Option<PathBuf>,
    /// Registry sources: `builtin:<name>` or TOML file paths.
    #[serde(default = "default_registries")]
    pub registries: Vec<String>,
    pub template_ids: Vec<String>,
    /// Demonstration counts; 0 is zero-shot.
    #[serde(default = "default_k_values")]
    pub k_values: Vec<usize>,
    #[serde(default)]
    pub backends: BackendsConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label_options: Option<LabelOptionSet>,
    /// Label given to unmappable outputs; without it they stay unparsed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fallback_label: Option<String>,
    /// Label unlabeled pool entries with the model's own predictions.
    #[serde(default)]
    pub self_predict: bool,
    /// Full language name for `{target_lang}`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_lang: Option<String>,
    #[serde(default)]
    pub limits: Limits,
    /// Seed for backends whose endpoint is the bare word `mock`.
    #[serde(default)]
    pub seed: u64,
    /// Averaged F1 used by comparison and delta tables.
    #[serde(default)]
    pub average: Average,
    pub output_dir: PathBuf,
    /// Embedding cache directory; defaults to `<output_dir>/embeddings`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub embedding_cache: Option<PathBuf>,
}

/// A `--override key.path=value` assignment. The value is read as a TOML
/// value and falls back to a plain string.
pub fn parse_override(raw: &str) -> Result<(String, toml::Value)> {
    let (key, value) = raw
        .split_once('=')
        .ok_or_else(|| RunnerError::Schema(format!("override {raw:?} is not key=value")))?;
    let key = key.trim();
    if key.is_empty() || key.split('.').any(str::is_empty) {
        return Err(RunnerError::Schema(format!("override {raw:?} has an invalid key")));
    }
    let value = value.trim();
    let parsed = toml::from_str::<toml::Table>(&format!("v = {value}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(value.to_string()));
    Ok((key.to_string(), parsed))
}

fn apply_override(doc: &mut toml::Table, key: &str, value: toml::Value) -> Result<()> {
    let parts: Vec<&str> = key.split('.').collect();
    let (last, parents) = parts.split_last().expect("non-empty key");
    let mut table = doc;
    for part in parents {
        let entry = table
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        table = entry
            .as_table_mut()
            .ok_or_else(|| RunnerError::Schema(format!("override {key:?}: {part:?} is not a table")))?;
    }
    table.insert(last.to_string(), value);
    Ok(())
}

impl ExperimentConfig {
    /// Parses a TOML config. Relative paths are resolved against `base`.
    pub fn parse(source: &str, base: &Path, overrides: &[String]) -> Result<Self> {
        let mut doc: toml::Table =
            toml::from_str(source).map_err(|e| RunnerError::Schema(e.message().to_string()))?;
        for raw in overrides {
            let (key, value) = parse_override(raw)?;
            apply_override(&mut doc, &key, value)?;
        }
        let mut config: ExperimentConfig = toml::Value::Table(doc)
            .try_into()
            .map_err(|e: toml::de::Error| RunnerError::Schema(e.message().to_string()))?;
        config.resolve(base);
        Ok(config)
    }

    fn resolve(&mut self, base: &Path) {
        let join = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        join(&mut self.dataset_path);
        join(&mut self.output_dir);
        if let Some(p) = &mut self.pool_path {
            join(p);
        }
        if let Some(p) = &mut self.embedding_cache {
            join(p);
        }
        for source in &mut self.registries {
            if !source.starts_with(BUILTIN_PREFIX) && Path::new(source.as_str()).is_relative() {
                *source = base.join(source.as_str()).display().to_string();
            }
        }
        let seed = self.seed;
        for (kind, slot) in self.backends.slots_mut() {
            if let Some(d) = slot {
                d.kind = kind;
                if d.endpoint.trim() == "mock" {
                    d.endpoint = format!("mock:{seed}");
                }
            }
        }
    }

    /// Overrides backend endpoints and timeouts from `PARC_<KIND>_*`.
    pub fn apply_env(&mut self, lookup: impl Fn(&str) -> Option<String>) -> Result<()> {
        for (_, slot) in self.backends.slots_mut() {
            if let Some(d) = slot {
                d.apply_env_overrides(&lookup)?;
            }
        }
        Ok(())
    }

    /// Every template named by the config.
    pub fn registry(&self) -> Result<TemplateRegistry> {
        let mut all = TemplateRegistry::default();
        for source in &self.registries {
            all.merge(TemplateRegistry::load(source)?)?;
        }
        Ok(all)
    }

    pub fn templates(&self) -> Result<Vec<PromptTemplate>> {
        let registry = self.registry()?;
        self.template_ids
            .iter()
            .map(|id| registry.require(id).cloned().map_err(RunnerError::from))
            .collect()
    }

    /// Labels in confusion-matrix order.
    pub fn labels(&self) -> Vec<String> {
        self.label_options
            .as_ref()
            .map(|o| o.labels().map(String::from).collect())
            .unwrap_or_default()
    }

    pub fn embedding_cache_dir(&self) -> PathBuf {
        self.embedding_cache
            .clone()
            .unwrap_or_else(|| self.output_dir.join("embeddings"))
    }

    pub fn needs_retrieval(&self) -> bool {
        self.k_values.iter().any(|&k| k > 0)
    }

    pub fn validate(&self) -> Result<()> {
        let violation = |m: String| Err(RunnerError::Constraint(m));
        if self.k_values.is_empty() {
            return violation("k_values is empty".into());
        }
        if self.template_ids.is_empty() {
            return violation("template_ids is empty".into());
        }
        if self.limits.parallelism == 0 {
            return violation("limits.parallelism must be at least 1".into());
        }
        if self.limits.max_examples == Some(0) {
            return violation("limits.max_examples must be at least 1".into());
        }
        if self.needs_retrieval() {
            if self.pool_path.is_none() {
                return violation("k > 0 requires pool_path".into());
            }
            if self.backends.embedding.is_none() {
                return violation("k > 0 requires an embedding backend".into());
            }
        }
        for kind in BackendKind::ALL {
            if let Some(d) = self.backends.get(kind) {
                d.validate()
                    .map_err(|e| RunnerError::Constraint(format!("backends.{kind}: {e}")))?;
                if d.decode.temperature != 0.0 {
                    tracing::warn!(backend = %kind, "non-zero temperature: results are not reproducible");
                }
            }
        }
        match self.task {
            Task::Classification => {
                let Some(options) = &self.label_options else {
                    return violation("classification requires label_options".into());
                };
                if let Some(f) = &self.fallback_label {
                    if !options.contains(f) {
                        return violation(format!("fallback_label {f:?} is not a label"));
                    }
                }
            }
            Task::Summarization => {
                if self.target_lang.is_none() {
                    return violation("summarization requires target_lang".into());
                }
            }
        }
        let labels = self.labels();
        for t in self.templates()? {
            let backend = match t.style() {
                TemplateStyle::Generative => BackendKind::Generation,
                TemplateStyle::Masked => BackendKind::FillMask,
            };
            if self.backends.get(backend).is_none() {
                return violation(format!("template {:?} needs a {backend} backend", t.id()));
            }
            match (self.task, t.style()) {
                (Task::Summarization, TemplateStyle::Masked) => {
                    return violation(format!("template {:?} is masked; summarization needs generation", t.id()));
                }
                (Task::Summarization, _) => {}
                (Task::Classification, TemplateStyle::Generative) => {
                    if let Some(own) = t.options() {
                        if let Some(l) = own.labels().find(|l| !labels.iter().any(|x| x == l)) {
                            return violation(format!("template {:?} has option label {l:?} outside label_options", t.id()));
                        }
                    }
                }
                (Task::Classification, TemplateStyle::Masked) => {
                    let v = t
                        .verbalizer()
                        .ok_or_else(|| RunnerError::Constraint(format!("template {:?} has no verbalizer", t.id())))?;
                    if !v.covers(labels.iter().map(String::as_str)) {
                        return violation(format!("verbalizer of {:?} does not cover label_options", t.id()));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Hex SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(&json))
    }
}

/// Reads, overrides, resolves and validates a config file.
pub fn load_config(path: &Path, overrides: &[String]) -> Result<ExperimentConfig> {
    let source = std::fs::read_to_string(path).map_err(|e| RunnerError::io(path, e))?;
    let base = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    let base = std::fs::canonicalize(base).map_err(|e| RunnerError::io(base, e))?;
    let config = ExperimentConfig::parse(&source, &base, overrides)?;
    config.validate()?;
    Ok(config)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
task = "classification"
dataset_path = "data/test.jsonl"
template_ids = ["sentnob-bloomz"]
output_dir = "out"
label_options = [
  { label = "0", surface = ["positive"] },
  { label = "1", surface = ["neutral"] },
  { label = "2", surface = ["negative"] },
]
[backends.generation]
endpoint = "mock"
model_name = "bloomz-3b"
"#;

    fn parse(src: &str, overrides: &[&str]) -> Result<ExperimentConfig> {
        let o: Vec<String> = overrides.iter().map(|s| s.to_string()).collect();
        let c = ExperimentConfig::parse(src, Path::new("/base"), &o)?;
        c.validate()?;
        Ok(c)
    }

    #[test]
    fn minimal_zero_shot() {
        let c = parse(MINIMAL, &[]).unwrap();
        assert_eq!(c.k_values, vec![0]);
        assert_eq!(c.dataset_path, Path::new("/base/data/test.jsonl"));
        assert_eq!(c.backends.generation.as_ref().unwrap().endpoint, "mock:0");
        assert_eq!(c.labels(), vec!["0", "1", "2"]);
    }

    #[test]
    fn retrieval_needs_pool_and_embedder() {
        assert!(matches!(parse(MINIMAL, &["k_values=[1,3]"]), Err(RunnerError::Constraint(_))));
        let with_pool = parse(MINIMAL, &["k_values=[1,3]", "pool_path=pool.jsonl"]);
        assert!(matches!(with_pool, Err(RunnerError::Constraint(m)) if m.contains("embedding")));
        let ok = parse(
            MINIMAL,
            &[
                "k_values=[0,1,3]",
                "pool_path=pool.jsonl",
                "backends.embedding.endpoint=mock",
                "backends.embedding.model_name=labse",
                "seed=9",
            ],
        )
        .unwrap();
        assert_eq!(ok.backends.embedding.as_ref().unwrap().kind, BackendKind::Embedding);
        assert_eq!(ok.backends.embedding.as_ref().unwrap().endpoint, "mock:9");
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(matches!(parse(&format!("{MINIMAL}\n[limits]\nmax_exampels = 3"), &[]), Err(RunnerError::Schema(_))));
        assert!(matches!(parse(MINIMAL, &["colour=1"]), Err(RunnerError::Schema(_))));
    }

    #[test]
    fn constraint_checks() {
        assert!(parse(MINIMAL, &["template_ids=['sentnob-mbert']"]).is_err());
        assert!(parse(MINIMAL, &["template_ids=['nope']"]).is_err());
        assert!(parse(MINIMAL, &["fallback_label='9'"]).is_err());
        assert!(parse(MINIMAL, &["task='summarization'"]).is_err());
        assert!(parse(MINIMAL, &["limits.parallelism=0"]).is_err());
    }

    #[test]
    fn round_trip() {
        let c = parse(MINIMAL, &["limits.max_prompt_chars=900", "fallback_label='1'"]).unwrap();
        let back = ExperimentConfig::parse(&c.to_toml(), Path::new("/elsewhere"), &[]).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.hash(), c.hash());
        let other = parse(MINIMAL, &["limits.max_prompt_chars=901"]).unwrap();
        assert_ne!(other.hash(), c.hash());
    }

    #[test]
    fn env_overrides_endpoints() {
        let mut c = parse(MINIMAL, &[]).unwrap();
        c.apply_env(|k| (k == "PARC_GENERATION_ENDPOINT").then(|| "http://10.0.0.1:8080".into()))
            .unwrap();
        assert_eq!(c.backends.generation.unwrap().endpoint, "http://10.0.0.1:8080");
    }

    #[test]
    fn override_values() {
        assert_eq!(parse_override("a.b=3").unwrap().1, toml::Value::Integer(3));
        assert_eq!(parse_override("a=x y").unwrap().1, toml::Value::String("x y".into()));
        assert!(parse_override("noequals").is_err());
        assert!(parse_override("a..b=1").is_err());
    }
}
