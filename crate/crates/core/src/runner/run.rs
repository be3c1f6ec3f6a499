use std::path::{Path, PathBuf};

use rayon::prelude::*;
use sha2::{Digest, Sha256};

use super::config::{ExperimentConfig, Task};
use super::dataset::{load_dataset, DatasetExample};
use super::embed_cache::EmbeddingCache;
use super::manifest::{
    CellReport, CellResult, ExampleRecord, RetrievedRef, RunManifest, SummaryReport, MANIFEST_VERSION,
};
use super::{Result, RunnerError};
use crate::gateway::{
    self_predict_labels, BackendDescriptor, BackendKind, Gateway, GatewayError, ParseStatus, Predictor,
};
use crate::metrics::{
    classification_report, confusion_matrix, f1_table, lead_n, rouge_scores, DeltaTable, F1Table,
    RougeScores, LEAD_TOKENS,
};
use crate::prompt::{assemble_prompt, PromptTemplate, TaskMeta, TemplateStyle};
use crate::vector_store::{
    build_pool, decode_pool, parse_pool_records, retrieve_top_k, save_pool, EmbeddingVector,
    RetrievalResult, SentencePool, CACHE_MAGIC,
};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RunOptions {
    /// Render prompts without calling generation or fill-mask backends.
    /// Embeddings come from the cache or a mock backend only.
    pub dry_run: bool,
}

fn connect(d: Option<&BackendDescriptor>, allowed: bool) -> Result<Option<Gateway>> {
    match d {
        Some(d) if allowed => Ok(Some(Gateway::connect(d.clone())?)),
        _ => Ok(None),
    }
}

/// Loads a pool from a JSONL file or a binary pool cache, detected by
/// its magic bytes.
pub fn load_pool_any(path: &Path, dim: usize) -> Result<SentencePool> {
    let bytes = std::fs::read(path).map_err(|e| RunnerError::io(path, e))?;
    if bytes.starts_with(CACHE_MAGIC) {
        let pool = decode_pool(&bytes)?;
        if pool.dim() != dim {
            return Err(RunnerError::Constraint(format!(
                "pool cache {} has dim {}, embedding backend has {dim}",
                path.display(),
                pool.dim()
            )));
        }
        return Ok(pool);
    }
    Ok(build_pool(parse_pool_records(bytes.as_slice())?, dim)?)
}

/// Fills in missing pool embeddings.
fn embed_pool_entries(pool: SentencePool, cache: &mut EmbeddingCache, gateway: Option<&Gateway>) -> Result<SentencePool> {
    let missing: Vec<usize> = (0..pool.len())
        .filter(|&i| pool.entries()[i].embedding.is_none())
        .collect();
    if missing.is_empty() {
        return Ok(pool);
    }
    let texts: Vec<String> = missing.iter().map(|&i| pool.entries()[i].text.clone()).collect();
    let vectors = cache.embed(gateway, &texts)?;
    let dim = pool.dim();
    let mut entries = pool.into_entries();
    for (i, v) in missing.into_iter().zip(vectors) {
        entries[i].embedding = Some(v);
    }
    Ok(SentencePool::from_entries(entries, dim)?)
}

struct Context<'a> {
    config: &'a ExperimentConfig,
    options: RunOptions,
    examples: Vec<DatasetExample>,
    templates: Vec<PromptTemplate>,
    labels: Vec<String>,
    meta: TaskMeta,
    generation: Option<Gateway>,
    fill_mask: Option<Gateway>,
    pool: Option<SentencePool>,
    query_vectors: Vec<Option<EmbeddingVector>>,
    threads: rayon::ThreadPool,
}

impl<'a> Context<'a> {
    fn build(config: &'a ExperimentConfig, options: RunOptions) -> Result<Self> {
        config.validate()?;
        let examples = load_dataset(&config.dataset_path, config.task, config.limits.max_examples)?;
        if examples.is_empty() {
            return Err(RunnerError::Constraint("dataset has no examples".into()));
        }
        let live = !options.dry_run;
        let generation = connect(config.backends.generation.as_ref(), live)?;
        let fill_mask = connect(config.backends.fill_mask.as_ref(), live)?;

        let (pool, query_vectors) = if config.needs_retrieval() {
            let d = config.backends.embedding.as_ref().expect("validated");
            let embedder = connect(Some(d), live || d.is_mock())?;
            let mut cache = EmbeddingCache::open(&config.embedding_cache_dir(), d);
            let dim = d.embedding_dim();
            let pool_path = config.pool_path.as_ref().expect("validated");
            let pool = load_pool_any(pool_path, dim)?;
            let pool = embed_pool_entries(pool, &mut cache, embedder.as_ref())?;

            let mut vectors = vec![None; examples.len()];
            let mut to_embed = Vec::new();
            for (i, ex) in examples.iter().enumerate() {
                match &ex.embedding {
                    Some(values) => {
                        if values.len() != dim {
                            return Err(RunnerError::Constraint(format!(
                                "example {:?} embedding has dim {}, expected {dim}",
                                ex.query.id,
                                values.len()
                            )));
                        }
                        vectors[i] = Some(EmbeddingVector::from_f64(values)?);
                    }
                    None => to_embed.push(i),
                }
            }
            if !to_embed.is_empty() {
                let texts: Vec<String> = to_embed.iter().map(|&i| examples[i].query.text.clone()).collect();
                for (i, v) in to_embed.into_iter().zip(cache.embed(embedder.as_ref(), &texts)?) {
                    vectors[i] = Some(v);
                }
            }
            cache.save()?;
            (Some(pool), vectors)
        } else {
            (None, vec![None; examples.len()])
        };

        let threads = rayon::ThreadPoolBuilder::new()
            .num_threads(config.limits.parallelism)
            .build()
            .map_err(|e| RunnerError::Constraint(format!("thread pool: {e}")))?;

        Ok(Context {
            config,
            options,
            examples,
            templates: config.templates()?,
            labels: config.labels(),
            meta: TaskMeta {
                target_lang: config.target_lang.clone(),
            },
            generation,
            fill_mask,
            pool,
            query_vectors,
            threads,
        })
    }

    fn gateway(&self, t: &PromptTemplate) -> Option<&Gateway> {
        match t.style() {
            TemplateStyle::Generative => self.generation.as_ref(),
            TemplateStyle::Masked => self.fill_mask.as_ref(),
        }
    }

    fn descriptor(&self, t: &PromptTemplate) -> Option<&BackendDescriptor> {
        self.config.backends.get(match t.style() {
            TemplateStyle::Generative => BackendKind::Generation,
            TemplateStyle::Masked => BackendKind::FillMask,
        })
    }

    fn predictor<'g>(&'g self, gateway: &'g Gateway, t: &'g PromptTemplate) -> Predictor<'g> {
        Predictor::new(gateway, t)
            .with_options(self.config.label_options.as_ref())
            .with_fallback(self.config.fallback_label.as_deref())
    }

    /// The pool used for template `t`: as loaded, or with self-predicted
    /// labels persisted under the output directory.
    fn pool_for(&self, t: &PromptTemplate) -> Result<Option<SentencePool>> {
        let Some(pool) = &self.pool else { return Ok(None) };
        let unlabeled = pool.entries().iter().filter(|e| !e.is_labeled()).count();
        if unlabeled == 0 {
            return Ok(Some(pool.clone()));
        }
        if !self.config.self_predict {
            return Err(RunnerError::Constraint(format!(
                "pool has {unlabeled} unlabeled entries; set self_predict = true"
            )));
        }
        let path = self_predicted_pool_path(&self.config.output_dir, pool, self.descriptor(t), t);
        if path.exists() {
            return Ok(Some(load_pool_any(&path, pool.dim())?));
        }
        let Some(gateway) = self.gateway(t) else {
            return Err(RunnerError::DryRun(format!(
                "self-predicted pool for {:?} is not cached",
                t.id()
            )));
        };
        let labeled = self
            .threads
            .install(|| self_predict_labels(pool, &self.predictor(gateway, t), self.config.fallback_label.as_deref(), &self.meta))?;
        save_pool(&labeled, &path)?;
        Ok(Some(labeled))
    }
}

/// Cache file for a (pool, backend, template) self-prediction.
pub fn self_predicted_pool_path(
    output_dir: &Path,
    pool: &SentencePool,
    backend: Option<&BackendDescriptor>,
    t: &PromptTemplate,
) -> PathBuf {
    let mut h = Sha256::new();
    h.update(pool.checksum().as_bytes());
    h.update(serde_json::to_vec(&backend).expect("descriptor serializes"));
    h.update(serde_json::to_vec(t).expect("template serializes"));
    let id = hex::encode(h.finalize());
    output_dir.join(format!("pool-selfpred-{}.bin", &id[..16]))
}

fn sha256_hex(s: &str) -> String {
    hex::encode(Sha256::digest(s.as_bytes()))
}

/// A record, or a message for an error that fails the whole cell.
type Outcome = std::result::Result<ExampleRecord, String>;

fn run_example(
    ctx: &Context<'_>,
    t: &PromptTemplate,
    pool: Option<&SentencePool>,
    k: usize,
    index: usize,
) -> Outcome {
    let ex = &ctx.examples[index];
    let fatal = |e: &dyn std::fmt::Display| Err(format!("example {:?}: {e}", ex.query.id));
    let retrieval = match (k, pool, &ctx.query_vectors[index]) {
        (0, _, _) => RetrievalResult::empty(),
        (_, Some(pool), Some(q)) => match retrieve_top_k(q, pool, k) {
            Ok(r) => r,
            Err(e) => return fatal(&e),
        },
        _ => return fatal(&"no pool or query embedding for retrieval"),
    };
    let empty_pool;
    let pool_ref = match pool {
        Some(p) => p,
        None => {
            empty_pool = SentencePool::from_entries(Vec::new(), 1).expect("empty pool");
            &empty_pool
        }
    };
    let prompt = match assemble_prompt(
        &ex.query,
        &retrieval,
        pool_ref,
        t,
        None,
        &ctx.meta,
        ctx.config.limits.max_prompt_chars,
    ) {
        Ok(p) => p,
        Err(e) => return fatal(&e),
    };
    let mut record = ExampleRecord {
        example_id: ex.query.id.clone(),
        retrieved: retrieval
            .hits
            .iter()
            .map(|h| RetrievedRef {
                id: h.id.clone(),
                similarity: h.similarity,
            })
            .collect(),
        demo_count: prompt.demo_count,
        prompt_truncated: prompt.truncated,
        prompt_sha256: sha256_hex(&prompt.full_text),
        prompt: None,
        raw_output: None,
        mapped_label: None,
        parse_status: None,
        summary: None,
        rouge: None,
        error: None,
    };
    let Some(gateway) = ctx.gateway(t) else {
        record.prompt = Some(prompt.full_text);
        return Ok(record);
    };
    let failed = |mut record: ExampleRecord, e: GatewayError| {
        tracing::warn!(example = %record.example_id, template = t.id(), k, error = %e, "backend call failed");
        record.error = Some(e.to_string());
        Ok(record)
    };
    match ctx.config.task {
        Task::Classification => match ctx.predictor(gateway, t).predict(&prompt.full_text) {
            Ok(p) => {
                record.raw_output = Some(p.raw_output);
                record.mapped_label = p.mapped_label;
                record.parse_status = Some(p.parse_status);
                Ok(record)
            }
            Err(GatewayError::Prompt(e)) => fatal(&e),
            Err(e) => {
                record.parse_status = Some(ParseStatus::Unparsed);
                failed(record, e)
            }
        },
        Task::Summarization => {
            let reference = ex.query.reference_summary.as_deref().unwrap_or_default();
            match gateway.generate(&prompt.full_text) {
                Ok(summary) => match rouge_scores(&summary, reference) {
                    Ok(r) => {
                        record.rouge = Some(r);
                        record.summary = Some(summary);
                        Ok(record)
                    }
                    Err(e) => fatal(&e),
                },
                Err(e) => {
                    record.rouge = Some(RougeScores::default());
                    failed(record, e)
                }
            }
        }
    }
}

fn run_cell(ctx: &Context<'_>, t: &PromptTemplate, pool: Option<&SentencePool>, k: usize) -> CellResult {
    let mut cell = CellResult {
        template_id: t.id().to_string(),
        k,
        backend: ctx.descriptor(t).cloned(),
        pool_checksum: (k > 0).then(|| pool.map(SentencePool::checksum)).flatten(),
        incomplete: false,
        failed_examples: 0,
        error: None,
        records: Vec::new(),
        report: None,
    };
    let outcomes: Vec<Outcome> = ctx.threads.install(|| {
        (0..ctx.examples.len())
            .into_par_iter()
            .map(|i| run_example(ctx, t, pool, k, i))
            .collect()
    });
    for o in outcomes {
        match o {
            Ok(r) => cell.records.push(r),
            Err(m) => {
                cell.error.get_or_insert(m);
            }
        }
    }
    if let Some(e) = &cell.error {
        tracing::error!(template = t.id(), k, error = %e, "cell failed");
        cell.records.clear();
        cell.incomplete = true;
        return cell;
    }
    cell.failed_examples = cell.records.iter().filter(|r| r.error.is_some()).count();
    cell.incomplete = cell.failed_examples > 0;
    if ctx.options.dry_run {
        return cell;
    }
    cell.report = match ctx.config.task {
        Task::Classification => {
            let gold: Vec<&str> = ctx
                .examples
                .iter()
                .map(|e| e.query.gold_label.as_deref().unwrap_or_default())
                .collect();
            let pred: Vec<Option<&str>> = cell.records.iter().map(|r| r.mapped_label.as_deref()).collect();
            match confusion_matrix(&gold, &pred, &ctx.labels).and_then(|cm| {
                let report = classification_report(&cm)?;
                Ok(CellReport::classification(cm, report))
            }) {
                Ok(r) => Some(r),
                Err(e) => {
                    cell.error = Some(e.to_string());
                    cell.incomplete = true;
                    None
                }
            }
        }
        Task::Summarization => {
            let scores: Vec<RougeScores> = cell.records.iter().map(|r| r.rouge.unwrap_or_default()).collect();
            Some(CellReport::Summarization(SummaryReport::from_scores(&scores)))
        }
    };
    cell
}

/// LEAD-64 against every reference, computed without a backend.
pub fn lead_baseline(examples: &[DatasetExample]) -> Result<SummaryReport> {
    let scores = examples
        .iter()
        .map(|e| {
            let reference = e.query.reference_summary.as_deref().unwrap_or_default();
            rouge_scores(&lead_n(&e.query.text, LEAD_TOKENS), reference)
        })
        .collect::<std::result::Result<Vec<_>, _>>()?;
    Ok(SummaryReport::from_scores(&scores))
}

/// Runs every (template, k) cell of the config. Cells run in config
/// order; examples within a cell run in parallel but are recorded in
/// input order.
pub fn run_experiment(config: &ExperimentConfig, options: RunOptions) -> Result<RunManifest> {
    let ctx = Context::build(config, options)?;
    let mut cells = Vec::new();
    for t in &ctx.templates {
        let pool = if config.needs_retrieval() { ctx.pool_for(t)? } else { None };
        for &k in &config.k_values {
            cells.push(run_cell(&ctx, t, pool.as_ref(), k));
        }
    }
    let lead = match config.task {
        Task::Summarization => Some(lead_baseline(&ctx.examples)?),
        Task::Classification => None,
    };
    Ok(RunManifest {
        format_version: MANIFEST_VERSION,
        config_hash: config.hash(),
        config: config.clone(),
        task: config.task,
        pool_checksum: ctx.pool.as_ref().map(SentencePool::checksum),
        dry_run: options.dry_run,
        incomplete: cells.iter().any(|c| c.incomplete),
        cells,
        lead_baseline: lead,
        deltas: None,
    })
}

pub fn run_classification(config: &ExperimentConfig, options: RunOptions) -> Result<RunManifest> {
    if config.task != Task::Classification {
        return Err(RunnerError::Constraint("config task is not classification".into()));
    }
    run_experiment(config, options)
}

pub fn run_summarization(config: &ExperimentConfig, options: RunOptions) -> Result<RunManifest> {
    if config.task != Task::Summarization {
        return Err(RunnerError::Constraint("config task is not summarization".into()));
    }
    run_experiment(config, options)
}

/// Per-template F1 by k and deltas against zero-shot. Failed or
/// incomplete cells are left out with a warning.
pub fn delta_table(manifest: &RunManifest) -> Result<DeltaTable> {
    let average = manifest.config.average;
    let mut tables: Vec<F1Table> = Vec::new();
    for template_id in &manifest.config.template_ids {
        let mut reports = Vec::new();
        for cell in manifest.cells.iter().filter(|c| &c.template_id == template_id) {
            match cell.report.as_ref().and_then(CellReport::classification_report) {
                Some(r) if !cell.incomplete => reports.push((cell.k, r)),
                _ => tracing::warn!(template = %template_id, k = cell.k, "cell left out of delta table"),
            }
        }
        tables.push(f1_table(template_id, &reports, average)?);
    }
    Ok(DeltaTable::from_tables(&tables))
}

/// Runs the experiment and attaches the delta table.
pub fn sweep(config: &ExperimentConfig, options: RunOptions) -> Result<RunManifest> {
    if config.task != Task::Classification {
        return Err(RunnerError::Constraint("sweeps compare classification F1".into()));
    }
    let mut manifest = run_experiment(config, options)?;
    if !options.dry_run {
        manifest.deltas = Some(delta_table(&manifest)?);
    }
    Ok(manifest)
}

/// Embeds the configured pool and writes it as a binary pool cache.
pub fn embed_pool(config: &ExperimentConfig, out: &Path) -> Result<SentencePool> {
    let pool_path = config
        .pool_path
        .as_ref()
        .ok_or_else(|| RunnerError::Constraint("embed-pool needs pool_path".into()))?;
    let d = config
        .backends
        .embedding
        .as_ref()
        .ok_or_else(|| RunnerError::Constraint("embed-pool needs an embedding backend".into()))?;
    let gateway = Gateway::connect(d.clone())?;
    let mut cache = EmbeddingCache::open(&config.embedding_cache_dir(), d);
    let pool = embed_pool_entries(load_pool_any(pool_path, d.embedding_dim())?, &mut cache, Some(&gateway))?;
    cache.save()?;
    save_pool(&pool, out)?;
    Ok(pool)
}

/// Self-predicts the configured pool's missing labels with one template
/// and writes the result as a binary pool cache.
pub fn self_predict_pool(config: &ExperimentConfig, template_id: &str, out: &Path) -> Result<SentencePool> {
    let pool_path = config
        .pool_path
        .as_ref()
        .ok_or_else(|| RunnerError::Constraint("self-predict needs pool_path".into()))?;
    let registry = config.registry()?;
    let t = registry.require(template_id)?;
    let kind = match t.style() {
        TemplateStyle::Generative => BackendKind::Generation,
        TemplateStyle::Masked => BackendKind::FillMask,
    };
    let d = config
        .backends
        .get(kind)
        .ok_or_else(|| RunnerError::Constraint(format!("self-predict with {template_id:?} needs a {kind} backend")))?;
    let gateway = Gateway::connect(d.clone())?;
    let dim = config
        .backends
        .embedding
        .as_ref()
        .map_or(crate::vector_store::DEFAULT_DIM, BackendDescriptor::embedding_dim);
    let pool = load_pool_any(pool_path, dim)?;
    let predictor = Predictor::new(&gateway, t).with_options(config.label_options.as_ref());
    let meta = TaskMeta {
        target_lang: config.target_lang.clone(),
    };
    let labeled = self_predict_labels(&pool, &predictor, config.fallback_label.as_deref(), &meta)?;
    save_pool(&labeled, out)?;
    Ok(labeled)
}
