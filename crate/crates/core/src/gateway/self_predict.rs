use rayon::prelude::*;

use super::mapping::{ParseStatus, Predictor};
use super::{GatewayError, Result};
use crate::prompt::{render_zero_shot, QueryExample, TaskMeta, TemplateStyle};
use crate::vector_store::{LabelSource, SentencePool};

/// Labels every unlabeled pool entry with the model's own zero-shot
/// prediction. Corpus labels are kept. Entries whose prediction cannot be
/// mapped get `fallback`, or the first known label when `fallback` is
/// `None`.
///
/// Either every entry is processed or an error is returned; the input pool
/// is never partially updated.
pub fn self_predict_labels(
    pool: &SentencePool,
    predictor: &Predictor<'_>,
    fallback: Option<&str>,
    meta: &TaskMeta,
) -> Result<SentencePool> {
    predictor.validate()?;
    let fallback = match fallback {
        Some(f) => f.to_string(),
        None => default_fallback(predictor)?,
    };
    let predictor = predictor.with_fallback(Some(&fallback));

    let todo: Vec<usize> = (0..pool.len())
        .filter(|&i| !pool.entries()[i].is_labeled())
        .collect();
    if todo.is_empty() {
        return Ok(pool.clone());
    }

    let labels: Vec<(usize, String, ParseStatus)> = todo
        .par_iter()
        .map(|&i| {
            let entry = &pool.entries()[i];
            let q = QueryExample::new(entry.id.clone(), entry.text.clone());
            let prompt = render_zero_shot(&q, predictor.template, meta)?;
            let p = predictor.predict(&prompt.full_text)?;
            let label = p.mapped_label.unwrap_or_else(|| fallback.clone());
            Ok((i, label, p.parse_status))
        })
        .collect::<Result<_>>()?;

    let fallbacks = labels.iter().filter(|l| l.2 != ParseStatus::Matched).count();
    tracing::info!(predicted = labels.len(), fallbacks, "self-predicted pool labels");

    let mut entries = pool.entries().to_vec();
    for (i, label, _) in labels {
        entries[i].label = Some(label);
        entries[i].label_source = LabelSource::SelfPredicted;
    }
    Ok(SentencePool::from_entries(entries, pool.dim())?)
}

fn default_fallback(predictor: &Predictor<'_>) -> Result<String> {
    let t = predictor.template;
    let first = match t.style() {
        TemplateStyle::Generative => t
            .options()
            .or(predictor.options)
            .and_then(|o| o.labels().next()),
        TemplateStyle::Masked => t
            .verbalizer()
            .or(predictor.verbalizer)
            .and_then(|v| v.labels().next()),
    };
    first
        .map(String::from)
        .ok_or_else(|| GatewayError::InvalidDescriptor("no label to fall back to".into()))
}
