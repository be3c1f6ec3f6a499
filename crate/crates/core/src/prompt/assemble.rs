use serde::{Deserialize, Serialize};

use super::template::{fill_body, PromptTemplate, TemplateStyle};
use super::verbalizer::Verbalizer;
use super::{PromptError, Result};
use crate::vector_store::{PoolEntry, RetrievalResult, SentencePool};

/// Separator between demonstration blocks and before the query block.
pub const BLOCK_SEPARATOR: &str = "\n\n";

/// A low-resource-language input.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueryExample {
    pub id: String,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gold_label: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference_summary: Option<String>,
}

impl QueryExample {
    pub fn new(id: impl Into<String>, text: impl Into<String>) -> Self {
        QueryExample {
            id: id.into(),
            text: text.into(),
            gold_label: None,
            reference_summary: None,
        }
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.gold_label = Some(label.into());
        self
    }

    pub fn with_summary(mut self, summary: impl Into<String>) -> Self {
        self.reference_summary = Some(summary.into());
        self
    }
}

/// Task-level slot values (currently only `{target_lang}`, a full
/// language name such as "Bengali").
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskMeta {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_lang: Option<String>,
}

impl TaskMeta {
    pub fn with_target_lang(lang: impl Into<String>) -> Self {
        TaskMeta {
            target_lang: Some(lang.into()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AssembledPrompt {
    pub full_text: String,
    pub demo_count: usize,
    pub template_id: String,
    pub truncated: bool,
}

fn check_query(q: &QueryExample) -> Result<()> {
    if q.text.is_empty() {
        return Err(PromptError::EmptyQuery(q.id.clone()));
    }
    Ok(())
}

/// The template filled with the query alone.
pub fn render_zero_shot(
    q: &QueryExample,
    t: &PromptTemplate,
    meta: &TaskMeta,
) -> Result<AssembledPrompt> {
    check_query(q)?;
    Ok(AssembledPrompt {
        full_text: t.fill(&q.text, meta.target_lang.as_deref())?,
        demo_count: 0,
        template_id: t.id().to_string(),
        truncated: false,
    })
}

/// The answer that completes a demonstration for `entry`.
enum Answer<'a> {
    /// Appended after a newline (generative style).
    Appended(&'a str),
    /// Substituted for the mask marker (masked style).
    AtMask(&'a str),
}

fn demonstration_answer<'a>(
    entry: &'a PoolEntry,
    t: &'a PromptTemplate,
    v: Option<&'a Verbalizer>,
) -> Result<Answer<'a>> {
    let label = match (&entry.label, entry.is_labeled()) {
        (Some(label), true) => label.as_str(),
        _ => return Err(PromptError::UnlabeledEntry(entry.id.clone())),
    };
    match t.style() {
        TemplateStyle::Generative => match t.options() {
            Some(options) => options
                .display(label)
                .map(Answer::Appended)
                .ok_or_else(|| PromptError::UnknownLabel {
                    label: label.to_string(),
                    template: t.id().to_string(),
                }),
            None => Ok(Answer::Appended(label)),
        },
        TemplateStyle::Masked => {
            let v = v
                .or(t.verbalizer())
                .ok_or_else(|| PromptError::MissingVerbalizer(t.id().to_string()))?;
            Ok(Answer::AtMask(v.apply(label)?))
        }
    }
}

fn render_block(
    text: &str,
    answer: &Answer<'_>,
    t: &PromptTemplate,
    meta: &TaskMeta,
) -> Result<String> {
    let lang = meta.target_lang.as_deref();
    match answer {
        Answer::Appended(a) => Ok(format!("{}\n{a}", t.fill(text, lang)?)),
        Answer::AtMask(word) => {
            // Resolve the body's own marker before filling, so marker-like
            // substrings inside `text` stay untouched.
            let body = t.body();
            let mask = t.mask_token();
            let at = body.find(mask).expect("validated masked template has a mask");
            let resolved = format!("{}{word}{}", &body[..at], &body[at + mask.len()..]);
            fill_body(&resolved, text, lang)
        }
    }
}

/// One retrieved example rendered with its answer.
///
/// Generative templates get the answer on the line after the filled body,
/// using the template's option string for the label when it has one.
/// Masked templates get the verbalizer word in place of the mask marker.
pub fn render_demonstration(
    entry: &PoolEntry,
    t: &PromptTemplate,
    v: Option<&Verbalizer>,
    meta: &TaskMeta,
) -> Result<String> {
    let answer = demonstration_answer(entry, t, v)?;
    render_block(&entry.text, &answer, t, meta)
}

/// Retrieval-augmented prompt: demonstrations in hit order (best first),
/// each followed by a blank line, then the zero-shot rendering of the query.
///
/// With `max_chars`, demonstration texts are cut from the end starting with
/// the lowest-ranked demonstration; a demonstration whose text would be
/// cut to nothing is dropped. The query block is never shortened, so the
/// result can still exceed the budget when the query alone does.
#[allow(clippy::too_many_arguments)]
pub fn assemble_prompt(
    q: &QueryExample,
    r: &RetrievalResult,
    pool: &SentencePool,
    t: &PromptTemplate,
    v: Option<&Verbalizer>,
    meta: &TaskMeta,
    max_chars: Option<usize>,
) -> Result<AssembledPrompt> {
    let query = render_zero_shot(q, t, meta)?;
    if r.hits.is_empty() {
        return Ok(query);
    }

    struct Demo<'a> {
        text: String,
        answer: Answer<'a>,
        rendered: String,
    }

    let mut demos = Vec::with_capacity(r.hits.len());
    for hit in &r.hits {
        let entry = pool
            .get(&hit.id)
            .ok_or_else(|| PromptError::DanglingHitId(hit.id.clone()))?;
        let answer = demonstration_answer(entry, t, v)?;
        let rendered = render_block(&entry.text, &answer, t, meta)?;
        demos.push(Demo {
            text: entry.text.clone(),
            answer,
            rendered,
        });
    }

    let sep_len = BLOCK_SEPARATOR.chars().count();
    let query_len = query.full_text.chars().count();
    let total = |demos: &[Demo<'_>]| -> usize {
        demos
            .iter()
            .map(|d| d.rendered.chars().count() + sep_len)
            .sum::<usize>()
            + query_len
    };

    let mut truncated = false;
    if let Some(budget) = max_chars {
        loop {
            let current = total(&demos);
            let Some(last) = demos.last_mut() else { break };
            if current <= budget {
                break;
            }
            truncated = true;
            let excess = current - budget;
            let text_len = last.text.chars().count();
            if excess < text_len {
                last.text = last.text.chars().take(text_len - excess).collect();
                last.rendered = render_block(&last.text, &last.answer, t, meta)?;
            } else {
                demos.pop();
            }
        }
    }

    let mut full_text = String::new();
    for demo in &demos {
        full_text.push_str(&demo.rendered);
        full_text.push_str(BLOCK_SEPARATOR);
    }
    full_text.push_str(&query.full_text);
    Ok(AssembledPrompt {
        full_text,
        demo_count: demos.len(),
        template_id: t.id().to_string(),
        truncated,
    })
}
