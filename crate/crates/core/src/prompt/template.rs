use serde::{Deserialize, Serialize};

use super::verbalizer::Verbalizer;
use super::{PromptError, Result};
use crate::gateway::LabelOptionSet;

pub const TEXT_SLOT: &str = "{text}";
pub const TARGET_LANG_SLOT: &str = "{target_lang}";
pub const DEFAULT_MASK_TOKEN: &str = "[MASK]";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TemplateStyle {
    /// Decoder models: the answer is generated after the prompt.
    Generative,
    /// Encoder models: the answer is a verbalizer word at the mask marker.
    Masked,
}

/// Raw template as written in a registry file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TemplateSpec {
    pub id: String,
    pub style: TemplateStyle,
    pub body: String,
    #[serde(default = "default_language")]
    pub language: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mask_token: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub options: Option<LabelOptionSet>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verbalizer: Option<Verbalizer>,
}

fn default_language() -> String {
    "en".to_string()
}

/// A validated prefix prompt template.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TemplateSpec", into = "TemplateSpec")]
pub struct PromptTemplate {
    id: String,
    style: TemplateStyle,
    body: String,
    language: String,
    mask_token: String,
    options: Option<LabelOptionSet>,
    verbalizer: Option<Verbalizer>,
}

impl PromptTemplate {
    pub fn from_spec(spec: TemplateSpec) -> Result<Self> {
        let invalid = |reason: String| PromptError::InvalidTemplate {
            id: spec.id.clone(),
            reason,
        };
        if spec.id.trim().is_empty() {
            return Err(invalid("empty id".into()));
        }
        let text_slots = spec.body.matches(TEXT_SLOT).count();
        if text_slots != 1 {
            return Err(invalid(format!("body must contain {{text}} exactly once, found {text_slots}")));
        }
        let mask_token = spec
            .mask_token
            .clone()
            .unwrap_or_else(|| DEFAULT_MASK_TOKEN.to_string());
        if mask_token.is_empty() {
            return Err(invalid("empty mask token".into()));
        }
        if spec.style == TemplateStyle::Masked {
            let masks = spec.body.matches(mask_token.as_str()).count();
            if masks != 1 {
                return Err(invalid(format!(
                    "masked body must contain {mask_token} exactly once, found {masks}"
                )));
            }
        }
        if let (Some(options), Some(verbalizer)) = (&spec.options, &spec.verbalizer) {
            if !verbalizer.covers(options.labels()) {
                return Err(invalid("verbalizer does not cover every option label".into()));
            }
        }
        Ok(PromptTemplate {
            id: spec.id,
            style: spec.style,
            body: spec.body,
            language: spec.language,
            mask_token,
            options: spec.options,
            verbalizer: spec.verbalizer,
        })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn style(&self) -> TemplateStyle {
        self.style
    }

    pub fn body(&self) -> &str {
        &self.body
    }

    pub fn language(&self) -> &str {
        &self.language
    }

    pub fn mask_token(&self) -> &str {
        &self.mask_token
    }

    /// Candidate answer strings for generative classification.
    pub fn options(&self) -> Option<&LabelOptionSet> {
        self.options.as_ref()
    }

    pub fn verbalizer(&self) -> Option<&Verbalizer> {
        self.verbalizer.as_ref()
    }

    pub fn requires_target_lang(&self) -> bool {
        self.body.contains(TARGET_LANG_SLOT)
    }

    /// Substitutes the slots in a single left-to-right pass, so slot-like
    /// text inside the substituted values is never expanded.
    pub fn fill(&self, text: &str, target_lang: Option<&str>) -> Result<String> {
        fill_body(&self.body, text, target_lang)
    }
}

pub(crate) fn fill_body(body: &str, text: &str, target_lang: Option<&str>) -> Result<String> {
    let mut out = String::with_capacity(body.len() + text.len());
    let mut rest = body;
    while let Some(pos) = rest.find('{') {
        out.push_str(&rest[..pos]);
        let tail = &rest[pos..];
        if let Some(after) = tail.strip_prefix(TEXT_SLOT) {
            out.push_str(text);
            rest = after;
        } else if let Some(after) = tail.strip_prefix(TARGET_LANG_SLOT) {
            let lang = target_lang.ok_or(PromptError::MissingSlotValue("target_lang"))?;
            out.push_str(lang);
            rest = after;
        } else {
            out.push('{');
            rest = &tail[1..];
        }
    }
    out.push_str(rest);
    Ok(out)
}

impl TryFrom<TemplateSpec> for PromptTemplate {
    type Error = PromptError;

    fn try_from(spec: TemplateSpec) -> Result<Self> {
        PromptTemplate::from_spec(spec)
    }
}

impl From<PromptTemplate> for TemplateSpec {
    fn from(t: PromptTemplate) -> Self {
        let mask_token = (t.mask_token != DEFAULT_MASK_TOKEN).then_some(t.mask_token);
        TemplateSpec {
            id: t.id,
            style: t.style,
            body: t.body,
            language: t.language,
            mask_token,
            options: t.options,
            verbalizer: t.verbalizer,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(style: TemplateStyle, body: &str) -> TemplateSpec {
        TemplateSpec {
            id: "t".into(),
            style,
            body: body.into(),
            language: "en".into(),
            mask_token: None,
            options: None,
            verbalizer: None,
        }
    }

    #[test]
    fn text_slot_exactly_once() {
        assert!(PromptTemplate::from_spec(spec(TemplateStyle::Generative, "no slot")).is_err());
        assert!(
            PromptTemplate::from_spec(spec(TemplateStyle::Generative, "{text} {text}")).is_err()
        );
        assert!(PromptTemplate::from_spec(spec(TemplateStyle::Generative, "{text}?")).is_ok());
    }

    #[test]
    fn masked_needs_one_mask() {
        assert!(PromptTemplate::from_spec(spec(TemplateStyle::Masked, "{text} is")).is_err());
        assert!(
            PromptTemplate::from_spec(spec(TemplateStyle::Masked, "[MASK] {text} [MASK]")).is_err()
        );
        let mut custom = spec(TemplateStyle::Masked, "{text} is <mask>.");
        custom.mask_token = Some("<mask>".into());
        let t = PromptTemplate::from_spec(custom).unwrap();
        assert_eq!(t.mask_token(), "<mask>");
    }

    #[test]
    fn fill_is_single_pass() {
        let t = PromptTemplate::from_spec(spec(
            TemplateStyle::Generative,
            "{text} in ({target_lang}) {other}",
        ))
        .unwrap();
        assert_eq!(
            t.fill("{target_lang}", Some("Bengali")).unwrap(),
            "{target_lang} in (Bengali) {other}"
        );
        assert!(matches!(
            t.fill("x", None),
            Err(PromptError::MissingSlotValue("target_lang"))
        ));
    }
}
