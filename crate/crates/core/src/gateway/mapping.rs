use serde::{Deserialize, Serialize};

use super::client::{best_candidate, CandidateScore, Gateway};
use super::labels::{normalize_answer, LabelOptionSet};
use super::{GatewayError, Result};
use crate::prompt::{PromptError, PromptTemplate, TemplateStyle, Verbalizer};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParseStatus {
    Matched,
    Fallback,
    Unparsed,
}

/// What the backend returned.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RawOutput {
    Text(String),
    Scores(Vec<CandidateScore>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub raw_output: RawOutput,
    pub mapped_label: Option<String>,
    pub parse_status: ParseStatus,
}

impl Prediction {
    fn resolve(raw_output: RawOutput, matched: Option<&str>, fallback: Option<&str>) -> Self {
        let (mapped_label, parse_status) = match (matched, fallback) {
            (Some(l), _) => (Some(l.to_string()), ParseStatus::Matched),
            (None, Some(f)) => (Some(f.to_string()), ParseStatus::Fallback),
            (None, None) => (None, ParseStatus::Unparsed),
        };
        Prediction {
            raw_output,
            mapped_label,
            parse_status,
        }
    }

    pub fn is_unparsed(&self) -> bool {
        self.parse_status == ParseStatus::Unparsed
    }
}

/// Label whose normalized surface is the longest substring of the
/// normalized output. Equal lengths go to the earliest occurrence, then to
/// option order.
pub fn match_label<'a>(raw: &str, options: &'a LabelOptionSet) -> Option<&'a str> {
    let normalized = normalize_answer(raw);
    let mut best: Option<(usize, usize, &str)> = None;
    for option in options.options() {
        for surface in &option.surface {
            let s = normalize_answer(surface);
            if s.is_empty() {
                continue;
            }
            if let Some(pos) = normalized.find(&s) {
                let len = s.chars().count();
                let better = match best {
                    None => true,
                    Some((blen, bpos, _)) => len > blen || (len == blen && pos < bpos),
                };
                if better {
                    best = Some((len, pos, option.label.as_str()));
                }
            }
        }
    }
    best.map(|(_, _, label)| label)
}

/// Maps generated text to a label. Total: never fails.
pub fn map_generation_to_label(raw: &str, options: &LabelOptionSet, fallback: Option<&str>) -> Prediction {
    Prediction::resolve(RawOutput::Text(raw.to_string()), match_label(raw, options), fallback)
}

/// Maps mask-filling scores to a label through the verbalizer's inverse.
pub fn map_scores_to_label(scores: Vec<CandidateScore>, verbalizer: &Verbalizer, fallback: Option<&str>) -> Prediction {
    let matched = best_candidate(&scores)
        .and_then(|c| verbalizer.invert(&c.word).ok())
        .map(String::from);
    Prediction::resolve(RawOutput::Scores(scores), matched.as_deref(), fallback)
}

/// Runs a template's prediction path: generation plus option matching, or
/// mask filling over the verbalizer words.
#[derive(Debug, Clone, Copy)]
pub struct Predictor<'a> {
    pub gateway: &'a Gateway,
    pub template: &'a PromptTemplate,
    /// Used when the template has no option set of its own.
    pub options: Option<&'a LabelOptionSet>,
    pub verbalizer: Option<&'a Verbalizer>,
    pub fallback: Option<&'a str>,
}

impl<'a> Predictor<'a> {
    pub fn new(gateway: &'a Gateway, template: &'a PromptTemplate) -> Self {
        Predictor {
            gateway,
            template,
            options: None,
            verbalizer: None,
            fallback: None,
        }
    }

    pub fn with_options(mut self, options: Option<&'a LabelOptionSet>) -> Self {
        self.options = options;
        self
    }

    pub fn with_verbalizer(mut self, verbalizer: Option<&'a Verbalizer>) -> Self {
        self.verbalizer = verbalizer;
        self
    }

    pub fn with_fallback(mut self, fallback: Option<&'a str>) -> Self {
        self.fallback = fallback;
        self
    }

    fn option_set(&self) -> Result<&'a LabelOptionSet> {
        self.template.options().or(self.options).ok_or_else(|| {
            GatewayError::InvalidDescriptor(format!("template {:?} has no label options", self.template.id()))
        })
    }

    fn verbalizer(&self) -> Result<&'a Verbalizer> {
        self.template
            .verbalizer()
            .or(self.verbalizer)
            .ok_or_else(|| PromptError::MissingVerbalizer(self.template.id().to_string()).into())
    }

    /// Checks everything `predict` needs except the backend itself.
    pub fn validate(&self) -> Result<()> {
        match self.template.style() {
            TemplateStyle::Generative => self.option_set().map(|_| ()),
            TemplateStyle::Masked => self.verbalizer().map(|_| ()),
        }
    }

    pub fn predict(&self, prompt: &str) -> Result<Prediction> {
        match self.template.style() {
            TemplateStyle::Generative => {
                let options = self.option_set()?;
                let raw = self.gateway.generate(prompt)?;
                Ok(map_generation_to_label(&raw, options, self.fallback))
            }
            TemplateStyle::Masked => {
                let verbalizer = self.verbalizer()?;
                let words: Vec<String> = verbalizer.words().map(String::from).collect();
                let scores = self.gateway.fill_mask(prompt, self.template.mask_token(), &words)?;
                Ok(map_scores_to_label(scores, verbalizer, self.fallback))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;
    use crate::gateway::LabelOption;

    fn violens() -> LabelOptionSet {
        LabelOptionSet::new(vec![
            LabelOption {
                label: "Direct Violence".into(),
                surface: vec!["highly aggressive".into()],
            },
            LabelOption {
                label: "Passive Violence".into(),
                surface: vec!["slightly aggressive".into()],
            },
            LabelOption {
                label: "Non-Violence".into(),
                surface: vec!["non-aggressive".into()],
            },
        ])
        .unwrap()
    }

    #[test]
    fn normalized_match() {
        let p = map_generation_to_label("Slightly Aggressive.", &violens(), None);
        assert_eq!(p.mapped_label.as_deref(), Some("Passive Violence"));
        assert_eq!(p.parse_status, ParseStatus::Matched);
        let p = map_generation_to_label("  It is\tHIGHLY   aggressive ", &violens(), None);
        assert_eq!(p.mapped_label.as_deref(), Some("Direct Violence"));
    }

    #[test]
    fn unparsed_and_fallback() {
        let p = map_generation_to_label("xyzzy", &violens(), None);
        assert_eq!(p.parse_status, ParseStatus::Unparsed);
        assert_eq!(p.mapped_label, None);
        let p = map_generation_to_label("xyzzy", &violens(), Some("Non-Violence"));
        assert_eq!(p.parse_status, ParseStatus::Fallback);
        assert_eq!(p.mapped_label.as_deref(), Some("Non-Violence"));
    }

    #[test]
    fn longest_then_earliest() {
        let set = LabelOptionSet::new(vec![
            LabelOption { label: "A".into(), surface: vec!["aggressive".into()] },
            LabelOption { label: "B".into(), surface: vec!["non-aggressive".into()] },
            LabelOption { label: "C".into(), surface: vec!["mild".into()] },
            LabelOption { label: "D".into(), surface: vec!["calm".into()] },
        ])
        .unwrap();
        assert_eq!(match_label("non-aggressive", &set), Some("B"));
        assert_eq!(match_label("aggressive", &set), Some("A"));
        assert_eq!(match_label("calm or mild", &set), Some("D"));
        assert_eq!(match_label("mild or calm", &set), Some("C"));
    }

    #[test]
    fn masked_mapping() {
        let v = Verbalizer::from_pairs([("0", "positive"), ("1", "neural"), ("2", "negative")]).unwrap();
        let scores = vec![
            CandidateScore { word: "positive".into(), score: Some(-2.0) },
            CandidateScore { word: "neural".into(), score: Some(-1.0) },
            CandidateScore { word: "negative".into(), score: None },
        ];
        let p = map_scores_to_label(scores, &v, None);
        assert_eq!(p.mapped_label.as_deref(), Some("1"));
        let none = vec![CandidateScore { word: "positive".into(), score: None }];
        assert!(map_scores_to_label(none, &v, None).is_unparsed());
    }

    proptest! {
        #[test]
        fn canonical_surface_maps_to_itself(
            words in proptest::collection::btree_set("[a-z]{1,6}( [a-z]{1,6})?", 1..6)
        ) {
            let options: Vec<LabelOption> = words
                .iter()
                .enumerate()
                .map(|(i, w)| LabelOption { label: format!("L{i}"), surface: vec![w.clone()] })
                .collect();
            let set = LabelOptionSet::new(options).unwrap();
            for o in set.options() {
                let p = map_generation_to_label(&o.surface[0], &set, None);
                prop_assert_eq!(p.mapped_label.as_deref(), Some(o.label.as_str()));
                prop_assert_eq!(p.parse_status, ParseStatus::Matched);
            }
        }

        #[test]
        fn matched_label_is_in_set(raw in ".{0,40}") {
            let set = violens();
            let p = map_generation_to_label(&raw, &set, None);
            if p.parse_status == ParseStatus::Matched {
                prop_assert!(set.contains(p.mapped_label.as_deref().unwrap()));
            } else {
                prop_assert_eq!(p.mapped_label, None);
            }
        }
    }
}
