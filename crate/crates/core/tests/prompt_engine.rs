use parc_core::prompt::{
    assemble_prompt, render_demonstration, render_zero_shot, PromptError, PromptTemplate,
    QueryExample, TaskMeta, TemplateRegistry, TemplateStyle, Verbalizer,
};
use parc_core::vector_store::{
    EmbeddingVector, Hit, LabelSource, PoolEntry, RetrievalResult, SentencePool,
};
use proptest::prelude::*;

fn registry() -> TemplateRegistry {
    TemplateRegistry::all_builtin().unwrap()
}

fn entry(id: &str, text: &str, label: Option<&str>) -> PoolEntry {
    PoolEntry {
        id: id.into(),
        text: text.into(),
        label: label.map(String::from),
        embedding: None,
        label_source: if label.is_some() {
            LabelSource::Corpus
        } else {
            LabelSource::None
        },
    }
}

fn pool(entries: Vec<PoolEntry>) -> SentencePool {
    SentencePool::from_entries(entries, 4).unwrap()
}

fn hits(pairs: &[(&str, usize, f64)]) -> RetrievalResult {
    RetrievalResult {
        k: pairs.len(),
        hits: pairs
            .iter()
            .map(|&(id, index, similarity)| Hit {
                id: id.into(),
                index,
                similarity,
            })
            .collect(),
        truncated: false,
    }
}

fn golden(name: &str) -> String {
    let path = format!("{}/tests/golden/{name}", env!("CARGO_MANIFEST_DIR"));
    std::fs::read_to_string(path).unwrap()
}

#[test]
fn sentnob_zero_shot() {
    let r = registry();
    let p = render_zero_shot(
        &QueryExample::new("q", "X"),
        r.require("sentnob-bloomz").unwrap(),
        &TaskMeta::default(),
    )
    .unwrap();
    assert_eq!(
        p.full_text,
        "Text: X What is a possible sentiment for the text given the following options?"
    );
    assert_eq!(p.demo_count, 0);
    assert!(!p.truncated);
}

#[test]
fn xlsum_zero_shot_and_main() {
    let r = registry();
    let q = QueryExample::new("q", "X");
    let zs = render_zero_shot(&q, r.require("xlsum-zero-shot").unwrap(), &TaskMeta::default()).unwrap();
    assert_eq!(zs.full_text, "X Generate a concise summary of the given text:");

    let main = r.require("xlsum-main").unwrap();
    assert!(matches!(
        render_zero_shot(&q, main, &TaskMeta::default()),
        Err(PromptError::MissingSlotValue("target_lang"))
    ));
    let p = render_zero_shot(&q, main, &TaskMeta::with_target_lang("Bengali")).unwrap();
    assert_eq!(
        p.full_text,
        "X Generate a concise summary of the above text using the same language as the original text (Bengali):"
    );
}

#[test]
fn template_without_optional_slots_needs_no_meta() {
    let r = registry();
    for t in r.templates().iter().filter(|t| !t.requires_target_lang()) {
        let p = render_zero_shot(&QueryExample::new("q", "body"), t, &TaskMeta::default()).unwrap();
        assert_eq!(p.full_text, t.body().replacen("{text}", "body", 1));
    }
}

#[test]
fn masked_demonstration_uses_verbalizer_word() {
    let r = registry();
    let t = r.require("violens-mbert").unwrap();
    let e = entry("e", "<entry text>", Some("Direct Violence"));
    assert_eq!(
        render_demonstration(&e, t, None, &TaskMeta::default()).unwrap(),
        "The underlying theme in <entry text> is assaultive."
    );
}

#[test]
fn generative_demonstration_appends_answer_line() {
    let r = registry();
    let t = r.require("sentnob-bloomz").unwrap();
    let e = entry("e", "Great.", Some("0"));
    let zero = render_zero_shot(&QueryExample::new("x", "Great."), t, &TaskMeta::default()).unwrap();
    assert_eq!(
        render_demonstration(&e, t, None, &TaskMeta::default()).unwrap(),
        format!("{}\npositive", zero.full_text)
    );
}

#[test]
fn generative_demonstration_uses_option_string_not_label_name() {
    let r = registry();
    let t = r.require("violens-gen-8").unwrap();
    let e = entry("e", "t", Some("Passive Violence"));
    let d = render_demonstration(&e, t, None, &TaskMeta::default()).unwrap();
    assert!(d.ends_with("\nslightly aggressive"), "{d}");
}

#[test]
fn template_without_options_appends_raw_label() {
    let t = PromptTemplate::from_spec(parc_core::prompt::TemplateSpec {
        id: "plain".into(),
        style: TemplateStyle::Generative,
        body: "Review: {text}\nSentiment:".into(),
        language: "en".into(),
        mask_token: None,
        options: None,
        verbalizer: None,
    })
    .unwrap();
    let d = render_demonstration(&entry("e", "fine", Some("positive")), &t, None, &TaskMeta::default())
        .unwrap();
    assert_eq!(d, "Review: fine\nSentiment:\npositive");
}

#[test]
fn demonstration_errors() {
    let r = registry();
    let gen = r.require("sentnob-bloomz").unwrap();
    assert!(matches!(
        render_demonstration(&entry("e", "t", None), gen, None, &TaskMeta::default()),
        Err(PromptError::UnlabeledEntry(id)) if id == "e"
    ));
    assert!(matches!(
        render_demonstration(&entry("e", "t", Some("7")), gen, None, &TaskMeta::default()),
        Err(PromptError::UnknownLabel { .. })
    ));
    let masked = r.require("sentnob-mbert").unwrap();
    assert!(matches!(
        render_demonstration(&entry("e", "t", Some("7")), masked, None, &TaskMeta::default()),
        Err(PromptError::VerbalizerMiss(_))
    ));
}

#[test]
fn explicit_verbalizer_overrides_template_one() {
    let r = registry();
    let t = r.require("violens-mbert").unwrap();
    let v = Verbalizer::from_pairs([
        ("Direct Violence", "violent"),
        ("Passive Violence", "subtle"),
        ("Non-Violence", "calm"),
    ])
    .unwrap();
    let d = render_demonstration(&entry("e", "x", Some("Non-Violence")), t, Some(&v), &TaskMeta::default())
        .unwrap();
    assert_eq!(d, "The underlying theme in x is calm.");
}

#[test]
fn assemble_k3_matches_golden() {
    let r = registry();
    let p = pool(vec![
        entry("a", "Worst service ever.", Some("2")),
        entry("b", "I love this phone.", Some("0")),
        entry("c", "It is okay I guess.", Some("1")),
    ]);
    let result = hits(&[("b", 1, 0.9), ("c", 2, 0.5), ("a", 0, 0.1)]);
    let out = assemble_prompt(
        &QueryExample::new("q", "ফোনটা দারুণ"),
        &result,
        &p,
        r.require("sentnob-bloomz").unwrap(),
        None,
        &TaskMeta::default(),
        None,
    )
    .unwrap();
    assert_eq!(out.full_text, golden("sentnob_bloomz_k3.txt"));
    assert_eq!(out.demo_count, 3);
    assert_eq!(out.template_id, "sentnob-bloomz");
}

#[test]
fn assemble_masked_k2_matches_golden_and_keeps_one_mask() {
    let r = registry();
    let t = r.require("violens-mask-5").unwrap();
    let p = pool(vec![
        entry("x", "They attacked the village.", Some("Direct Violence")),
        entry("y", "Protesters blocked the road.", Some("Passive Violence")),
    ]);
    let out = assemble_prompt(
        &QueryExample::new("q", "ওরা গ্রামে হামলা করেছে"),
        &hits(&[("x", 0, 0.8), ("y", 1, 0.3)]),
        &p,
        t,
        None,
        &TaskMeta::default(),
        None,
    )
    .unwrap();
    assert_eq!(out.full_text, golden("violens_mask5_k2.txt"));
    assert_eq!(out.full_text.matches("[MASK]").count(), 1);
}

#[test]
fn assemble_k1_generative_matches_golden() {
    let r = registry();
    let p = pool(vec![entry("x", "They attacked the village.", Some("Direct Violence"))]);
    let out = assemble_prompt(
        &QueryExample::new("q", "ওরা গ্রামে হামলা করেছে"),
        &hits(&[("x", 0, 0.8)]),
        &p,
        r.require("violens-gen-8").unwrap(),
        None,
        &TaskMeta::default(),
        None,
    )
    .unwrap();
    assert_eq!(out.full_text, golden("violens_gen8_k1.txt"));
    assert_eq!(out.demo_count, 1);
}

#[test]
fn assemble_errors() {
    let r = registry();
    let t = r.require("sentnob-bloomz").unwrap();
    let p = pool(vec![entry("u", "unlabeled", None)]);
    let q = QueryExample::new("q", "x");
    assert!(matches!(
        assemble_prompt(&q, &hits(&[("u", 0, 1.0)]), &p, t, None, &TaskMeta::default(), None),
        Err(PromptError::UnlabeledEntry(_))
    ));
    assert!(matches!(
        assemble_prompt(&q, &hits(&[("zz", 0, 1.0)]), &p, t, None, &TaskMeta::default(), None),
        Err(PromptError::DanglingHitId(id)) if id == "zz"
    ));
    assert!(matches!(
        render_zero_shot(&QueryExample::new("q", ""), t, &TaskMeta::default()),
        Err(PromptError::EmptyQuery(_))
    ));
}

#[test]
fn self_predicted_labels_are_usable() {
    let r = registry();
    let t = r.require("sentnob-bloomz").unwrap();
    let mut e = entry("s", "meh", Some("1"));
    e.label_source = LabelSource::SelfPredicted;
    e.embedding = Some(EmbeddingVector::new(vec![1.0, 0.0, 0.0, 0.0]).unwrap());
    let p = pool(vec![e]);
    let out = assemble_prompt(
        &QueryExample::new("q", "x"),
        &hits(&[("s", 0, 1.0)]),
        &p,
        t,
        None,
        &TaskMeta::default(),
        None,
    )
    .unwrap();
    assert!(out.full_text.contains("\nneutral\n\n"));
}

mod budget {
    use super::*;

    fn setup() -> (SentencePool, RetrievalResult, PromptTemplate) {
        let t = PromptTemplate::from_spec(parc_core::prompt::TemplateSpec {
            id: "tiny".into(),
            style: TemplateStyle::Generative,
            body: "[{text}]".into(),
            language: "en".into(),
            mask_token: None,
            options: None,
            verbalizer: None,
        })
        .unwrap();
        let p = pool(vec![
            entry("a", "aaaaaaaaaa", Some("A")),
            entry("b", "bbbbbbbbbb", Some("B")),
        ]);
        (p, hits(&[("a", 0, 0.9), ("b", 1, 0.4)]), t)
    }

    // Blocks: "[aaaaaaaaaa]\nA" = 14 chars, "[bbbbbbbbbb]\nB" = 14, query "[qq]" = 4.
    // Full prompt = 14 + 2 + 14 + 2 + 4 = 36 chars.

    fn run(budget: Option<usize>) -> parc_core::prompt::AssembledPrompt {
        let (p, r, t) = setup();
        assemble_prompt(&QueryExample::new("q", "qq"), &r, &p, &t, None, &TaskMeta::default(), budget)
            .unwrap()
    }

    #[test]
    fn within_budget_untouched() {
        let out = run(Some(36));
        assert!(!out.truncated);
        assert_eq!(out.full_text, "[aaaaaaaaaa]\nA\n\n[bbbbbbbbbb]\nB\n\n[qq]");
    }

    #[test]
    fn lowest_similarity_demo_cut_first() {
        let out = run(Some(30));
        assert!(out.truncated);
        assert_eq!(out.demo_count, 2);
        assert_eq!(out.full_text, "[aaaaaaaaaa]\nA\n\n[bbbb]\nB\n\n[qq]");
        assert_eq!(out.full_text.chars().count(), 30);
    }

    #[test]
    fn demo_dropped_when_cut_to_nothing_then_next_cut() {
        // Dropping b saves 16 chars (36 -> 20); a needs 2 more.
        let out = run(Some(18));
        assert_eq!(out.full_text, "[aaaaaaaa]\nA\n\n[qq]");
        assert_eq!(out.demo_count, 1);
    }

    #[test]
    fn query_never_truncated() {
        let out = run(Some(1));
        assert_eq!(out.full_text, "[qq]");
        assert_eq!(out.demo_count, 0);
        assert!(out.truncated);
    }
}

fn safe_text() -> impl Strategy<Value = String> {
    "[a-zA-Z ঀ-৾]{1,30}".prop_filter("non-blank", |s| !s.trim().is_empty())
}

proptest! {
    #[test]
    fn empty_retrieval_is_zero_shot_for_every_template(text in safe_text()) {
        let r = registry();
        let p = pool(vec![]);
        let meta = TaskMeta::with_target_lang("Bengali");
        let q = QueryExample::new("q", text);
        for t in r.templates() {
            let zs = render_zero_shot(&q, t, &meta).unwrap();
            let asm = assemble_prompt(&q, &RetrievalResult::empty(), &p, t, None, &meta, None).unwrap();
            prop_assert_eq!(zs, asm);
        }
    }

    #[test]
    fn query_appears_once_after_demos(
        query in "Q[0-9]{6}",
        demo_texts in prop::collection::vec("[a-z ]{1,20}", 0..4),
        budget in prop::option::of(10usize..400),
    ) {
        let r = registry();
        let meta = TaskMeta::default();
        let entries: Vec<PoolEntry> = demo_texts
            .iter()
            .enumerate()
            .map(|(i, t)| entry(&format!("e{i}"), &format!("d{t}"), Some(["0", "1", "2"][i % 3])))
            .collect();
        let n = entries.len();
        let p = pool(entries);
        let rr = hits(&(0..n).map(|i| (["e0", "e1", "e2", "e3"][i], i, 1.0 - i as f64 * 0.1)).collect::<Vec<_>>());
        let q = QueryExample::new("q", query.clone());
        for id in ["sentnob-bloomz", "sentnob-mbert"] {
            let t = r.require(id).unwrap();
            let out = assemble_prompt(&q, &rr, &p, t, None, &meta, budget).unwrap();
            prop_assert_eq!(out.full_text.matches(query.as_str()).count(), 1);
            let zs = render_zero_shot(&q, t, &meta).unwrap().full_text;
            prop_assert!(out.full_text.ends_with(&zs));
            if out.demo_count == 0 {
                prop_assert_eq!(&out.full_text, &zs);
            }
            if t.style() == TemplateStyle::Masked {
                prop_assert_eq!(out.full_text.matches("[MASK]").count(), 1);
            }
            // pure
            let again = assemble_prompt(&q, &rr, &p, t, None, &meta, budget).unwrap();
            prop_assert_eq!(out, again);
        }
    }
}
