#![no_main]

use libfuzzer_sys::fuzz_target;
use parc_core::prompt::{render_zero_shot, QueryExample, TaskMeta, TemplateRegistry};

fuzz_target!(|data: &[u8]| {
    let Ok(source) = std::str::from_utf8(data) else { return };
    let Ok(registry) = TemplateRegistry::parse(source) else { return };
    // Whatever parses must survive a TOML round trip.
    let again = TemplateRegistry::parse(&registry.to_toml()).expect("serialized registry parses");
    assert_eq!(again.templates(), registry.templates());
    let q = QueryExample::new("q", "text [MASK] {text}");
    let meta = TaskMeta::with_target_lang("Bengali");
    for t in registry.templates() {
        let _ = render_zero_shot(&q, t, &meta);
    }
});
