#![no_main]

use std::path::Path;

use libfuzzer_sys::fuzz_target;
use parc_core::runner::ExperimentConfig;

fuzz_target!(|data: &[u8]| {
    let Ok(source) = std::str::from_utf8(data) else { return };
    // Overrides go through the same path as `--override` on the CLI.
    let (body, overrides) = match source.split_once("\n---\n") {
        Some((body, rest)) => (body, rest.lines().map(String::from).collect()),
        None => (source, Vec::new()),
    };
    if let Ok(config) = ExperimentConfig::parse(body, Path::new("/fuzz"), &overrides) {
        let _ = config.validate();
        let _ = config.hash();
        let _ = config.to_toml();
    }
});
