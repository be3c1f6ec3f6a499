#![no_main]

use libfuzzer_sys::fuzz_target;
use parc_core::runner::RunManifest;

fuzz_target!(|data: &[u8]| {
    if let Ok(m) = RunManifest::from_json(data) {
        let json = m.to_json();
        let again = RunManifest::from_json(json.as_bytes()).expect("written manifest reads back");
        assert_eq!(again.to_json(), json);
    }
});
