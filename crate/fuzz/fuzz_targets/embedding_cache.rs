#![no_main]

use libfuzzer_sys::fuzz_target;
use parc_core::runner::{decode_embedding_cache, encode_embedding_cache};

fuzz_target!(|data: &[u8]| {
    if let Ok((dim, entries)) = decode_embedding_cache(data) {
        assert!(entries.values().all(|v| v.len() == dim));
        assert_eq!(encode_embedding_cache(dim, &entries), data);
    }
});
