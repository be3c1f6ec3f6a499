#![no_main]

use libfuzzer_sys::fuzz_target;
use parc_core::vector_store::{decode_pool, encode_pool};

fuzz_target!(|data: &[u8]| {
    if let Ok(pool) = decode_pool(data) {
        let again = decode_pool(&encode_pool(&pool)).expect("re-encoded pool decodes");
        assert_eq!(again, pool);
        assert_eq!(again.checksum(), pool.checksum());
    }
});
