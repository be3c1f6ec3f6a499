#![no_main]

use libfuzzer_sys::fuzz_target;
use parc_core::vector_store::{build_pool, decode_pool, encode_pool, parse_pool_records};

fuzz_target!(|data: &[u8]| {
    let Ok(records) = parse_pool_records(data) else { return };
    for dim in [1, 3, 8] {
        if let Ok(pool) = build_pool(records.clone(), dim) {
            assert!(pool.entries().iter().all(|e| !e.text.is_empty()));
            let back = decode_pool(&encode_pool(&pool)).expect("encoded pool decodes");
            assert_eq!(back, pool);
        }
    }
});
