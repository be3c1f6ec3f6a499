#![no_main]

use libfuzzer_sys::fuzz_target;
use parc_core::gateway::protocol::decode_response;

fuzz_target!(|data: &[u8]| {
    if let Ok(response) = decode_response(data) {
        let bytes = serde_json::to_vec(&response).expect("response serializes");
        assert_eq!(decode_response(&bytes).expect("re-encoded response decodes"), response);
    }
});
