#![no_main]

use libfuzzer_sys::fuzz_target;
use newslean::wiki::parse_revision_response;

fuzz_target!(|data: &[u8]| {
    if let Ok(v) = serde_json::from_slice::<serde_json::Value>(data) {
        let _ = parse_revision_response(&v);
    }
});
