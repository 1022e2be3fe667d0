#![no_main]

use libfuzzer_sys::fuzz_target;
use newslean::wiki::{decode_domain_filename, encode_domain_filename, WikiDoc};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let _ = WikiDoc::from_json(text);
    let name = encode_domain_filename(text);
    assert_eq!(decode_domain_filename(&name).as_deref(), Some(text));
});
