#![no_main]

use libfuzzer_sys::fuzz_target;
use newslean::wiki::strip_wikitext;

fuzz_target!(|data: &[u8]| {
    let text = String::from_utf8_lossy(data);
    let _ = strip_wikitext(&text);
});
