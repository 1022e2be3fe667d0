#![no_main]

use libfuzzer_sys::fuzz_target;
use newslean::debates::{debates_to_jsonl, parse_debates};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(speeches) = parse_debates(text) {
        let again = parse_debates(&debates_to_jsonl(&speeches)).expect("serialized debates parse");
        assert_eq!(again, speeches);
    }
});
