#![no_main]

use libfuzzer_sys::fuzz_target;
use newslean::corpus::parse_corpus;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(corpus) = parse_corpus(text) {
        let again = parse_corpus(&corpus.to_jsonl()).expect("serialized corpus parses");
        assert_eq!(again.articles(), corpus.articles());
    }
});
