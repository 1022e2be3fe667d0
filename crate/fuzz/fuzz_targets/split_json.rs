#![no_main]

use libfuzzer_sys::fuzz_target;
use newslean::split::SplitSpec;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(spec) = SplitSpec::from_json(text) {
            assert_eq!(SplitSpec::from_json(&spec.to_json()).unwrap(), spec);
        }
    }
});
