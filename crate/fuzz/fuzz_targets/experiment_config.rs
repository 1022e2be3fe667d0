#![no_main]

use std::path::Path;

use libfuzzer_sys::fuzz_target;
use newslean::config::ExperimentConfig;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(cfg) = ExperimentConfig::parse(text, Path::new("/fuzz")) {
        if cfg.validate().is_ok() {
            let again = ExperimentConfig::parse(&cfg.to_toml(), Path::new("/fuzz")).expect("round trip");
            assert_eq!(again.hash(), cfg.hash());
        }
    }
});
