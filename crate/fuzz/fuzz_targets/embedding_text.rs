#![no_main]

use libfuzzer_sys::fuzz_target;
use newslean::skipgram::WordEmbeddingModel;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(model) = WordEmbeddingModel::from_text(text) {
        let again = WordEmbeddingModel::from_text(&model.to_text()).expect("round trip");
        assert_eq!(again, model);
    }
});
