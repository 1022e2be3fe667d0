//! Tokenization shared by embedding training, topic extraction and the
//! backbone stub.

use std::collections::HashSet;

/// Version tag of the bundled English stopword list.
pub const STOPWORDS_VERSION: &str = "en-1";

const STOPWORDS_EN: &str = include_str!("stopwords_en.txt");

/// Lowercases, removes every character that is neither alphanumeric nor
/// whitespace, and splits on whitespace.
///
/// Punctuation is deleted rather than replaced, so `"U.S."` becomes `"us"`
/// and `"health-care"` becomes `"healthcare"`.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    let mut current = String::new();
    for ch in text.chars() {
        if ch.is_whitespace() {
            if !current.is_empty() {
                tokens.push(std::mem::take(&mut current));
            }
        } else if ch.is_alphanumeric() {
            current.extend(ch.to_lowercase());
        }
    }
    if !current.is_empty() {
        tokens.push(current);
    }
    tokens
}

/// The bundled English stopword list (already in tokenizer form).
pub fn english_stopwords() -> HashSet<String> {
    STOPWORDS_EN
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(str::to_owned)
        .collect()
}

/// 64-bit FNV-1a. Stable across platforms and releases, unlike `DefaultHasher`.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        hash ^= u64::from(b);
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}
