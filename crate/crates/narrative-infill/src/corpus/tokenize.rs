//! The crate-wide tokenization rule: lowercase everything, emit
//! alphanumeric runs as tokens, and emit every other non-whitespace
//! character as its own single-character token.
//!
//! The rule is deliberately simple so counts are reproducible across
//! platforms and datasets; no language-specific resources are involved.

/// Split `text` into lowercased tokens, isolating punctuation.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    let mut word = String::new();
    for ch in text.chars().flat_map(char::to_lowercase) {
        if ch.is_alphanumeric() {
            word.push(ch);
        } else {
            if !word.is_empty() {
                tokens.push(std::mem::take(&mut word));
            }
            if !ch.is_whitespace() {
                tokens.push(ch.to_string());
            }
        }
    }
    if !word.is_empty() {
        tokens.push(word);
    }
    tokens
}
