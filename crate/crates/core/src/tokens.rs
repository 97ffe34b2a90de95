//! Provider-independent token estimation.

/// Default characters-per-token ratio used when no tokenizer is available.
pub const DEFAULT_CHARS_PER_TOKEN: usize = 4;

/// Estimates the token count of `text` as `ceil(chars / chars_per_token)`.
pub fn estimate_tokens(text: &str, chars_per_token: usize) -> usize {
    let per = chars_per_token.max(1);
    text.chars().count().div_ceil(per)
}
