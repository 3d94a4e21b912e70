//! Answer normalization shared by corpus validation and generation scoring.

/// Lowercases, collapses whitespace, and strips non-alphanumeric characters
/// from both ends of every whitespace-separated token. Tokens that become
/// empty are dropped. Idempotent.
pub fn normalize_answer(s: &str) -> String {
    let lower = s.to_lowercase();
    let mut out = String::with_capacity(lower.len());
    for tok in lower.split_whitespace() {
        let tok = tok.trim_matches(|c: char| !c.is_alphanumeric());
        if tok.is_empty() {
            continue;
        }
        if !out.is_empty() {
            out.push(' ');
        }
        out.push_str(tok);
    }
    out
}

/// True when `needle` (normalized) appears as one whole token of `haystack`
/// (normalized).
pub fn contains_token(haystack: &str, needle: &str) -> bool {
    let needle = normalize_answer(needle);
    if needle.is_empty() {
        return false;
    }
    normalize_answer(haystack).split(' ').any(|t| t == needle)
}

/// True when the normalized `needle` is a substring of the normalized
/// `haystack`.
pub fn contains_phrase(haystack: &str, needle: &str) -> bool {
    let needle = normalize_answer(needle);
    !needle.is_empty() && normalize_answer(haystack).contains(&needle)
}
