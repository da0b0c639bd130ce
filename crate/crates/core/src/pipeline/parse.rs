//! Parsers for free-text model completions.

use std::sync::LazyLock;

use regex::Regex;

static CONCLUSION_FIELD: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)conclusion\s*:\s*\[?\s*(\d+)").expect("valid regex"));
static ANY_INTEGER: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\d+").expect("valid regex"));
static LIST_MARKER: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"(?i)^\s*(?:(?:context\s*)?\d+\s*[.):]|[-*•]|context\s*:)(?:\s+|$)").expect("valid regex")
});

/// One-based choice number from an extraction completion.
///
/// Reads the integer after `Conclusion:`; without that field, the first
/// integer anywhere in the text.
pub fn parse_conclusion_choice(completion: &str) -> Option<usize> {
    let m = CONCLUSION_FIELD
        .captures(completion)
        .map(|c| c.get(1).expect("group").as_str())
        .or_else(|| ANY_INTEGER.find(completion).map(|m| m.as_str()))?;
    m.parse().ok()
}

/// Contexts from a sampling completion, one per non-empty line, with list
/// numbering removed. Lines ending in a colon are treated as preambles.
pub fn parse_contexts(completion: &str) -> Vec<String> {
    completion
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.ends_with(':'))
        .map(|l| LIST_MARKER.replace(l, "").trim().to_string())
        .filter(|l| !l.is_empty())
        .collect()
}

/// First non-empty line, trimmed.
pub fn first_line(completion: &str) -> Option<String> {
    completion.lines().map(str::trim).find(|l| !l.is_empty()).map(str::to_string)
}
