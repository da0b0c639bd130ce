//! Rule-based text processing: argument segmentation, syntactic negation and
//! sentence splitting.

mod negation;
mod segment;
mod sentences;

pub use negation::{negate, normalize_contractions, NegationFallback, NegationRuleSet, FALLBACK_PREFIX};
pub use segment::{
    is_separator_text, segment_argument, segment_spans, ConjunctionMarker, MarkerPosition, SegmentationRules,
};
pub use sentences::split_sentences;

/// Renders a claim as a standalone sentence: first letter uppercase, final
/// period added when the claim has no terminal punctuation.
pub fn as_sentence(claim: &str) -> String {
    let trimmed = claim.trim();
    let mut cs = trimmed.chars();
    let mut out: String = match cs.next() {
        Some(f) => f.to_uppercase().chain(cs).collect(),
        None => return String::new(),
    };
    if !out.ends_with(['.', '!', '?', '"', '”']) {
        out.push('.');
    }
    out
}
