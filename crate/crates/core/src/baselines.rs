//! Comparison systems: zero- and one-shot prompting, perplexity comparison and
//! direct NLI classification.

use std::sync::LazyLock;

use regex::Regex;

use crate::backends::{LlmClient, NliClient, NliLabel};
use crate::error::{CasaError, Result};
use crate::prompts::BaselinePrompt;
use crate::types::{Argument, ClaimSplit, Label, ModelFamily, NegatedClaims};

static VALIDITY: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"(?i)\b(valid|invalid)\b").expect("valid regex"));
static SUFFICIENCY: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)\b(sufficient|insufficient)\b").expect("valid regex"));

/// First answer word in a completion, read with the vocabulary of `prompt`.
pub fn parse_answer(prompt: BaselinePrompt, completion: &str) -> Option<Label> {
    let re = if prompt.id() <= 2 { &VALIDITY } else { &SUFFICIENCY };
    let word = re.captures(completion)?.get(1)?.as_str().to_ascii_lowercase();
    Some(if word.starts_with("in") { Label::Insufficient } else { Label::Sufficient })
}

fn classify(
    llm: &LlmClient,
    family: ModelFamily,
    prompt: BaselinePrompt,
    text: &str,
    example: Option<(&str, Label)>,
    max_retries: u32,
) -> Result<Label> {
    if text.trim().is_empty() {
        return Err(CasaError::EmptyInput);
    }
    let base = prompt.request(family, text, example);
    let mut last = String::new();
    for attempt in 0..=max_retries {
        let completion = llm.generate(&base.clone().with_sample_tag(attempt))?.text;
        if let Some(label) = parse_answer(prompt, &completion) {
            return Ok(label);
        }
        last = completion;
    }
    Err(CasaError::UnparseableResponse(format!("no answer word in {last:?}")))
}

pub fn zero_shot_classify(
    llm: &LlmClient,
    family: ModelFamily,
    prompt: BaselinePrompt,
    text: &str,
    max_retries: u32,
) -> Result<Label> {
    classify(llm, family, prompt, text, None, max_retries)
}

/// Like [`zero_shot_classify`] with one labelled example before the query.
pub fn one_shot_classify(
    llm: &LlmClient,
    family: ModelFamily,
    prompt: BaselinePrompt,
    text: &str,
    example: &Argument,
    max_retries: u32,
) -> Result<Label> {
    let label = example
        .gold_label
        .ok_or_else(|| CasaError::InvalidInput(format!("example {:?} has no label", example.id)))?;
    if example.text.trim().is_empty() {
        return Err(CasaError::InvalidInput("example text is empty".into()));
    }
    classify(llm, family, prompt, text, Some((&example.text, label)), max_retries)
}

/// The two texts compared by the perplexity baseline: premises followed by the
/// conclusion, and premises followed by the negated conclusion.
pub fn perplexity_pair(claims: &ClaimSplit, negated: &NegatedClaims) -> (String, String) {
    let premises = claims.premises.join(" ");
    (format!("{premises} {}", claims.conclusion), format!("{premises} {}", negated.neg_conclusion))
}

/// Sufficient iff the conclusion reads at least as naturally as its negation.
pub fn perplexity_decision(ppl_conclusion: f64, ppl_negated: f64) -> Label {
    if ppl_conclusion <= ppl_negated {
        Label::Sufficient
    } else {
        Label::Insufficient
    }
}

pub fn perplexity_classify(llm: &LlmClient, claims: &ClaimSplit, negated: &NegatedClaims) -> Result<Label> {
    let (with_conclusion, with_negation) = perplexity_pair(claims, negated);
    Ok(perplexity_decision(llm.perplexity(&with_conclusion)?, llm.perplexity(&with_negation)?))
}

/// Premises as NLI premise, conclusion as hypothesis. Only entailment counts.
pub fn direct_nli_classify(nli: &NliClient, claims: &ClaimSplit) -> Result<Label> {
    let verdict = nli.predict(&claims.premises.join(" "), &claims.conclusion)?;
    Ok(if verdict.label == NliLabel::Entailment { Label::Sufficient } else { Label::Insufficient })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn answer_words() {
        let p1 = BaselinePrompt::new(1).unwrap();
        let p3 = BaselinePrompt::new(3).unwrap();
        assert_eq!(parse_answer(p1, "Invalid"), Some(Label::Insufficient));
        assert_eq!(parse_answer(p1, "valid."), Some(Label::Sufficient));
        assert_eq!(parse_answer(p1, "It is Valid, not invalid"), Some(Label::Sufficient));
        assert_eq!(parse_answer(p3, "I think it is Sufficient."), Some(Label::Sufficient));
        assert_eq!(parse_answer(p3, "INSUFFICIENT"), Some(Label::Insufficient));
        assert_eq!(parse_answer(p3, "Valid"), None);
        assert_eq!(parse_answer(p1, "Sufficient"), None);
    }

    #[test]
    fn tie_is_sufficient() {
        assert_eq!(perplexity_decision(5.0, 9.0), Label::Sufficient);
        assert_eq!(perplexity_decision(4.0, 4.0), Label::Sufficient);
        assert_eq!(perplexity_decision(9.0, 5.0), Label::Insufficient);
    }
}
