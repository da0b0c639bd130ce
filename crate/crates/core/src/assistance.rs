//! Writing assistance: objection situations drawn from failed sufficiency
//! checks, LLM revision of the argument, and a direct-prompting baseline.

use std::sync::LazyLock;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::backends::{LlmClient, NliClient, NliLabel};
use crate::concurrency::par_map;
use crate::error::{CasaError, Result};
use crate::pipeline::{Assessment, Casa};
use crate::prompts::{argument_revision, direct_objection};
use crate::textproc::split_sentences;
use crate::types::{Argument, Label, ModelFamily, NliOutcome, ObjectionSituation};

/// Drops every sentence of `revised` that entails any premise and keeps the
/// rest in order. Fails with `EmptyObjection` when nothing is left.
pub fn build_objection(
    revised: &str,
    premises: &[String],
    nli: &NliClient,
    unit_index: usize,
    max_concurrency: usize,
) -> Result<ObjectionSituation> {
    let sentences = split_sentences(revised);
    let entails = par_map(sentences.clone(), max_concurrency, |_, s| -> Result<bool> {
        for p in premises {
            if nli.predict(&s, p)?.label == NliLabel::Entailment {
                return Ok(true);
            }
        }
        Ok(false)
    });
    let mut kept = Vec::new();
    let mut removed = Vec::new();
    for (s, e) in sentences.into_iter().zip(entails) {
        if e? {
            removed.push(s);
        } else {
            kept.push(s);
        }
    }
    if kept.is_empty() {
        return Err(CasaError::EmptyObjection);
    }
    Ok(ObjectionSituation { source_unit_index: unit_index, text: kept.join(" "), removed_sentences: removed })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Suggestion {
    pub premise_index: usize,
    pub premise: String,
    pub objection: String,
    pub revised_situation: String,
    pub unit_index: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Suggestions {
    pub assessment: Assessment,
    pub suggestions: Vec<Suggestion>,
}

/// Assesses the argument and, for each insufficient premise, picks one
/// refuting unit with a non-empty objection uniformly at random under `seed`.
pub fn suggest(casa: &Casa, argument: &Argument, seed: u64) -> Result<Suggestions> {
    let assessment = casa.assess(argument)?;
    let verdict = &assessment.verdict;
    let premises = &verdict.claim_split.premises;
    let limit = casa.config().max_concurrency;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut suggestions = Vec::new();
    for ps in verdict.per_premise.iter().filter(|p| p.verdict == Label::Insufficient) {
        let mut candidates = Vec::new();
        for unit in ps.units.iter().filter(|u| u.nli_outcome == NliOutcome::Refutes) {
            match build_objection(&unit.revised, premises, casa.nli(), unit.index, limit) {
                Ok(o) => candidates.push((unit, o)),
                Err(CasaError::EmptyObjection) => {}
                Err(e) => return Err(e),
            }
        }
        if candidates.is_empty() {
            continue;
        }
        let (unit, objection) = &candidates[rng.random_range(0..candidates.len())];
        suggestions.push(Suggestion {
            premise_index: ps.premise_index,
            premise: premises[ps.premise_index].clone(),
            objection: objection.text.clone(),
            revised_situation: unit.revised.clone(),
            unit_index: unit.index,
        });
    }
    Ok(Suggestions { assessment, suggestions })
}

/// Asks the LLM to revise `argument` so that it answers `objection`.
pub fn revise_with_llm(argument: &str, objection: &str, llm: &LlmClient) -> Result<String> {
    if argument.trim().is_empty() {
        return Err(CasaError::EmptyInput);
    }
    if objection.trim().is_empty() {
        return Err(CasaError::InvalidInput("objection is empty".into()));
    }
    Ok(llm.generate(&argument_revision(argument, objection))?.text.trim().to_string())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirectObjection {
    pub verdict: Label,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub objection: Option<String>,
}

static JUDGEMENT: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?im)^\s*judge?ment\s*:\s*(insufficient|sufficient)\b").expect("valid regex"));
static OBJECTION_LINE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?im)^\s*objection situation\s*:[ \t]*(.*)$").expect("valid regex"));

/// Reads the `Judgement:` and `Objection Situation:` lines of a completion.
pub fn parse_direct_objection(completion: &str) -> Result<DirectObjection> {
    let word = JUDGEMENT
        .captures(completion)
        .and_then(|c| c.get(1))
        .ok_or_else(|| CasaError::UnparseableResponse(format!("no judgement line in {completion:?}")))?
        .as_str()
        .to_ascii_lowercase();
    let verdict = if word == "sufficient" { Label::Sufficient } else { Label::Insufficient };
    let objection = OBJECTION_LINE
        .captures(completion)
        .and_then(|c| c.get(1))
        .map(|m| m.as_str().trim().to_string())
        .filter(|s| !s.is_empty() && !s.eq_ignore_ascii_case("none") && !s.eq_ignore_ascii_case("n/a"));
    Ok(DirectObjection { verdict, objection })
}

/// One-shot prompt asking for a judgement and an objection in one step.
pub fn direct_objection_baseline(argument: &str, llm: &LlmClient, family: ModelFamily) -> Result<DirectObjection> {
    if argument.trim().is_empty() {
        return Err(CasaError::EmptyInput);
    }
    parse_direct_objection(&llm.generate(&direct_objection(family, argument))?.text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_both_lines() {
        let d = parse_direct_objection("Judgement: Insufficient\nObjection Situation: However, jobs are scarce.").unwrap();
        assert_eq!(d.verdict, Label::Insufficient);
        assert_eq!(d.objection.as_deref(), Some("However, jobs are scarce."));
        let d = parse_direct_objection("Judgement: Sufficient").unwrap();
        assert_eq!(d, DirectObjection { verdict: Label::Sufficient, objection: None });
        let d = parse_direct_objection("judgment: sufficient\nObjection Situation: None").unwrap();
        assert_eq!(d.objection, None);
        assert!(matches!(parse_direct_objection("I am not sure."), Err(CasaError::UnparseableResponse(_))));
    }
}
