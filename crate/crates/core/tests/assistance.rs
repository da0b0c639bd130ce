//! Objection situations, suggestions, revision and the direct-objection baseline.

use std::path::PathBuf;
use std::sync::Arc;

use casa_core::assistance::{build_objection, direct_objection_baseline, revise_with_llm, suggest};
use casa_core::backends::{LlmClient, MockLlm, MockNli, MockScript, NliClient, NliLabel, TextMatch};
use casa_core::pipeline::Casa;
use casa_core::{Argument, CasaError, Label, ModelFamily, PipelineConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const COEDUCATION_PREMISE: &str = "co-education helps both genders to behave and cooperate and work together";
const COEDUCATION_REVISED: &str = "Co-education helps both genders to behave and cooperate and work together. \
However, in single-sex institutions, girls may feel more comfortable expressing themselves and participating in \
class discussions.";
const COEDUCATION_OBJECTION: &str = "However, in single-sex institutions, girls may feel more comfortable expressing \
themselves and participating in class discussions.";
const DONALD: &str = "You shouldn't trust Donald's views about politics. He's an alcoholic.";

fn nli_client(script: &MockScript) -> (NliClient, Arc<MockNli>) {
    let mock = Arc::new(MockNli::new(script).unwrap());
    (NliClient::new(mock.clone()), mock)
}

#[test]
fn coeducation_objection_drops_the_premise_sentence() {
    let script = MockScript::default()
        .nli(TextMatch::contains("Co-education helps"), TextMatch::any(), NliLabel::Entailment)
        .nli_default(NliLabel::Neutral);
    let (nli, _) = nli_client(&script);
    let o = build_objection(COEDUCATION_REVISED, &[COEDUCATION_PREMISE.to_string()], &nli, 0, 4).unwrap();
    assert_eq!(o.text, COEDUCATION_OBJECTION);
    assert_eq!(o.removed_sentences, vec!["Co-education helps both genders to behave and cooperate and work together."]);
}

#[test]
pub fn total_removal_is_an_empty_objection() {
    let (nli, _) = nli_client(&MockScript::default().nli_default(NliLabel::Entailment));
    let err = build_objection("One. Two.", &["p".to_string()], &nli, 0, 2).unwrap_err();
    assert!(matches!(err, CasaError::EmptyObjection));
}

#[test]
pub fn middle_sentence_removed_order_kept() {
    let script = MockScript::default()
        .nli(TextMatch::equals("Second thing happened."), TextMatch::any(), NliLabel::Entailment)
        .nli_default(NliLabel::Contradiction);
    let (nli, _) = nli_client(&script);
    let o = build_objection("First thing happened. Second thing happened. Third thing happened.", &["p".into()], &nli, 2, 3)
        .unwrap();
    assert_eq!(o.text, "First thing happened. Third thing happened.");
    assert_eq!(o.source_unit_index, 2);
}

#[test]
pub fn scripted_fixtures_remove_exactly_the_entailing_sentences() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for case in 0..100 {
        let count = rng.random_range(1..=8);
        let sentences: Vec<String> = (0..count).map(|i| format!("Case {case} sentence {i} is here.")).collect();
        let premises: Vec<String> = (0..rng.random_range(1..=3)).map(|i| format!("premise {i}")).collect();
        let mut script = MockScript::default().nli_default(NliLabel::Neutral);
        let mut entails = Vec::new();
        for s in &sentences {
            let hit = rng.random_bool(0.4);
            entails.push(hit);
            if hit {
                let p = &premises[rng.random_range(0..premises.len())];
                script = script.nli(TextMatch::equals(s.clone()), TextMatch::equals(p.clone()), NliLabel::Entailment);
            }
        }
        let (nli, _) = nli_client(&script);
        let result = build_objection(&sentences.join(" "), &premises, &nli, 0, 4);
        let kept: Vec<String> = sentences.iter().zip(&entails).filter(|(_, &e)| !e).map(|(s, _)| s.clone()).collect();
        let removed: Vec<String> = sentences.iter().zip(&entails).filter(|(_, &e)| e).map(|(s, _)| s.clone()).collect();
        if kept.is_empty() {
            assert!(matches!(result, Err(CasaError::EmptyObjection)), "case {case}");
        } else {
            let o = result.unwrap();
            assert_eq!(o.text, kept.join(" "), "case {case}");
            assert_eq!(o.removed_sentences, removed, "case {case}");
            for s in casa_core::textproc::split_sentences(&o.text) {
                for p in &premises {
                    assert_ne!(nli.predict(&s, p).unwrap().label, NliLabel::Entailment);
                }
            }
        }
    }
}

fn engine(script: &MockScript) -> Casa {
    let llm = Arc::new(MockLlm::new(script).unwrap());
    let nli = Arc::new(MockNli::new(script).unwrap());
    Casa::new(PipelineConfig::default(), LlmClient::new(llm), NliClient::new(nli)).unwrap()
}

fn donald_script() -> MockScript {
    MockScript::from_file(&PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/donald.mock.json")).unwrap()
}

#[test]
fn sufficient_argument_has_no_suggestions() {
    let script = MockScript::default()
        .reply("Determine which part", "Conclusion: 1")
        .reply("Generate", "1. a.\n2. b.\n3. c.")
        .reply("Revise the text", "revised.")
        .nli_default(NliLabel::Entailment);
    let s = suggest(&engine(&script), &Argument::new("d", DONALD).unwrap(), 0).unwrap();
    assert_eq!(s.assessment.verdict.overall, Label::Sufficient);
    assert!(s.suggestions.is_empty());
}

#[test]
fn single_refuting_unit_is_chosen_for_every_seed() {
    let script = MockScript::default()
        .reply("Determine which part", "Conclusion: 1")
        .reply("Generate", "1. a.\n2. b.\n3. c.")
        .reply("Text: a.", "He drinks a lot. Voters still admire his judgement.")
        .reply("Text: b.", "He drinks. Nobody listens.")
        .reply("Text: c.", "He drinks. Few care.")
        .nli(TextMatch::equals("He drinks a lot. Voters still admire his judgement."), TextMatch::any(), NliLabel::Contradiction)
        .nli(TextMatch::equals("He drinks a lot."), TextMatch::any(), NliLabel::Entailment)
        .nli_default(NliLabel::Neutral);
    let casa = engine(&script);
    for seed in 0..5 {
        let s = suggest(&casa, &Argument::new("d", DONALD).unwrap(), seed).unwrap();
        assert_eq!(s.suggestions.len(), 1);
        let g = &s.suggestions[0];
        assert_eq!((g.premise_index, g.unit_index), (0, 0));
        assert_eq!(g.premise, "He's an alcoholic.");
        assert_eq!(g.objection, "Voters still admire his judgement.");
    }
}

#[test]
fn seeded_choice_between_two_refuting_units() {
    let casa = engine(&donald_script());
    let arg = Argument::new("d", DONALD).unwrap();
    let pick = |seed| suggest(&casa, &arg, seed).unwrap().suggestions[0].unit_index;
    let mut seen = std::collections::BTreeSet::new();
    for seed in 0..16 {
        // oracle: the same generator drawing over the two refuting units 0 and 1
        let want = [0usize, 1][ChaCha8Rng::seed_from_u64(seed).random_range(0..2)];
        assert_eq!(pick(seed), want);
        assert_eq!(pick(seed), pick(seed));
        seen.insert(want);
    }
    assert_eq!(seen.len(), 2);
}

#[test]
fn revision_passes_completion_through() {
    let mock = Arc::new(MockLlm::new(&MockScript::default().reply("Objection situation:", " A revised argument. ")).unwrap());
    let llm = LlmClient::new(mock.clone());
    let out = revise_with_llm("Arg text.", COEDUCATION_OBJECTION, &llm).unwrap();
    assert_eq!(out, "A revised argument.");
    assert!(mock.history()[0].contains(&format!("Argument:\nArg text.\nObjection situation:\n{COEDUCATION_OBJECTION}")));
    assert!(revise_with_llm("Arg text.", "  ", &llm).is_err());
}

#[test]
fn direct_objection_prompt_and_parsing() {
    let mock = Arc::new(
        MockLlm::new(&MockScript::default().reply("", "Judgement: Insufficient\nObjection Situation: Jobs are scarce."))
            .unwrap(),
    );
    let llm = LlmClient::new(mock.clone());
    let d = direct_objection_baseline(DONALD, &llm, ModelFamily::Generic).unwrap();
    assert_eq!(d.verdict, Label::Insufficient);
    assert_eq!(d.objection.as_deref(), Some("Jobs are scarce."));
    assert!(mock.history()[0].contains("they will be able to browse the net"));

    let llm = LlmClient::new(Arc::new(MockLlm::new(&MockScript::default().reply("", "Judgement: Sufficient")).unwrap()));
    let d = direct_objection_baseline(DONALD, &llm, ModelFamily::Generic).unwrap();
    assert_eq!((d.verdict, d.objection), (Label::Sufficient, None));
}
