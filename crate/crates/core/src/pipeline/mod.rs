//! The sufficiency estimator.
//!
//! For each premise: sample `n` contexts in which the negated premise and the
//! negated conclusion hold (other premises pinned true), revise every context
//! so that the premise holds, and ask an NLI model whether the conclusion
//! follows. The share of supporting units estimates the probability of
//! sufficiency; a majority vote gives the per-premise verdict.

mod parse;
mod runlog;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::backends::{LlmClient, NliClient, NliLabel};
use crate::concurrency::par_map;
use crate::error::{CasaError, Result};
use crate::prompts::{PromptCatalog, SamplingLines};
use crate::textproc::{as_sentence, negate, segment_argument, NegationRuleSet, SegmentationRules};
use crate::types::{
    Argument, ClaimSplit, NegatedClaims, NliOutcome, PipelineConfig, PremisePS, SamplingMode, SufficiencyVerdict,
    UndecidedPolicy, Unit, Variant,
};

pub use parse::{first_line, parse_conclusion_choice, parse_contexts};
pub use runlog::{RunLog, RunLogRecord};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NegationSource {
    Rules,
    Llm,
}

/// One recorded step of an assessment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "step", rename_all = "snake_case")]
pub enum TraceEntry {
    Extraction {
        attempt: u32,
        prompt: String,
        completion: String,
    },
    Negation {
        claim: String,
        negated: String,
        source: NegationSource,
    },
    Sampling {
        premise_index: usize,
        sample_tag: u32,
        prompt: String,
        completion: String,
    },
    Revision {
        premise_index: usize,
        unit_index: usize,
        attempt: u32,
        prompt: String,
        completion: String,
    },
    Nli {
        premise_index: usize,
        unit_index: usize,
        premise: String,
        hypothesis: String,
        label: NliLabel,
        scores: BTreeMap<String, f64>,
    },
}

/// Verdict plus the steps that produced it, in deterministic order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Assessment {
    pub verdict: SufficiencyVerdict,
    pub trace: Vec<TraceEntry>,
}

/// Maps an NLI label to a unit outcome.
pub fn outcome_of(label: NliLabel, policy: UndecidedPolicy) -> NliOutcome {
    match (label, policy) {
        (NliLabel::Entailment, _) => NliOutcome::Supports,
        (NliLabel::Contradiction, _) => NliOutcome::Refutes,
        (NliLabel::Neutral, UndecidedPolicy::Support) => NliOutcome::Supports,
        (NliLabel::Neutral, UndecidedPolicy::NonSupport) => NliOutcome::Undecided,
    }
}

/// Assessment engine bound to a configuration and a pair of backends.
#[derive(Debug, Clone)]
pub struct Casa {
    config: PipelineConfig,
    llm: LlmClient,
    nli: NliClient,
    segmentation: SegmentationRules,
    negation: NegationRuleSet,
    prompts: PromptCatalog,
}

impl Casa {
    pub fn new(config: PipelineConfig, llm: LlmClient, nli: NliClient) -> Result<Self> {
        config.validate()?;
        Ok(Casa {
            config,
            llm,
            nli,
            segmentation: SegmentationRules::default(),
            negation: NegationRuleSet::default(),
            prompts: PromptCatalog::default(),
        })
    }

    pub fn with_segmentation(mut self, rules: SegmentationRules) -> Self {
        self.segmentation = rules;
        self
    }

    pub fn with_negation(mut self, rules: NegationRuleSet) -> Self {
        self.negation = rules;
        self
    }

    pub fn with_prompts(mut self, prompts: PromptCatalog) -> Self {
        self.prompts = prompts;
        self
    }

    /// Same backends and rules under a different configuration.
    pub fn with_config(&self, config: PipelineConfig) -> Result<Self> {
        config.validate()?;
        Ok(Casa { config, ..self.clone() })
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.config
    }

    pub fn llm(&self) -> &LlmClient {
        &self.llm
    }

    pub fn nli(&self) -> &NliClient {
        &self.nli
    }

    pub fn segmentation(&self) -> &SegmentationRules {
        &self.segmentation
    }

    pub fn prompts(&self) -> &PromptCatalog {
        &self.prompts
    }

    /// Segments the argument and asks the LLM which claim is the conclusion.
    pub fn extract_claims(&self, argument: &Argument) -> Result<ClaimSplit> {
        self.extract_traced(argument, &mut Vec::new())
    }

    fn extract_traced(&self, argument: &Argument, trace: &mut Vec<TraceEntry>) -> Result<ClaimSplit> {
        argument.validate()?;
        let claims = segment_argument(&argument.text, &self.segmentation)?;
        if claims.len() < 2 {
            return Err(CasaError::SingleClaimArgument);
        }
        let base = self.prompts.extraction(self.config.model_family, &argument.text, &claims);
        let mut last = String::new();
        for attempt in 0..=self.config.max_retries {
            let req = base.clone().with_sample_tag(attempt).with_max_tokens(self.config.max_tokens);
            let completion = self.llm.generate(&req)?.text;
            trace.push(TraceEntry::Extraction {
                attempt,
                prompt: req.prompt().rendered(),
                completion: completion.clone(),
            });
            if let Some(k) = parse_conclusion_choice(&completion).filter(|k| (1..=claims.len()).contains(k)) {
                return ClaimSplit::from_segments(&claims, k - 1);
            }
            last = completion;
        }
        Err(CasaError::UnparseableResponse(format!("no conclusion choice in {last:?}")))
    }

    /// Negates one claim with the rule engine, falling back to the LLM when
    /// the rules do not apply and the fallback is enabled.
    pub fn negate_claim(&self, claim: &str) -> Result<String> {
        self.negate_traced(claim, &mut Vec::new())
    }

    fn negate_traced(&self, claim: &str, trace: &mut Vec<TraceEntry>) -> Result<String> {
        let (negated, source) = match negate(claim, &self.negation) {
            Ok(n) => (n, NegationSource::Rules),
            Err(CasaError::UnhandledSyntax(_)) if self.config.llm_negation_fallback => {
                let req = self.prompts.negation(self.config.model_family, claim).with_max_tokens(self.config.max_tokens);
                let completion = self.llm.generate(&req)?.text;
                let line = first_line(&completion)
                    .ok_or_else(|| CasaError::UnparseableResponse(format!("empty negation of {claim:?}")))?;
                (line, NegationSource::Llm)
            }
            Err(e) => return Err(e),
        };
        trace.push(TraceEntry::Negation { claim: claim.to_string(), negated: negated.clone(), source });
        Ok(negated)
    }

    pub fn negate_claims(&self, claims: &ClaimSplit) -> Result<NegatedClaims> {
        self.negate_all(claims, &mut Vec::new())
    }

    fn negate_all(&self, claims: &ClaimSplit, trace: &mut Vec<TraceEntry>) -> Result<NegatedClaims> {
        let neg_premises =
            claims.premises.iter().map(|p| self.negate_traced(p, trace)).collect::<Result<Vec<_>>>()?;
        let neg_conclusion = self.negate_traced(&claims.conclusion, trace)?;
        Ok(NegatedClaims { neg_premises, neg_conclusion })
    }

    /// Samples `n` contexts consistent with the given conditions.
    ///
    /// `premise` and `conclusion` are the condition statements (normally the
    /// negated claims); `others` must hold in every context.
    pub fn sample_contexts(
        &self,
        premise: &str,
        conclusion: &str,
        others: &[String],
        n: usize,
        lines: SamplingLines,
    ) -> Result<Vec<String>> {
        self.sample_traced(0, premise, conclusion, others, n, lines, &mut Vec::new())
    }

    #[allow(clippy::too_many_arguments)]
    fn sample_traced(
        &self,
        premise_index: usize,
        premise: &str,
        conclusion: &str,
        others: &[String],
        n: usize,
        lines: SamplingLines,
        trace: &mut Vec<TraceEntry>,
    ) -> Result<Vec<String>> {
        if n == 0 {
            return Err(CasaError::InvalidInput("n must be at least 1".into()));
        }
        if (lines.premise && premise.trim().is_empty()) || (lines.conclusion && conclusion.trim().is_empty()) {
            return Err(CasaError::InvalidInput("sampling conditions must be non-empty".into()));
        }
        let family = self.config.model_family;
        let request = |count: usize, tag: u32| {
            self.prompts
                .sampling(family, count, premise, conclusion, others, lines)
                .with_temperature(self.config.sampling_temperature)
                .with_max_tokens(self.config.max_tokens)
                .with_sample_tag(tag)
        };
        match self.config.sampling_mode {
            SamplingMode::SingleRun => {
                let mut contexts = Vec::new();
                for tag in 0..=self.config.max_retries {
                    let req = request(n, tag);
                    let completion = self.llm.generate(&req)?.text;
                    trace.push(TraceEntry::Sampling {
                        premise_index,
                        sample_tag: tag,
                        prompt: req.prompt().rendered(),
                        completion: completion.clone(),
                    });
                    contexts.extend(parse_contexts(&completion));
                    if contexts.len() >= n {
                        contexts.truncate(n);
                        return Ok(contexts);
                    }
                }
                Err(CasaError::InsufficientContexts { got: contexts.len(), wanted: n })
            }
            SamplingMode::PerSample => {
                let results = par_map((0..n).collect(), self.config.max_concurrency, |_, i| {
                    let mut local = Vec::new();
                    for attempt in 0..=self.config.max_retries {
                        let tag = (i + attempt as usize * n) as u32;
                        let req = request(1, tag);
                        let completion = match self.llm.generate(&req) {
                            Ok(r) => r.text,
                            Err(e) => return (Err(e), local),
                        };
                        local.push(TraceEntry::Sampling {
                            premise_index,
                            sample_tag: tag,
                            prompt: req.prompt().rendered(),
                            completion: completion.clone(),
                        });
                        if let Some(c) = parse_contexts(&completion).into_iter().next() {
                            return (Ok(Some(c)), local);
                        }
                    }
                    (Ok(None), local)
                });
                let mut contexts = Vec::new();
                for (result, local) in results {
                    trace.extend(local);
                    if let Some(c) = result? {
                        contexts.push(c);
                    }
                }
                if contexts.len() < n {
                    return Err(CasaError::InsufficientContexts { got: contexts.len(), wanted: n });
                }
                Ok(contexts)
            }
        }
    }

    /// Rewrites a context so that `premise` holds. The premise should be in
    /// sentence form.
    pub fn revise_under_intervention(&self, context: &str, premise: &str) -> Result<String> {
        self.revise_traced(0, 0, context, premise, &mut Vec::new())
    }

    fn revise_traced(
        &self,
        premise_index: usize,
        unit_index: usize,
        context: &str,
        premise: &str,
        trace: &mut Vec<TraceEntry>,
    ) -> Result<String> {
        if context.trim().is_empty() || premise.trim().is_empty() {
            return Err(CasaError::InvalidInput("revision needs a context and a premise".into()));
        }
        match self.config.variant {
            Variant::ConcatIntervention => Ok(format!("{context} {premise}")),
            Variant::NoIntervention => Ok(context.to_string()),
            Variant::Full | Variant::NoCondX0 | Variant::NoCondY0 => {
                let base = self.prompts.revision(self.config.model_family, context, premise);
                for attempt in 0..=self.config.max_retries {
                    let req = base.clone().with_sample_tag(attempt).with_max_tokens(self.config.max_tokens);
                    let completion = self.llm.generate(&req)?.text;
                    trace.push(TraceEntry::Revision {
                        premise_index,
                        unit_index,
                        attempt,
                        prompt: req.prompt().rendered(),
                        completion: completion.clone(),
                    });
                    let revised = completion.trim();
                    if !revised.is_empty() {
                        return Ok(revised.to_string());
                    }
                }
                Err(CasaError::UnparseableResponse("empty revision".into()))
            }
        }
    }

    /// NLI of `revised` against the conclusion. With `premise_prefix` set, the
    /// premise is stated before the situation.
    pub fn estimate_unit(
        &self,
        revised: &str,
        conclusion: &str,
        premise_prefix: Option<&str>,
    ) -> Result<(NliOutcome, BTreeMap<String, f64>)> {
        let (outcome, scores, _) = self.estimate_traced(0, 0, revised, conclusion, premise_prefix, &mut Vec::new())?;
        Ok((outcome, scores))
    }

    fn estimate_traced(
        &self,
        premise_index: usize,
        unit_index: usize,
        revised: &str,
        conclusion: &str,
        premise_prefix: Option<&str>,
        trace: &mut Vec<TraceEntry>,
    ) -> Result<(NliOutcome, BTreeMap<String, f64>, NliLabel)> {
        if revised.trim().is_empty() {
            return Err(CasaError::InvalidInput("revised situation is empty".into()));
        }
        let premise_text = match premise_prefix {
            Some(p) => format!("{p} {revised}"),
            None => revised.to_string(),
        };
        let hypothesis = as_sentence(conclusion);
        let verdict = self.nli.predict(&premise_text, &hypothesis)?;
        trace.push(TraceEntry::Nli {
            premise_index,
            unit_index,
            premise: premise_text,
            hypothesis,
            label: verdict.label,
            scores: verdict.scores.clone(),
        });
        Ok((outcome_of(verdict.label, self.config.nli_undecided_policy), verdict.scores, verdict.label))
    }

    /// Estimates the probability of sufficiency of premise `premise_index`
    /// given the other premises.
    pub fn assess_premise(
        &self,
        claims: &ClaimSplit,
        negated: &NegatedClaims,
        premise_index: usize,
    ) -> Result<PremisePS> {
        self.assess_premise_traced(claims, negated, premise_index, &mut Vec::new())
    }

    fn assess_premise_traced(
        &self,
        claims: &ClaimSplit,
        negated: &NegatedClaims,
        premise_index: usize,
        trace: &mut Vec<TraceEntry>,
    ) -> Result<PremisePS> {
        let premise = claims
            .premises
            .get(premise_index)
            .ok_or_else(|| CasaError::InvalidInput(format!("premise index {premise_index} out of range")))?;
        if negated.neg_premises.len() != claims.premises.len() {
            return Err(CasaError::LengthMismatch(negated.neg_premises.len(), claims.premises.len()));
        }
        let others: Vec<String> =
            claims.premises.iter().enumerate().filter(|(i, _)| *i != premise_index).map(|(_, p)| p.clone()).collect();
        let variant = self.config.variant;
        let (cond_premise, lines) = match variant {
            Variant::Full | Variant::ConcatIntervention => (&negated.neg_premises[premise_index], SamplingLines::BOTH),
            Variant::NoCondX0 => {
                (&negated.neg_premises[premise_index], SamplingLines { premise: false, conclusion: true })
            }
            Variant::NoCondY0 => {
                (&negated.neg_premises[premise_index], SamplingLines { premise: true, conclusion: false })
            }
            Variant::NoIntervention => (premise, SamplingLines { premise: true, conclusion: false }),
        };
        let n = self.config.n;
        let contexts =
            self.sample_traced(premise_index, cond_premise, &negated.neg_conclusion, &others, n, lines, trace)?;
        let statement = as_sentence(premise);
        let prefix = (variant == Variant::NoIntervention).then_some(statement.as_str());
        let results = par_map(contexts, self.config.max_concurrency, |unit_index, context| {
            let mut local = Vec::new();
            let unit = self
                .revise_traced(premise_index, unit_index, &context, &statement, &mut local)
                .and_then(|revised| {
                    let (nli_outcome, nli_scores, _) = self.estimate_traced(
                        premise_index,
                        unit_index,
                        &revised,
                        &claims.conclusion,
                        prefix,
                        &mut local,
                    )?;
                    Ok(Unit { index: unit_index, context, revised, nli_outcome, nli_scores })
                });
            (unit, local)
        });
        let mut units = Vec::with_capacity(n);
        for (unit, local) in results {
            trace.extend(local);
            units.push(unit?);
        }
        Ok(PremisePS::from_units(premise_index, units))
    }

    /// Full assessment: extraction, negation, then every premise in turn.
    pub fn assess(&self, argument: &Argument) -> Result<Assessment> {
        let mut trace = Vec::new();
        let claims = self.extract_traced(argument, &mut trace)?;
        let negated = self.negate_all(&claims, &mut trace)?;
        let indices: Vec<usize> = (0..claims.premises.len()).collect();
        let results = par_map(indices, self.config.max_concurrency, |_, i| {
            let mut local = Vec::new();
            (self.assess_premise_traced(&claims, &negated, i, &mut local), local)
        });
        let mut per_premise = Vec::new();
        for (ps, local) in results {
            trace.extend(local);
            per_premise.push(ps?);
        }
        let verdict = SufficiencyVerdict::aggregate(argument.id.clone(), claims, negated, per_premise, &self.config);
        Ok(Assessment { verdict, trace })
    }

    pub fn assess_argument(&self, argument: &Argument) -> Result<SufficiencyVerdict> {
        Ok(self.assess(argument)?.verdict)
    }
}
