//! Domain model shared by the pipeline, the baselines, the harness and the service.
//!
//! Every type here is a plain value: structural equality, lossless JSON
//! round-trip, safe to move between threads.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::CasaError;

/// Binary sufficiency label, used both for gold labels and for predictions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Label {
    Sufficient,
    Insufficient,
}

impl Label {
    pub fn flip(self) -> Label {
        match self {
            Label::Sufficient => Label::Insufficient,
            Label::Insufficient => Label::Sufficient,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Label::Sufficient => "sufficient",
            Label::Insufficient => "insufficient",
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A raw argument: premises and a conclusion in unstructured text.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Argument {
    pub id: String,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gold_label: Option<Label>,
}

impl Argument {
    pub fn new(id: impl Into<String>, text: impl Into<String>) -> Result<Self, CasaError> {
        let arg = Argument { id: id.into(), text: text.into(), gold_label: None };
        arg.validate()?;
        Ok(arg)
    }

    pub fn with_label(mut self, label: Label) -> Self {
        self.gold_label = Some(label);
        self
    }

    pub fn validate(&self) -> Result<(), CasaError> {
        if self.text.trim().is_empty() {
            return Err(CasaError::InvalidInput(format!("argument {:?} has empty text", self.id)));
        }
        Ok(())
    }
}

/// Premises and conclusion extracted from an argument.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClaimSplit {
    pub premises: Vec<String>,
    pub conclusion: String,
    /// Zero-based index of the conclusion in the original segmentation.
    pub conclusion_index: usize,
}

impl ClaimSplit {
    /// Builds the split from segmented claims, taking claim `conclusion_index` as the conclusion.
    pub fn from_segments(claims: &[String], conclusion_index: usize) -> Result<Self, CasaError> {
        if claims.len() < 2 {
            return Err(CasaError::SingleClaimArgument);
        }
        if conclusion_index >= claims.len() {
            return Err(CasaError::InvalidInput(format!(
                "conclusion index {conclusion_index} out of range for {} claims",
                claims.len()
            )));
        }
        let split = ClaimSplit {
            premises: claims
                .iter()
                .enumerate()
                .filter(|(i, _)| *i != conclusion_index)
                .map(|(_, c)| c.clone())
                .collect(),
            conclusion: claims[conclusion_index].clone(),
            conclusion_index,
        };
        split.validate()?;
        Ok(split)
    }

    pub fn validate(&self) -> Result<(), CasaError> {
        if self.premises.is_empty() {
            return Err(CasaError::InvalidInput("claim split has no premise".into()));
        }
        if self.conclusion.trim().is_empty() || self.premises.iter().any(|p| p.trim().is_empty()) {
            return Err(CasaError::InvalidInput("claim split contains an empty claim".into()));
        }
        Ok(())
    }
}

/// Negated forms of every claim, aligned with [`ClaimSplit::premises`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NegatedClaims {
    pub neg_premises: Vec<String>,
    pub neg_conclusion: String,
}

/// NLI outcome of one unit, from the point of view of the conclusion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NliOutcome {
    Supports,
    Refutes,
    Undecided,
}

/// One sampled context and its revision under the intervention.
///
/// `context` realizes the latent confounder/mediator pair; `revised` is the same
/// situation after forcing the premise to hold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Unit {
    pub index: usize,
    pub context: String,
    pub revised: String,
    pub nli_outcome: NliOutcome,
    pub nli_scores: BTreeMap<String, f64>,
}

/// Exact fraction `numerator / denominator`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Ratio {
    pub numerator: u32,
    pub denominator: u32,
}

impl Ratio {
    pub fn new(numerator: u32, denominator: u32) -> Self {
        assert!(denominator > 0, "ratio denominator must be positive");
        Ratio { numerator, denominator }
    }

    pub fn value(self) -> f64 {
        f64::from(self.numerator) / f64::from(self.denominator)
    }
}

impl PartialOrd for Ratio {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Ratio {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        (u64::from(self.numerator) * u64::from(other.denominator))
            .cmp(&(u64::from(other.numerator) * u64::from(self.denominator)))
    }
}

impl fmt::Display for Ratio {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.numerator, self.denominator)
    }
}

/// Per-premise probability-of-sufficiency estimate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PremisePS {
    pub premise_index: usize,
    pub units: Vec<Unit>,
    pub ps_score: Ratio,
    pub verdict: Label,
}

impl PremisePS {
    /// Aggregates units by majority vote. A tie on even `n` is insufficient.
    pub fn from_units(premise_index: usize, mut units: Vec<Unit>) -> Self {
        units.sort_by_key(|u| u.index);
        let n = units.len() as u32;
        let supports = units.iter().filter(|u| u.nli_outcome == NliOutcome::Supports).count() as u32;
        let verdict = if supports > n - supports { Label::Sufficient } else { Label::Insufficient };
        PremisePS { premise_index, units, ps_score: Ratio::new(supports, n.max(1)), verdict }
    }
}

/// Argument-level verdict with the full per-premise breakdown.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SufficiencyVerdict {
    pub argument_id: String,
    pub claim_split: ClaimSplit,
    pub negated: NegatedClaims,
    pub per_premise: Vec<PremisePS>,
    pub overall: Label,
    pub overall_ps: Ratio,
    pub config_fingerprint: String,
}

impl SufficiencyVerdict {
    pub fn aggregate(
        argument_id: String,
        claim_split: ClaimSplit,
        negated: NegatedClaims,
        mut per_premise: Vec<PremisePS>,
        config: &PipelineConfig,
    ) -> Self {
        per_premise.sort_by_key(|p| p.premise_index);
        let (overall, overall_ps) = match config.aggregation {
            Aggregation::PerPremiseAnd => {
                let overall = if per_premise.iter().all(|p| p.verdict == Label::Sufficient) {
                    Label::Sufficient
                } else {
                    Label::Insufficient
                };
                let min = per_premise.iter().map(|p| p.ps_score).min().unwrap_or(Ratio::new(0, 1));
                (overall, min)
            }
            Aggregation::PooledVote => {
                let supports: u32 = per_premise.iter().map(|p| p.ps_score.numerator).sum();
                let total: u32 = per_premise.iter().map(|p| p.ps_score.denominator).sum();
                let overall =
                    if supports > total - supports { Label::Sufficient } else { Label::Insufficient };
                (overall, Ratio::new(supports, total.max(1)))
            }
        };
        SufficiencyVerdict {
            argument_id,
            claim_split,
            negated,
            per_premise,
            overall,
            overall_ps,
            config_fingerprint: fingerprint(config),
        }
    }
}

/// Pipeline variant: the full estimator or one of its ablations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Full,
    NoIntervention,
    NoCondX0,
    NoCondY0,
    ConcatIntervention,
}

impl Variant {
    pub const ALL: [Variant; 5] = [
        Variant::Full,
        Variant::NoIntervention,
        Variant::NoCondX0,
        Variant::NoCondY0,
        Variant::ConcatIntervention,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Variant::Full => "full",
            Variant::NoIntervention => "no_intervention",
            Variant::NoCondX0 => "no_cond_x0",
            Variant::NoCondY0 => "no_cond_y0",
            Variant::ConcatIntervention => "concat_intervention",
        }
    }
}

impl std::str::FromStr for Variant {
    type Err = CasaError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Variant::ALL
            .into_iter()
            .find(|v| v.as_str() == s)
            .ok_or_else(|| CasaError::InvalidInput(format!("unknown variant {s:?}")))
    }
}

/// Prompt envelope expected by the instruction-tuned model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelFamily {
    #[default]
    Generic,
    TuluWrap,
    Llama2Wrap,
}

impl std::str::FromStr for ModelFamily {
    type Err = CasaError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "generic" => Ok(ModelFamily::Generic),
            "tulu_wrap" => Ok(ModelFamily::TuluWrap),
            "llama2_wrap" => Ok(ModelFamily::Llama2Wrap),
            _ => Err(CasaError::InvalidInput(format!("unknown model family {s:?}"))),
        }
    }
}

/// How a neutral NLI prediction enters the vote.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UndecidedPolicy {
    /// Neutral stays `undecided` and counts against sufficiency.
    #[default]
    NonSupport,
    /// Neutral is recorded as `supports`.
    Support,
}

/// Argument-level aggregation over premises.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Aggregation {
    /// Sufficient iff every premise is sufficient; overall PS is the minimum.
    #[default]
    PerPremiseAnd,
    /// One majority vote over all units of all premises.
    PooledVote,
}

/// Whether the n contexts come from one completion or n separate ones.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplingMode {
    #[default]
    SingleRun,
    PerSample,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub n: usize,
    pub variant: Variant,
    pub model_family: ModelFamily,
    /// Temperature for context sampling. Extraction, revision and classification run at 0.
    pub sampling_temperature: f64,
    pub seed: u64,
    pub max_retries: u32,
    pub max_concurrency: usize,
    pub nli_undecided_policy: UndecidedPolicy,
    pub aggregation: Aggregation,
    pub sampling_mode: SamplingMode,
    /// Ask the LLM to negate claims the rule engine cannot handle.
    pub llm_negation_fallback: bool,
    pub max_tokens: u32,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            n: 3,
            variant: Variant::Full,
            model_family: ModelFamily::Generic,
            sampling_temperature: 0.7,
            seed: 0,
            max_retries: 2,
            max_concurrency: 4,
            nli_undecided_policy: UndecidedPolicy::NonSupport,
            aggregation: Aggregation::PerPremiseAnd,
            sampling_mode: SamplingMode::SingleRun,
            llm_negation_fallback: true,
            max_tokens: 512,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<(), CasaError> {
        if self.n == 0 {
            return Err(CasaError::InvalidInput("n must be at least 1".into()));
        }
        if self.max_concurrency == 0 {
            return Err(CasaError::InvalidInput("max_concurrency must be at least 1".into()));
        }
        if self.sampling_temperature.is_nan() || self.sampling_temperature < 0.0 {
            return Err(CasaError::InvalidInput("sampling_temperature must be >= 0".into()));
        }
        if self.max_tokens == 0 {
            return Err(CasaError::InvalidInput("max_tokens must be positive".into()));
        }
        Ok(())
    }
}

/// Stable hash of a configuration.
///
/// Hashes the canonical JSON form (object keys sorted), so field order in the
/// struct or in a config file does not matter.
pub fn fingerprint(config: &PipelineConfig) -> String {
    let canonical = canonical_json(&serde_json::to_value(config).expect("config serializes"));
    hex::encode(Sha256::digest(canonical.as_bytes()))
}

/// Serializes a JSON value with object keys in sorted order.
pub fn canonical_json(value: &serde_json::Value) -> String {
    fn sorted(value: &serde_json::Value) -> serde_json::Value {
        match value {
            serde_json::Value::Object(map) => {
                let ordered: BTreeMap<&String, serde_json::Value> =
                    map.iter().map(|(k, v)| (k, sorted(v))).collect();
                serde_json::to_value(ordered).expect("string keys")
            }
            serde_json::Value::Array(items) => serde_json::Value::Array(items.iter().map(sorted).collect()),
            other => other.clone(),
        }
    }
    sorted(value).to_string()
}

/// Objection situation: a refuting revised situation with the premise removed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObjectionSituation {
    pub source_unit_index: usize,
    pub text: String,
    pub removed_sentences: Vec<String>,
}
