//! Applies an assessment method to a dataset and summarises the predictions.

use std::fmt;
use std::str::FromStr;
use std::sync::atomic::{AtomicBool, Ordering};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::dataset::Dataset;
use super::metrics::{accuracy, macro_f1, paired_permutation_test};
use crate::baselines::{direct_nli_classify, one_shot_classify, perplexity_classify, zero_shot_classify};
use crate::concurrency::par_map;
use crate::error::{CasaError, Result};
use crate::pipeline::Casa;
use crate::prompts::BaselinePrompt;
use crate::types::{fingerprint, Argument, Label};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Casa,
    ZeroShot(BaselinePrompt),
    OneShot(BaselinePrompt),
    Perplexity,
    DirectNli,
}

impl FromStr for Method {
    type Err = CasaError;

    /// Accepts `casa`, `zero_shot:K`, `one_shot:K` (K in 1..=4), `perplexity`
    /// and `direct_nli`.
    fn from_str(s: &str) -> Result<Self> {
        let unknown = || CasaError::UnknownMethod(s.to_string());
        let prompt = |k: &str| k.parse::<u8>().ok().and_then(|k| BaselinePrompt::new(k).ok()).ok_or_else(unknown);
        match s.split_once(':') {
            Some(("zero_shot", k)) => Ok(Method::ZeroShot(prompt(k)?)),
            Some(("one_shot", k)) => Ok(Method::OneShot(prompt(k)?)),
            Some(_) => Err(unknown()),
            None => match s {
                "casa" => Ok(Method::Casa),
                "perplexity" => Ok(Method::Perplexity),
                "direct_nli" => Ok(Method::DirectNli),
                _ => Err(unknown()),
            },
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Method::Casa => f.write_str("casa"),
            Method::ZeroShot(p) => write!(f, "zero_shot:{}", p.id()),
            Method::OneShot(p) => write!(f, "one_shot:{}", p.id()),
            Method::Perplexity => f.write_str("perplexity"),
            Method::DirectNli => f.write_str("direct_nli"),
        }
    }
}

/// Outcome for one dataset item. An item whose method raised an error is
/// scored with the opposite of its gold label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItemRecord {
    pub id: String,
    pub gold: Label,
    pub pred: Label,
    pub correct: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ps: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub method: String,
    pub dataset: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    pub config_fingerprint: String,
    pub total: usize,
    pub evaluated: usize,
    pub errors: usize,
    pub accuracy: f64,
    pub macro_f1: f64,
    /// Set when a backend failure stopped the run; the items then cover only
    /// the prefix of the dataset evaluated before the failure.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub interrupted: Option<String>,
    pub items: Vec<ItemRecord>,
}

impl Report {
    pub fn preds(&self) -> Vec<Label> {
        self.items.iter().map(|r| r.pred).collect()
    }

    pub fn golds(&self) -> Vec<Label> {
        self.items.iter().map(|r| r.gold).collect()
    }

    /// Pretty JSON with a trailing newline. Stable across runs.
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

/// Index of the labelled example shown to `one_shot` for item `i`. One
/// example is drawn per seed; the item itself is never its own example.
pub fn one_shot_example_index(len: usize, i: usize, seed: u64) -> Option<usize> {
    if len < 2 {
        return None;
    }
    let j = ChaCha8Rng::seed_from_u64(seed).random_range(0..len);
    Some(if j == i { (j + 1) % len } else { j })
}

fn predict(method: Method, casa: &Casa, dataset: &Dataset, i: usize, item: &Argument) -> Result<(Label, Option<String>)> {
    let cfg = casa.config();
    match method {
        Method::Casa => {
            let v = casa.assess_argument(item)?;
            Ok((v.overall, Some(v.overall_ps.to_string())))
        }
        Method::ZeroShot(p) => Ok((zero_shot_classify(casa.llm(), cfg.model_family, p, &item.text, cfg.max_retries)?, None)),
        Method::OneShot(p) => {
            let j = one_shot_example_index(dataset.len(), i, cfg.seed)
                .ok_or_else(|| CasaError::InvalidInput("one_shot needs at least two items".into()))?;
            let example = &dataset.items[j];
            Ok((one_shot_classify(casa.llm(), cfg.model_family, p, &item.text, example, cfg.max_retries)?, None))
        }
        Method::Perplexity => {
            let claims = casa.extract_claims(item)?;
            let negated = casa.negate_claims(&claims)?;
            Ok((perplexity_classify(casa.llm(), &claims, &negated)?, None))
        }
        Method::DirectNli => {
            let claims = casa.extract_claims(item)?;
            Ok((direct_nli_classify(casa.nli(), &claims)?, None))
        }
    }
}

/// Runs `method` over every item, up to `max_concurrency` at a time.
pub fn run_method(method: Method, dataset: &Dataset, casa: &Casa) -> Result<Report> {
    if dataset.is_empty() {
        return Err(CasaError::EmptyInput);
    }
    let abort = AtomicBool::new(false);
    let outcomes = par_map(dataset.items.iter().collect(), casa.config().max_concurrency, |i, item| {
        if abort.load(Ordering::SeqCst) {
            return None;
        }
        let out = predict(method, casa, dataset, i, item);
        if matches!(&out, Err(e) if e.is_backend()) {
            abort.store(true, Ordering::SeqCst);
        }
        Some(out)
    });

    let mut items = Vec::with_capacity(dataset.len());
    let mut interrupted = None;
    for (item, outcome) in dataset.items.iter().zip(outcomes) {
        let gold = item.gold_label.ok_or_else(|| CasaError::InvalidInput(format!("item {:?} has no label", item.id)))?;
        let (pred, ps, error) = match outcome {
            None => {
                interrupted.get_or_insert_with(|| "stopped after an earlier backend failure".to_string());
                break;
            }
            Some(Err(e)) if e.is_backend() => {
                interrupted = Some(format!("{}: {e}", item.id));
                break;
            }
            Some(Err(e)) => (gold.flip(), None, Some(e.to_string())),
            Some(Ok((pred, ps))) => (pred, ps, None),
        };
        items.push(ItemRecord { id: item.id.clone(), gold, pred, correct: pred == gold, ps, error });
    }
    Ok(summarise(method, dataset, casa, items, interrupted))
}

fn summarise(
    method: Method,
    dataset: &Dataset,
    casa: &Casa,
    items: Vec<ItemRecord>,
    interrupted: Option<String>,
) -> Report {
    let preds: Vec<Label> = items.iter().map(|r| r.pred).collect();
    let golds: Vec<Label> = items.iter().map(|r| r.gold).collect();
    Report {
        method: method.to_string(),
        dataset: dataset.name.clone(),
        n: (method == Method::Casa).then_some(casa.config().n),
        config_fingerprint: fingerprint(casa.config()),
        total: dataset.len(),
        evaluated: items.len(),
        errors: items.iter().filter(|r| r.error.is_some()).count(),
        accuracy: accuracy(&preds, &golds).unwrap_or(0.0),
        macro_f1: macro_f1(&preds, &golds).unwrap_or(0.0),
        interrupted,
        items,
    }
}

/// One CASA report per value of `n`, all other settings fixed. Stops at the
/// first interrupted run.
pub fn sweep_n(dataset: &Dataset, casa: &Casa, n_values: &[usize]) -> Result<Vec<Report>> {
    let mut reports = Vec::with_capacity(n_values.len());
    for &n in n_values {
        let mut config = casa.config().clone();
        config.n = n;
        let report = run_method(Method::Casa, dataset, &casa.with_config(config)?)?;
        let stop = report.interrupted.is_some();
        reports.push(report);
        if stop {
            break;
        }
    }
    Ok(reports)
}

/// `n,accuracy,macro_f1` with one row per report.
pub fn sweep_csv(reports: &[Report]) -> String {
    let mut out = String::from("n,accuracy,macro_f1\n");
    for r in reports {
        out.push_str(&format!("{},{:.6},{:.6}\n", r.n.unwrap_or(0), r.accuracy, r.macro_f1));
    }
    out
}

/// Paired permutation p-value between two reports over the same items.
pub fn compare_reports(a: &Report, b: &Report, resamples: usize, seed: u64) -> Result<f64> {
    if a.items.iter().map(|r| &r.id).ne(b.items.iter().map(|r| &r.id)) {
        return Err(CasaError::InvalidInput("reports cover different items".into()));
    }
    paired_permutation_test(&a.preds(), &b.preds(), &a.golds(), resamples, seed)
}
