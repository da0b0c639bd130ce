//! Labelled argument datasets in a shared JSON schema, plus converters from
//! the upstream release formats.
//!
//! One record per argument:
//! `{"id": "...", "text": "...", "label": "correct" | "fallacious", "split": "...", "kind": "informal" | "formal"}`.
//! `split` and `kind` are optional. Files hold either a JSON array of records
//! or one record per line.

use std::collections::HashSet;
use std::fs;
use std::path::Path;
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{CasaError, Result};
use crate::textproc::split_sentences;
use crate::types::{Argument, Label};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetRecord {
    pub id: String,
    pub text: String,
    pub label: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kind: Option<String>,
}

impl DatasetRecord {
    pub fn gold(&self) -> Option<Label> {
        match self.label.trim().to_ascii_lowercase().as_str() {
            "correct" | "sufficient" => Some(Label::Sufficient),
            "fallacious" | "insufficient" => Some(Label::Insufficient),
            _ => None,
        }
    }

    pub fn is_formal(&self) -> bool {
        self.kind.as_deref().is_some_and(|k| k.eq_ignore_ascii_case("formal"))
    }
}

/// Arguments that all carry a gold label and have unique ids.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dataset {
    pub name: String,
    pub items: Vec<Argument>,
}

impl Dataset {
    pub fn new(name: impl Into<String>, items: Vec<Argument>) -> Result<Self> {
        let mut seen = HashSet::new();
        for (index, item) in items.iter().enumerate() {
            if item.gold_label.is_none() {
                return Err(CasaError::SchemaError { index, reason: format!("item {:?} has no label", item.id) });
            }
            if !seen.insert(item.id.as_str()) {
                return Err(CasaError::SchemaError { index, reason: format!("duplicate id {:?}", item.id) });
            }
        }
        Ok(Dataset { name: name.into(), items })
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn golds(&self) -> Vec<Label> {
        self.items.iter().filter_map(|a| a.gold_label).collect()
    }

    pub fn count(&self, label: Label) -> usize {
        self.items.iter().filter(|a| a.gold_label == Some(label)).count()
    }
}

/// Parses records from a JSON array or from JSON lines.
pub fn parse_records(content: &str) -> Result<Vec<DatasetRecord>> {
    let values: Vec<Value> = if content.trim_start().starts_with('[') {
        serde_json::from_str(content).map_err(|e| CasaError::SchemaError { index: 0, reason: e.to_string() })?
    } else {
        content
            .lines()
            .filter(|l| !l.trim().is_empty())
            .enumerate()
            .map(|(index, line)| {
                serde_json::from_str(line).map_err(|e| CasaError::SchemaError { index, reason: e.to_string() })
            })
            .collect::<Result<_>>()?
    };
    if values.is_empty() {
        return Err(CasaError::SchemaError { index: 0, reason: "no records".into() });
    }
    let mut records = Vec::with_capacity(values.len());
    for (index, value) in values.into_iter().enumerate() {
        let record: DatasetRecord =
            serde_json::from_value(value).map_err(|e| CasaError::SchemaError { index, reason: e.to_string() })?;
        if record.text.trim().is_empty() {
            return Err(CasaError::SchemaError { index, reason: "empty text".into() });
        }
        if record.gold().is_none() {
            return Err(CasaError::SchemaError { index, reason: format!("unknown label {:?}", record.label) });
        }
        records.push(record);
    }
    Ok(records)
}

pub fn read_records(path: &Path) -> Result<Vec<DatasetRecord>> {
    parse_records(&fs::read_to_string(path)?)
}

/// Writes records one per line.
pub fn write_records(path: &Path, records: &[DatasetRecord]) -> Result<()> {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r)?);
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

fn to_dataset(name: &str, records: Vec<DatasetRecord>, keep: impl Fn(&DatasetRecord) -> bool) -> Result<Dataset> {
    let items = records
        .into_iter()
        .filter(|r| keep(r))
        .map(|r| {
            let gold = r.gold().expect("labels checked on parse");
            Argument { id: r.id, text: r.text, gold_label: Some(gold) }
        })
        .collect();
    Dataset::new(name, items)
}

/// Any schema file, unfiltered.
pub fn load_dataset(path: &Path, name: &str) -> Result<Dataset> {
    to_dataset(name, read_records(path)?, |_| true)
}

/// Informal portion only: records marked `"kind": "formal"` are dropped.
pub fn load_bigbench_lfd(path: &Path) -> Result<Dataset> {
    to_dataset("bigbench", read_records(path)?, |r| !r.is_formal())
}

/// Multi-sentence instances only.
pub fn load_climate(path: &Path) -> Result<Dataset> {
    to_dataset("climate", read_records(path)?, |r| split_sentences(&r.text).len() >= 2)
}

static STATEMENT_PREFIX: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)^\s*(?:statement|argument)\s*:\s*").expect("valid regex"));
static SCHEMATIC_VARIABLE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"\b[B-HJ-Z]\b|\b(?:is|are) (?:a|an|not a|not an)? ?[A-Z]\b").expect("valid regex"));
static CONDITIONAL_FORM: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"(?i)^\s*(?:if\b[^.]*\bthen\b|all\s+\w+\s+are\b|no\s+\w+\s+are\b|some\s+\w+\s+are\b)")
        .expect("valid regex")
});

/// Heuristic for formal-logic items: schematic letters or a bare
/// syllogistic/conditional opening.
pub fn looks_formal(text: &str) -> bool {
    SCHEMATIC_VARIABLE.is_match(text) || CONDITIONAL_FORM.is_match(text)
}

/// Converts a BIG-bench task file (`{"examples": [{"input", "target_scores"}]}`)
/// into schema records. The answer with the highest target score decides the
/// label. An explicit `kind` field on an example wins over [`looks_formal`].
pub fn convert_bigbench(task_json: &str) -> Result<Vec<DatasetRecord>> {
    let task: Value = serde_json::from_str(task_json)?;
    let examples = task
        .get("examples")
        .and_then(Value::as_array)
        .ok_or_else(|| CasaError::SchemaError { index: 0, reason: "missing \"examples\" array".into() })?;
    let mut records = Vec::with_capacity(examples.len());
    for (index, ex) in examples.iter().enumerate() {
        let schema_err = |reason: &str| CasaError::SchemaError { index, reason: reason.into() };
        let input = ex.get("input").and_then(Value::as_str).ok_or_else(|| schema_err("missing input"))?;
        let scores = ex.get("target_scores").and_then(Value::as_object).ok_or_else(|| schema_err("missing target_scores"))?;
        let best = scores
            .iter()
            .filter_map(|(k, v)| v.as_f64().map(|s| (k, s)))
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .ok_or_else(|| schema_err("empty target_scores"))?
            .0
            .to_ascii_lowercase();
        let label = match best.as_str() {
            "valid" | "correct" => "correct",
            "invalid" | "fallacious" => "fallacious",
            other => return Err(schema_err(&format!("unknown answer {other:?}"))),
        };
        let text = STATEMENT_PREFIX.replace(input, "").trim().to_string();
        let kind = match ex.get("kind").and_then(Value::as_str) {
            Some(k) => k.to_ascii_lowercase(),
            None if looks_formal(&text) => "formal".into(),
            None => "informal".into(),
        };
        records.push(DatasetRecord {
            id: format!("bigbench-{index:04}"),
            text,
            label: label.into(),
            split: Some("test".into()),
            kind: Some(kind),
        });
    }
    Ok(records)
}

const TEXT_COLUMNS: [&str; 5] = ["text", "source_article", "argument", "sentence", "input"];
const LABEL_COLUMNS: [&str; 5] = ["label", "logical_fallacies", "fallacy", "class", "updated_label"];
const NO_FALLACY: [&str; 6] = ["no fallacy", "no_fallacy", "none", "correct", "valid", "no-fallacy"];

fn climate_label(raw: &str) -> &'static str {
    if NO_FALLACY.contains(&raw.trim().to_ascii_lowercase().as_str()) {
        "correct"
    } else {
        "fallacious"
    }
}

fn pick<'a>(names: &[&'a str], available: &[String]) -> Option<&'a str> {
    names.iter().copied().find(|n| available.iter().any(|a| a == n))
}

/// Converts the Climate release (CSV with a header row, or JSON lines) into
/// schema records. Every label other than a "no fallacy" marker counts as
/// fallacious.
pub fn convert_climate(content: &str, split: &str) -> Result<Vec<DatasetRecord>> {
    let rows: Vec<(String, String)> = if content.trim_start().starts_with('{') {
        content
            .lines()
            .filter(|l| !l.trim().is_empty())
            .enumerate()
            .map(|(index, line)| {
                let v: Value =
                    serde_json::from_str(line).map_err(|e| CasaError::SchemaError { index, reason: e.to_string() })?;
                let keys: Vec<String> = v.as_object().map(|o| o.keys().cloned().collect()).unwrap_or_default();
                let missing = || CasaError::SchemaError { index, reason: "no text or label field".into() };
                let t = pick(&TEXT_COLUMNS, &keys).ok_or_else(missing)?;
                let l = pick(&LABEL_COLUMNS, &keys).ok_or_else(missing)?;
                let field = |k: &str| v[k].as_str().map(str::to_string).unwrap_or_else(|| v[k].to_string());
                Ok((field(t), field(l)))
            })
            .collect::<Result<_>>()?
    } else {
        let mut reader = csv::Reader::from_reader(content.as_bytes());
        let headers: Vec<String> = reader
            .headers()
            .map_err(|e| CasaError::SchemaError { index: 0, reason: e.to_string() })?
            .iter()
            .map(|h| h.trim().to_string())
            .collect();
        let missing = || CasaError::SchemaError { index: 0, reason: format!("no text or label column in {headers:?}") };
        let t = pick(&TEXT_COLUMNS, &headers).ok_or_else(missing)?;
        let l = pick(&LABEL_COLUMNS, &headers).ok_or_else(missing)?;
        let ti = headers.iter().position(|h| h == t).expect("picked from headers");
        let li = headers.iter().position(|h| h == l).expect("picked from headers");
        reader
            .records()
            .enumerate()
            .map(|(index, row)| {
                let row = row.map_err(|e| CasaError::SchemaError { index, reason: e.to_string() })?;
                Ok((row.get(ti).unwrap_or("").to_string(), row.get(li).unwrap_or("").to_string()))
            })
            .collect::<Result<_>>()?
    };
    Ok(rows
        .into_iter()
        .enumerate()
        .filter(|(_, (text, _))| !text.trim().is_empty())
        .map(|(i, (text, label))| DatasetRecord {
            id: format!("climate-{split}-{i:04}"),
            text: text.trim().to_string(),
            label: climate_label(&label).into(),
            split: Some(split.into()),
            kind: None,
        })
        .collect())
}
