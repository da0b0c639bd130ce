use std::collections::HashMap;
use std::path::Path;
use std::sync::OnceLock;

use regex::Regex;

use crate::error::{CasaError, Result};

const DEFAULT_TABLE: &str = include_str!("../../rules/negation.tsv");

/// Prefix used when no auxiliary is found and the prefix fallback is enabled.
pub const FALLBACK_PREFIX: &str = "It is not the case that ";

/// Subjects whose `'s` clitic is read as "is" rather than a possessive.
const S_CLITIC_HOSTS: &[&str] = &[
    "he", "she", "it", "that", "there", "what", "who", "here", "this", "where", "everyone", "nobody", "someone",
    "everything", "nothing", "something",
];

/// Tokens after which `do`/`does`/`did`/`have`/`has`/`had` act as main verbs.
const MAIN_VERB_OBJECTS: &[&str] = &[
    "a", "an", "the", "my", "your", "his", "her", "its", "our", "their", "this", "that", "these", "those", "some",
    "any", "no", "it", "them", "him", "me", "us", "what", "so", "much", "many", "nothing", "everything",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NegationFallback {
    /// Fail with `UnhandledSyntax` so the caller can use another negator.
    #[default]
    Error,
    /// Prefix the claim with "It is not the case that".
    Prefix,
}

/// Auxiliary table mapping positive forms to their negations and back.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NegationRuleSet {
    /// positive → negated forms; the first one is produced.
    positive: HashMap<String, Vec<String>>,
    /// negated form (single token, lowercase) → positive
    negated: HashMap<String, String>,
    pub fallback: NegationFallback,
}

impl Default for NegationRuleSet {
    fn default() -> Self {
        NegationRuleSet::from_tsv(DEFAULT_TABLE).expect("bundled negation table parses")
    }
}

impl NegationRuleSet {
    /// Parses `positive<TAB>negated` lines. Blank lines and `#` comments are skipped.
    pub fn from_tsv(text: &str) -> Result<Self> {
        let mut positive: HashMap<String, Vec<String>> = HashMap::new();
        let mut negated = HashMap::new();
        for (lineno, line) in text.lines().enumerate() {
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let cols: Vec<&str> = line.split('\t').map(str::trim).collect();
            let [pos, neg] = cols[..] else {
                return Err(CasaError::InvalidInput(format!(
                    "negation table line {}: expected two tab-separated columns",
                    lineno + 1
                )));
            };
            let (pos, neg) = (pos.to_lowercase(), neg.to_lowercase());
            if pos.is_empty() || neg.is_empty() || pos.contains(' ') {
                return Err(CasaError::InvalidInput(format!("negation table line {}: bad entry", lineno + 1)));
            }
            if !neg.contains(' ') {
                negated.insert(neg.clone(), pos.clone());
            }
            positive.entry(pos).or_default().push(neg);
        }
        Ok(NegationRuleSet { positive, negated, fallback: NegationFallback::Error })
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Self::from_tsv(&std::fs::read_to_string(path)?)
    }

    pub fn with_fallback(mut self, fallback: NegationFallback) -> Self {
        self.fallback = fallback;
        self
    }

    fn negate_positive(&self, aux: &str) -> Option<&str> {
        self.positive.get(aux).and_then(|v| v.first()).map(String::as_str)
    }
}

#[derive(Debug, Clone, Copy)]
struct Token<'a> {
    start: usize,
    end: usize,
    text: &'a str,
}

fn tokens(text: &str) -> Vec<Token<'_>> {
    static WORD: OnceLock<Regex> = OnceLock::new();
    let re = WORD.get_or_init(|| Regex::new(r"[A-Za-z]+(?:['’][A-Za-z]+)*").unwrap());
    re.find_iter(text).map(|m| Token { start: m.start(), end: m.end(), text: m.as_str() }).collect()
}

/// Copies the capitalization pattern of `model` onto `word`.
fn match_case(model: &str, word: &str) -> String {
    let letters: Vec<char> = model.chars().filter(|c| c.is_alphabetic()).collect();
    if letters.len() > 1 && letters.iter().all(|c| c.is_uppercase()) {
        return word.to_uppercase();
    }
    if model.chars().next().is_some_and(char::is_uppercase) {
        let mut cs = word.chars();
        return match cs.next() {
            Some(f) => f.to_uppercase().chain(cs).collect(),
            None => String::new(),
        };
    }
    word.to_string()
}

fn split_clitic(word: &str) -> Option<(&str, &str)> {
    let idx = word.rfind(['\'', '’'])?;
    let apostrophe_len = word[idx..].chars().next().map_or(1, char::len_utf8);
    Some((&word[..idx], &word[idx + apostrophe_len..]))
}

/// Replacement of `start..end` in the claim.
struct Edit {
    start: usize,
    end: usize,
    with: String,
}

/// Flips the polarity of the main clause by editing its first auxiliary.
///
/// Only the auxiliary (or the adjacent `not`) changes; capitalization and
/// punctuation are preserved.
pub fn negate(claim: &str, rules: &NegationRuleSet) -> Result<String> {
    if claim.trim().is_empty() {
        return Err(CasaError::EmptyInput);
    }
    if let Some(rest) = strip_fallback_prefix(claim) {
        return Ok(rest);
    }
    let toks = tokens(claim);
    for (i, tok) in toks.iter().enumerate() {
        if let Some(Edit { start, end, with }) = edit_for(claim, &toks, i, tok, rules) {
            let mut out = String::with_capacity(claim.len() + 4);
            out.push_str(&claim[..start]);
            out.push_str(&with);
            out.push_str(&claim[end..]);
            return Ok(out);
        }
    }
    match rules.fallback {
        NegationFallback::Error => Err(CasaError::UnhandledSyntax(claim.to_string())),
        NegationFallback::Prefix => {
            let trimmed = claim.trim_start();
            let mut cs = trimmed.chars();
            let lowered: String = match cs.next() {
                Some(f) if !starts_with_acronym_or_i(trimmed) => f.to_lowercase().chain(cs).collect(),
                _ => trimmed.to_string(),
            };
            Ok(format!("{FALLBACK_PREFIX}{lowered}"))
        }
    }
}

fn starts_with_acronym_or_i(s: &str) -> bool {
    let first: String = s.chars().take_while(|c| c.is_alphabetic()).collect();
    first == "I" || (first.chars().count() > 1 && first.chars().all(char::is_uppercase))
}

fn strip_fallback_prefix(claim: &str) -> Option<String> {
    let trimmed = claim.trim_start();
    let head = trimmed.get(..FALLBACK_PREFIX.len())?;
    if !head.eq_ignore_ascii_case(FALLBACK_PREFIX) {
        return None;
    }
    let rest = &trimmed[FALLBACK_PREFIX.len()..];
    let mut cs = rest.chars();
    let f = cs.next()?;
    Some(f.to_uppercase().chain(cs).collect())
}

fn edit_for(claim: &str, toks: &[Token<'_>], i: usize, tok: &Token<'_>, rules: &NegationRuleSet) -> Option<Edit> {
    let lower = tok.text.to_lowercase().replace('’', "'");
    let next = toks.get(i + 1);
    let next_is_not = next.is_some_and(|n| n.text.eq_ignore_ascii_case("not") && claim[tok.end..n.start].trim().is_empty());

    // Negated single-token forms: isn't → is, cannot → can.
    if let Some(pos) = rules.negated.get(&lower) {
        return Some(Edit { start: tok.start, end: tok.end, with: match_case(tok.text, pos) });
    }

    // Positive auxiliary, possibly followed by "not".
    if rules.positive.contains_key(&lower) && acts_as_auxiliary(&lower, next) {
        if next_is_not {
            let n = next.unwrap();
            return Some(Edit { start: tok.start, end: n.end, with: tok.text.to_string() });
        }
        let neg = rules.negate_positive(&lower)?;
        return Some(Edit { start: tok.start, end: tok.end, with: match_case(tok.text, neg) });
    }

    // Subject clitics: He's, I'm, they're, we'll, you've.
    let (host, clitic) = split_clitic(tok.text)?;
    let host_lower = host.to_lowercase();
    let aux = match clitic.to_lowercase().as_str() {
        "s" if S_CLITIC_HOSTS.contains(&host_lower.as_str()) => "is",
        "m" if host_lower == "i" => "am",
        "re" => "are",
        "ll" => "will",
        "ve" => "have",
        "d" => "would",
        _ => return None,
    };
    if next_is_not {
        let n = next.unwrap();
        return Some(Edit { start: tok.start, end: n.end, with: tok.text.to_string() });
    }
    let neg = rules.negate_positive(aux)?;
    let with = if neg.starts_with(aux) && neg.contains(' ') {
        // "am not": keep the clitic and add the particle
        format!("{} {}", tok.text, neg[aux.len()..].trim_start())
    } else {
        format!("{host} {neg}")
    };
    Some(Edit { start: tok.start, end: tok.end, with })
}

fn acts_as_auxiliary(aux: &str, next: Option<&Token<'_>>) -> bool {
    match aux {
        "do" | "does" | "did" | "have" | "has" | "had" | "need" => match next {
            Some(n) => !MAIN_VERB_OBJECTS.contains(&n.text.to_lowercase().as_str()),
            None => false,
        },
        _ => true,
    }
}

/// Expands contractions so that polarity-equivalent strings compare equal:
/// "isn't" → "is not", "He's" → "He is", "can't"/"cannot" → "can not".
pub fn normalize_contractions(text: &str) -> String {
    static SPECIAL: OnceLock<Vec<(Regex, &'static str)>> = OnceLock::new();
    let special = SPECIAL.get_or_init(|| {
        [
            (r"(?i)\b(c)an['’]t\b", "${1}an not"),
            (r"(?i)\b(c)annot\b", "${1}an not"),
            (r"(?i)\b(w)on['’]t\b", "${1}ill not"),
            (r"(?i)\b(s)han['’]t\b", "${1}hall not"),
            (r"(?i)\b(a)in['’]t\b", "${1}m not"),
            (r"(?i)\b([a-z]+)n['’]t\b", "$1 not"),
            (r"(?i)\b(i)['’]m\b", "$1 am"),
            (r"(?i)\b([a-z]+)['’]re\b", "$1 are"),
            (r"(?i)\b([a-z]+)['’]ll\b", "$1 will"),
            (r"(?i)\b([a-z]+)['’]ve\b", "$1 have"),
            (r"(?i)\b([a-z]+)['’]d\b", "$1 would"),
        ]
        .into_iter()
        .map(|(p, r)| (Regex::new(p).unwrap(), r))
        .collect()
    });
    static S_CLITIC: OnceLock<Regex> = OnceLock::new();
    let s_clitic = S_CLITIC.get_or_init(|| Regex::new(r"\b([A-Za-z]+)['’]s\b").unwrap());

    let mut out = text.to_string();
    for (re, rep) in special {
        out = re.replace_all(&out, *rep).into_owned();
    }
    s_clitic
        .replace_all(&out, |caps: &regex::Captures<'_>| {
            let host = &caps[1];
            if S_CLITIC_HOSTS.contains(&host.to_lowercase().as_str()) {
                format!("{host} is")
            } else {
                caps[0].to_string()
            }
        })
        .into_owned()
}
