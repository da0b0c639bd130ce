use std::collections::BTreeSet;
use std::ops::Range;
use std::path::Path;

use crate::error::{CasaError, Result};

const DEFAULT_MARKERS: &str = include_str!("../../rules/segmentation.tsv");

/// Abbreviations whose trailing period never ends a clause.
pub(crate) const ABBREVIATIONS: &[&str] = &[
    "mr", "mrs", "ms", "dr", "prof", "sr", "jr", "st", "vs", "etc", "e.g", "i.e", "u.s", "no", "fig", "approx",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MarkerPosition {
    /// Split wherever the connective occurs as a whole word.
    Anywhere,
    /// Split only where the connective follows a comma.
    AfterComma,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConjunctionMarker {
    pub word: String,
    pub position: MarkerPosition,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SegmentationRules {
    pub clause_terminators: BTreeSet<char>,
    pub conjunction_markers: Vec<ConjunctionMarker>,
    pub min_claim_chars: usize,
}

impl Default for SegmentationRules {
    fn default() -> Self {
        SegmentationRules {
            clause_terminators: ['.', ';', '!', '?'].into_iter().collect(),
            conjunction_markers: parse_markers(DEFAULT_MARKERS).expect("bundled marker table parses"),
            min_claim_chars: 3,
        }
    }
}

impl SegmentationRules {
    /// Replaces the connective table with one read from a tab-separated file.
    pub fn with_marker_file(mut self, path: &Path) -> Result<Self> {
        self.conjunction_markers = parse_markers(&std::fs::read_to_string(path)?)?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if self.clause_terminators.is_empty() {
            return Err(CasaError::InvalidInput("terminator set is empty".into()));
        }
        if let Some(m) = self.conjunction_markers.iter().find(|m| m.word != m.word.to_lowercase()) {
            return Err(CasaError::InvalidInput(format!("marker {:?} is not lowercase", m.word)));
        }
        Ok(())
    }

    fn marker(&self, word: &str) -> Option<&ConjunctionMarker> {
        self.conjunction_markers.iter().find(|m| m.word.eq_ignore_ascii_case(word))
    }
}

fn parse_markers(text: &str) -> Result<Vec<ConjunctionMarker>> {
    let mut out = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim_end();
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let mut cols = line.split('\t');
        let word = cols.next().unwrap_or_default().trim().to_string();
        let position = match cols.next().map(str::trim) {
            None | Some("anywhere") => MarkerPosition::Anywhere,
            Some("after_comma") => MarkerPosition::AfterComma,
            Some(other) => {
                return Err(CasaError::InvalidInput(format!(
                    "marker table line {}: unknown position {other:?}",
                    lineno + 1
                )))
            }
        };
        if word.is_empty() {
            return Err(CasaError::InvalidInput(format!("marker table line {}: empty marker", lineno + 1)));
        }
        out.push(ConjunctionMarker { word: word.to_lowercase(), position });
    }
    Ok(out)
}

/// A word with its byte span.
#[derive(Debug, Clone, Copy)]
struct Word {
    start: usize,
    end: usize,
}

fn words(text: &str, range: Range<usize>) -> Vec<Word> {
    let mut out = Vec::new();
    let mut start = None;
    for (i, c) in text[range.clone()].char_indices() {
        let i = i + range.start;
        if c.is_alphanumeric() || c == '\'' || c == '’' {
            start.get_or_insert(i);
        } else if let Some(s) = start.take() {
            out.push(Word { start: s, end: i });
        }
    }
    if let Some(s) = start {
        out.push(Word { start: s, end: range.end });
    }
    out
}

fn trim_span(text: &str, range: Range<usize>) -> Range<usize> {
    let slice = &text[range.clone()];
    let lead = slice.len() - slice.trim_start().len();
    let trail = slice.len() - slice.trim_end().len();
    if lead == slice.len() {
        return range.start..range.start;
    }
    range.start + lead..range.end - trail
}

pub(crate) fn is_abbreviation(text: &str, dot: usize) -> bool {
    let before = &text[..dot];
    let word_start = before
        .rfind(|c: char| !(c.is_alphanumeric() || c == '.'))
        .map(|i| i + before[i..].chars().next().map_or(1, char::len_utf8))
        .unwrap_or(0);
    let word = before[word_start..].to_lowercase();
    ABBREVIATIONS.contains(&word.as_str())
}

/// First pass: split after runs of clause terminators that are followed by
/// whitespace or the end of the text. Sentence-final `.`, `!` and `?` stay in
/// the claim; other terminators (`;`) are dropped as separators.
fn terminator_pass(text: &str, rules: &SegmentationRules) -> Vec<Range<usize>> {
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    let mut out = Vec::new();
    let mut seg_start = 0;
    let mut i = 0;
    while i < chars.len() {
        let (pos, c) = chars[i];
        if !rules.clause_terminators.contains(&c) {
            i += 1;
            continue;
        }
        let mut j = i;
        while j + 1 < chars.len() && rules.clause_terminators.contains(&chars[j + 1].1) {
            j += 1;
        }
        let run_end = chars[j].0 + chars[j].1.len_utf8();
        let at_boundary = j + 1 >= chars.len() || chars[j + 1].1.is_whitespace();
        if at_boundary && !(c == '.' && i == j && is_abbreviation(text, pos)) {
            let keep_end = text[pos..run_end]
                .char_indices()
                .take_while(|(_, ch)| matches!(ch, '.' | '!' | '?'))
                .last()
                .map(|(k, ch)| pos + k + ch.len_utf8())
                .unwrap_or(pos);
            let span = trim_span(text, seg_start..keep_end);
            if !span.is_empty() {
                out.push(span);
            }
            seg_start = run_end;
        }
        i = j + 1;
    }
    let tail = trim_span(text, seg_start..text.len());
    if !tail.is_empty() {
        out.push(tail);
    }
    out
}

/// Drops a leading connective ("So", "And", "Therefore,") from a span.
fn strip_leading_connective(text: &str, span: Range<usize>, rules: &SegmentationRules) -> Range<usize> {
    let ws = words(text, span.clone());
    let Some(first) = ws.first() else { return span };
    if first.start != span.start || rules.marker(&text[first.start..first.end]).is_none() {
        return span;
    }
    let mut rest = first.end;
    let tail = &text[rest..span.end];
    let skip = tail.len() - tail.trim_start_matches(|c: char| c == ',' || c.is_whitespace()).len();
    rest += skip;
    if rest >= span.end {
        return span;
    }
    rest..span.end
}

/// Positions inside `span` where the text splits on a connective.
/// Returns (left end, right start) pairs.
fn split_points(text: &str, span: Range<usize>, rules: &SegmentationRules) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for w in words(text, span.clone()) {
        if w.start == span.start {
            continue;
        }
        let Some(marker) = rules.marker(&text[w.start..w.end]) else { continue };
        let before = &text[span.start..w.start];
        let trimmed = before.trim_end();
        if trimmed.len() == before.len() {
            // not preceded by whitespace: part of a larger token
            continue;
        }
        let after_comma = trimmed.ends_with(',');
        if marker.position == MarkerPosition::AfterComma && !after_comma {
            continue;
        }
        let left_end = span.start + trimmed.trim_end_matches(',').trim_end().len();
        let tail = &text[w.end..span.end];
        let right_start = w.end + (tail.len() - tail.trim_start_matches(|c: char| c == ',' || c.is_whitespace()).len());
        if left_end > span.start && right_start < span.end {
            out.push((left_end, right_start));
        }
    }
    out
}

fn strip_terminal_punct(text: &str, span: Range<usize>) -> Range<usize> {
    let slice = &text[span.clone()];
    let stripped = slice.trim_end_matches(['.', '!', '?', ';']).trim_end();
    if stripped.is_empty() {
        return span;
    }
    span.start..span.start + stripped.len()
}

/// Splits an argument into claims and returns their byte spans in `text`.
///
/// Terminators are tried first. The connective pass runs when that leaves a
/// single claim, or when some clause carries an internal connective; claims
/// coming out of the connective pass lose their final punctuation. Claims
/// shorter than `min_claim_chars` are folded into a neighbour.
pub fn segment_spans(text: &str, rules: &SegmentationRules) -> Result<Vec<Range<usize>>> {
    if text.trim().is_empty() {
        return Err(CasaError::EmptyInput);
    }
    let clauses: Vec<Range<usize>> =
        terminator_pass(text, rules).into_iter().map(|s| strip_leading_connective(text, s, rules)).collect();

    let points: Vec<Vec<(usize, usize)>> = clauses.iter().map(|c| split_points(text, c.clone(), rules)).collect();
    let any_points = points.iter().any(|p| !p.is_empty());

    let mut claims = if any_points {
        let mut pieces = Vec::new();
        for (clause, pts) in clauses.iter().zip(&points) {
            let mut start = clause.start;
            for &(left_end, right_start) in pts {
                if left_end > start {
                    pieces.push(start..left_end);
                }
                start = right_start.max(start);
            }
            pieces.push(start..clause.end);
        }
        pieces
            .into_iter()
            .map(|p| strip_leading_connective(text, p, rules))
            .map(|p| strip_terminal_punct(text, p))
            .filter(|p| !p.is_empty())
            .collect()
    } else {
        clauses
    };

    merge_short(text, &mut claims, rules.min_claim_chars);
    if claims.is_empty() {
        return Err(CasaError::EmptyInput);
    }
    Ok(claims)
}

fn merge_short(text: &str, claims: &mut Vec<Range<usize>>, min_chars: usize) {
    let short = |r: &Range<usize>| text[r.clone()].chars().filter(|c| !c.is_whitespace()).count() < min_chars;
    let mut i = 0;
    while claims.len() > 1 && i < claims.len() {
        if short(&claims[i]) {
            if i == 0 {
                let next = claims.remove(1);
                claims[0] = claims[0].start..next.end;
            } else {
                let cur = claims.remove(i);
                claims[i - 1] = claims[i - 1].start..cur.end;
                i -= 1;
            }
            continue;
        }
        i += 1;
    }
}

/// Splits an argument into claim strings.
pub fn segment_argument(text: &str, rules: &SegmentationRules) -> Result<Vec<String>> {
    Ok(segment_spans(text, rules)?.into_iter().map(|r| text[r].to_string()).collect())
}

/// True if `gap` consists only of separator material: whitespace, terminators,
/// commas and connective words.
pub fn is_separator_text(gap: &str, rules: &SegmentationRules) -> bool {
    gap.split(|c: char| c.is_whitespace() || c == ',' || rules.clause_terminators.contains(&c))
        .filter(|w| !w.is_empty())
        .all(|w| rules.marker(w).is_some())
}
