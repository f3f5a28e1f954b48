//! Turning model completions back into character-offset annotations on the
//! original text.
//!
//! Parsing never trusts the model's echo blindly. In-line answers are
//! stripped of their tags and aligned with the original; spans that do not
//! land on an exact echo are relocated by searching for the mention, and
//! dropped with a warning when that fails too. Offsets are never guessed.

mod align;
mod json;
mod tags;

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::domain::{
    char_slice, AnnotatedDocument, Annotation, Delimiters, EntitySchema, MentionLocalization,
};

pub use align::{align_texts, AlignedRegion, AlignmentMap};
pub use json::{extract_json_object, find_occurrences};

use tags::{extract, TagSyntax, TaggedSpan};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WarningKind {
    /// A tag or JSON key naming no schema label.
    UnknownLabel,
    /// An opening tag never closed, or a closing tag never opened.
    UnmatchedTag,
    /// A mention that could not be found in the original text.
    UnlocatableMention,
    /// A mention relocated because its echo did not align exactly.
    LowQualityAlignment,
    /// A tag pair or JSON entry enclosing no text.
    EmptyMention,
    /// A JSON value that is not a string or list of strings.
    InvalidMention,
}

impl fmt::Display for WarningKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            WarningKind::UnknownLabel => "unknown label",
            WarningKind::UnmatchedTag => "unmatched tag",
            WarningKind::UnlocatableMention => "unlocatable mention",
            WarningKind::LowQualityAlignment => "low-quality alignment",
            WarningKind::EmptyMention => "empty mention",
            WarningKind::InvalidMention => "invalid mention",
        })
    }
}

/// A recoverable problem found while parsing; `fragment` is the offending
/// piece of the completion.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParseWarning {
    pub kind: WarningKind,
    pub fragment: String,
}

impl ParseWarning {
    pub fn new(kind: WarningKind, fragment: impl Into<String>) -> Self {
        Self {
            kind,
            fragment: fragment.into(),
        }
    }
}

impl fmt::Display for ParseWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {:?}", self.kind, self.fragment)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParseReport {
    /// Number of annotations recovered.
    pub recovered: usize,
    pub warnings: Vec<ParseWarning>,
}

impl ParseReport {
    pub fn merge(&mut self, other: ParseReport) {
        self.recovered += other.recovered;
        self.warnings.extend(other.warnings);
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("no balanced JSON object in the completion")]
    NoJsonObject,
    #[error("invalid JSON: {0}")]
    InvalidJson(String),
}

/// Picks the occurrence closest to `expected`, preferring ones not already
/// annotated with the same label.
fn closest_occurrence(
    occurrences: &[(usize, usize)],
    expected: usize,
    label: &str,
    taken: &BTreeSet<Annotation>,
) -> Option<(usize, usize)> {
    let free = |&&(s, e): &&(usize, usize)| !taken.contains(&Annotation::new(s, e, label));
    let by_distance = |&&(s, _): &&(usize, usize)| s.abs_diff(expected);
    occurrences
        .iter()
        .filter(free)
        .min_by_key(by_distance)
        .or_else(|| occurrences.iter().min_by_key(by_distance))
        .copied()
}

fn locate_span(
    span: &TaggedSpan,
    original: &str,
    map: Option<&AlignmentMap>,
    stripped_len: usize,
    original_len: usize,
    doc: &mut AnnotatedDocument,
    report: &mut ParseReport,
) {
    if let Some(map) = map {
        if let Some((s, e)) = map.map_span(span.start, span.end) {
            if char_slice(original, s, e) == Some(span.mention.as_str()) {
                doc.insert(Annotation::new(s, e, span.label.clone()));
                return;
            }
        }
    }
    let expected = map
        .and_then(|m| m.map_offset(span.start))
        .unwrap_or_else(|| span.start * original_len / stripped_len.max(1));
    let mut occurrences = find_occurrences(original, &span.mention);
    if occurrences.is_empty() {
        let trimmed = span.mention.trim();
        if trimmed != span.mention {
            occurrences = find_occurrences(original, trimmed);
        }
    }
    match closest_occurrence(&occurrences, expected, &span.label, &doc.annotations) {
        Some((s, e)) => {
            doc.insert(Annotation::new(s, e, span.label.clone()));
            report.warnings.push(ParseWarning::new(
                WarningKind::LowQualityAlignment,
                span.mention.clone(),
            ));
        }
        None => report.warnings.push(ParseWarning::new(
            WarningKind::UnlocatableMention,
            span.mention.clone(),
        )),
    }
}

/// Parses an in-line tagged completion against the original text.
///
/// With `delimiters`, the custom pair marks mentions of the single bound
/// label; otherwise `<label>…</label>` tags of the schema are recognized.
/// Degraded input yields fewer annotations and more warnings, never an error.
pub fn parse_inline(
    completion: &str,
    original: &str,
    schema: &EntitySchema,
    delimiters: Option<(&Delimiters, &str)>,
) -> (AnnotatedDocument, ParseReport) {
    let syntax = match delimiters {
        Some((d, label)) => TagSyntax::Custom {
            open: &d.open,
            close: &d.close,
            label,
        },
        None => TagSyntax::Labels(schema),
    };
    let extraction = extract(completion, &syntax, original);
    let mut report = ParseReport {
        recovered: 0,
        warnings: extraction.warnings,
    };
    let mut doc = AnnotatedDocument::new(original);

    let identical = extraction.stripped == original;
    let map = (!identical).then(|| align_texts(&extraction.stripped, original));
    let stripped_len = extraction.stripped.chars().count();
    let original_len = doc.char_len();
    for span in &extraction.spans {
        if identical {
            doc.insert(Annotation::new(span.start, span.end, span.label.clone()));
        } else {
            locate_span(
                span,
                original,
                map.as_ref(),
                stripped_len,
                original_len,
                &mut doc,
                &mut report,
            );
        }
    }
    report.recovered = doc.annotations.len();
    (doc, report)
}

/// Resolves a JSON key against the schema: exact, then unique ASCII
/// case-insensitive match.
fn resolve_key<'a>(schema: &'a EntitySchema, key: &str) -> Option<&'a str> {
    if let Some(l) = schema.labels().find(|l| *l == key) {
        return Some(l);
    }
    let mut found = schema.labels().filter(|l| l.eq_ignore_ascii_case(key));
    match (found.next(), found.next()) {
        (Some(l), None) => Some(l),
        _ => None,
    }
}

/// Parses a JSON-shaped completion, annotating every non-overlapping
/// occurrence of each mention.
pub fn parse_json_answer(
    completion: &str,
    original: &str,
    schema: &EntitySchema,
) -> Result<(AnnotatedDocument, ParseReport), ParseError> {
    parse_json_answer_with(completion, original, schema, MentionLocalization::All)
}

pub fn parse_json_answer_with(
    completion: &str,
    original: &str,
    schema: &EntitySchema,
    localization: MentionLocalization,
) -> Result<(AnnotatedDocument, ParseReport), ParseError> {
    let block = extract_json_object(completion).ok_or(ParseError::NoJsonObject)?;
    let object: serde_json::Map<String, Value> =
        serde_json::from_str(block).map_err(|e| ParseError::InvalidJson(e.to_string()))?;

    let mut doc = AnnotatedDocument::new(original);
    let mut report = ParseReport::default();
    for (key, value) in &object {
        let Some(label) = resolve_key(schema, key) else {
            report
                .warnings
                .push(ParseWarning::new(WarningKind::UnknownLabel, key.clone()));
            continue;
        };
        let mentions: Vec<&Value> = match value {
            Value::Array(items) => items.iter().collect(),
            Value::Null => Vec::new(),
            other => vec![other],
        };
        // Per-mention use count, for `First` localization of repeated mentions.
        let mut seen: Vec<(&str, usize)> = Vec::new();
        for mention in mentions {
            let Some(text) = mention.as_str() else {
                report.warnings.push(ParseWarning::new(
                    WarningKind::InvalidMention,
                    mention.to_string(),
                ));
                continue;
            };
            if text.trim().is_empty() {
                report
                    .warnings
                    .push(ParseWarning::new(WarningKind::EmptyMention, text));
                continue;
            }
            let mut occurrences = find_occurrences(original, text);
            if occurrences.is_empty() && text.trim() != text {
                occurrences = find_occurrences(original, text.trim());
            }
            if occurrences.is_empty() {
                report
                    .warnings
                    .push(ParseWarning::new(WarningKind::UnlocatableMention, text));
                continue;
            }
            let chosen: &[(usize, usize)] = match localization {
                MentionLocalization::All => &occurrences,
                MentionLocalization::First => {
                    let uses = match seen.iter_mut().find(|(m, _)| *m == text) {
                        Some((_, n)) => {
                            *n += 1;
                            *n - 1
                        }
                        None => {
                            seen.push((text, 1));
                            0
                        }
                    };
                    let i = uses.min(occurrences.len() - 1);
                    &occurrences[i..=i]
                }
            };
            for &(s, e) in chosen {
                doc.insert(Annotation::new(s, e, label));
            }
        }
    }
    report.recovered = doc.annotations.len();
    Ok((doc, report))
}

/// Union of per-turn annotation sets; identical triples collapse, while the
/// same span under different labels is kept once per label.
pub fn merge_turn_annotations<'a, I>(per_turn: I) -> BTreeSet<Annotation>
where
    I: IntoIterator<Item = &'a BTreeSet<Annotation>>,
{
    per_turn.into_iter().flatten().cloned().collect()
}
