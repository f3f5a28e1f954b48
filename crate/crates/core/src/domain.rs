//! Core data types: annotations, annotated documents, entity schemas and the
//! prediction configuration.
//!
//! All offsets are counted in Unicode scalar values (`char`s), never bytes, and
//! spans are half-open: `start..end`.

use std::collections::BTreeSet;
use std::fmt;

use serde::de::{self, MapAccess, Visitor};
use serde::ser::SerializeMap;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// Characters that may not appear in an entity label, since labels double as
/// in-line tag names.
pub const RESERVED_LABEL_CHARS: [char; 3] = ['<', '>', '/'];

/// Errors raised while building or inspecting domain values.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DomainError {
    #[error("span ({start}, {end}) is out of bounds for a text of {len} characters")]
    OutOfBounds {
        start: usize,
        end: usize,
        len: usize,
    },
    #[error("empty span ({start}, {end})")]
    EmptySpan { start: usize, end: usize },
    #[error("invalid entity schema: {0}")]
    InvalidSchema(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("{0}")]
    InvalidDocument(ValidationErrors),
}

/// One entity mention: a half-open character span plus its label.
///
/// The derived ordering sorts by `(start, end, label)`, which is also the
/// iteration order inside an [`AnnotatedDocument`].
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Annotation {
    pub start: usize,
    pub end: usize,
    pub label: String,
}

impl Annotation {
    pub fn new(start: usize, end: usize, label: impl Into<String>) -> Self {
        Self {
            start,
            end,
            label: label.into(),
        }
    }

    pub fn len(&self) -> usize {
        self.end.saturating_sub(self.start)
    }

    pub fn is_empty(&self) -> bool {
        self.end <= self.start
    }

    /// Whether the two spans share at least one character.
    pub fn overlaps(&self, other: &Annotation) -> bool {
        self.start < other.end && other.start < self.end
    }
}

/// Why an annotation failed validation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ViolationKind {
    EmptySpan,
    InvertedSpan,
    OutOfBounds { len: usize },
    EmptyLabel,
}

impl fmt::Display for ViolationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ViolationKind::EmptySpan => f.write_str("empty span"),
            ViolationKind::InvertedSpan => f.write_str("start is after end"),
            ViolationKind::OutOfBounds { len } => {
                write!(f, "end exceeds text length {len}")
            }
            ViolationKind::EmptyLabel => f.write_str("empty label"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    /// Position of the annotation in the document's sorted iteration order.
    pub index: usize,
    pub annotation: Annotation,
    pub kind: ViolationKind,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "annotation #{} ({}, {}, {:?}): {}",
            self.index,
            self.annotation.start,
            self.annotation.end,
            self.annotation.label,
            self.kind
        )
    }
}

/// Every violation found in one document.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ValidationErrors(pub Vec<Violation>);

impl fmt::Display for ValidationErrors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, v) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str("; ")?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ValidationErrors {}

/// The original text plus a set of annotations over it.
///
/// Overlapping annotations are allowed; identical `(start, end, label)`
/// triples are stored once.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotatedDocument {
    pub text: String,
    #[serde(default)]
    pub annotations: BTreeSet<Annotation>,
}

impl AnnotatedDocument {
    pub fn new(text: impl Into<String>) -> Self {
        Self {
            text: text.into(),
            annotations: BTreeSet::new(),
        }
    }

    pub fn with_annotations<I>(text: impl Into<String>, annotations: I) -> Self
    where
        I: IntoIterator<Item = Annotation>,
    {
        Self {
            text: text.into(),
            annotations: annotations.into_iter().collect(),
        }
    }

    /// Returns `false` when the triple was already present.
    pub fn insert(&mut self, annotation: Annotation) -> bool {
        self.annotations.insert(annotation)
    }

    /// Text length in characters.
    pub fn char_len(&self) -> usize {
        self.text.chars().count()
    }

    pub fn labels(&self) -> BTreeSet<&str> {
        self.annotations.iter().map(|a| a.label.as_str()).collect()
    }

    pub fn has_overlaps(&self) -> bool {
        // Sorted by start, so only neighbours in the running maximum can overlap.
        let mut max_end = 0;
        let mut first = true;
        for a in &self.annotations {
            if !first && a.start < max_end {
                return true;
            }
            first = false;
            max_end = max_end.max(a.end);
        }
        false
    }

    /// Restricts the document to the annotations carrying `label`.
    pub fn filter_label(&self, label: &str) -> AnnotatedDocument {
        AnnotatedDocument {
            text: self.text.clone(),
            annotations: self
                .annotations
                .iter()
                .filter(|a| a.label == label)
                .cloned()
                .collect(),
        }
    }

    pub fn validate(&self) -> Result<(), ValidationErrors> {
        validate_document(self)
    }

    pub fn annotation_text(&self, annotation: &Annotation) -> Result<&str, DomainError> {
        annotation_text(self, annotation)
    }
}

/// Checks every annotation invariant against the document text and reports
/// each violating annotation.
pub fn validate_document(doc: &AnnotatedDocument) -> Result<(), ValidationErrors> {
    let len = doc.char_len();
    let mut violations = Vec::new();
    for (index, a) in doc.annotations.iter().enumerate() {
        let kind = if a.start == a.end {
            Some(ViolationKind::EmptySpan)
        } else if a.start > a.end {
            Some(ViolationKind::InvertedSpan)
        } else if a.end > len {
            Some(ViolationKind::OutOfBounds { len })
        } else if a.label.is_empty() {
            Some(ViolationKind::EmptyLabel)
        } else {
            None
        };
        if let Some(kind) = kind {
            violations.push(Violation {
                index,
                annotation: a.clone(),
                kind,
            });
        }
    }
    if violations.is_empty() {
        Ok(())
    } else {
        Err(ValidationErrors(violations))
    }
}

/// The substring of `doc.text` covered by the annotation.
pub fn annotation_text<'a>(
    doc: &'a AnnotatedDocument,
    annotation: &Annotation,
) -> Result<&'a str, DomainError> {
    if annotation.start >= annotation.end {
        return Err(DomainError::EmptySpan {
            start: annotation.start,
            end: annotation.end,
        });
    }
    char_slice(&doc.text, annotation.start, annotation.end).ok_or(DomainError::OutOfBounds {
        start: annotation.start,
        end: annotation.end,
        len: doc.char_len(),
    })
}

/// Byte offset of the `char_idx`-th character; `Some(text.len())` for the
/// one-past-the-end position.
pub fn char_to_byte(text: &str, char_idx: usize) -> Option<usize> {
    text.char_indices()
        .map(|(b, _)| b)
        .chain(std::iter::once(text.len()))
        .nth(char_idx)
}

/// Slices `text` by character offsets.
pub fn char_slice(text: &str, start: usize, end: usize) -> Option<&str> {
    if start > end {
        return None;
    }
    let mut indices = text
        .char_indices()
        .map(|(b, _)| b)
        .chain(std::iter::once(text.len()));
    let from = indices.nth(start)?;
    let to = if end == start {
        from
    } else {
        indices.nth(end - start - 1)?
    };
    Some(&text[from..to])
}

/// Ordered mapping from entity label to a natural-language description.
///
/// The order is significant: it drives prompt enumeration, JSON key order and
/// the turn order of multi-turn prompting.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EntitySchema {
    entries: Vec<(String, String)>,
}

impl EntitySchema {
    pub fn new<I, L, D>(entries: I) -> Result<Self, DomainError>
    where
        I: IntoIterator<Item = (L, D)>,
        L: Into<String>,
        D: Into<String>,
    {
        let entries: Vec<(String, String)> = entries
            .into_iter()
            .map(|(l, d)| (l.into(), d.into()))
            .collect();
        if entries.is_empty() {
            return Err(DomainError::InvalidSchema(
                "at least one entity is required".into(),
            ));
        }
        for (i, (label, _)) in entries.iter().enumerate() {
            check_label(label)?;
            if entries[..i].iter().any(|(l, _)| l == label) {
                return Err(DomainError::InvalidSchema(format!(
                    "duplicate label {label:?}"
                )));
            }
        }
        Ok(Self { entries })
    }

    pub fn from_json(json: &str) -> Result<Self, DomainError> {
        serde_json::from_str(json).map_err(|e| DomainError::InvalidSchema(e.to_string()))
    }

    pub fn labels(&self) -> impl Iterator<Item = &str> + '_ {
        self.entries.iter().map(|(l, _)| l.as_str())
    }

    pub fn entries(&self) -> impl Iterator<Item = (&str, &str)> + '_ {
        self.entries.iter().map(|(l, d)| (l.as_str(), d.as_str()))
    }

    pub fn description(&self, label: &str) -> Option<&str> {
        self.entries
            .iter()
            .find(|(l, _)| l == label)
            .map(|(_, d)| d.as_str())
    }

    pub fn contains(&self, label: &str) -> bool {
        self.entries.iter().any(|(l, _)| l == label)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// A single-entry schema for one label of this schema.
    pub fn restrict_to(&self, label: &str) -> Option<EntitySchema> {
        self.entries
            .iter()
            .find(|(l, _)| l == label)
            .map(|e| EntitySchema {
                entries: vec![e.clone()],
            })
    }
}

fn check_label(label: &str) -> Result<(), DomainError> {
    if label.is_empty() {
        return Err(DomainError::InvalidSchema("empty label".into()));
    }
    if let Some(c) = label.chars().find(|c| RESERVED_LABEL_CHARS.contains(c)) {
        return Err(DomainError::InvalidSchema(format!(
            "label {label:?} contains reserved character {c:?}"
        )));
    }
    Ok(())
}

impl Serialize for EntitySchema {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut map = serializer.serialize_map(Some(self.entries.len()))?;
        for (l, d) in &self.entries {
            map.serialize_entry(l, d)?;
        }
        map.end()
    }
}

impl<'de> Deserialize<'de> for EntitySchema {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        struct SchemaVisitor;

        impl<'de> Visitor<'de> for SchemaVisitor {
            type Value = EntitySchema;

            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("an object mapping entity labels to descriptions")
            }

            fn visit_map<A: MapAccess<'de>>(self, mut map: A) -> Result<EntitySchema, A::Error> {
                let mut entries = Vec::new();
                while let Some((label, description)) = map.next_entry::<String, String>()? {
                    entries.push((label, description));
                }
                EntitySchema::new(entries).map_err(de::Error::custom)
            }
        }

        deserializer.deserialize_map(SchemaVisitor)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PromptingMethod {
    /// All entities requested in one reply.
    #[default]
    SingleTurn,
    /// One entity per conversational turn.
    MultiTurn,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MultiTurnMode {
    /// Union of the per-turn annotation sets.
    #[default]
    StepByStep,
    /// One consolidated all-entity request after the last turn.
    FinalStep,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnswerShape {
    #[default]
    Inline,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PosMode {
    #[default]
    None,
    ViaLlm,
    ViaHook,
}

/// How JSON mention strings are located in the original text.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MentionLocalization {
    /// Every non-overlapping occurrence.
    #[default]
    All,
    /// One occurrence per listed mention, taken left to right.
    First,
}

/// User-chosen open/close markers replacing label-named tags.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Delimiters {
    pub open: String,
    pub close: String,
}

impl Delimiters {
    pub fn new(open: impl Into<String>, close: impl Into<String>) -> Self {
        Self {
            open: open.into(),
            close: close.into(),
        }
    }
}

pub const DEFAULT_MODEL: &str = "gpt-3.5-turbo";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NerConfig {
    pub prompting_method: PromptingMethod,
    /// Only consulted for [`PromptingMethod::MultiTurn`].
    pub multi_turn_mode: MultiTurnMode,
    pub answer_shape: AnswerShape,
    pub delimiters: Option<Delimiters>,
    pub pos_mode: PosMode,
    pub mention_localization: MentionLocalization,
    pub model: String,
    pub temperature: f64,
    pub max_retries: u32,
    pub max_concurrency: usize,
    /// Identifier of the built-in prompt template set, e.g. `"en"`.
    pub language: String,
}

impl Default for NerConfig {
    fn default() -> Self {
        Self {
            prompting_method: PromptingMethod::SingleTurn,
            multi_turn_mode: MultiTurnMode::StepByStep,
            answer_shape: AnswerShape::Inline,
            delimiters: None,
            pos_mode: PosMode::None,
            mention_localization: MentionLocalization::All,
            model: DEFAULT_MODEL.to_string(),
            temperature: 0.0,
            max_retries: 3,
            max_concurrency: 4,
            language: "en".to_string(),
        }
    }
}

impl NerConfig {
    pub fn validate(&self) -> Result<(), DomainError> {
        if let Some(d) = &self.delimiters {
            if self.prompting_method != PromptingMethod::MultiTurn {
                return Err(DomainError::InvalidConfig(
                    "custom delimiters require multi-turn prompting".into(),
                ));
            }
            if self.answer_shape != AnswerShape::Inline {
                return Err(DomainError::InvalidConfig(
                    "custom delimiters require the in-line answer shape".into(),
                ));
            }
            if d.open.is_empty() || d.close.is_empty() {
                return Err(DomainError::InvalidConfig(
                    "delimiters must be non-empty".into(),
                ));
            }
        }
        if !(self.temperature >= 0.0 && self.temperature.is_finite()) {
            return Err(DomainError::InvalidConfig(format!(
                "temperature must be a non-negative number, got {}",
                self.temperature
            )));
        }
        if self.max_concurrency == 0 {
            return Err(DomainError::InvalidConfig(
                "max concurrency must be at least 1".into(),
            ));
        }
        if self.model.is_empty() {
            return Err(DomainError::InvalidConfig("model name is empty".into()));
        }
        Ok(())
    }

    pub fn is_multi_turn(&self) -> bool {
        self.prompting_method == PromptingMethod::MultiTurn
    }
}
