//! Stack-based extraction of in-line tagged spans.

use crate::domain::EntitySchema;

use super::{ParseWarning, WarningKind};

/// Longest tag name considered when looking for `<name>` / `</name>`.
const MAX_TAG_NAME_CHARS: usize = 64;

pub(crate) enum TagSyntax<'a> {
    /// `<label>…</label>` for the labels of a schema.
    Labels(&'a EntitySchema),
    /// One custom open/close pair bound to a single label.
    Custom {
        open: &'a str,
        close: &'a str,
        label: &'a str,
    },
}

/// A tagged span in stripped-text character offsets.
#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct TaggedSpan {
    pub start: usize,
    pub end: usize,
    pub label: String,
    pub mention: String,
}

#[derive(Debug, Default)]
pub(crate) struct Extraction {
    pub stripped: String,
    pub spans: Vec<TaggedSpan>,
    pub warnings: Vec<ParseWarning>,
}

struct Open {
    label: String,
    start_char: usize,
    start_byte: usize,
    tag: String,
}

enum Tag {
    Open(String),
    Close(String),
    /// Tag-shaped text naming no schema label.
    Unknown,
}

/// Resolves a tag name against the schema: exact match first, then a unique
/// ASCII case-insensitive match.
fn resolve_label(schema: &EntitySchema, name: &str) -> Option<String> {
    if schema.contains(name) {
        return Some(name.to_string());
    }
    let mut found = schema.labels().filter(|l| l.eq_ignore_ascii_case(name));
    match (found.next(), found.next()) {
        (Some(l), None) => Some(l.to_string()),
        _ => None,
    }
}

fn looks_like_tag_name(name: &str) -> bool {
    let mut chars = name.chars();
    matches!(chars.next(), Some(c) if c.is_alphabetic())
        && chars.all(|c| c.is_alphanumeric() || matches!(c, '_' | '-' | '.' | ' ' | ':'))
}

/// Tries to read a tag at the start of `rest`, returning it with its byte
/// length.
fn read_tag(rest: &str, schema: &EntitySchema, original: &str) -> Option<(Tag, usize)> {
    let inner_start = if rest.starts_with("</") { 2 } else { 1 };
    let body = &rest[inner_start..];
    let mut name_len = None;
    for (count, (i, c)) in body.char_indices().enumerate() {
        if count > MAX_TAG_NAME_CHARS || c == '<' || c == '\n' {
            return None;
        }
        if c == '>' {
            name_len = Some(i);
            break;
        }
    }
    let name_len = name_len?;
    let raw = &body[..name_len];
    let name = raw.trim();
    if name.is_empty() {
        return None;
    }
    let total = inner_start + name_len + 1;
    let closing = inner_start == 2;
    if let Some(label) = resolve_label(schema, name) {
        return Some((
            if closing {
                Tag::Close(label)
            } else {
                Tag::Open(label)
            },
            total,
        ));
    }
    // Only strip unknown tag-shaped text the original does not contain.
    if looks_like_tag_name(name) && !original.contains(&rest[..total]) {
        return Some((Tag::Unknown, total));
    }
    None
}

pub(crate) fn extract(completion: &str, syntax: &TagSyntax<'_>, original: &str) -> Extraction {
    let mut out = Extraction::default();
    let mut stack: Vec<Open> = Vec::new();
    let mut char_pos = 0;
    let mut rest = completion;

    let close_span = |out: &mut Extraction, open: Open, char_pos: usize| {
        let mention = out.stripped[open.start_byte..].to_string();
        if mention.trim().is_empty() {
            out.warnings
                .push(ParseWarning::new(WarningKind::EmptyMention, open.tag));
        } else {
            out.spans.push(TaggedSpan {
                start: open.start_char,
                end: char_pos,
                label: open.label,
                mention,
            });
        }
    };

    while let Some(c) = rest.chars().next() {
        match syntax {
            TagSyntax::Labels(schema) if c == '<' => {
                if let Some((tag, len)) = read_tag(rest, schema, original) {
                    let text = rest[..len].to_string();
                    match tag {
                        Tag::Open(label) => stack.push(Open {
                            label,
                            start_char: char_pos,
                            start_byte: out.stripped.len(),
                            tag: text,
                        }),
                        Tag::Close(label) => match stack.iter().rposition(|o| o.label == label) {
                            Some(depth) => {
                                for unclosed in stack.drain(depth + 1..) {
                                    out.warnings.push(ParseWarning::new(
                                        WarningKind::UnmatchedTag,
                                        unclosed.tag,
                                    ));
                                }
                                let open = stack.pop().expect("matched entry");
                                close_span(&mut out, open, char_pos);
                            }
                            None => out
                                .warnings
                                .push(ParseWarning::new(WarningKind::UnmatchedTag, text)),
                        },
                        Tag::Unknown => out
                            .warnings
                            .push(ParseWarning::new(WarningKind::UnknownLabel, text)),
                    }
                    rest = &rest[len..];
                    continue;
                }
            }
            TagSyntax::Custom { open, close, label } => {
                let open_here = rest.starts_with(open);
                let close_here = rest.starts_with(close);
                // Prefer the longer marker when one is a prefix of the other.
                let treat_as_open = if open == close {
                    open_here && stack.is_empty()
                } else {
                    open_here && (!close_here || open.len() >= close.len())
                };
                let treat_as_close = !treat_as_open && close_here;
                if treat_as_open {
                    stack.push(Open {
                        label: label.to_string(),
                        start_char: char_pos,
                        start_byte: out.stripped.len(),
                        tag: open.to_string(),
                    });
                    rest = &rest[open.len()..];
                    continue;
                }
                if treat_as_close {
                    match stack.pop() {
                        Some(o) => close_span(&mut out, o, char_pos),
                        None => out.warnings.push(ParseWarning::new(
                            WarningKind::UnmatchedTag,
                            close.to_string(),
                        )),
                    }
                    rest = &rest[close.len()..];
                    continue;
                }
            }
            _ => {}
        }
        out.stripped.push(c);
        char_pos += 1;
        rest = &rest[c.len_utf8()..];
    }
    for unclosed in stack {
        out.warnings
            .push(ParseWarning::new(WarningKind::UnmatchedTag, unclosed.tag));
    }
    out
}
