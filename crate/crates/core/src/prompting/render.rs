//! Rendering annotated documents into the two answer shapes.

use crate::domain::{char_slice, AnnotatedDocument, Delimiters, EntitySchema};

use super::PromptError;

/// Echoes `doc.text` with every annotation wrapped in tags: `<label>…</label>`
/// by default, or the custom open/close pair (single-label documents only).
pub fn render_inline(
    doc: &AnnotatedDocument,
    delimiters: Option<&Delimiters>,
) -> Result<String, PromptError> {
    doc.validate().map_err(PromptError::InvalidDocument)?;
    if doc.has_overlaps() {
        return Err(PromptError::OverlappingAnnotations);
    }
    if delimiters.is_some() && doc.labels().len() > 1 {
        return Err(PromptError::DelimitersWithMultipleLabels);
    }

    let mut out = String::with_capacity(doc.text.len() + doc.annotations.len() * 16);
    let mut chars = doc.text.chars();
    let mut pos = 0;
    for a in &doc.annotations {
        out.extend(chars.by_ref().take(a.start - pos));
        match delimiters {
            Some(d) => out.push_str(&d.open),
            None => {
                out.push('<');
                out.push_str(&a.label);
                out.push('>');
            }
        }
        out.extend(chars.by_ref().take(a.end - a.start));
        match delimiters {
            Some(d) => out.push_str(&d.close),
            None => {
                out.push_str("</");
                out.push_str(&a.label);
                out.push('>');
            }
        }
        pos = a.end;
    }
    out.extend(chars);
    Ok(out)
}

/// A JSON object with one key per schema label, in schema order, each mapped
/// to the mention strings of that label in span order.
///
/// Repeated mentions are kept so the counts stay faithful.
pub fn render_json(doc: &AnnotatedDocument, schema: &EntitySchema) -> Result<String, PromptError> {
    doc.validate().map_err(PromptError::InvalidDocument)?;
    if let Some(a) = doc.annotations.iter().find(|a| !schema.contains(&a.label)) {
        return Err(PromptError::LabelOutsideSchema(a.label.clone()));
    }
    let mut out = String::from("{");
    for (i, label) in schema.labels().enumerate() {
        if i > 0 {
            out.push_str(", ");
        }
        out.push_str(&json_string(label));
        out.push_str(": [");
        let mentions = doc
            .annotations
            .iter()
            .filter(|a| a.label == label)
            .filter_map(|a| char_slice(&doc.text, a.start, a.end));
        for (j, m) in mentions.enumerate() {
            if j > 0 {
                out.push_str(", ");
            }
            out.push_str(&json_string(m));
        }
        out.push(']');
    }
    out.push('}');
    Ok(out)
}

pub(crate) fn json_string(s: &str) -> String {
    serde_json::to_string(s).expect("strings always serialize")
}
