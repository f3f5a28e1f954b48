//! CoNLL-style token/tag files.
//!
//! One token per line, whitespace-separated columns with the NER tag last,
//! blank lines between sentences. `-DOCSTART-` lines are skipped. Both IOB1
//! (`I-` opens a chunk unless it continues one of the same type) and IOB2
//! (every chunk opens with `B-`) decode to the same spans.

use std::io::BufRead;

use crate::domain::{AnnotatedDocument, Annotation};

use super::EvalError;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConllSentence {
    pub tokens: Vec<String>,
    pub tags: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Tag<'a> {
    Outside,
    Begin(&'a str),
    Inside(&'a str),
}

fn parse_tag(tag: &str) -> Option<Tag<'_>> {
    if tag == "O" {
        return Some(Tag::Outside);
    }
    let (prefix, label) = tag.split_once('-')?;
    if label.is_empty() || label.contains(['<', '>', '/']) {
        return None;
    }
    match prefix {
        "B" => Some(Tag::Begin(label)),
        "I" => Some(Tag::Inside(label)),
        _ => None,
    }
}

impl ConllSentence {
    /// Tokens joined by single spaces, with one annotation per chunk.
    pub fn to_document(&self) -> AnnotatedDocument {
        let text = self.tokens.join(" ");
        let mut annotations = Vec::new();
        let mut current: Option<(usize, usize, &str)> = None;
        let mut offset = 0;
        for (token, tag) in self.tokens.iter().zip(&self.tags) {
            let start = offset;
            let end = start + token.chars().count();
            offset = end + 1;
            let tag = parse_tag(tag).expect("tags are validated when read");
            current = match (tag, current) {
                (Tag::Inside(label), Some((s, _, open))) if open == label => Some((s, end, open)),
                (Tag::Outside, open) => {
                    annotations.extend(open);
                    None
                }
                (Tag::Begin(label) | Tag::Inside(label), open) => {
                    annotations.extend(open);
                    Some((start, end, label))
                }
            };
        }
        annotations.extend(current);
        AnnotatedDocument::with_annotations(
            text,
            annotations
                .into_iter()
                .map(|(s, e, l)| Annotation::new(s, e, l)),
        )
    }
}

/// Reads sentences, validating column counts and tags.
pub fn read_conll_sentences<R: BufRead>(reader: R) -> Result<Vec<ConllSentence>, EvalError> {
    let mut sentences = Vec::new();
    let mut current = ConllSentence {
        tokens: Vec::new(),
        tags: Vec::new(),
    };
    let mut columns: Option<usize> = None;
    let mut flush = |current: &mut ConllSentence| {
        if !current.tokens.is_empty() {
            sentences.push(std::mem::replace(
                current,
                ConllSentence {
                    tokens: Vec::new(),
                    tags: Vec::new(),
                },
            ));
        }
    };
    for (index, line) in reader.lines().enumerate() {
        let line = line?;
        let line_no = index + 1;
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.is_empty() {
            flush(&mut current);
            continue;
        }
        if fields[0] == "-DOCSTART-" {
            flush(&mut current);
            continue;
        }
        if fields.len() < 2 {
            return Err(EvalError::Conll {
                line: line_no,
                message: "expected a token and a tag column".into(),
            });
        }
        match columns {
            None => columns = Some(fields.len()),
            Some(expected) if expected != fields.len() => {
                return Err(EvalError::Conll {
                    line: line_no,
                    message: format!("expected {expected} columns, found {}", fields.len()),
                })
            }
            Some(_) => {}
        }
        let tag = fields[fields.len() - 1];
        if parse_tag(tag).is_none() {
            return Err(EvalError::Conll {
                line: line_no,
                message: format!("malformed tag {tag:?}"),
            });
        }
        current.tokens.push(fields[0].to_string());
        current.tags.push(tag.to_string());
    }
    flush(&mut current);
    Ok(sentences)
}

/// Reads a CoNLL file as one annotated document per sentence.
pub fn read_conll<R: BufRead>(reader: R) -> Result<Vec<AnnotatedDocument>, EvalError> {
    Ok(read_conll_sentences(reader)?
        .iter()
        .map(ConllSentence::to_document)
        .collect())
}

pub fn read_conll_file(
    path: impl AsRef<std::path::Path>,
) -> Result<Vec<AnnotatedDocument>, EvalError> {
    let file = std::fs::File::open(path.as_ref())?;
    read_conll(std::io::BufReader::new(file))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spans(doc: &AnnotatedDocument) -> Vec<(usize, usize, &str)> {
        doc.annotations
            .iter()
            .map(|a| (a.start, a.end, a.label.as_str()))
            .collect()
    }

    const IOB2: &str = "-DOCSTART- -X- O O\n\nEU NNP B-ORG\nrejects VBZ O\nGerman JJ B-MISC\ncall NN O\n\nPeter NNP B-PER\nBlackburn NNP I-PER\nJohn NNP B-PER\n";
    const IOB1: &str = "EU NNP I-ORG\nrejects VBZ O\nGerman JJ I-MISC\ncall NN O\n\nPeter NNP I-PER\nBlackburn NNP I-PER\nJohn NNP B-PER\n";

    #[test]
    fn iob1_and_iob2_decode_identically() {
        let a = read_conll(IOB2.as_bytes()).unwrap();
        let b = read_conll(IOB1.as_bytes()).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 2);
        assert_eq!(a[0].text, "EU rejects German call");
        assert_eq!(spans(&a[0]), [(0, 2, "ORG"), (11, 17, "MISC")]);
        assert_eq!(spans(&a[1]), [(0, 15, "PER"), (16, 20, "PER")]);
    }

    #[test]
    fn inside_after_other_type_opens_chunk() {
        let docs = read_conll("a I-PER\nb I-LOC\nc O\nd I-LOC\n".as_bytes()).unwrap();
        assert_eq!(
            spans(&docs[0]),
            [(0, 1, "PER"), (2, 3, "LOC"), (6, 7, "LOC")]
        );
    }

    #[test]
    fn rejects_ragged_and_malformed_input() {
        let ragged = read_conll("a X O\nb O\n".as_bytes());
        assert!(matches!(ragged, Err(EvalError::Conll { line: 2, .. })));
        let bad = read_conll("a X-PER\n".as_bytes());
        assert!(matches!(bad, Err(EvalError::Conll { line: 1, .. })));
        assert!(read_conll("a B-\n".as_bytes()).is_err());
        assert!(read_conll("lonely\n".as_bytes()).is_err());
        assert!(read_conll("".as_bytes()).unwrap().is_empty());
    }

    #[test]
    fn multibyte_tokens_use_char_offsets() {
        let docs = read_conll("Peñalolén B-LOC\nes O\nbonito O\n".as_bytes()).unwrap();
        assert_eq!(spans(&docs[0]), [(0, 9, "LOC")]);
        assert_eq!(
            docs[0]
                .annotation_text(docs[0].annotations.first().unwrap())
                .unwrap(),
            "Peñalolén"
        );
    }
}
