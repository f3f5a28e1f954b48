//! Seeded document generators shared by the integration tests.
#![allow(dead_code)]

use iclner::domain::{AnnotatedDocument, Annotation, EntitySchema};
use rand::rngs::StdRng;
use rand::seq::IndexedRandom;
use rand::{RngExt, SeedableRng};

pub const LABELS: [&str; 4] = ["person", "location", "organization", "misc"];

pub fn schema() -> EntitySchema {
    EntitySchema::new(LABELS.map(|l| (l, "an entity"))).unwrap()
}

pub fn rng(seed: u64) -> StdRng {
    StdRng::seed_from_u64(seed)
}

const WORDS: &[&str] = &[
    "Lima",
    "Perú",
    "Ñuñoa",
    "São",
    "Paulo",
    "Zürich",
    "Straße",
    "Москва",
    "Киев",
    "東京",
    "大学",
    "北京",
    "مرحبا",
    "القاهرة",
    "Αθήνα",
    "😀",
    "🎉",
    "naïve",
    "café",
    "Ana",
    "Torres",
    "Fei-Fei",
    "Li",
    "Walmart",
    "the",
    "of",
    "and",
    "in",
    "a",
    "is",
    "born",
    "president",
    "company",
    "wrote",
    "visited",
    "x<y",
    "a>b",
    "3.5",
    "U.S.",
    "(UN)",
    "\"quoted\"",
    "it's",
    "co-op",
    "e.g.",
    "100%",
    "#1",
    "{json}",
    "a/b",
];

const SEPARATORS: &[&str] = &[
    " ", " ", " ", " ", ", ", ". ", "  ", "\n", "\t", " — ", ": ",
];

/// Words and separators drawn from a multilingual pool, at most `max_chars`.
pub fn text(rng: &mut StdRng, max_chars: usize) -> String {
    let mut out = String::new();
    let target = rng.random_range(1..=max_chars);
    loop {
        let word = *WORDS.choose(rng).unwrap();
        let sep = if out.is_empty() {
            ""
        } else {
            *SEPARATORS.choose(rng).unwrap()
        };
        if out.chars().count() + sep.chars().count() + word.chars().count() > target {
            break;
        }
        out.push_str(sep);
        out.push_str(word);
    }
    if out.is_empty() {
        out.push(WORDS.choose(rng).unwrap().chars().next().unwrap());
    }
    out
}

/// Up to `max` non-overlapping annotations, each covering at least one
/// non-whitespace character.
pub fn annotations(rng: &mut StdRng, text: &str, max: usize) -> Vec<Annotation> {
    let chars: Vec<char> = text.chars().collect();
    let n = chars.len();
    let want = rng.random_range(0..=max);
    let mut taken = vec![false; n];
    let mut out = Vec::new();
    for _ in 0..want * 4 {
        if out.len() == want {
            break;
        }
        let start = rng.random_range(0..n);
        let end = (start + rng.random_range(1..=12)).min(n);
        if taken[start..end].iter().any(|&t| t)
            || chars[start..end].iter().all(|c| c.is_whitespace())
        {
            continue;
        }
        taken[start..end].iter_mut().for_each(|t| *t = true);
        out.push(Annotation::new(start, end, *LABELS.choose(rng).unwrap()));
    }
    out
}

pub fn document(rng: &mut StdRng, max_chars: usize, max_annotations: usize) -> AnnotatedDocument {
    let text = text(rng, max_chars);
    let annotations = annotations(rng, &text, max_annotations);
    AnnotatedDocument::with_annotations(text, annotations)
}

/// Occurrences of `needle` in `haystack`, overlapping ones included.
pub fn count_occurrences(haystack: &str, needle: &str) -> usize {
    (0..haystack.len())
        .filter(|&i| haystack.is_char_boundary(i) && haystack[i..].starts_with(needle))
        .count()
}
