mod common;

use std::collections::BTreeSet;

use iclner::domain::{AnnotatedDocument, Annotation};
use iclner::evaluation::{evaluate, evaluate_with, relaxed_match, strict_match, MatchMode};
use iclner::parsing::{align_texts, parse_inline, parse_json_answer};
use iclner::prompting::{render_inline, render_json};
use proptest::prelude::*;

fn seeded_doc(
    max_chars: usize,
    max_annotations: usize,
) -> impl Strategy<Value = AnnotatedDocument> {
    any::<u64>()
        .prop_map(move |seed| common::document(&mut common::rng(seed), max_chars, max_annotations))
}

fn spans(len: usize) -> impl Strategy<Value = BTreeSet<Annotation>> {
    prop::collection::btree_set(
        (0..len - 1, 1usize..6, prop::sample::select(vec!["A", "B"]))
            .prop_map(move |(s, w, l)| Annotation::new(s, (s + w).min(len), l)),
        0..8,
    )
}

proptest! {
    #[test]
    fn annotations_behave_as_a_set(doc in seeded_doc(80, 6)) {
        let mut again = doc.clone();
        for a in doc.annotations.iter() {
            prop_assert!(!again.insert(a.clone()));
        }
        prop_assert_eq!(&again, &doc);
        let sorted: Vec<_> = doc.annotations.iter().map(|a| (a.start, a.end, a.label.clone())).collect();
        let mut expected = sorted.clone();
        expected.sort();
        prop_assert_eq!(sorted, expected);
    }

    #[test]
    fn serde_round_trip(doc in seeded_doc(120, 6)) {
        let json = serde_json::to_string(&doc).unwrap();
        let back: AnnotatedDocument = serde_json::from_str(&json).unwrap();
        prop_assert_eq!(back, doc);
    }

    #[test]
    fn inline_render_then_parse_is_identity(doc in seeded_doc(200, 8)) {
        let completion = render_inline(&doc, None).unwrap();
        let (parsed, report) = parse_inline(&completion, &doc.text, &common::schema(), None);
        prop_assert!(report.warnings.is_empty(), "{:?}", report.warnings);
        prop_assert_eq!(parsed, doc);
    }

    #[test]
    fn json_render_then_parse_is_identity(doc in seeded_doc(200, 8)) {
        let unique: Vec<Annotation> = doc
            .annotations
            .iter()
            .filter(|a| common::count_occurrences(&doc.text, doc.annotation_text(a).unwrap()) == 1)
            .cloned()
            .collect();
        let doc = AnnotatedDocument::with_annotations(doc.text, unique);
        let completion = render_json(&doc, &common::schema()).unwrap();
        let (parsed, _) = parse_json_answer(&completion, &doc.text, &common::schema()).unwrap();
        prop_assert_eq!(parsed, doc);
    }

    #[test]
    fn alignment_is_monotone_and_in_bounds(a in "[a-c ]{0,30}", b in "[a-c ]{0,30}") {
        let map = align_texts(&a, &b);
        let (la, lb) = (a.chars().count(), b.chars().count());
        let mut last: Option<usize> = None;
        for pos in 0..=la {
            if let Some(mapped) = map.map_offset(pos) {
                prop_assert!(mapped <= lb);
                if let Some(prev) = last {
                    prop_assert!(mapped >= prev, "offset {} maps to {} after {}", pos, mapped, prev);
                }
                last = Some(mapped);
            }
        }
        for region in map.regions() {
            prop_assert!(region.stripped.end <= la && region.original.end <= lb);
            prop_assert!((0.0..=1.0).contains(&region.quality));
        }
    }

    #[test]
    fn identical_texts_align_exactly(a in "\\PC{1,40}") {
        let map = align_texts(&a, &a);
        prop_assert!(map.is_identity());
    }

    #[test]
    fn relaxed_dominates_strict(pred in spans(30), gold in spans(30)) {
        let relaxed = relaxed_match(&pred, &gold);
        let strict = strict_match(&pred, &gold);
        prop_assert!(relaxed.pairs.len() >= strict.pairs.len());
        prop_assert_eq!(relaxed.pairs.len() + relaxed.unmatched_predicted.len(), pred.len());
        prop_assert_eq!(relaxed.pairs.len() + relaxed.unmatched_gold.len(), gold.len());
        for (p, g) in &relaxed.pairs {
            prop_assert!(p.label == g.label && p.overlaps(g));
        }
        let used: BTreeSet<_> = relaxed.pairs.iter().map(|(_, g)| g.clone()).collect();
        prop_assert_eq!(used.len(), relaxed.pairs.len());
    }

    #[test]
    fn micro_counts_add_up(pairs in prop::collection::vec((spans(30), spans(30)), 1..5)) {
        let text = "x".repeat(30);
        let docs = |sets: Vec<&BTreeSet<Annotation>>| {
            sets.into_iter()
                .map(|s| AnnotatedDocument { text: text.clone(), annotations: s.clone() })
                .collect::<Vec<_>>()
        };
        let pred = docs(pairs.iter().map(|p| &p.0).collect());
        let gold = docs(pairs.iter().map(|p| &p.1).collect());
        let report = evaluate(&pred, &gold).unwrap();
        let m = &report.micro;
        let n_pred: usize = pred.iter().map(|d| d.annotations.len()).sum();
        let n_gold: usize = gold.iter().map(|d| d.annotations.len()).sum();
        prop_assert_eq!(m.true_positives + m.false_positives, n_pred);
        prop_assert_eq!(m.true_positives + m.false_negatives, n_gold);
        let tp: usize = report.per_label.iter().map(|c| c.true_positives).sum();
        prop_assert_eq!(tp, m.true_positives);

        // Reordering documents leaves the scores unchanged.
        let (mut rp, mut rg) = (pred.clone(), gold.clone());
        rp.reverse();
        rg.reverse();
        prop_assert_eq!(evaluate(&rp, &rg).unwrap(), report.clone());

        let strict = evaluate_with(&pred, &gold, MatchMode::Strict).unwrap();
        prop_assert!(report.micro.f1 >= strict.micro.f1);
        prop_assert_eq!(evaluate(&gold, &gold).unwrap().micro.f1, if n_gold > 0 { 1.0 } else { 0.0 });
    }
}
