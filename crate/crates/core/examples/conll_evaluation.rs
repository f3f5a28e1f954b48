//! Offline benchmark: read the bundled CoNLL sample, answer every request
//! with completions derived from the gold spans (some corrupted), and score
//! the predictions with relaxed and strict matching.

use std::path::Path;
use std::sync::Arc;

use iclner::client::MockBackend;
use iclner::domain::{AnnotatedDocument, EntitySchema, NerConfig, PromptingMethod};
use iclner::engine::NerModel;
use iclner::evaluation::{evaluate, evaluate_with, read_conll_file, MatchMode};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let data = Path::new(env!("CARGO_MANIFEST_DIR")).join("data");
    let gold = read_conll_file(data.join("sample.iob1.conll"))?;
    let schema =
        EntitySchema::from_json(&std::fs::read_to_string(data.join("conll_schema.json"))?)?;
    let config = NerConfig {
        prompting_method: PromptingMethod::MultiTurn,
        ..NerConfig::default()
    };

    // Script the mock: every fourth sentence loses its last entity, and every
    // seventh has its first entity widened by one character.
    let scripted: Vec<AnnotatedDocument> = gold
        .iter()
        .enumerate()
        .map(|(i, doc)| {
            let mut doc = doc.clone();
            if i % 4 == 0 {
                let last = doc.annotations.iter().next_back().cloned();
                last.map(|a| doc.annotations.remove(&a));
            }
            if i % 7 == 0 {
                if let Some(a) = doc.annotations.iter().next().cloned() {
                    if a.end < doc.char_len() {
                        doc.annotations.remove(&a);
                        doc.annotations.insert(iclner::domain::Annotation::new(
                            a.start,
                            a.end + 1,
                            a.label,
                        ));
                    }
                }
            }
            doc
        })
        .collect();
    let mut builder = NerModel::new(config.clone(), Arc::new(MockBackend::matcher(vec![])))?;
    builder.contextualize(schema.clone(), &[])?;
    let backend = Arc::new(MockBackend::matcher(builder.scripted_rules(&scripted)?));

    let mut model = NerModel::new(config, backend.clone())?;
    model.contextualize(schema, &[])?;
    let texts: Vec<&str> = gold.iter().map(|d| d.text.as_str()).collect();
    let predictions: Vec<AnnotatedDocument> = model
        .predict(&texts, 8)?
        .into_iter()
        .map(|r| r.map(|p| p.document))
        .collect::<Result<_, _>>()?;

    println!(
        "{} sentences, {} requests\n",
        gold.len(),
        backend.call_count()
    );
    println!("relaxed:\n{}", evaluate(&predictions, &gold)?.to_table());
    println!(
        "strict:\n{}",
        evaluate_with(&predictions, &gold, MatchMode::Strict)?.to_table()
    );
    Ok(())
}
