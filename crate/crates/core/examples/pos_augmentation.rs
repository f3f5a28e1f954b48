//! Part-of-speech augmentation: tags from a local hook, or from the model
//! itself in a separate request.

use std::sync::Arc;

use iclner::client::MockBackend;
use iclner::domain::{EntitySchema, NerConfig, PosMode};
use iclner::engine::NerModel;

/// A toy tagger: capitalized words are proper nouns.
fn toy_tagger(text: &str) -> Result<Vec<(String, String)>, String> {
    Ok(text
        .split_whitespace()
        .map(|w| {
            let tag = if w.chars().next().is_some_and(char::is_uppercase) {
                "NNP"
            } else {
                "NN"
            };
            (w.to_string(), tag.to_string())
        })
        .collect())
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let schema = EntitySchema::new([("location", "A place")])?;
    let text = "China won gold";

    let backend = Arc::new(MockBackend::sequence([
        "<location>China</location> won gold",
    ]));
    let config = NerConfig {
        pos_mode: PosMode::ViaHook,
        ..NerConfig::default()
    };
    let mut model = NerModel::new(config, backend.clone())?.with_pos_tagger(Arc::new(toy_tagger));
    model.contextualize(schema.clone(), &[])?;
    let prediction = model.predict_one(text)?;
    println!("hook query:\n{}\n", backend.calls()[0].last_content());
    println!("annotations: {:?}\n", prediction.document.annotations);

    let backend = Arc::new(MockBackend::sequence([
        "China/NNP won/VBD gold/NN",
        "<location>China</location> won gold",
    ]));
    let config = NerConfig {
        pos_mode: PosMode::ViaLlm,
        ..NerConfig::default()
    };
    let mut model = NerModel::new(config, backend.clone())?;
    model.contextualize(schema, &[])?;
    model.predict_one(text)?;
    println!("requests with LLM tagging: {}", backend.call_count());
    println!("tagging request: {:?}", backend.calls()[0].last_content());
    Ok(())
}
