//! Multi-turn prompting: one entity per turn, with custom mention markers.
//!
//! A matcher-mode mock answers by the entity named in the latest turn, so the
//! reply order does not need to be known in advance.

use std::sync::Arc;

use iclner::client::{MatchRule, MockBackend};
use iclner::domain::{Delimiters, EntitySchema, MultiTurnMode, NerConfig, PromptingMethod};
use iclner::engine::NerModel;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let entities = EntitySchema::new([
        ("person", "A person name"),
        (
            "location",
            "A location name, it can be a city, a country, etc.",
        ),
    ])?;
    let backend = Arc::new(MockBackend::matcher(vec![
        MatchRule::new("@@Pedro Pereira## is the president of Peru.")
            .last_contains("entity person"),
        MatchRule::new("Pedro Pereira is the president of @@Peru##.")
            .last_contains("entity location"),
    ]));
    let config = NerConfig {
        prompting_method: PromptingMethod::MultiTurn,
        multi_turn_mode: MultiTurnMode::StepByStep,
        delimiters: Some(Delimiters::new("@@", "##")),
        ..NerConfig::default()
    };
    let mut model = NerModel::new(config, backend.clone())?;
    model.contextualize(entities, &[])?;

    let prediction = model.predict_one("Pedro Pereira is the president of Peru.")?;
    println!("annotations: {:?}", prediction.document.annotations);
    println!("requests: {}", backend.call_count());
    for (i, call) in backend.calls().iter().enumerate() {
        println!("turn {}: {:?}", i + 1, call.last_content());
    }
    Ok(())
}
