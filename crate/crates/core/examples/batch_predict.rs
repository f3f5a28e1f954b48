//! Batch prediction on a bounded thread pool: order is preserved and one
//! failing document does not sink the others.

use std::sync::Arc;
use std::time::Instant;

use iclner::client::{MatchRule, MockBackend, MockReply};
use iclner::domain::{EntitySchema, NerConfig};
use iclner::engine::NerModel;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let schema = EntitySchema::new([("person", "A person name")])?;
    let names = [
        "Ana", "Bruno", "Carla", "Diego", "Elena", "Fabián", "Gloria", "Hugo",
    ];
    let texts: Vec<String> = names.iter().map(|n| format!("{n} smiled.")).collect();

    let mut rules: Vec<MatchRule> = names
        .iter()
        .map(|n| {
            MatchRule::new(format!("<person>{n}</person> smiled.")).contains(format!("{n} smiled."))
        })
        .collect();
    // One document hits a permanent client error.
    rules[3] = MatchRule::new(MockReply::status(400)).contains("Diego smiled.");

    let backend = Arc::new(MockBackend::matcher(rules));
    let mut model = NerModel::new(NerConfig::default(), backend.clone())?;
    model.contextualize(schema, &[])?;

    let started = Instant::now();
    let results = model.predict(&texts, 4)?;
    println!("{} documents in {:?}", results.len(), started.elapsed());
    for (text, result) in texts.iter().zip(&results) {
        match result {
            Ok(p) => println!(
                "ok    {text:<16} {:?}",
                p.document.annotations.iter().next()
            ),
            Err(e) => println!("error {text:<16} {e}"),
        }
    }
    Ok(())
}
