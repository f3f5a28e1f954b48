//! Zero-shot annotation: a schema, no examples, one in-line tagged reply.
//!
//! The backend is a scripted mock, so this runs offline.

use std::sync::Arc;

use iclner::client::MockBackend;
use iclner::domain::{EntitySchema, NerConfig};
use iclner::engine::NerModel;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let entities = EntitySchema::new([
        ("person", "A person name, it can include first and last names, for example: John, Fabian or Mark Miranda"),
        ("organization", "An organization name, it can be a company, a government agency, etc."),
        ("location", "A location name, it can be a city, a country, etc."),
    ])?;

    let backend = Arc::new(MockBackend::sequence([
        "<person>Fei-Fei Li</person> is a female scientist born in <location>China</location>.",
    ]));
    let mut model = NerModel::new(NerConfig::default(), backend)?;
    model.contextualize(entities, &[])?;

    for result in model.predict(&["Fei-Fei Li is a female scientist born in China."], 1)? {
        let prediction = result?;
        let doc = &prediction.document;
        for a in &doc.annotations {
            println!(
                "{:>3}..{:<3} {:<12} {}",
                a.start,
                a.end,
                a.label,
                doc.annotation_text(a)?
            );
        }
        println!("{}", serde_json::to_string_pretty(doc)?);
    }
    Ok(())
}
