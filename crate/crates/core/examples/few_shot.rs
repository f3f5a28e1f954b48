//! Few-shot annotation with JSON answers: two demonstrations precede the
//! query, and the reply lists mentions per label.

use std::sync::Arc;

use iclner::client::MockBackend;
use iclner::domain::{AnnotatedDocument, Annotation, AnswerShape, EntitySchema, NerConfig};
use iclner::engine::NerModel;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let entities = EntitySchema::new([
        (
            "person",
            "A person name, it can include first and last names",
        ),
        (
            "organization",
            "An organization name, it can be a company, a government agency, etc.",
        ),
        (
            "location",
            "A location name, it can be a city, a country, etc.",
        ),
    ])?;
    let examples = [
        AnnotatedDocument::with_annotations(
            "Elon Musk is the owner of the US company Tesla",
            [
                Annotation::new(30, 32, "location"),
                Annotation::new(0, 9, "person"),
                Annotation::new(41, 46, "organization"),
            ],
        ),
        AnnotatedDocument::with_annotations(
            "Bill Gates is the owner of Microsoft",
            [
                Annotation::new(0, 10, "person"),
                Annotation::new(27, 36, "organization"),
            ],
        ),
    ];

    let backend = Arc::new(MockBackend::sequence([
        r#"{"person": ["Pedro Pereira"], "organization": ["Walmart"], "location": ["Peru"]}"#,
    ]));
    let config = NerConfig {
        answer_shape: AnswerShape::Json,
        ..NerConfig::default()
    };
    let mut model = NerModel::new(config, backend.clone())?;
    model.contextualize(entities, &examples)?;

    let prediction =
        model.predict_one("Pedro Pereira is the president of Peru and the owner of Walmart.")?;
    for a in &prediction.document.annotations {
        println!("{a:?}");
    }

    println!("\nconversation sent:");
    for m in &backend.calls()[0].messages {
        println!("[{}] {}", m.role, m.content.lines().next().unwrap_or(""));
    }
    Ok(())
}
