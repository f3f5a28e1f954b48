//! JSON answers from messy replies: prose around the object, repeated
//! mentions, unknown keys, and a retry when no object can be found.

use std::sync::Arc;

use iclner::client::MockBackend;
use iclner::domain::{AnswerShape, EntitySchema, MentionLocalization, NerConfig};
use iclner::engine::NerModel;
use iclner::parsing::parse_json_answer_with;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let schema = EntitySchema::new([("location", "A place"), ("person", "A person")])?;
    let text = "Lima is big. Ana left Lima for Cusco.";
    let reply =
        "Sure! Here you go:\n```json\n{\"location\": [\"Lima\", \"Cusco\"], \"date\": []}\n```";

    for mode in [MentionLocalization::All, MentionLocalization::First] {
        let (doc, report) = parse_json_answer_with(reply, text, &schema, mode)?;
        println!("{mode:?}: {:?}", doc.annotations);
        for w in &report.warnings {
            println!("  warning {:?}: {}", w.kind, w.fragment);
        }
    }

    // The first reply has no JSON object, so the model is asked once more.
    let backend = Arc::new(MockBackend::sequence([
        "The location is Lima.",
        r#"{"location": ["Lima", "Cusco"], "person": ["Ana"]}"#,
    ]));
    let config = NerConfig {
        answer_shape: AnswerShape::Json,
        ..NerConfig::default()
    };
    let mut model = NerModel::new(config, backend.clone())?;
    model.contextualize(schema, &[])?;
    let prediction = model.predict_one(text)?;
    println!("\nafter retry: {:?}", prediction.document.annotations);
    println!("follow-up message: {:?}", backend.calls()[1].last_content());
    Ok(())
}
