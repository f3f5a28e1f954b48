//! Spanish prompts, plus a template override loaded from JSON.

use std::sync::Arc;

use iclner::client::MockBackend;
use iclner::domain::{EntitySchema, NerConfig};
use iclner::engine::NerModel;
use iclner::prompting::{PromptTemplateSet, TemplateName};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let schema = EntitySchema::new([
        ("persona", "Nombre de una persona"),
        ("lugar", "Nombre de un lugar: ciudad, país, región"),
    ])?;
    let config = NerConfig {
        language: "es".into(),
        ..NerConfig::default()
    };

    let templates = PromptTemplateSet::spanish()
        .with_overrides_json(r#"{"query": "Documento clínico:\n{text}"}"#)?;
    println!("query template: {:?}", templates.get(TemplateName::Query));

    // Unknown placeholders are rejected up front.
    let bad = PromptTemplateSet::spanish().with_overrides_json(r#"{"query": "{texto}"}"#);
    println!("bad override: {}", bad.unwrap_err());

    let backend = Arc::new(MockBackend::sequence([
        "<persona>Gabriela Mistral</persona> nació en <lugar>Vicuña</lugar>.",
    ]));
    let mut model = NerModel::new(config, backend)?.with_templates(templates);
    model.contextualize(schema, &[])?;
    print!(
        "{}",
        model
            .preview_conversation("Gabriela Mistral nació en Vicuña.")?
            .transcript()
    );

    let prediction = model.predict_one("Gabriela Mistral nació en Vicuña.")?;
    println!("\n{:?}", prediction.document.annotations);
    Ok(())
}
