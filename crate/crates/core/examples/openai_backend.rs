//! Live annotation against an OpenAI-compatible endpoint.
//!
//! Reads `OPENAI_API_KEY`; set `OPENAI_BASE_URL` and `MODEL` to target another
//! server (for example a local vLLM or llama.cpp instance). Without a key the
//! example only prints the conversation it would send.

use std::sync::Arc;

use iclner::client::{BackendConfig, OpenAiBackend, API_KEY_ENV};
use iclner::domain::{EntitySchema, NerConfig, PromptingMethod};
use iclner::engine::NerModel;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let schema = EntitySchema::new([
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
    let config = NerConfig {
        prompting_method: PromptingMethod::MultiTurn,
        model: std::env::var("MODEL").unwrap_or_else(|_| iclner::domain::DEFAULT_MODEL.into()),
        ..NerConfig::default()
    };
    let mut backend_config = BackendConfig::from_env();
    if let Ok(url) = std::env::var("OPENAI_BASE_URL") {
        backend_config.base_url = url;
    }
    let backend = Arc::new(OpenAiBackend::new(&backend_config)?);
    let mut model = NerModel::new(config, backend)?.with_backend_config(backend_config.clone());
    model.contextualize(schema, &[])?;

    let texts = [
        "Fei-Fei Li is a female scientist born in China.",
        "Pedro Pereira is the president of Peru and the owner of Walmart.",
    ];
    if backend_config.api_key.is_none() {
        println!("{API_KEY_ENV} is not set; this is what would be sent for the first text:\n");
        print!("{}", model.preview_conversation(texts[0])?.transcript());
        return Ok(());
    }
    for (text, result) in texts.iter().zip(model.predict(&texts, 2)?) {
        match result {
            Ok(p) => println!("{}", serde_json::to_string(&p.document)?),
            Err(e) => eprintln!("{text}: {e}"),
        }
    }
    Ok(())
}
