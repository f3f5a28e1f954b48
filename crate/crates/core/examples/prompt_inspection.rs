//! Inspect the exact conversation for each configuration without sending it.

use std::sync::Arc;

use iclner::client::MockBackend;
use iclner::domain::{AnswerShape, EntitySchema, MultiTurnMode, NerConfig, PromptingMethod};
use iclner::engine::NerModel;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let schema = EntitySchema::new([("person", "A person name"), ("location", "A place")])?;
    let text = "Ana lives in Quito.";
    let variants = [
        (
            "single-turn, in-line",
            PromptingMethod::SingleTurn,
            MultiTurnMode::StepByStep,
            AnswerShape::Inline,
        ),
        (
            "single-turn, JSON",
            PromptingMethod::SingleTurn,
            MultiTurnMode::StepByStep,
            AnswerShape::Json,
        ),
        (
            "multi-turn, step by step",
            PromptingMethod::MultiTurn,
            MultiTurnMode::StepByStep,
            AnswerShape::Inline,
        ),
        (
            "multi-turn, final step",
            PromptingMethod::MultiTurn,
            MultiTurnMode::FinalStep,
            AnswerShape::Json,
        ),
    ];
    for (name, method, mode, shape) in variants {
        let config = NerConfig {
            prompting_method: method,
            multi_turn_mode: mode,
            answer_shape: shape,
            ..NerConfig::default()
        };
        let mut model = NerModel::new(config, Arc::new(MockBackend::matcher(vec![])))?;
        model.contextualize(schema.clone(), &[])?;
        println!("===== {name} =====");
        print!("{}", model.preview_conversation(text)?.transcript());
        println!();
    }
    Ok(())
}
