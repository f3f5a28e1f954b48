//! Prompt composition: system prompts, few-shot demonstrations and the
//! per-turn user messages of every prompting method and answer shape.

mod pos;
mod render;
mod templates;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{
    AnnotatedDocument, AnswerShape, DomainError, EntitySchema, MultiTurnMode, NerConfig,
    PromptingMethod, ValidationErrors,
};

pub use pos::{augment_with_pos, format_pos_tags, PosError, PosTagger, PosTags};
pub(crate) use render::json_string;
pub use render::{render_inline, render_json};
pub use templates::{referenced_placeholders, PromptTemplateSet, TemplateName};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PromptError {
    #[error("template {template:?} references unbound placeholder {{{placeholder}}}")]
    UnboundPlaceholder {
        template: String,
        placeholder: String,
    },
    #[error("template {template:?} references unknown placeholder {{{placeholder}}}")]
    UnknownPlaceholder {
        template: String,
        placeholder: String,
    },
    #[error("unknown template name {0:?}")]
    UnknownTemplate(String),
    #[error("unknown template language {0:?}")]
    UnknownLanguage(String),
    #[error("invalid template file: {0}")]
    TemplateFile(String),
    #[error("overlapping annotations cannot be rendered in-line")]
    OverlappingAnnotations,
    #[error("custom delimiters can only render a single-label document")]
    DelimitersWithMultipleLabels,
    #[error("label {0:?} is not part of the entity schema")]
    LabelOutsideSchema(String),
    #[error("invalid document: {0}")]
    InvalidDocument(ValidationErrors),
    #[error("invalid configuration: {0}")]
    Config(#[from] DomainError),
    #[error("multi-turn prompting is not enabled")]
    NotMultiTurn,
    #[error("all turns have already been issued")]
    TurnsExhausted,
    #[error("part-of-speech tagging failed: {0}")]
    PosTagging(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Role::System => "system",
            Role::User => "user",
            Role::Assistant => "assistant",
        })
    }
}

/// One role-tagged chat message, serialized exactly as the chat-completions
/// wire protocol expects.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub content: String,
}

impl ChatMessage {
    pub fn system(content: impl Into<String>) -> Self {
        Self {
            role: Role::System,
            content: content.into(),
        }
    }

    pub fn user(content: impl Into<String>) -> Self {
        Self {
            role: Role::User,
            content: content.into(),
        }
    }

    pub fn assistant(content: impl Into<String>) -> Self {
        Self {
            role: Role::Assistant,
            content: content.into(),
        }
    }
}

/// Ordered messages exchanged with a backend.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Conversation {
    messages: Vec<ChatMessage>,
}

impl Conversation {
    pub fn new(system: ChatMessage) -> Self {
        Self {
            messages: vec![system],
        }
    }

    pub fn push(&mut self, message: ChatMessage) {
        self.messages.push(message);
    }

    pub fn messages(&self) -> &[ChatMessage] {
        &self.messages
    }

    pub fn last(&self) -> Option<&ChatMessage> {
        self.messages.last()
    }

    pub fn len(&self) -> usize {
        self.messages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.messages.is_empty()
    }

    /// Checks the shape a backend accepts: a leading system message, then
    /// strictly alternating user/assistant messages ending with a user message.
    pub fn check_submittable(&self) -> Result<(), String> {
        let (first, rest) = self
            .messages
            .split_first()
            .ok_or_else(|| "conversation is empty".to_string())?;
        if first.role != Role::System {
            return Err("the first message must have the system role".into());
        }
        if first.content.is_empty() {
            return Err("the system message is empty".into());
        }
        if rest.is_empty() {
            return Err("the conversation has no user message".into());
        }
        for (i, m) in rest.iter().enumerate() {
            let expected = if i % 2 == 0 {
                Role::User
            } else {
                Role::Assistant
            };
            if m.role != expected {
                return Err(format!(
                    "message {} has role {} but {} was expected",
                    i + 1,
                    m.role,
                    expected
                ));
            }
            if m.role == Role::User && m.content.is_empty() {
                return Err(format!("user message {} is empty", i + 1));
            }
        }
        if rest.len() % 2 == 0 {
            return Err("the conversation must end with a user message".into());
        }
        Ok(())
    }

    /// Human-readable transcript, one role header per message.
    pub fn transcript(&self) -> String {
        let mut out = String::new();
        for (i, m) in self.messages.iter().enumerate() {
            if i > 0 {
                out.push('\n');
            }
            out.push_str(&format!("[{}]\n{}\n", m.role, m.content));
        }
        out
    }
}

impl From<Vec<ChatMessage>> for Conversation {
    fn from(messages: Vec<ChatMessage>) -> Self {
        Self { messages }
    }
}

fn labels_list(schema: &EntitySchema) -> String {
    schema.labels().collect::<Vec<_>>().join(", ")
}

fn tag_example(schema: &EntitySchema) -> String {
    schema
        .labels()
        .map(|l| format!("<{l}>…</{l}>"))
        .collect::<Vec<_>>()
        .join(", ")
}

fn json_example(schema: &EntitySchema) -> String {
    let mut out = String::from("{");
    for (i, label) in schema.labels().enumerate() {
        if i > 0 {
            out.push_str(", ");
        }
        out.push_str(&json_string(label));
        if i == 0 {
            out.push_str(": [\"mention 1\", \"mention 2\"]");
        } else {
            out.push_str(": []");
        }
    }
    out.push('}');
    out
}

/// Instructions describing the answer the model must produce when it
/// annotates every label at once (single-turn, or the final step).
fn full_answer_instructions(
    schema: &EntitySchema,
    config: &NerConfig,
    templates: &PromptTemplateSet,
) -> Result<String, PromptError> {
    match config.answer_shape {
        AnswerShape::Inline => templates.render(
            TemplateName::InlineInstructions,
            &[("tag_example", &tag_example(schema))],
        ),
        AnswerShape::Json => templates.render(
            TemplateName::JsonInstructions,
            &[("json_example", &json_example(schema))],
        ),
    }
}

/// Builds the system message: task statement, every label with its
/// description, and the answer-shape contract.
pub fn compose_system_prompt(
    schema: &EntitySchema,
    config: &NerConfig,
    templates: &PromptTemplateSet,
) -> Result<ChatMessage, PromptError> {
    config.validate()?;
    let definitions = schema
        .entries()
        .map(|(label, description)| {
            templates.render(
                TemplateName::EntityDefinition,
                &[("label", label), ("description", description)],
            )
        })
        .collect::<Result<Vec<_>, _>>()?
        .join("\n");
    let answer = match (&config.delimiters, config.prompting_method) {
        (Some(d), PromptingMethod::MultiTurn) => templates.render(
            TemplateName::DelimiterInstructions,
            &[("open", &d.open), ("close", &d.close)],
        )?,
        _ => full_answer_instructions(schema, config, templates)?,
    };
    let name = match config.prompting_method {
        PromptingMethod::SingleTurn => TemplateName::SystemSingle,
        PromptingMethod::MultiTurn => TemplateName::SystemMulti,
    };
    let content = templates.render(
        name,
        &[
            ("labels", &labels_list(schema)),
            ("entity_definitions", &definitions),
            ("answer_instructions", &answer),
        ],
    )?;
    Ok(ChatMessage::system(content))
}

/// The single-turn user message carrying the (possibly POS-augmented) text.
pub fn query_message(
    text: &str,
    templates: &PromptTemplateSet,
) -> Result<ChatMessage, PromptError> {
    Ok(ChatMessage::user(
        templates.render(TemplateName::Query, &[("text", text)])?,
    ))
}

/// The answer a perfect model would give for `doc` when every label is
/// requested at once.
pub fn render_full_answer(
    doc: &AnnotatedDocument,
    schema: &EntitySchema,
    config: &NerConfig,
) -> Result<String, PromptError> {
    match config.answer_shape {
        AnswerShape::Inline => render_inline(doc, None),
        AnswerShape::Json => render_json(doc, schema),
    }
}

/// The answer a perfect model would give in the turn dedicated to `label`.
pub fn render_turn_answer(
    doc: &AnnotatedDocument,
    label: &str,
    schema: &EntitySchema,
    config: &NerConfig,
) -> Result<String, PromptError> {
    let only = doc.filter_label(label);
    match config.answer_shape {
        AnswerShape::Inline => render_inline(&only, config.delimiters.as_ref()),
        AnswerShape::Json => {
            let single = schema
                .restrict_to(label)
                .ok_or_else(|| PromptError::LabelOutsideSchema(label.to_string()))?;
            render_json(&only, &single)
        }
    }
}

/// Turns few-shot examples into user/assistant demonstration pairs.
///
/// Single-turn: one pair per example. Multi-turn: one pair per schema label,
/// plus the final consolidated pair in final-step mode.
pub fn render_examples(
    examples: &[AnnotatedDocument],
    schema: &EntitySchema,
    config: &NerConfig,
    templates: &PromptTemplateSet,
) -> Result<Vec<(ChatMessage, ChatMessage)>, PromptError> {
    let mut pairs = Vec::new();
    for example in examples {
        example.validate().map_err(PromptError::InvalidDocument)?;
        if let Some(a) = example
            .annotations
            .iter()
            .find(|a| !schema.contains(&a.label))
        {
            return Err(PromptError::LabelOutsideSchema(a.label.clone()));
        }
        match config.prompting_method {
            PromptingMethod::SingleTurn => {
                pairs.push((
                    query_message(&example.text, templates)?,
                    ChatMessage::assistant(render_full_answer(example, schema, config)?),
                ));
            }
            PromptingMethod::MultiTurn => {
                let mut state = MultiTurnState::new(example.text.clone());
                while let Some(turn) = next_turn(&mut state, schema, config, templates)? {
                    let answer = match &turn.kind {
                        TurnKind::Entity(label) => {
                            render_turn_answer(example, label, schema, config)?
                        }
                        TurnKind::Final => render_full_answer(example, schema, config)?,
                    };
                    pairs.push((turn.message, ChatMessage::assistant(answer)));
                }
            }
        }
    }
    Ok(pairs)
}

/// Progress through the turns of one multi-turn conversation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MultiTurnState {
    text: String,
    next_label: usize,
    final_issued: bool,
    done: bool,
}

impl MultiTurnState {
    /// `text` is the input block shown in the first turn, already
    /// POS-augmented when that is enabled.
    pub fn new(text: impl Into<String>) -> Self {
        Self {
            text: text.into(),
            next_label: 0,
            final_issued: false,
            done: false,
        }
    }

    pub fn is_done(&self) -> bool {
        self.done
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TurnKind {
    /// The turn annotating a single label.
    Entity(String),
    /// The consolidated all-entity request of final-step mode.
    Final,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Turn {
    pub kind: TurnKind,
    pub message: ChatMessage,
}

/// Yields the user message of the next turn, or `None` once every turn has
/// been issued. Calling again after `None` is an error.
pub fn next_turn(
    state: &mut MultiTurnState,
    schema: &EntitySchema,
    config: &NerConfig,
    templates: &PromptTemplateSet,
) -> Result<Option<Turn>, PromptError> {
    if config.prompting_method != PromptingMethod::MultiTurn {
        return Err(PromptError::NotMultiTurn);
    }
    if state.done {
        return Err(PromptError::TurnsExhausted);
    }
    if let Some(label) = schema.labels().nth(state.next_label) {
        let content = if state.next_label == 0 {
            templates.render(
                TemplateName::TurnFirst,
                &[("text", &state.text), ("label", label)],
            )?
        } else {
            templates.render(TemplateName::TurnNext, &[("label", label)])?
        };
        state.next_label += 1;
        return Ok(Some(Turn {
            kind: TurnKind::Entity(label.to_string()),
            message: ChatMessage::user(content),
        }));
    }
    if config.multi_turn_mode == MultiTurnMode::FinalStep && !state.final_issued {
        state.final_issued = true;
        let content = templates.render(
            TemplateName::FinalStep,
            &[
                ("labels", &labels_list(schema)),
                (
                    "answer_instructions",
                    &full_answer_instructions(schema, config, templates)?,
                ),
            ],
        )?;
        return Ok(Some(Turn {
            kind: TurnKind::Final,
            message: ChatMessage::user(content),
        }));
    }
    state.done = true;
    Ok(None)
}
