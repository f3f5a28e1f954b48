//! Part-of-speech augmentation of the input text block.

use crate::client::{chat_complete, BackendConfig, BackendError, CompletionBackend};
use crate::domain::{NerConfig, PosMode};

use super::{ChatMessage, Conversation, PromptError, PromptTemplateSet, TemplateName};

/// `(token, tag)` pairs in text order.
pub type PosTags = Vec<(String, String)>;

/// An external part-of-speech tagger, e.g. a wrapper around a
/// statistical tagger or a subprocess.
pub trait PosTagger: Send + Sync {
    fn tag(&self, text: &str) -> Result<PosTags, String>;
}

impl<F> PosTagger for F
where
    F: Fn(&str) -> Result<PosTags, String> + Send + Sync,
{
    fn tag(&self, text: &str) -> Result<PosTags, String> {
        self(text)
    }
}

/// Whitespace-separated `token/TAG` pairs.
pub fn format_pos_tags(tags: &[(String, String)]) -> String {
    tags.iter()
        .map(|(token, tag)| format!("{token}/{tag}"))
        .collect::<Vec<_>>()
        .join(" ")
}

#[derive(Debug, thiserror::Error)]
pub enum PosError {
    #[error("part-of-speech hook failed: {0}")]
    Hook(String),
    #[error("part-of-speech mode is `via_hook` but no tagger was supplied")]
    MissingHook,
    #[error("part-of-speech request failed: {0}")]
    Backend(#[from] BackendError),
    #[error(transparent)]
    Prompt(#[from] PromptError),
}

/// Returns `text` followed by its POS block, or `text` unchanged when POS
/// augmentation is off.
///
/// `via_llm` issues one extra completion request asking the model to tag the
/// text; its reply is used verbatim (whitespace-normalized).
pub fn augment_with_pos(
    text: &str,
    config: &NerConfig,
    tagger: Option<&dyn PosTagger>,
    backend: &dyn CompletionBackend,
    backend_config: &BackendConfig,
    templates: &PromptTemplateSet,
) -> Result<String, PosError> {
    let pos = match config.pos_mode {
        PosMode::None => return Ok(text.to_string()),
        PosMode::ViaHook => {
            let tagger = tagger.ok_or(PosError::MissingHook)?;
            format_pos_tags(&tagger.tag(text).map_err(PosError::Hook)?)
        }
        PosMode::ViaLlm => {
            let mut conversation = Conversation::new(ChatMessage::system(
                templates.render(TemplateName::PosSystem, &[])?,
            ));
            conversation.push(ChatMessage::user(
                templates.render(TemplateName::PosRequest, &[("text", text)])?,
            ));
            let reply = chat_complete(backend, &conversation, backend_config)?;
            reply.split_whitespace().collect::<Vec<_>>().join(" ")
        }
    };
    Ok(templates.render(TemplateName::PosBlock, &[("text", text), ("pos", &pos)])?)
}
