//! The contextualize/predict workflow.
//!
//! A [`NerModel`] is configured once, contextualized with an entity schema
//! (and optional few-shot examples), then asked to annotate texts. Each
//! prediction composes a conversation, queries the backend and parses the
//! replies; batches run on a bounded pool of worker threads and come back in
//! input order.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};

use thiserror::Error;

use crate::client::{
    chat_complete, BackendConfig, BackendError, CompletionBackend, MatchRule, OpenAiBackend,
};
use crate::domain::{
    AnnotatedDocument, AnswerShape, DomainError, EntitySchema, MultiTurnMode, NerConfig, PosMode,
    PromptingMethod,
};
use crate::parsing::{
    merge_turn_annotations, parse_inline, parse_json_answer_with, ParseError, ParseReport,
};
use crate::prompting::{
    augment_with_pos, compose_system_prompt, next_turn, query_message, render_examples,
    render_full_answer, render_turn_answer, ChatMessage, Conversation, MultiTurnState, PosError,
    PosTagger, PromptError, PromptTemplateSet, TemplateName, TurnKind,
};

/// Placeholder shown for model replies in previews.
pub const RESPONSE_PLACEHOLDER: &str = "{response}";

#[derive(Debug, Error)]
pub enum NerError {
    #[error("the model must be contextualized before predicting")]
    NotContextualized,
    #[error("invalid example #{index}: {reason}")]
    InvalidExample { index: usize, reason: String },
    #[error("max concurrency must be at least 1")]
    ZeroConcurrency,
    #[error("completion could not be parsed, even after a retry: {0}")]
    Unparseable(ParseError),
    #[error(transparent)]
    Domain(#[from] DomainError),
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error(transparent)]
    Pos(#[from] PosError),
}

/// Annotations for one text plus what the parser had to say about them.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Prediction {
    pub document: AnnotatedDocument,
    pub report: ParseReport,
}

#[derive(Debug, Clone)]
struct Context {
    schema: EntitySchema,
    examples: Vec<AnnotatedDocument>,
    system: ChatMessage,
    demonstrations: Vec<(ChatMessage, ChatMessage)>,
}

pub struct NerModel {
    config: NerConfig,
    templates: PromptTemplateSet,
    backend: Arc<dyn CompletionBackend>,
    request: BackendConfig,
    pos_tagger: Option<Arc<dyn PosTagger>>,
    context: Option<Context>,
}

impl std::fmt::Debug for NerModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("NerModel")
            .field("config", &self.config)
            .field("contextualized", &self.context.is_some())
            .finish_non_exhaustive()
    }
}

type ParseResult = Result<(AnnotatedDocument, ParseReport), ParseError>;

impl NerModel {
    /// A model over any backend, using the built-in templates of
    /// `config.language`.
    pub fn new(config: NerConfig, backend: Arc<dyn CompletionBackend>) -> Result<Self, NerError> {
        config.validate()?;
        let templates = PromptTemplateSet::for_language(&config.language)?;
        let request = request_config(&config, BackendConfig::default());
        Ok(Self {
            config,
            templates,
            backend,
            request,
            pos_tagger: None,
            context: None,
        })
    }

    /// A model talking HTTP to an OpenAI-compatible endpoint, with the API key
    /// read from `OPENAI_API_KEY`.
    pub fn from_env(config: NerConfig) -> Result<Self, NerError> {
        let backend_config = request_config(&config, BackendConfig::from_env());
        let backend = OpenAiBackend::new(&backend_config)?;
        Ok(Self::new(config, Arc::new(backend))?.with_backend_config(backend_config))
    }

    /// Replaces the prompt templates; contextualize afterwards.
    pub fn with_templates(mut self, templates: PromptTemplateSet) -> Self {
        self.templates = templates;
        self.context = None;
        self
    }

    /// Request settings such as `max_tokens` and backoff. Model, temperature
    /// and retries always come from the [`NerConfig`].
    pub fn with_backend_config(mut self, backend_config: BackendConfig) -> Self {
        self.request = request_config(&self.config, backend_config);
        self
    }

    pub fn with_pos_tagger(mut self, tagger: Arc<dyn PosTagger>) -> Self {
        self.pos_tagger = Some(tagger);
        self
    }

    pub fn config(&self) -> &NerConfig {
        &self.config
    }

    pub fn templates(&self) -> &PromptTemplateSet {
        &self.templates
    }

    pub fn is_contextualized(&self) -> bool {
        self.context.is_some()
    }

    /// Whether demonstrations were supplied at contextualization.
    pub fn is_few_shot(&self) -> bool {
        self.context
            .as_ref()
            .is_some_and(|c| !c.examples.is_empty())
    }

    pub fn schema(&self) -> Option<&EntitySchema> {
        self.context.as_ref().map(|c| &c.schema)
    }

    /// Stores the schema and examples and precomposes the static prompt
    /// prefix. No examples means zero-shot.
    pub fn contextualize(
        &mut self,
        entities: EntitySchema,
        examples: &[AnnotatedDocument],
    ) -> Result<(), NerError> {
        for (index, example) in examples.iter().enumerate() {
            let invalid = |reason: String| NerError::InvalidExample { index, reason };
            example.validate().map_err(|e| invalid(e.to_string()))?;
            if let Some(a) = example
                .annotations
                .iter()
                .find(|a| !entities.contains(&a.label))
            {
                return Err(invalid(format!(
                    "label {:?} is not part of the entity schema",
                    a.label
                )));
            }
            if self.config.answer_shape == AnswerShape::Inline && example.has_overlaps() {
                return Err(invalid(
                    "overlapping annotations cannot be shown in the in-line answer shape".into(),
                ));
            }
        }
        let system = compose_system_prompt(&entities, &self.config, &self.templates)?;
        let demonstrations = render_examples(examples, &entities, &self.config, &self.templates)?;
        self.context = Some(Context {
            schema: entities,
            examples: examples.to_vec(),
            system,
            demonstrations,
        });
        Ok(())
    }

    fn context(&self) -> Result<&Context, NerError> {
        self.context.as_ref().ok_or(NerError::NotContextualized)
    }

    fn prefix(&self, ctx: &Context) -> Conversation {
        let mut conversation = Conversation::new(ctx.system.clone());
        for (user, assistant) in &ctx.demonstrations {
            conversation.push(user.clone());
            conversation.push(assistant.clone());
        }
        conversation
    }

    fn text_block(&self, text: &str) -> Result<String, NerError> {
        Ok(augment_with_pos(
            text,
            &self.config,
            self.pos_tagger.as_deref(),
            &*self.backend,
            &self.request,
            &self.templates,
        )?)
    }

    fn ask(&self, conversation: &mut Conversation) -> Result<String, NerError> {
        let reply = chat_complete(&*self.backend, conversation, &self.request)?;
        conversation.push(ChatMessage::assistant(reply.clone()));
        Ok(reply)
    }

    /// Asks, parses, and re-asks once when the reply cannot be parsed.
    fn ask_and_parse(
        &self,
        conversation: &mut Conversation,
        parse: impl Fn(&str) -> ParseResult,
    ) -> Result<(AnnotatedDocument, ParseReport), NerError> {
        let reply = self.ask(conversation)?;
        match parse(&reply) {
            Ok(parsed) => Ok(parsed),
            Err(_) => {
                conversation.push(ChatMessage::user(
                    self.templates.render(TemplateName::JsonRetry, &[])?,
                ));
                let retry = self.ask(conversation)?;
                parse(&retry).map_err(NerError::Unparseable)
            }
        }
    }

    fn parse_full(&self, schema: &EntitySchema, text: &str, reply: &str) -> ParseResult {
        match self.config.answer_shape {
            AnswerShape::Inline => Ok(parse_inline(reply, text, schema, None)),
            AnswerShape::Json => {
                parse_json_answer_with(reply, text, schema, self.config.mention_localization)
            }
        }
    }

    fn parse_turn(
        &self,
        schema: &EntitySchema,
        label: &str,
        text: &str,
        reply: &str,
    ) -> ParseResult {
        let single = schema
            .restrict_to(label)
            .expect("turn labels come from the schema");
        match (self.config.answer_shape, &self.config.delimiters) {
            (AnswerShape::Inline, Some(d)) => {
                Ok(parse_inline(reply, text, &single, Some((d, label))))
            }
            (AnswerShape::Inline, None) => Ok(parse_inline(reply, text, &single, None)),
            (AnswerShape::Json, _) => {
                parse_json_answer_with(reply, text, &single, self.config.mention_localization)
            }
        }
    }

    /// Annotates one text.
    pub fn predict_one(&self, text: &str) -> Result<Prediction, NerError> {
        let ctx = self.context()?;
        if text.trim().is_empty() {
            return Ok(Prediction {
                document: AnnotatedDocument::new(text),
                report: ParseReport::default(),
            });
        }
        let block = self.text_block(text)?;
        let mut conversation = self.prefix(ctx);

        let (document, report) = match self.config.prompting_method {
            PromptingMethod::SingleTurn => {
                conversation.push(query_message(&block, &self.templates)?);
                self.ask_and_parse(&mut conversation, |reply| {
                    self.parse_full(&ctx.schema, text, reply)
                })?
            }
            PromptingMethod::MultiTurn => {
                let mut state = MultiTurnState::new(block);
                let mut per_turn = Vec::new();
                let mut report = ParseReport::default();
                let mut final_doc = None;
                while let Some(turn) =
                    next_turn(&mut state, &ctx.schema, &self.config, &self.templates)?
                {
                    conversation.push(turn.message);
                    match (turn.kind, self.config.multi_turn_mode) {
                        (TurnKind::Entity(label), MultiTurnMode::StepByStep) => {
                            let (doc, turn_report) = self
                                .ask_and_parse(&mut conversation, |reply| {
                                    self.parse_turn(&ctx.schema, &label, text, reply)
                                })?;
                            per_turn.push(doc.annotations);
                            report.merge(turn_report);
                        }
                        (TurnKind::Entity(_), MultiTurnMode::FinalStep) => {
                            self.ask(&mut conversation)?;
                        }
                        (TurnKind::Final, _) => {
                            let (doc, turn_report) = self
                                .ask_and_parse(&mut conversation, |reply| {
                                    self.parse_full(&ctx.schema, text, reply)
                                })?;
                            final_doc = Some(doc);
                            report.merge(turn_report);
                        }
                    }
                }
                let document = match final_doc {
                    Some(doc) => doc,
                    None => AnnotatedDocument {
                        text: text.to_string(),
                        annotations: merge_turn_annotations(&per_turn),
                    },
                };
                report.recovered = document.annotations.len();
                (document, report)
            }
        };
        debug_assert!(document.validate().is_ok());
        Ok(Prediction { document, report })
    }

    /// Annotates many texts with at most `max_concurrency` in flight.
    ///
    /// Results are in input order; a failing text yields an `Err` in its slot
    /// without affecting the others.
    pub fn predict<S: AsRef<str> + Sync>(
        &self,
        texts: &[S],
        max_concurrency: usize,
    ) -> Result<Vec<Result<Prediction, NerError>>, NerError> {
        self.context()?;
        if max_concurrency == 0 {
            return Err(NerError::ZeroConcurrency);
        }
        let workers = max_concurrency.min(texts.len());
        if workers <= 1 {
            return Ok(texts.iter().map(|t| self.predict_one(t.as_ref())).collect());
        }
        let next = AtomicUsize::new(0);
        let slots: Vec<Mutex<Option<Result<Prediction, NerError>>>> =
            texts.iter().map(|_| Mutex::new(None)).collect();
        std::thread::scope(|scope| {
            for _ in 0..workers {
                scope.spawn(|| loop {
                    let i = next.fetch_add(1, Ordering::Relaxed);
                    let Some(text) = texts.get(i) else { break };
                    let result = self.predict_one(text.as_ref());
                    *slots[i].lock().expect("result slot poisoned") = Some(result);
                });
            }
        });
        Ok(slots
            .into_iter()
            .map(|slot| {
                slot.into_inner()
                    .expect("result slot poisoned")
                    .expect("every slot is filled")
            })
            .collect())
    }

    /// Like [`predict`](Self::predict) with the configured concurrency.
    pub fn predict_batch<S: AsRef<str> + Sync>(
        &self,
        texts: &[S],
    ) -> Result<Vec<Result<Prediction, NerError>>, NerError> {
        self.predict(texts, self.config.max_concurrency)
    }

    /// The conversation that would be submitted for `text`, with
    /// [`RESPONSE_PLACEHOLDER`] standing in for every model reply. Never
    /// contacts the backend: LLM-generated POS tags show as `{pos}`.
    pub fn preview_conversation(&self, text: &str) -> Result<Conversation, NerError> {
        let ctx = self.context()?;
        let block = match self.config.pos_mode {
            PosMode::ViaLlm => self
                .templates
                .render(TemplateName::PosBlock, &[("text", text), ("pos", "{pos}")])?,
            _ => self.text_block(text)?,
        };
        let mut conversation = self.prefix(ctx);
        match self.config.prompting_method {
            PromptingMethod::SingleTurn => {
                conversation.push(query_message(&block, &self.templates)?);
                conversation.push(ChatMessage::assistant(RESPONSE_PLACEHOLDER));
            }
            PromptingMethod::MultiTurn => {
                let mut state = MultiTurnState::new(block);
                while let Some(turn) =
                    next_turn(&mut state, &ctx.schema, &self.config, &self.templates)?
                {
                    conversation.push(turn.message);
                    conversation.push(ChatMessage::assistant(RESPONSE_PLACEHOLDER));
                }
            }
        }
        Ok(conversation)
    }

    /// Matcher-mode mock rules under which the backend answers every request
    /// for `docs` exactly as the given annotations dictate.
    ///
    /// Supports configurations without LLM POS tagging.
    pub fn scripted_rules(&self, docs: &[AnnotatedDocument]) -> Result<Vec<MatchRule>, NerError> {
        let ctx = self.context()?;
        if self.config.pos_mode == PosMode::ViaLlm {
            return Err(DomainError::InvalidConfig(
                "scripted rules cannot cover part-of-speech requests".into(),
            )
            .into());
        }
        let mut rules = Vec::new();
        for doc in docs {
            if doc.text.trim().is_empty() {
                continue;
            }
            let block = self.text_block(&doc.text)?;
            match self.config.prompting_method {
                PromptingMethod::SingleTurn => {
                    let query = query_message(&block, &self.templates)?;
                    let answer = render_full_answer(doc, &ctx.schema, &self.config)?;
                    rules.push(MatchRule::new(answer).contains(query.content));
                }
                PromptingMethod::MultiTurn => {
                    let mut state = MultiTurnState::new(block);
                    let mut first: Option<String> = None;
                    while let Some(turn) =
                        next_turn(&mut state, &ctx.schema, &self.config, &self.templates)?
                    {
                        let answer = match &turn.kind {
                            TurnKind::Entity(label) => {
                                render_turn_answer(doc, label, &ctx.schema, &self.config)?
                            }
                            TurnKind::Final => render_full_answer(doc, &ctx.schema, &self.config)?,
                        };
                        let anchor = first.get_or_insert_with(|| turn.message.content.clone());
                        rules.push(
                            MatchRule::new(answer)
                                .contains(anchor.clone())
                                .last_contains(turn.message.content),
                        );
                    }
                }
            }
        }
        Ok(rules)
    }
}

fn request_config(config: &NerConfig, base: BackendConfig) -> BackendConfig {
    BackendConfig {
        model: config.model.clone(),
        temperature: config.temperature,
        max_retries: config.max_retries,
        ..base
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::client::{MockBackend, MockReply};
    use crate::domain::{Annotation, Delimiters};

    const FEI_FEI: &str = "Fei-Fei Li is a female scientist born in China.";

    fn fig2_schema() -> EntitySchema {
        EntitySchema::new([
            ("person", "A person name, it can include first and last names, for example: John, Fabian or Mark Miranda"),
            ("organization", "An organization name, it can be a company, a government agency, etc."),
            ("location", "A location name, it can be a city, a country, etc."),
        ])
        .unwrap()
    }

    fn model(config: NerConfig, mock: &Arc<MockBackend>) -> NerModel {
        NerModel::new(config, mock.clone())
            .unwrap()
            .with_backend_config(BackendConfig {
                initial_backoff_ms: 1,
                ..BackendConfig::default()
            })
    }

    fn triples(doc: &AnnotatedDocument) -> Vec<(usize, usize, &str)> {
        doc.annotations
            .iter()
            .map(|a| (a.start, a.end, a.label.as_str()))
            .collect()
    }

    #[test]
    fn predict_requires_contextualize() {
        let mock = Arc::new(MockBackend::sequence(["x"]));
        let m = model(NerConfig::default(), &mock);
        assert!(matches!(
            m.predict_one("x"),
            Err(NerError::NotContextualized)
        ));
        assert!(matches!(
            m.predict(&["x"], 1),
            Err(NerError::NotContextualized)
        ));
    }

    #[test]
    fn zero_shot_inline() {
        let mock = Arc::new(MockBackend::sequence([
            "<person>Fei-Fei Li</person> is a female scientist born in <location>China</location>",
        ]));
        let mut m = model(NerConfig::default(), &mock);
        m.contextualize(fig2_schema(), &[]).unwrap();
        assert!(!m.is_few_shot());
        let p = m.predict_one(FEI_FEI).unwrap();
        assert_eq!(
            triples(&p.document),
            [(0, 10, "person"), (41, 46, "location")]
        );
        let calls = mock.calls();
        assert_eq!(calls.len(), 1);
        assert_eq!(calls[0].messages.len(), 2);
        assert!(calls[0].messages[1].content.contains(FEI_FEI));
    }

    #[test]
    fn empty_text_needs_no_request() {
        let mock = Arc::new(MockBackend::sequence(["unused"]));
        let mut m = model(NerConfig::default(), &mock);
        m.contextualize(fig2_schema(), &[]).unwrap();
        let p = m.predict_one("").unwrap();
        assert!(p.document.annotations.is_empty());
        assert_eq!(mock.call_count(), 0);
    }

    #[test]
    fn contextualize_rejects_bad_examples() {
        let mock = Arc::new(MockBackend::sequence(["x"]));
        let mut m = model(NerConfig::default(), &mock);
        let schema = EntitySchema::new([("person", "p")]).unwrap();
        let city = AnnotatedDocument::with_annotations("Lima", [Annotation::new(0, 4, "city")]);
        assert!(matches!(
            m.contextualize(schema.clone(), &[city]),
            Err(NerError::InvalidExample { index: 0, .. })
        ));
        let overlapping = AnnotatedDocument::with_annotations(
            "Ann Lee",
            [
                Annotation::new(0, 7, "person"),
                Annotation::new(4, 7, "person"),
            ],
        );
        assert!(matches!(
            m.contextualize(schema.clone(), std::slice::from_ref(&overlapping)),
            Err(NerError::InvalidExample { .. })
        ));
        let mut json = model(
            NerConfig {
                answer_shape: AnswerShape::Json,
                ..NerConfig::default()
            },
            &mock,
        );
        assert!(json.contextualize(schema, &[overlapping]).is_ok());
        assert!(json.is_few_shot());
    }

    #[test]
    fn multi_turn_step_by_step_with_delimiters() {
        let text = "Pedro Pereira is the president of Peru.";
        let schema = EntitySchema::new([("location", "l"), ("person", "p")]).unwrap();
        let mock = Arc::new(MockBackend::matcher(vec![
            MatchRule::new("Pedro Pereira is the president of @@Peru##.")
                .last_contains("entity location"),
            MatchRule::new("@@Pedro Pereira## is the president of Peru.")
                .last_contains("entity person"),
        ]));
        let config = NerConfig {
            prompting_method: PromptingMethod::MultiTurn,
            delimiters: Some(Delimiters::new("@@", "##")),
            ..NerConfig::default()
        };
        let mut m = model(config, &mock);
        m.contextualize(schema, &[]).unwrap();
        let p = m.predict_one(text).unwrap();
        assert_eq!(
            triples(&p.document),
            [(0, 13, "person"), (34, 38, "location")]
        );
        assert_eq!(mock.call_count(), 2);
        // Second request carries the first turn's reply.
        let second = &mock.calls()[1];
        assert_eq!(second.messages.len(), 4);
        assert_eq!(
            second.messages[2].content,
            "Pedro Pereira is the president of @@Peru##."
        );
    }

    #[test]
    fn multi_turn_final_step_uses_last_reply_only() {
        let mock = Arc::new(MockBackend::sequence([
            "<person>Fei-Fei Li</person> is a female scientist born in China.",
            "Fei-Fei Li is a female scientist born in China.",
            "Fei-Fei Li is a female scientist born in <location>China</location>.",
            "<person>Fei-Fei Li</person> is a female scientist born in <location>China</location>.",
        ]));
        let config = NerConfig {
            prompting_method: PromptingMethod::MultiTurn,
            multi_turn_mode: MultiTurnMode::FinalStep,
            ..NerConfig::default()
        };
        let mut m = model(config, &mock);
        m.contextualize(fig2_schema(), &[]).unwrap();
        let p = m.predict_one(FEI_FEI).unwrap();
        assert_eq!(
            triples(&p.document),
            [(0, 10, "person"), (41, 46, "location")]
        );
        assert_eq!(mock.call_count(), 4);
    }

    #[test]
    fn json_parse_failure_is_retried_once() {
        let mock = Arc::new(MockBackend::sequence([
            "I think the person is Fei-Fei Li.",
            r#"{"person": ["Fei-Fei Li"], "organization": [], "location": ["China"]}"#,
        ]));
        let config = NerConfig {
            answer_shape: AnswerShape::Json,
            ..NerConfig::default()
        };
        let mut m = model(config.clone(), &mock);
        m.contextualize(fig2_schema(), &[]).unwrap();
        let p = m.predict_one(FEI_FEI).unwrap();
        assert_eq!(
            triples(&p.document),
            [(0, 10, "person"), (41, 46, "location")]
        );
        let retry = &mock.calls()[1];
        assert_eq!(retry.messages.len(), 4);
        assert!(retry.last_content().contains("could not be parsed"));

        let failing = Arc::new(MockBackend::sequence(["nope", "still nope"]));
        let mut m = model(config, &failing);
        m.contextualize(fig2_schema(), &[]).unwrap();
        assert!(matches!(
            m.predict_one(FEI_FEI),
            Err(NerError::Unparseable(_))
        ));
    }

    #[test]
    fn batch_isolates_failures_and_keeps_order() {
        let mock = Arc::new(MockBackend::matcher(vec![
            MatchRule::new("<person>Ann</person> runs").contains("Ann runs"),
            MatchRule::new(MockReply::status(400)).contains("Bob runs"),
            MatchRule::new("<person>Cy</person> runs").contains("Cy runs"),
        ]));
        let mut m = model(NerConfig::default(), &mock);
        m.contextualize(fig2_schema(), &[]).unwrap();
        let texts = ["Ann runs", "Bob runs", "Cy runs"];
        for concurrency in [1, 2, 8] {
            let results = m.predict(&texts, concurrency).unwrap();
            assert_eq!(results.len(), 3);
            assert_eq!(
                triples(&results[0].as_ref().unwrap().document),
                [(0, 3, "person")]
            );
            assert!(matches!(
                results[1],
                Err(NerError::Backend(BackendError::Http { status: 400, .. }))
            ));
            assert_eq!(
                triples(&results[2].as_ref().unwrap().document),
                [(0, 2, "person")]
            );
        }
        assert!(m.predict::<&str>(&[], 4).unwrap().is_empty());
        assert!(matches!(
            m.predict(&texts, 0),
            Err(NerError::ZeroConcurrency)
        ));
    }

    #[test]
    fn pos_hook_augments_query_only() {
        let mock = Arc::new(MockBackend::sequence(["China won."]));
        let config = NerConfig {
            pos_mode: PosMode::ViaHook,
            ..NerConfig::default()
        };
        let hook = |text: &str| -> Result<Vec<(String, String)>, String> {
            Ok(text
                .split_whitespace()
                .map(|t| (t.to_string(), "X".to_string()))
                .collect())
        };
        let mut m = model(config, &mock).with_pos_tagger(Arc::new(hook));
        m.contextualize(fig2_schema(), &[]).unwrap();
        m.predict_one("China won.").unwrap();
        assert!(mock.calls()[0].last_content().contains("China/X won./X"));
    }

    #[test]
    fn pos_via_llm_adds_one_request() {
        let mock = Arc::new(MockBackend::sequence([
            "China/NNP won/VBD ./.",
            "<location>China</location> won.",
        ]));
        let config = NerConfig {
            pos_mode: PosMode::ViaLlm,
            ..NerConfig::default()
        };
        let mut m = model(config, &mock);
        m.contextualize(fig2_schema(), &[]).unwrap();
        let p = m.predict_one("China won.").unwrap();
        assert_eq!(triples(&p.document), [(0, 5, "location")]);
        assert_eq!(mock.call_count(), 2);
        assert!(mock.calls()[1]
            .last_content()
            .contains("China/NNP won/VBD ./."));
    }

    #[test]
    fn preview_never_calls_backend() {
        let mock = Arc::new(MockBackend::sequence(["unused"]));
        let config = NerConfig {
            prompting_method: PromptingMethod::MultiTurn,
            pos_mode: PosMode::ViaLlm,
            ..NerConfig::default()
        };
        let mut m = model(config, &mock);
        m.contextualize(fig2_schema(), &[]).unwrap();
        let conv = m.preview_conversation(FEI_FEI).unwrap();
        assert_eq!(mock.call_count(), 0);
        // system + 3 × (user, assistant)
        assert_eq!(conv.len(), 7);
        assert!(conv.messages()[1].content.contains("{pos}"));
        assert_eq!(conv.messages()[6].content, RESPONSE_PLACEHOLDER);
    }

    #[test]
    fn scripted_rules_reproduce_gold() {
        let gold = AnnotatedDocument::with_annotations(
            FEI_FEI,
            [
                Annotation::new(0, 10, "person"),
                Annotation::new(41, 46, "location"),
            ],
        );
        for (method, shape) in [
            (PromptingMethod::SingleTurn, AnswerShape::Inline),
            (PromptingMethod::SingleTurn, AnswerShape::Json),
            (PromptingMethod::MultiTurn, AnswerShape::Inline),
            (PromptingMethod::MultiTurn, AnswerShape::Json),
        ] {
            let config = NerConfig {
                prompting_method: method,
                answer_shape: shape,
                ..NerConfig::default()
            };
            let placeholder = Arc::new(MockBackend::sequence(["unused"]));
            let mut builder = model(config.clone(), &placeholder);
            builder.contextualize(fig2_schema(), &[]).unwrap();
            let rules = builder.scripted_rules(std::slice::from_ref(&gold)).unwrap();
            let mock = Arc::new(MockBackend::matcher(rules));
            let mut m = model(config, &mock);
            m.contextualize(fig2_schema(), &[]).unwrap();
            let p = m.predict_one(FEI_FEI).unwrap();
            assert_eq!(p.document, gold, "{method:?}/{shape:?}");
            assert!(p.report.warnings.is_empty());
        }
    }
}
