//! Named prompt templates with `{placeholder}` substitution.
//!
//! `{{` and `}}` render literal braces. A `{` that does not open a
//! `{identifier}` placeholder is kept literally, so JSON snippets can be
//! written without escaping.

use std::collections::BTreeMap;
use std::fmt;

use super::PromptError;

/// Every template a [`PromptTemplateSet`] carries, with the placeholders each
/// one may reference.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum TemplateName {
    SystemSingle,
    SystemMulti,
    EntityDefinition,
    InlineInstructions,
    DelimiterInstructions,
    JsonInstructions,
    Query,
    TurnFirst,
    TurnNext,
    FinalStep,
    PosBlock,
    PosSystem,
    PosRequest,
    JsonRetry,
}

impl TemplateName {
    pub const ALL: [TemplateName; 14] = [
        TemplateName::SystemSingle,
        TemplateName::SystemMulti,
        TemplateName::EntityDefinition,
        TemplateName::InlineInstructions,
        TemplateName::DelimiterInstructions,
        TemplateName::JsonInstructions,
        TemplateName::Query,
        TemplateName::TurnFirst,
        TemplateName::TurnNext,
        TemplateName::FinalStep,
        TemplateName::PosBlock,
        TemplateName::PosSystem,
        TemplateName::PosRequest,
        TemplateName::JsonRetry,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            TemplateName::SystemSingle => "system_single",
            TemplateName::SystemMulti => "system_multi",
            TemplateName::EntityDefinition => "entity_definition",
            TemplateName::InlineInstructions => "inline_instructions",
            TemplateName::DelimiterInstructions => "delimiter_instructions",
            TemplateName::JsonInstructions => "json_instructions",
            TemplateName::Query => "query",
            TemplateName::TurnFirst => "turn_first",
            TemplateName::TurnNext => "turn_next",
            TemplateName::FinalStep => "final_step",
            TemplateName::PosBlock => "pos_block",
            TemplateName::PosSystem => "pos_system",
            TemplateName::PosRequest => "pos_request",
            TemplateName::JsonRetry => "json_retry",
        }
    }

    pub fn parse(name: &str) -> Option<TemplateName> {
        Self::ALL.into_iter().find(|t| t.as_str() == name)
    }

    pub fn placeholders(self) -> &'static [&'static str] {
        match self {
            TemplateName::SystemSingle | TemplateName::SystemMulti => {
                &["labels", "entity_definitions", "answer_instructions"]
            }
            TemplateName::EntityDefinition => &["label", "description"],
            TemplateName::InlineInstructions => &["tag_example"],
            TemplateName::DelimiterInstructions => &["open", "close"],
            TemplateName::JsonInstructions => &["json_example"],
            TemplateName::Query => &["text"],
            TemplateName::TurnFirst => &["text", "label"],
            TemplateName::TurnNext => &["label"],
            TemplateName::FinalStep => &["labels", "answer_instructions"],
            TemplateName::PosBlock => &["text", "pos"],
            TemplateName::PosSystem => &[],
            TemplateName::PosRequest => &["text"],
            TemplateName::JsonRetry => &[],
        }
    }
}

impl fmt::Display for TemplateName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Segment {
    Literal(String),
    Placeholder(String),
}

fn is_ident_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_'
}

fn parse_segments(template: &str) -> Vec<Segment> {
    let mut segments = Vec::new();
    let mut literal = String::new();
    let mut rest = template;
    while let Some(c) = rest.chars().next() {
        if rest.starts_with("{{") {
            literal.push('{');
            rest = &rest[2..];
            continue;
        }
        if rest.starts_with("}}") {
            literal.push('}');
            rest = &rest[2..];
            continue;
        }
        if c == '{' {
            let ident_len = rest[1..]
                .chars()
                .take_while(|&c| is_ident_char(c))
                .map(char::len_utf8)
                .sum::<usize>();
            if ident_len > 0 && rest[1 + ident_len..].starts_with('}') {
                if !literal.is_empty() {
                    segments.push(Segment::Literal(std::mem::take(&mut literal)));
                }
                segments.push(Segment::Placeholder(rest[1..1 + ident_len].to_string()));
                rest = &rest[ident_len + 2..];
                continue;
            }
        }
        literal.push(c);
        rest = &rest[c.len_utf8()..];
    }
    if !literal.is_empty() {
        segments.push(Segment::Literal(literal));
    }
    segments
}

/// Placeholders referenced by a template string, in order of appearance.
pub fn referenced_placeholders(template: &str) -> Vec<String> {
    parse_segments(template)
        .into_iter()
        .filter_map(|s| match s {
            Segment::Placeholder(p) => Some(p),
            Segment::Literal(_) => None,
        })
        .collect()
}

/// A complete set of prompt templates for one language or domain.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplateSet {
    templates: BTreeMap<TemplateName, String>,
}

impl Default for PromptTemplateSet {
    fn default() -> Self {
        Self::english()
    }
}

impl PromptTemplateSet {
    pub fn english() -> Self {
        Self::from_pairs(ENGLISH)
    }

    pub fn spanish() -> Self {
        Self::from_pairs(SPANISH)
    }

    /// Built-in set for a language identifier (`en`, `es`).
    pub fn for_language(id: &str) -> Result<Self, PromptError> {
        match id.to_ascii_lowercase().as_str() {
            "en" | "english" => Ok(Self::english()),
            "es" | "spanish" | "español" => Ok(Self::spanish()),
            _ => Err(PromptError::UnknownLanguage(id.to_string())),
        }
    }

    fn from_pairs(pairs: &[(TemplateName, &str)]) -> Self {
        Self {
            templates: pairs.iter().map(|(n, t)| (*n, t.to_string())).collect(),
        }
    }

    pub fn get(&self, name: TemplateName) -> &str {
        self.templates.get(&name).map(String::as_str).unwrap_or("")
    }

    /// Replaces one template, rejecting placeholders the template cannot bind.
    pub fn set(
        &mut self,
        name: TemplateName,
        template: impl Into<String>,
    ) -> Result<(), PromptError> {
        let template = template.into();
        for p in referenced_placeholders(&template) {
            if !name.placeholders().contains(&p.as_str()) {
                return Err(PromptError::UnknownPlaceholder {
                    template: name.as_str().to_string(),
                    placeholder: p,
                });
            }
        }
        self.templates.insert(name, template);
        Ok(())
    }

    /// Applies a flat JSON object of `template-name → template-string`
    /// overrides on top of this set.
    pub fn with_overrides_json(mut self, json: &str) -> Result<Self, PromptError> {
        let map: serde_json::Map<String, serde_json::Value> =
            serde_json::from_str(json).map_err(|e| PromptError::TemplateFile(e.to_string()))?;
        for (key, value) in map {
            let name =
                TemplateName::parse(&key).ok_or(PromptError::UnknownTemplate(key.clone()))?;
            let text = value.as_str().ok_or_else(|| {
                PromptError::TemplateFile(format!("template {key:?} must be a string"))
            })?;
            self.set(name, text)?;
        }
        Ok(self)
    }

    /// Renders a template, failing if it references a placeholder that is not
    /// bound in `bindings`.
    pub fn render(
        &self,
        name: TemplateName,
        bindings: &[(&str, &str)],
    ) -> Result<String, PromptError> {
        let mut out = String::new();
        for segment in parse_segments(self.get(name)) {
            match segment {
                Segment::Literal(l) => out.push_str(&l),
                Segment::Placeholder(p) => {
                    let value = bindings
                        .iter()
                        .find(|(k, _)| *k == p)
                        .map(|(_, v)| *v)
                        .ok_or_else(|| PromptError::UnboundPlaceholder {
                            template: name.as_str().to_string(),
                            placeholder: p.clone(),
                        })?;
                    out.push_str(value);
                }
            }
        }
        Ok(out)
    }

    /// The set as a flat JSON object, the same shape accepted by
    /// [`with_overrides_json`](Self::with_overrides_json).
    pub fn to_json(&self) -> String {
        let map: serde_json::Map<String, serde_json::Value> = self
            .templates
            .iter()
            .map(|(k, v)| (k.as_str().to_string(), serde_json::Value::String(v.clone())))
            .collect();
        serde_json::to_string_pretty(&map).expect("string map serializes")
    }
}

const ENGLISH: &[(TemplateName, &str)] = &[
    (
        TemplateName::SystemSingle,
        "You are an expert annotator for named entity recognition. Annotate the mentions of the entities {labels} in the text given by the user.\n\nThe entities are defined as follows:\n{entity_definitions}\n\n{answer_instructions}",
    ),
    (
        TemplateName::SystemMulti,
        "You are an expert annotator for named entity recognition. You will annotate the text given by the user one entity at a time, following the request made at each turn. The entities to annotate are {labels}.\n\nThe entities are defined as follows:\n{entity_definitions}\n\n{answer_instructions}",
    ),
    (TemplateName::EntityDefinition, "- {label}: {description}"),
    (
        TemplateName::InlineInstructions,
        "Answer by echoing the exact input text, enclosing every entity mention with in-line tags named after its entity class: {tag_example}. Do not add, remove or change any other character, and do not add explanations.",
    ),
    (
        TemplateName::DelimiterInstructions,
        "Answer by echoing the exact input text, enclosing every mention of the requested entity between {open} and {close}, as in {open}mention{close}. Do not add, remove or change any other character, and do not add explanations.",
    ),
    (
        TemplateName::JsonInstructions,
        "Answer only with a JSON object in which each key is an entity name and each value is the list of text mentions of that entity, copied exactly as they appear in the text, for example {json_example}. Use an empty list for an entity without mentions.",
    ),
    (TemplateName::Query, "Text: {text}"),
    (
        TemplateName::TurnFirst,
        "Text: {text}\n\nAnnotate the mentions of the entity {label}.",
    ),
    (
        TemplateName::TurnNext,
        "And now annotate the mentions of the entity {label}.",
    ),
    (
        TemplateName::FinalStep,
        "Finally, annotate the mentions of all the entities {labels} in the text at once. {answer_instructions}",
    ),
    (TemplateName::PosBlock, "{text}\n\nPart-of-speech tags: {pos}"),
    (
        TemplateName::PosSystem,
        "You are an expert linguist who annotates text with part-of-speech tags.",
    ),
    (
        TemplateName::PosRequest,
        "Tag every token of the following text with its part-of-speech tag. Answer only with whitespace-separated token/TAG pairs, in the order the tokens appear.\n\nText: {text}",
    ),
    (
        TemplateName::JsonRetry,
        "Your previous answer could not be parsed as a JSON object. Answer again with only the JSON object.",
    ),
];

const SPANISH: &[(TemplateName, &str)] = &[
    (
        TemplateName::SystemSingle,
        "Eres un anotador experto en reconocimiento de entidades nombradas. Anota las menciones de las entidades {labels} en el texto entregado por el usuario.\n\nLas entidades se definen así:\n{entity_definitions}\n\n{answer_instructions}",
    ),
    (
        TemplateName::SystemMulti,
        "Eres un anotador experto en reconocimiento de entidades nombradas. Anotarás el texto entregado por el usuario una entidad a la vez, siguiendo la instrucción de cada turno. Las entidades a anotar son {labels}.\n\nLas entidades se definen así:\n{entity_definitions}\n\n{answer_instructions}",
    ),
    (TemplateName::EntityDefinition, "- {label}: {description}"),
    (
        TemplateName::InlineInstructions,
        "Responde repitiendo exactamente el texto de entrada, encerrando cada mención de entidad con etiquetas en línea con el nombre de su clase: {tag_example}. No agregues, elimines ni cambies ningún otro carácter, y no agregues explicaciones.",
    ),
    (
        TemplateName::DelimiterInstructions,
        "Responde repitiendo exactamente el texto de entrada, encerrando cada mención de la entidad solicitada entre {open} y {close}, como en {open}mención{close}. No agregues, elimines ni cambies ningún otro carácter, y no agregues explicaciones.",
    ),
    (
        TemplateName::JsonInstructions,
        "Responde solo con un objeto JSON en el que cada clave es el nombre de una entidad y cada valor es la lista de menciones de esa entidad, copiadas exactamente como aparecen en el texto, por ejemplo {json_example}. Usa una lista vacía para una entidad sin menciones.",
    ),
    (TemplateName::Query, "Texto: {text}"),
    (
        TemplateName::TurnFirst,
        "Texto: {text}\n\nAnota las menciones de la entidad {label}.",
    ),
    (
        TemplateName::TurnNext,
        "Y ahora anota las menciones de la entidad {label}.",
    ),
    (
        TemplateName::FinalStep,
        "Finalmente, anota de una vez las menciones de todas las entidades {labels} en el texto. {answer_instructions}",
    ),
    (TemplateName::PosBlock, "{text}\n\nEtiquetas gramaticales: {pos}"),
    (
        TemplateName::PosSystem,
        "Eres un lingüista experto que anota texto con etiquetas gramaticales.",
    ),
    (
        TemplateName::PosRequest,
        "Etiqueta cada token del siguiente texto con su categoría gramatical. Responde solo con pares token/ETIQUETA separados por espacios, en el orden en que aparecen los tokens.\n\nTexto: {text}",
    ),
    (
        TemplateName::JsonRetry,
        "Tu respuesta anterior no pudo interpretarse como un objeto JSON. Responde de nuevo solo con el objeto JSON.",
    ),
];
