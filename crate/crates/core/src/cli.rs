//! The `iclner` command line: `annotate`, `evaluate` and `dump-prompt`.
//!
//! Exit status is 0 when everything succeeded, 2 when some documents failed
//! but the run completed, and 1 on fatal errors (bad flags, unreadable files,
//! misaligned evaluation inputs).

use std::ffi::OsString;
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};
use std::process::{Command as Process, Stdio};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::Value;
use thiserror::Error;

use crate::client::{BackendConfig, BackendError, CompletionBackend, MockBackend, OpenAiBackend};
use crate::domain::{
    AnnotatedDocument, AnswerShape, Delimiters, DomainError, EntitySchema, MentionLocalization,
    MultiTurnMode, NerConfig, PosMode, PromptingMethod, DEFAULT_MODEL,
};
use crate::engine::{NerError, NerModel, Prediction};
use crate::evaluation::{evaluate_with, read_conll_file, EvalError, MatchMode};
use crate::prompting::{PosTagger, PosTags, PromptError, PromptTemplateSet};

const EXIT_OK: i32 = 0;
const EXIT_FATAL: i32 = 1;
const EXIT_PARTIAL: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "iclner",
    version,
    about = "Zero- and few-shot NER with chat-completion models"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Report per-document warnings on standard error.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Annotate one document per input line, writing JSON lines.
    Annotate(AnnotateArgs),
    /// Score predictions (or a fresh annotation run) against CoNLL gold data.
    Evaluate(EvaluateArgs),
    /// Print the conversation `annotate` would submit, without contacting any backend.
    DumpPrompt(DumpPromptArgs),
}

#[derive(Debug, Args)]
pub struct AnnotateArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Plain-text lines or JSON records with a "text" field; standard input when absent.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Where to write JSON lines; standard output when absent.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Gold CoNLL file (IOB1 or IOB2).
    #[arg(long)]
    pub gold: PathBuf,
    /// Annotated-document JSON lines to score; when absent the gold sentences are annotated first.
    #[arg(long)]
    pub predictions: Option<PathBuf>,
    /// Where to write the JSON report.
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Require exact span equality instead of overlap.
    #[arg(long)]
    pub strict: bool,
}

#[derive(Debug, Args)]
pub struct DumpPromptArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Text to build the prompt for.
    #[arg(long, conflicts_with = "input")]
    pub text: Option<String>,
    /// Input documents as for `annotate`; standard input when neither this nor --text is given.
    #[arg(long)]
    pub input: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum MethodArg {
    Single,
    Multi,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum MultiModeArg {
    Step,
    Final,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ShapeArg {
    Inline,
    Json,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum PosArg {
    None,
    Llm,
    Hook,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum LocalizationArg {
    All,
    First,
}

#[derive(Debug, Args)]
pub struct ModelArgs {
    /// JSON object mapping entity labels to descriptions.
    #[arg(long)]
    pub schema: Option<PathBuf>,
    /// Few-shot demonstrations: a JSON array or JSON lines of annotated documents.
    #[arg(long)]
    pub examples: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "single")]
    pub method: MethodArg,
    #[arg(long = "multi-mode", value_enum, default_value = "step")]
    pub multi_mode: MultiModeArg,
    #[arg(long, value_enum, default_value = "inline")]
    pub shape: ShapeArg,
    /// Custom mention markers for multi-turn in-line answers.
    #[arg(long, num_args = 2, value_names = ["OPEN", "CLOSE"], allow_hyphen_values = true)]
    pub delimiters: Option<Vec<String>>,
    #[arg(long, value_enum, default_value = "none")]
    pub pos: PosArg,
    /// Shell command used by `--pos hook`: reads the text on standard input and
    /// prints whitespace-separated `token/TAG` items.
    #[arg(long = "pos-command")]
    pub pos_command: Option<String>,
    /// Which occurrences of a JSON-listed mention to annotate.
    #[arg(long, value_enum, default_value = "all")]
    pub localization: LocalizationArg,
    /// Built-in template language (en, es).
    #[arg(long, default_value = "en")]
    pub language: String,
    /// JSON object of template overrides.
    #[arg(long)]
    pub templates: Option<PathBuf>,
    #[arg(long = "base-url")]
    pub base_url: Option<String>,
    #[arg(long, default_value = DEFAULT_MODEL)]
    pub model: String,
    #[arg(long, default_value_t = 0.0)]
    pub temperature: f64,
    #[arg(long, default_value_t = 4)]
    pub concurrency: usize,
    #[arg(long, default_value_t = 3)]
    pub retries: u32,
    /// `openai` or `mock:<script.json>`.
    #[arg(long, default_value = "openai")]
    pub backend: String,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {source}")]
    File {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("input line {line}: {message}")]
    Input { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Domain(#[from] DomainError),
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error(transparent)]
    Ner(#[from] NerError),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

fn read_file(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|source| CliError::File {
        path: path.to_path_buf(),
        source,
    })
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    std::fs::write(path, contents).map_err(|source| CliError::File {
        path: path.to_path_buf(),
        source,
    })
}

/// A [`PosTagger`] backed by an external command.
#[derive(Debug, Clone)]
pub struct CommandTagger {
    command: String,
}

impl CommandTagger {
    pub fn new(command: impl Into<String>) -> Self {
        Self {
            command: command.into(),
        }
    }
}

impl PosTagger for CommandTagger {
    fn tag(&self, text: &str) -> Result<PosTags, String> {
        let mut child = Process::new("sh")
            .arg("-c")
            .arg(&self.command)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .spawn()
            .map_err(|e| format!("cannot run {:?}: {e}", self.command))?;
        let mut stdin = child.stdin.take().expect("stdin is piped");
        let payload = text.to_string();
        let writer = std::thread::spawn(move || stdin.write_all(payload.as_bytes()));
        let output = child.wait_with_output().map_err(|e| e.to_string())?;
        writer
            .join()
            .map_err(|_| "stdin writer panicked".to_string())?
            .map_err(|e| format!("cannot feed {:?}: {e}", self.command))?;
        if !output.status.success() {
            return Err(format!(
                "{:?} exited with {}: {}",
                self.command,
                output.status,
                String::from_utf8_lossy(&output.stderr).trim()
            ));
        }
        String::from_utf8_lossy(&output.stdout)
            .split_whitespace()
            .map(|item| {
                item.rsplit_once('/')
                    .filter(|(token, tag)| !token.is_empty() && !tag.is_empty())
                    .map(|(token, tag)| (token.to_string(), tag.to_string()))
                    .ok_or_else(|| format!("expected token/TAG, got {item:?}"))
            })
            .collect()
    }
}

impl ModelArgs {
    fn ner_config(&self) -> Result<NerConfig, CliError> {
        let delimiters = self
            .delimiters
            .as_ref()
            .map(|d| Delimiters::new(d[0].clone(), d[1].clone()));
        let config = NerConfig {
            prompting_method: match self.method {
                MethodArg::Single => PromptingMethod::SingleTurn,
                MethodArg::Multi => PromptingMethod::MultiTurn,
            },
            multi_turn_mode: match self.multi_mode {
                MultiModeArg::Step => MultiTurnMode::StepByStep,
                MultiModeArg::Final => MultiTurnMode::FinalStep,
            },
            answer_shape: match self.shape {
                ShapeArg::Inline => AnswerShape::Inline,
                ShapeArg::Json => AnswerShape::Json,
            },
            delimiters,
            pos_mode: match self.pos {
                PosArg::None => PosMode::None,
                PosArg::Llm => PosMode::ViaLlm,
                PosArg::Hook => PosMode::ViaHook,
            },
            mention_localization: match self.localization {
                LocalizationArg::All => MentionLocalization::All,
                LocalizationArg::First => MentionLocalization::First,
            },
            model: self.model.clone(),
            temperature: self.temperature,
            max_retries: self.retries,
            max_concurrency: self.concurrency,
            language: self.language.clone(),
        };
        config.validate()?;
        match (self.pos, &self.pos_command) {
            (PosArg::Hook, None) => {
                return Err(CliError::Usage("--pos hook requires --pos-command".into()))
            }
            (PosArg::None | PosArg::Llm, Some(_)) => {
                return Err(CliError::Usage("--pos-command requires --pos hook".into()))
            }
            _ => {}
        }
        Ok(config)
    }

    fn backend_config(&self) -> BackendConfig {
        let mut config = BackendConfig::from_env();
        if let Some(url) = &self.base_url {
            config.base_url = url.clone();
        }
        config
    }

    fn backend(
        &self,
        backend_config: &BackendConfig,
    ) -> Result<Arc<dyn CompletionBackend>, CliError> {
        match self.backend.split_once(':') {
            Some(("mock", path)) => Ok(Arc::new(MockBackend::from_file(path)?)),
            None if self.backend == "openai" => Ok(Arc::new(OpenAiBackend::new(backend_config)?)),
            _ => Err(CliError::Usage(format!(
                "unknown backend {:?}; expected `openai` or `mock:<script.json>`",
                self.backend
            ))),
        }
    }

    /// Validates every flag, then builds a contextualized model. With
    /// `offline`, the backend flag is ignored and nothing can be sent.
    fn build(&self, offline: bool) -> Result<NerModel, CliError> {
        let config = self.ner_config()?;
        let schema_path = self
            .schema
            .as_ref()
            .ok_or_else(|| CliError::Usage("--schema is required".into()))?;
        let schema = EntitySchema::from_json(&read_file(schema_path)?)?;
        let mut templates = PromptTemplateSet::for_language(&config.language)?;
        if let Some(path) = &self.templates {
            templates = templates.with_overrides_json(&read_file(path)?)?;
        }
        let examples = match &self.examples {
            Some(path) => read_documents(&read_file(path)?)?,
            None => Vec::new(),
        };
        let backend_config = self.backend_config();
        let backend: Arc<dyn CompletionBackend> = if offline {
            Arc::new(MockBackend::matcher(Vec::new()))
        } else {
            self.backend(&backend_config)?
        };
        let mut model = NerModel::new(config, backend)?
            .with_templates(templates)
            .with_backend_config(backend_config);
        if let Some(command) = &self.pos_command {
            model = model.with_pos_tagger(Arc::new(CommandTagger::new(command.clone())));
        }
        model.contextualize(schema, &examples)?;
        Ok(model)
    }
}

/// Annotated documents from a JSON array or JSON lines.
fn read_documents(contents: &str) -> Result<Vec<AnnotatedDocument>, CliError> {
    if contents.trim_start().starts_with('[') {
        return serde_json::from_str(contents).map_err(|e| CliError::Input {
            line: e.line(),
            message: e.to_string(),
        });
    }
    contents
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, line)| {
            serde_json::from_str(line).map_err(|e| CliError::Input {
                line: i + 1,
                message: e.to_string(),
            })
        })
        .collect()
}

/// One text per line; a line starting with `{` is a JSON record with "text".
fn read_texts(contents: &str) -> Result<Vec<String>, CliError> {
    contents
        .lines()
        .enumerate()
        .map(|(i, line)| {
            if !line.trim_start().starts_with('{') {
                return Ok(line.to_string());
            }
            let bad = |message: String| CliError::Input {
                line: i + 1,
                message,
            };
            let record: Value = serde_json::from_str(line).map_err(|e| bad(e.to_string()))?;
            record
                .get("text")
                .and_then(Value::as_str)
                .map(str::to_string)
                .ok_or_else(|| bad("record has no string \"text\" field".into()))
        })
        .collect()
}

fn read_input(path: Option<&Path>, stdin: &mut dyn BufRead) -> Result<String, CliError> {
    match path {
        Some(path) => read_file(path),
        None => {
            let mut contents = String::new();
            stdin.read_to_string(&mut contents)?;
            Ok(contents)
        }
    }
}

fn output_record(text: &str, result: &Result<Prediction, NerError>) -> String {
    let record = match result {
        Ok(p) => {
            let mut value = serde_json::to_value(&p.document).expect("documents serialize");
            value["warnings"] =
                serde_json::to_value(&p.report.warnings).expect("warnings serialize");
            value
        }
        Err(e) => serde_json::json!({
            "text": text,
            "annotations": [],
            "warnings": [],
            "error": e.to_string(),
        }),
    };
    record.to_string()
}

struct Io<'a> {
    stdin: &'a mut dyn BufRead,
    stdout: &'a mut dyn Write,
    stderr: &'a mut dyn Write,
    verbose: u8,
}

impl Io<'_> {
    fn report_failures(
        &mut self,
        texts: &[String],
        results: &[Result<Prediction, NerError>],
    ) -> bool {
        let mut failed = false;
        for (i, result) in results.iter().enumerate() {
            match result {
                Err(e) => {
                    failed = true;
                    let _ = writeln!(self.stderr, "document {}: {e}", i + 1);
                }
                Ok(p) if self.verbose > 0 => {
                    for w in &p.report.warnings {
                        let _ = writeln!(
                            self.stderr,
                            "document {}: {:?} {:?}",
                            i + 1,
                            w.kind,
                            w.fragment
                        );
                    }
                }
                Ok(_) => {}
            }
        }
        debug_assert_eq!(texts.len(), results.len());
        failed
    }
}

fn annotate(args: &AnnotateArgs, io: &mut Io<'_>) -> Result<i32, CliError> {
    let model = args.model.build(false)?;
    let texts = read_texts(&read_input(args.input.as_deref(), io.stdin)?)?;
    let results = model.predict_batch(&texts)?;
    let mut out = String::new();
    for (text, result) in texts.iter().zip(&results) {
        out.push_str(&output_record(text, result));
        out.push('\n');
    }
    match &args.output {
        Some(path) => write_file(path, &out)?,
        None => io.stdout.write_all(out.as_bytes())?,
    }
    Ok(if io.report_failures(&texts, &results) {
        EXIT_PARTIAL
    } else {
        EXIT_OK
    })
}

fn evaluate(args: &EvaluateArgs, io: &mut Io<'_>) -> Result<i32, CliError> {
    let gold = read_conll_file(&args.gold)?;
    let mut status = EXIT_OK;
    let predictions = match &args.predictions {
        Some(path) => read_documents(&read_file(path)?)?,
        None => {
            let model = args.model.build(false)?;
            let texts: Vec<String> = gold.iter().map(|d| d.text.clone()).collect();
            let results = model.predict_batch(&texts)?;
            if io.report_failures(&texts, &results) {
                status = EXIT_PARTIAL;
            }
            texts
                .into_iter()
                .zip(results)
                .map(|(text, r)| {
                    r.map(|p| p.document)
                        .unwrap_or_else(|_| AnnotatedDocument::new(text))
                })
                .collect()
        }
    };
    let mode = if args.strict {
        MatchMode::Strict
    } else {
        MatchMode::Relaxed
    };
    let report = evaluate_with(&predictions, &gold, mode)?;
    io.stdout.write_all(report.to_table().as_bytes())?;
    if let Some(path) = &args.output {
        write_file(path, &(report.to_json() + "\n"))?;
    }
    Ok(status)
}

fn dump_prompt(args: &DumpPromptArgs, io: &mut Io<'_>) -> Result<i32, CliError> {
    let model = args.model.build(true)?;
    let texts = match &args.text {
        Some(text) => vec![text.clone()],
        None => read_texts(&read_input(args.input.as_deref(), io.stdin)?)?,
    };
    let mut out = String::new();
    for (i, text) in texts.iter().enumerate() {
        if texts.len() > 1 {
            if i > 0 {
                out.push('\n');
            }
            out.push_str(&format!("### document {}\n", i + 1));
        }
        out.push_str(&model.preview_conversation(text)?.transcript());
    }
    io.stdout.write_all(out.as_bytes())?;
    Ok(EXIT_OK)
}

/// Runs the command line against the given streams and returns the exit
/// status.
pub fn run<I, T>(
    args: I,
    stdin: &mut dyn BufRead,
    stdout: &mut dyn Write,
    stderr: &mut dyn Write,
) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let rendered = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = stdout.write_all(rendered.as_bytes());
                    EXIT_OK
                }
                _ => {
                    let _ = stderr.write_all(rendered.as_bytes());
                    EXIT_FATAL
                }
            };
        }
    };
    let mut io = Io {
        stdin,
        stdout,
        stderr,
        verbose: cli.verbose,
    };
    let result = match &cli.command {
        Command::Annotate(args) => annotate(args, &mut io),
        Command::Evaluate(args) => evaluate(args, &mut io),
        Command::DumpPrompt(args) => dump_prompt(args, &mut io),
    };
    match result {
        Ok(status) => {
            let _ = io.stdout.flush();
            status
        }
        Err(e) => {
            let _ = writeln!(io.stderr, "error: {e}");
            EXIT_FATAL
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_str(args: &[&str], stdin: &str) -> (i32, String, String) {
        let mut input = stdin.as_bytes();
        let (mut out, mut err) = (Vec::new(), Vec::new());
        let code = run(
            std::iter::once("iclner").chain(args.iter().copied()),
            &mut input,
            &mut out,
            &mut err,
        );
        (
            code,
            String::from_utf8(out).unwrap(),
            String::from_utf8(err).unwrap(),
        )
    }

    #[test]
    fn delimiters_need_multi_turn() {
        let (code, _, err) = run_str(
            &[
                "annotate",
                "--schema",
                "missing.json",
                "--delimiters",
                "@@",
                "##",
                "--method",
                "single",
            ],
            "",
        );
        assert_eq!(code, 1);
        assert!(
            err.contains("custom delimiters require multi-turn"),
            "{err}"
        );
    }

    #[test]
    fn usage_errors_are_fatal_and_help_is_not() {
        assert_eq!(run_str(&["annotate", "--method", "triple"], "").0, 1);
        assert_eq!(run_str(&["--help"], "").0, 0);
        assert_eq!(
            run_str(&["annotate", "--pos", "hook", "--schema", "x"], "").0,
            1
        );
    }

    #[test]
    fn texts_from_lines_and_records() {
        let texts = read_texts("plain line\n{\"text\": \"from json\", \"id\": 3}\n\n").unwrap();
        assert_eq!(texts, ["plain line", "from json", ""]);
        assert!(matches!(
            read_texts("{\"id\": 1}"),
            Err(CliError::Input { line: 1, .. })
        ));
    }

    #[test]
    fn command_tagger_parses_items() {
        let tagger = CommandTagger::new("sed 's/\\([^ ]*\\)/\\1\\/X/g'");
        assert_eq!(
            tagger.tag("a b").unwrap(),
            [
                ("a".to_string(), "X".to_string()),
                ("b".to_string(), "X".to_string())
            ]
        );
        assert!(CommandTagger::new("echo untagged").tag("a").is_err());
        assert!(CommandTagger::new("exit 3").tag("a").is_err());
    }
}
