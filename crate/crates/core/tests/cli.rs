use std::path::{Path, PathBuf};
use std::process::Command;

use iclner::cli::run;
use iclner::evaluation::read_conll_file;

fn data(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("data")
        .join(name)
        .to_string_lossy()
        .into_owned()
}

fn cli(args: &[&str], stdin: &str) -> (i32, String, String) {
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

fn mock_flag() -> String {
    format!("mock:{}", data("people_mock.json"))
}

#[test]
fn annotate_with_scripted_backend() {
    let schema = data("people_schema.json");
    let backend = mock_flag();
    let (code, out, err) = cli(
        &["annotate", "--schema", &schema, "--backend", &backend],
        "Fei-Fei Li is a female scientist born in China.\n",
    );
    assert_eq!(code, 0, "{err}");
    assert_eq!(
        out,
        "{\"text\":\"Fei-Fei Li is a female scientist born in China.\",\"annotations\":[{\"start\":0,\"end\":10,\"label\":\"person\"},{\"start\":41,\"end\":46,\"label\":\"location\"}],\"warnings\":[]}\n"
    );
}

#[test]
fn empty_input_gives_empty_output() {
    let schema = data("people_schema.json");
    let backend = mock_flag();
    let (code, out, _) = cli(
        &["annotate", "--schema", &schema, "--backend", &backend],
        "",
    );
    assert_eq!((code, out.as_str()), (0, ""));
}

#[test]
fn failed_documents_give_partial_status() {
    let schema = data("people_schema.json");
    let backend = mock_flag();
    let (code, out, err) = cli(
        &[
            "annotate",
            "--schema",
            &schema,
            "--backend",
            &backend,
            "--retries",
            "0",
        ],
        "Fei-Fei Li is a female scientist born in China.\nNo rule covers this line.\n",
    );
    assert_eq!(code, 2);
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines.len(), 2);
    assert!(lines[1].contains("\"error\""));
    assert!(err.contains("document 2"));
}

#[test]
fn flag_combinations_are_checked_before_any_request() {
    let schema = data("people_schema.json");
    let (code, _, err) = cli(
        &[
            "annotate",
            "--schema",
            &schema,
            "--delimiters",
            "@@",
            "##",
            "--method",
            "single",
        ],
        "text\n",
    );
    assert_eq!(code, 1);
    assert!(
        err.contains("custom delimiters require multi-turn"),
        "{err}"
    );
    let (code, _, err) = cli(
        &[
            "annotate",
            "--schema",
            &schema,
            "--backend",
            "carrier-pigeon",
        ],
        "",
    );
    assert_eq!(code, 1);
    assert!(err.contains("unknown backend"));
}

fn gold_as_jsonl(dir: &Path, keep: usize) -> PathBuf {
    let gold = read_conll_file(data("sample.iob2.conll")).unwrap();
    let lines: Vec<String> = gold
        .iter()
        .take(keep)
        .map(|d| serde_json::to_string(d).unwrap())
        .collect();
    let path = dir.join("predictions.jsonl");
    std::fs::write(&path, lines.join("\n") + "\n").unwrap();
    path
}

#[test]
fn evaluate_gold_against_itself() {
    let dir = tempfile::tempdir().unwrap();
    let predictions = gold_as_jsonl(dir.path(), 50);
    let report = dir.path().join("report.json");
    let gold = data("sample.iob1.conll");
    let (code, out, err) = cli(
        &[
            "evaluate",
            "--gold",
            &gold,
            "--predictions",
            predictions.to_str().unwrap(),
            "--output",
            report.to_str().unwrap(),
        ],
        "",
    );
    assert_eq!(code, 0, "{err}");
    let rows: Vec<&str> = out.lines().skip(1).collect();
    assert_eq!(rows.len(), 5);
    assert!(
        rows.iter()
            .all(|r| r.split_whitespace().nth(3) == Some("100.0")),
        "{out}"
    );
    assert!(rows[4].starts_with("micro"));
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(report).unwrap()).unwrap();
    assert_eq!(json["micro"]["f1"], 1.0);
}

#[test]
fn evaluate_rejects_count_mismatch() {
    let dir = tempfile::tempdir().unwrap();
    let predictions = gold_as_jsonl(dir.path(), 49);
    let gold = data("sample.iob2.conll");
    let (code, _, err) = cli(
        &[
            "evaluate",
            "--gold",
            &gold,
            "--predictions",
            predictions.to_str().unwrap(),
        ],
        "",
    );
    assert_eq!(code, 1);
    assert!(
        err.contains("49 predicted documents but 50 gold documents"),
        "{err}"
    );
}

#[test]
fn dump_prompt_zero_shot_json() {
    let schema = data("people_schema.json");
    let args = [
        "dump-prompt",
        "--schema",
        &schema,
        "--shape",
        "json",
        "--text",
        "Peru is nice.",
    ];
    let (code, out, _) = cli(&args, "");
    assert_eq!(code, 0);
    let system = out.split("[user]").next().unwrap();
    for label in ["person", "organization", "location"] {
        assert!(system.contains(label));
    }
    assert!(system.contains("JSON object"));
    assert_eq!(cli(&args, "").1, out, "dump-prompt must be deterministic");
}

#[test]
fn dump_prompt_few_shot_has_two_demonstrations() {
    let schema = data("people_schema.json");
    let examples = data("people_examples.json");
    let (code, out, _) = cli(
        &[
            "dump-prompt",
            "--schema",
            &schema,
            "--examples",
            &examples,
            "--text",
            "Peru is nice.",
        ],
        "",
    );
    assert_eq!(code, 0);
    assert_eq!(out.matches("[user]").count(), 3);
    assert_eq!(out.matches("[assistant]").count(), 3);
    assert!(out.contains("<person>Elon Musk</person>"));
}

#[test]
fn dump_prompt_multi_turn_in_schema_order() {
    let schema = data("people_schema.json");
    let (code, out, _) = cli(
        &[
            "dump-prompt",
            "--schema",
            &schema,
            "--method",
            "multi",
            "--text",
            "Peru is nice.",
        ],
        "",
    );
    assert_eq!(code, 0);
    let person = out.find("entity person").unwrap();
    let organization = out.find("entity organization").unwrap();
    let location = out.find("entity location").unwrap();
    assert!(person < organization && organization < location);
    assert_eq!(out.matches("{response}").count(), 3);
}

#[test]
fn binary_runs() {
    let output = Command::new(env!("CARGO_BIN_EXE_iclner"))
        .args([
            "dump-prompt",
            "--schema",
            &data("people_schema.json"),
            "--text",
            "Peru",
        ])
        .output()
        .unwrap();
    assert!(output.status.success());
    assert!(String::from_utf8_lossy(&output.stdout).starts_with("[system]"));
    let output = Command::new(env!("CARGO_BIN_EXE_iclner"))
        .args(["annotate", "--method", "single", "--delimiters", "[", "]"])
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(1));
}
