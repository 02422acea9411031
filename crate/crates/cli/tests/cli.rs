mod support;

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use support::stubs::{self, fixtures, stub_dir};
use ubsr_core::rules::read_version;

fn ubsr(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ubsr"))
        .args(args)
        .env("SOURCE_DATE_EPOCH", "1700000000")
        .env_remove("LLM_ENDPOINT")
        .output()
        .unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn profile_writes_tables_and_pending() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let o = ubsr(&["profile", "--input", p(&fixtures().join("synthetic")), "--out", p(&out), "--format", "jsonl"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("profiled 12 files"), "{}", stdout(&o));
    for f in ["nodes.jsonl", "edges.jsonl", "metrics.jsonl", "pending.csv", "errors.json"] {
        assert!(out.join(f).is_file(), "{f}");
    }
    let pending = fs::read_to_string(out.join("pending.csv")).unwrap();
    assert_eq!(pending.lines().count(), 28, "header plus 27 packages");
    assert!(!out.join("concepts_functionality.jsonl").exists());
}

#[test]
fn empty_input_gives_empty_tables() {
    let tmp = tempfile::tempdir().unwrap();
    let input = tmp.path().join("in");
    fs::create_dir(&input).unwrap();
    let out = tmp.path().join("out");
    let o = ubsr(&["profile", "--input", p(&input), "--out", p(&out), "--format", "jsonl"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(fs::read_to_string(out.join("nodes.jsonl")).unwrap(), "");

    let o = ubsr(&["report", "--tables", p(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let report: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(report["totals"]["files"], 0);
}

#[test]
fn missing_rules_dir_is_named_in_the_error() {
    let tmp = tempfile::tempdir().unwrap();
    let missing = tmp.path().join("no_rules_here");
    let o = ubsr(&[
        "profile", "--input", p(&fixtures().join("synthetic")), "--out", p(&tmp.path().join("out")), "--rules", p(&missing),
    ]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("no_rules_here"), "{}", stderr(&o));
}

#[test]
fn report_is_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let semantic = fixtures().join("semantic/rules.csv");
    let o = ubsr(&["profile", "--input", p(&fixtures().join("synthetic")), "--out", p(&out), "--semantic", p(&semantic)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let a = ubsr(&["report", "--tables", p(&out), "--corpus-id", "synthetic"]);
    let b = ubsr(&["report", "--tables", p(&out), "--corpus-id", "synthetic"]);
    assert!(a.status.success(), "{}", stderr(&a));
    assert_eq!(a.stdout, b.stdout);
    let report: serde_json::Value = serde_json::from_slice(&a.stdout).unwrap();
    assert_eq!(report["generated_at"], "2023-11-14T22:13:20Z");
}

fn rulegen(rules: &Path, code: &str, extra: &[&str]) -> Output {
    let code = fixtures().join("rulegen").join(code);
    let stub = format!("stub:{}", stub_dir().display());
    let mut args = vec![
        "rulegen", "--language", "scala", "--concept", "package", "--exemplars", "haskell,elm", "--code", p(&code),
        "--rules", p(rules), "--completer", &stub,
    ];
    args.extend_from_slice(extra);
    ubsr(&args)
}

#[test]
fn rulegen_dry_run_prints_the_same_prompt() {
    let tmp = tempfile::tempdir().unwrap();
    stubs::rules_without_scala_imports(tmp.path());
    let a = rulegen(tmp.path(), "imports.scala", &["--dry-run"]);
    let b = rulegen(tmp.path(), "imports.scala", &["--dry-run"]);
    assert!(a.status.success(), "{}", stderr(&a));
    assert_eq!(a.stdout, b.stdout);
    assert!(stdout(&a).contains("import scala.collection.mutable.ListBuffer"));
}

#[test]
fn rulegen_reject_exits_2_and_commits_nothing() {
    let tmp = tempfile::tempdir().unwrap();
    stubs::rules_without_scala_imports(tmp.path());
    let before = fs::read(tmp.path().join("scala.json")).unwrap();
    let o = rulegen(tmp.path(), "imports_grouped.scala", &["--commit"]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    assert_eq!(fs::read(tmp.path().join("scala.json")).unwrap(), before);
    assert_eq!(read_version(tmp.path()).unwrap(), 1);

    let o = rulegen(tmp.path(), "imports.scala", &["--commit"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(read_version(tmp.path()).unwrap(), 2);
}

#[test]
fn semmap_commits_all_rows() {
    let tmp = tempfile::tempdir().unwrap();
    let semantic = tmp.path().join("rules.csv");
    let stub = format!("stub:{}", stub_dir().display());
    let o = ubsr(&[
        "semmap",
        "--pending", p(&fixtures().join("semantic/pending61.csv")),
        "--concepts", p(&fixtures().join("semantic/functionality.txt")),
        "--dimension", stubs::DIMENSION,
        "--semantic", p(&semantic),
        "--few-shots", p(&fixtures().join("semantic/few_shots.csv")),
        "--completer", &stub,
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    // header plus 61 rows
    assert_eq!(fs::read_to_string(&semantic).unwrap().lines().count(), 62);
}

#[test]
fn unknown_stub_prompt_fails() {
    let tmp = tempfile::tempdir().unwrap();
    stubs::rules_without_scala_imports(tmp.path());
    let code = tmp.path().join("other.scala");
    fs::write(&code, "import a.b\n").unwrap();
    let stub = format!("stub:{}", stub_dir().display());
    let o = ubsr(&[
        "rulegen", "--language", "scala", "--concept", "package", "--exemplars", "haskell", "--code", p(&code), "--rules",
        p(tmp.path()), "--completer", &stub,
    ]);
    assert!(!o.status.success());
}
