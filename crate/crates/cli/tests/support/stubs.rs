//! Canned completer fixtures for the offline pipeline tests, and the code
//! that (re)generates them.

use std::path::{Path, PathBuf};

use ubsr_core::ir::Concept;
use ubsr_core::registry::Registry;
use ubsr_core::rulegen::{build_base_rule_prompt, build_semantic_mapping_prompts, BaseRuleRequest, Pruning, DEFAULT_BATCH_SIZE};
use ubsr_core::rules::{install_builtin, load_rules, save_rules, RuleDatabase};
use ubsr_core::semantic::{read_pending, ConceptList, PackageConcept};

pub const DIMENSION: &str = "Functionality";

pub fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

pub fn stub_dir() -> PathBuf {
    fixtures().join("stub")
}

/// Bundled rules minus scala's import rule, written to `dir`.
pub fn rules_without_scala_imports(dir: &Path) {
    install_builtin(dir).unwrap();
    let full = load_rules(dir).unwrap();
    let mut db = RuleDatabase::new(full.version);
    for r in full.rules() {
        if !(r.language.as_str() == "scala" && r.ast_node_type == "import_declaration") {
            db.insert(r.clone()).unwrap();
        }
    }
    save_rules(&db, dir).unwrap();
    std::fs::remove_file(dir.join("scala.json")).unwrap();
    let mut scala_only = RuleDatabase::new(db.version);
    for r in db.rules_for("scala") {
        scala_only.insert(r.clone()).unwrap();
    }
    std::fs::write(dir.join("scala.json"), scala_only.render_language("scala")).unwrap();
}

pub fn scala_request(code_file: &str) -> BaseRuleRequest {
    BaseRuleRequest {
        test_language: "scala".into(),
        concept: Concept::Package,
        exemplar_languages: vec!["haskell".into(), "elm".into()],
        pruning: Pruning::Concept,
        test_code: std::fs::read_to_string(fixtures().join("rulegen").join(code_file)).unwrap(),
        cross_paradigm: false,
    }
}

pub const GOOD_RULE_RESPONSE: &str = r#"The test input parses to a compilation_unit whose import_declaration child holds the import.
1. The node text is "import scala.collection.mutable.ListBuffer".
2. Capturing the dotted path after "import" gives "scala.collection.mutable.ListBuffer".

```json
{
  "import_declaration": {
    "ubsr_node_type": "ubsr_package",
    "extractor": [
      {"op": "regex_capture", "pattern": "import\\s+([\\w.]*[A-Za-z0-9])", "group": 1}
    ],
    "test_snippet": "import scala.collection.mutable.ListBuffer",
    "expected": "scala.collection.mutable.ListBuffer"
  }
}
```
Output: scala.collection.mutable.ListBuffer
"#;

/// Splits at the first space, which keeps the selector braces.
pub const BAD_RULE_RESPONSE: &str = r#"The import_declaration node holds the import.
```json
{
  "import_declaration": {
    "ubsr_node_type": "ubsr_package",
    "extractor": [
      {"op": "split_once", "separator": " ", "take_index": 1}
    ],
    "test_snippet": "import scala.util.{Try, Success}",
    "expected": "scala.util"
  }
}
```
Output: scala.util
"#;

pub fn labels() -> Vec<PackageConcept> {
    let mut rdr = csv::Reader::from_path(fixtures().join("semantic/labels61.csv")).unwrap();
    rdr.deserialize().collect::<Result<_, _>>().unwrap()
}

pub fn few_shots() -> Vec<PackageConcept> {
    let mut rdr = csv::Reader::from_path(fixtures().join("semantic/few_shots.csv")).unwrap();
    rdr.deserialize().collect::<Result<_, _>>().unwrap()
}

pub fn concept_list() -> ConceptList {
    ConceptList::load(&fixtures().join("semantic/functionality.txt"), DIMENSION).unwrap()
}

/// Answer table for one batch. Rows come back in reverse order so the
/// parser has to restore the batch order.
pub fn mapping_response(batch: &[ubsr_core::semantic::PendingPackage], labels: &[PackageConcept]) -> String {
    let mut out = String::from("| Package | Language | Concept |\n| --- | --- | --- |\n");
    for p in batch.iter().rev() {
        let l = labels
            .iter()
            .find(|l| l.package == p.package && l.language == p.language)
            .expect("label for every pending package");
        out.push_str(&format!("| {} | {} | {} |\n", l.package, l.language, l.concept));
    }
    out.push_str("<end>\n");
    out
}

/// Every (prompt, response) pair the stub directory must hold.
pub fn expected_fixtures() -> Vec<(String, String)> {
    let registry = Registry::builtin();
    let tmp = tempfile::tempdir().unwrap();
    rules_without_scala_imports(tmp.path());
    let db = load_rules(tmp.path()).unwrap();
    let mut out = Vec::new();
    for (file, response) in [("imports.scala", GOOD_RULE_RESPONSE), ("imports_grouped.scala", BAD_RULE_RESPONSE)] {
        let prompt = build_base_rule_prompt(&scala_request(file), &registry, &db).unwrap();
        out.push((prompt.rendered, response.to_string()));
    }
    let pending = read_pending(&fixtures().join("semantic/pending61.csv")).unwrap();
    let labels = labels();
    let batches = build_semantic_mapping_prompts(&pending, &concept_list(), &few_shots(), DEFAULT_BATCH_SIZE).unwrap();
    for b in batches {
        out.push((b.prompt.rendered, mapping_response(&b.packages, &labels)));
    }
    out
}
