//! Few-shot prompts for base syntactic rules, response parsing,
//! validation and gated commits.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{Exemplar, PromptBundle, PromptKind, TestInput};
use crate::dsl::{ExtractorProgram, Value};
use crate::ir::Concept;
use crate::parser::{parse, prune_concept, prune_depth, render_sexpr, ParseError, ParseTree};
use crate::registry::{LanguageId, Registry, RegistryError};
use crate::rules::{commit_rule, RuleDatabase, RuleEntry, RuleError, RuleFile, SyntacticRule};

/// Depth used for a test input when concept pruning finds no tagged node,
/// which is the normal case for a language without rules yet.
pub const FALLBACK_DEPTH: usize = 2;

pub const BASE_RULE_SYSTEM: &str =
    "You are an expert in programming language grammars who writes precise rules for mapping syntax tree nodes to language-agnostic concepts.";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum Pruning {
    Depth { depth: usize },
    Concept,
    None,
}

impl Pruning {
    /// Prunes `tree`; concept pruning falls back to depth pruning when
    /// nothing in the tree is tagged with `concept`.
    pub fn apply(&self, tree: &ParseTree, concepts: &BTreeSet<Concept>) -> (ParseTree, Option<String>) {
        match *self {
            Pruning::Depth { depth } => (prune_depth(tree, depth), None),
            Pruning::None => (tree.clone(), None),
            Pruning::Concept => {
                let pruned = prune_concept(tree, concepts);
                let root_hit = tree.root.concept_tags.iter().any(|t| concepts.contains(t));
                if pruned.size() > 1 || root_hit {
                    (pruned, None)
                } else {
                    (
                        prune_depth(tree, FALLBACK_DEPTH),
                        Some(format!(
                            "no {} node is tagged for {}; the tree was depth-pruned to {FALLBACK_DEPTH} instead",
                            concepts.iter().map(|c| c.as_str()).collect::<Vec<_>>().join("/"),
                            tree.language
                        )),
                    )
                }
            }
        }
    }
}

#[derive(Debug, Error)]
pub enum PromptError {
    #[error(transparent)]
    Registry(#[from] RegistryError),
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("exemplar language {0:?} is not a known language")]
    NotKnown(String),
    #[error("exemplar language {exemplar} ({exemplar_paradigm}) does not share the {test} paradigm ({test_paradigm})")]
    ParadigmMismatch {
        exemplar: String,
        exemplar_paradigm: String,
        test: String,
        test_paradigm: String,
    },
    #[error("{language} has no {concept} concept")]
    NotApplicable { language: String, concept: String },
    #[error("exemplar language {language} has no {concept} rule to show")]
    NoExemplarRule { language: String, concept: String },
    #[error("at least one exemplar language is required")]
    NoExemplars,
    #[error("concept list is empty")]
    EmptyConceptList,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BaseRuleRequest {
    pub test_language: String,
    pub concept: Concept,
    pub exemplar_languages: Vec<String>,
    pub pruning: Pruning,
    /// Code containing the concept in the test language.
    pub test_code: String,
    #[serde(default)]
    pub cross_paradigm: bool,
}

fn instruction_for(concept: Concept) -> String {
    let (what, value) = match concept {
        Concept::Package => (
            "imported packages, modules or libraries",
            "the imported package name; when one statement imports several packages, extract each and join them with \", \"",
        ),
        Concept::Function => ("function and method definitions", "the name of the defined function"),
        Concept::Comment => ("comments", "the comment text"),
    };
    let node_type = concept.node_type();
    format!(
        "Find the syntax tree node type of the test language that represents {what} and map it to {node_type}. \
Write an extractor that takes the source text of one such node and returns {value}.\n\
An extractor is a JSON array of stages applied in order. Available stages:\n\
- {{\"op\": \"split_once\", \"separator\": S, \"take_index\": I}}: split at the first S and keep piece I (0 or 1)\n\
- {{\"op\": \"split_all\", \"separator\": S}}: split at every S, producing a list\n\
- {{\"op\": \"token_at\", \"separator\": S, \"index\": I}}: split at S, drop empty pieces, keep piece I\n\
- {{\"op\": \"segment_at\", \"separator\": S, \"index\": I}}: split at S and keep piece I; text without S is kept whole\n\
- {{\"op\": \"trim\"}}: strip surrounding whitespace\n\
- {{\"op\": \"strip_prefix\", \"text\": T}}: remove T from the start if present\n\
- {{\"op\": \"regex_capture\", \"pattern\": P, \"group\": G}}: capture group G of the first match of P\n\
- {{\"op\": \"dedup\"}}: drop repeated list items\n\
- {{\"op\": \"join\", \"separator\": S}}: join a list into one string\n\
Stages on a single string also work element-wise on lists. The final value must be a single string.\n\
Think step by step as in the examples. Then give the rule as one ```json fenced block holding an object with a single key, the node type, \
whose value has the fields ubsr_node_type, extractor, test_snippet and expected. Finish with a line `Output: <value>` showing the rule applied to the test input."
    )
}

fn stage_trace(program: &ExtractorProgram, snippet: &str) -> String {
    let (steps, result) = program.trace(snippet);
    let mut out = String::new();
    for (i, (stage, value)) in program.stages.iter().zip(&steps).enumerate() {
        let spec = serde_json::to_string(stage).expect("stages serialize");
        let _ = writeln!(out, "{}. {spec} gives {value}", i + 1);
    }
    if let Err(e) = result {
        let _ = writeln!(out, "{}. fails: {e}", steps.len() + 1);
    } else if steps.is_empty() {
        let _ = writeln!(out, "1. no stages, the snippet is kept as {}", Value::Scalar(snippet.to_string()));
    }
    out
}

/// The one-entry rule object used in exemplars and expected in responses.
pub fn rule_json(rule: &SyntacticRule) -> String {
    let map = std::collections::BTreeMap::from([(rule.ast_node_type.as_str(), rule.entry())]);
    serde_json::to_string_pretty(&map).expect("rules serialize")
}

fn render_code(language: &str, code: &str) -> String {
    let fence = if code.contains("```") { "~~~~" } else { "```" };
    format!("{fence}{language}\n{code}\n{fence}")
}

/// Assembles the few-shot prompt for generating a `concept` rule for
/// `test_language`, with exemplars drawn from the rule database.
pub fn build_base_rule_prompt(
    req: &BaseRuleRequest,
    registry: &Registry,
    db: &RuleDatabase,
) -> Result<PromptBundle, PromptError> {
    let test = registry.get(&req.test_language)?;
    if !test.supports(req.concept) {
        return Err(PromptError::NotApplicable {
            language: test.language.to_string(),
            concept: req.concept.to_string(),
        });
    }
    if req.exemplar_languages.is_empty() {
        return Err(PromptError::NoExemplars);
    }
    let concepts = BTreeSet::from([req.concept]);
    let mut exemplars = Vec::new();
    let mut notes = Vec::new();
    for name in &req.exemplar_languages {
        let ex = registry.get(name)?;
        if !ex.known {
            return Err(PromptError::NotKnown(ex.language.to_string()));
        }
        if ex.paradigm != test.paradigm && !req.cross_paradigm {
            return Err(PromptError::ParadigmMismatch {
                exemplar: ex.language.to_string(),
                exemplar_paradigm: ex.paradigm.to_string(),
                test: test.language.to_string(),
                test_paradigm: test.paradigm.to_string(),
            });
        }
        let rules: Vec<&SyntacticRule> = db
            .rules_for(ex.language.as_str())
            .filter(|r| r.concept() == Some(req.concept))
            .collect();
        if rules.is_empty() {
            return Err(PromptError::NoExemplarRule {
                language: ex.language.to_string(),
                concept: req.concept.to_string(),
            });
        }
        for rule in rules {
            let mut tree = parse(&rule.test_snippet, ex.language.as_str(), registry)?;
            tree.tag_with(|k| db.concept_of(ex.language.as_str(), k));
            let (pruned, note) = req.pruning.apply(&tree, &concepts);
            notes.extend(note);
            exemplars.push(Exemplar {
                language: ex.language.to_string(),
                code_snippet: rule.test_snippet.clone(),
                rendered_ast: render_sexpr(&pruned),
                reasoning: format!(
                    "The concept appears as `{}` nodes.\n{}",
                    rule.ast_node_type,
                    stage_trace(&rule.extractor, &rule.test_snippet)
                ),
                expected: format!("```json\n{}\n```\nOutput: {}", rule_json(rule), rule.expected),
            });
        }
    }

    let mut tree = parse(&req.test_code, test.language.as_str(), registry)?;
    tree.tag_with(|k| db.concept_of(test.language.as_str(), k));
    let (pruned, note) = req.pruning.apply(&tree, &concepts);
    notes.extend(note);
    let test_input = TestInput::Code {
        language: test.language.to_string(),
        code_snippet: req.test_code.clone(),
        rendered_ast: render_sexpr(&pruned),
    };

    let instruction = instruction_for(req.concept);
    let mut rendered = String::new();
    let _ = writeln!(rendered, "## System\n{BASE_RULE_SYSTEM}\n");
    let _ = writeln!(rendered, "## Instruction\n{instruction}\n");
    for (i, ex) in exemplars.iter().enumerate() {
        let _ = writeln!(
            rendered,
            "## Example {} ({})\nCode:\n{}\nAST:\n{}\nReasoning:\n{}Rule:\n{}\n",
            i + 1,
            ex.language,
            render_code(&ex.language, &ex.code_snippet),
            ex.rendered_ast,
            ex.reasoning,
            ex.expected
        );
    }
    if let TestInput::Code { language, code_snippet, rendered_ast } = &test_input {
        let _ = writeln!(
            rendered,
            "## Test input ({language})\nCode:\n{}\nAST:\n{rendered_ast}\nReasoning:",
            render_code(language, code_snippet)
        );
    }
    Ok(PromptBundle {
        kind: PromptKind::BaseRule,
        system_instruction: BASE_RULE_SYSTEM.to_string(),
        instruction,
        exemplars,
        test_input,
        notes,
        rendered,
    })
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ResponseError {
    #[error("response has no fenced rule block")]
    NoBlock,
    #[error("rule block is not valid JSON: {0}")]
    Json(String),
    #[error("rule block must hold exactly one node type, found {0}")]
    EntryCount(usize),
    #[error("invalid rule: {0}")]
    Rule(String),
    #[error("unknown stage op {0:?}")]
    UnknownOp(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParsedRule {
    pub rule: SyntacticRule,
    /// Value the model claims its rule yields on the test input.
    pub claimed_output: Option<String>,
}

fn fenced_blocks(text: &str) -> Vec<(String, String)> {
    let mut out = Vec::new();
    let mut lines = text.lines();
    while let Some(line) = lines.next() {
        let t = line.trim_start();
        let fence = if t.starts_with("```") {
            "```"
        } else if t.starts_with("~~~") {
            "~~~"
        } else {
            continue;
        };
        let info = t.trim_start_matches(fence.chars().next().unwrap_or('`')).trim().to_string();
        let mut body = Vec::new();
        for l in lines.by_ref() {
            if l.trim_start().starts_with(fence) {
                break;
            }
            body.push(l);
        }
        out.push((info, body.join("\n")));
    }
    out
}

/// Pulls the candidate rule for `language` out of a model response. The
/// first fenced block tagged `json` wins, else the first block whose body
/// is a JSON object.
pub fn parse_base_rule_response(text: &str, language: &str) -> Result<ParsedRule, ResponseError> {
    let blocks = fenced_blocks(text);
    let body = blocks
        .iter()
        .find(|(info, _)| info.eq_ignore_ascii_case("json"))
        .or_else(|| blocks.iter().find(|(_, b)| b.trim_start().starts_with('{')))
        .map(|(_, b)| b.as_str())
        .ok_or(ResponseError::NoBlock)?;
    let file: RuleFile = serde_json::from_str(body).map_err(|e| ResponseError::Json(e.to_string()))?;
    if file.0.len() != 1 {
        return Err(ResponseError::EntryCount(file.0.len()));
    }
    let (node_type, value) = file.0.into_iter().next().expect("one entry");
    let entry = RuleEntry::from_json(&value).map_err(|e| match e {
        RuleError::Program(crate::dsl::ProgramError::UnknownOp(op)) => ResponseError::UnknownOp(op),
        other => ResponseError::Rule(other.to_string()),
    })?;
    let claimed_output = text
        .lines()
        .rev()
        .find_map(|l| l.trim().strip_prefix("Output:"))
        .map(|s| s.trim().trim_matches('`').to_string());
    Ok(ParsedRule {
        rule: entry.into_rule(LanguageId::new(language), node_type),
        claimed_output,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Accept,
    Reject,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TestCase {
    pub snippet: String,
    pub expected: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CaseOutcome {
    pub snippet: String,
    pub expected: String,
    pub actual: Option<String>,
    pub error: Option<String>,
    pub matched: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub candidate: SyntacticRule,
    pub outcomes: Vec<CaseOutcome>,
    pub verdict: Verdict,
    pub reasons: Vec<String>,
}

impl ValidationReport {
    pub fn accepted(&self) -> Option<&SyntacticRule> {
        (self.verdict == Verdict::Accept).then_some(&self.candidate)
    }
}

/// Runs the candidate on every test case; accepted only when every output
/// matches exactly. A candidate without test cases is rejected.
pub fn validate_candidate(rule: &SyntacticRule, cases: &[TestCase]) -> ValidationReport {
    let mut reasons = Vec::new();
    let outcomes: Vec<CaseOutcome> = cases
        .iter()
        .enumerate()
        .map(|(i, c)| match rule.extract(&c.snippet) {
            Ok(actual) => {
                let matched = actual == c.expected;
                if !matched {
                    reasons.push(format!("case {}: expected {:?}, got {:?}", i + 1, c.expected, actual));
                }
                CaseOutcome {
                    snippet: c.snippet.clone(),
                    expected: c.expected.clone(),
                    actual: Some(actual),
                    error: None,
                    matched,
                }
            }
            Err(e) => {
                reasons.push(format!("case {}: extractor failed at stage {}: {}", i + 1, e.stage, e.kind));
                CaseOutcome {
                    snippet: c.snippet.clone(),
                    expected: c.expected.clone(),
                    actual: None,
                    error: Some(e.to_string()),
                    matched: false,
                }
            }
        })
        .collect();
    if cases.is_empty() {
        reasons.push("no test cases".into());
    }
    let verdict = if reasons.is_empty() { Verdict::Accept } else { Verdict::Reject };
    ValidationReport {
        candidate: rule.clone(),
        outcomes,
        verdict,
        reasons,
    }
}

#[derive(Debug, Error)]
pub enum CommitError {
    #[error("candidate was rejected: {0}")]
    Rejected(String),
    #[error(transparent)]
    Rule(#[from] RuleError),
}

/// Commits the candidate of an accepted report into the rule directory.
pub fn commit_validated(dir: &Path, report: &ValidationReport, expected_version: u64) -> Result<u64, CommitError> {
    let rule = report
        .accepted()
        .ok_or_else(|| CommitError::Rejected(report.reasons.join("; ")))?;
    Ok(commit_rule(dir, rule, expected_version)?)
}
