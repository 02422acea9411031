//! Offline rule generation: prompt assembly, response parsing and
//! validation for base syntactic rules and semantic package mappings.

pub mod base_rule;
pub mod completer;
pub mod concepts;

use serde::{Deserialize, Serialize};

pub use base_rule::{
    build_base_rule_prompt, commit_validated, parse_base_rule_response, validate_candidate, BaseRuleRequest,
    CaseOutcome, CommitError, ParsedRule, PromptError, Pruning, ResponseError, TestCase, ValidationReport, Verdict,
};
pub use completer::{completer_from_spec, prompt_hash, Completer, CompleterError, GenerationLimits, StubCompleter};
pub use concepts::{
    build_concept_list_prompt, build_missing_concepts_prompt, build_semantic_mapping_prompts,
    parse_concept_list_response, parse_semantic_mapping_response, ConceptListPersona, MappingBatch, MappingError,
    MappingOutcome, DEFAULT_BATCH_SIZE, END_SENTINEL,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PromptKind {
    BaseRule,
    ConceptList,
    SemanticMapping,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Exemplar {
    pub language: String,
    pub code_snippet: String,
    pub rendered_ast: String,
    pub reasoning: String,
    pub expected: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum TestInput {
    Code {
        language: String,
        code_snippet: String,
        rendered_ast: String,
    },
    Packages {
        /// (package, language) in the order sent.
        rows: Vec<(String, String)>,
    },
    None,
}

/// A fully assembled prompt plus the parts it was built from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptBundle {
    pub kind: PromptKind,
    pub system_instruction: String,
    pub instruction: String,
    pub exemplars: Vec<Exemplar>,
    pub test_input: TestInput,
    pub notes: Vec<String>,
    pub rendered: String,
}
