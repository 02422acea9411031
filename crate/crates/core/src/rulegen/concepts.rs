//! Concept-list and package-to-concept mapping prompts, and parsing of the
//! tabular responses.

use std::collections::HashMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::base_rule::PromptError;
use super::{Exemplar, PromptBundle, PromptKind, TestInput};
use crate::semantic::{normalize_package, ConceptList, PackageConcept, PendingPackage, OTHERS};

pub const DEFAULT_BATCH_SIZE: usize = 30;
pub const END_SENTINEL: &str = "<end>";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConceptListPersona {
    Enterprise,
    #[default]
    Taxonomist,
}

impl ConceptListPersona {
    pub fn system_instruction(self) -> &'static str {
        match self {
            Self::Enterprise => "You are an enterprise software professional",
            Self::Taxonomist => "You are a taxonomist for programming language packages",
        }
    }
}

pub const MAPPING_SYSTEM: &str =
    "You are a discriminating and conservative programming specialist, responsible for classifying programming language packages";

fn render(system: &str, instruction: &str, context: &str) -> String {
    let mut out = format!("## System\n{system}\n\n## Task\n{instruction}\n");
    if !context.is_empty() {
        let _ = write!(out, "\n## Context\n{context}\n");
    }
    out
}

/// First prompt of the concept-list conversation.
pub fn build_concept_list_prompt(dimension: &str, mandatory: &[String], persona: ConceptListPersona) -> PromptBundle {
    let instruction = format!(
        "Your task is to provide a comprehensive, non-overlapping, and flat list of software library concepts based on {dimension}. Give one concept per line."
    );
    let context = if mandatory.is_empty() {
        String::new()
    } else {
        let mut c = "The list must include the following concepts:\n".to_string();
        for m in mandatory {
            let _ = writeln!(c, "- {m}");
        }
        c.trim_end().to_string()
    };
    let system = persona.system_instruction();
    PromptBundle {
        kind: PromptKind::ConceptList,
        system_instruction: system.to_string(),
        rendered: render(system, &instruction, &context),
        instruction,
        exemplars: Vec::new(),
        test_input: TestInput::None,
        notes: Vec::new(),
    }
}

/// Follow-up prompt asking for concepts missing from `current`.
pub fn build_missing_concepts_prompt(dimension: &str, current: &[String], persona: ConceptListPersona) -> PromptBundle {
    let instruction = format!(
        "List all {dimension}-based concepts of software libraries which are missing in this list and have no overlap with any of the items in this list"
    );
    let context = current.iter().map(|c| format!("- {c}")).collect::<Vec<_>>().join("\n");
    let system = persona.system_instruction();
    PromptBundle {
        kind: PromptKind::ConceptList,
        system_instruction: system.to_string(),
        rendered: render(system, &instruction, &context),
        instruction,
        exemplars: Vec::new(),
        test_input: TestInput::None,
        notes: Vec::new(),
    }
}

/// Concept names from a list-shaped response: bullets, numbering and
/// emphasis are stripped, text after a colon or " - " is treated as a
/// description. Duplicates (case-insensitive) and "Others" are dropped.
pub fn parse_concept_list_response(text: &str) -> Vec<String> {
    let mut seen = std::collections::HashSet::new();
    let mut out = Vec::new();
    for line in text.lines() {
        let mut l = line.trim();
        if l.is_empty() || l.starts_with('#') || l.starts_with("```") || l.eq_ignore_ascii_case(END_SENTINEL) {
            continue;
        }
        l = l.trim_start_matches(['-', '*', '+', '•']).trim_start();
        let digits = l.chars().take_while(|c| c.is_ascii_digit()).count();
        if digits > 0 && l[digits..].starts_with(['.', ')']) {
            l = l[digits + 1..].trim_start();
        }
        let l = l.split(':').next().unwrap_or("");
        let l = l.split(" - ").next().unwrap_or("");
        let name = l.replace("**", "").trim().trim_end_matches('.').trim().to_string();
        if name.is_empty() || name.eq_ignore_ascii_case(OTHERS) {
            continue;
        }
        if seen.insert(name.to_lowercase()) {
            out.push(name);
        }
    }
    out
}

/// One prompt covering a contiguous slice of the package list.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MappingBatch {
    pub index: usize,
    pub packages: Vec<PendingPackage>,
    pub prompt: PromptBundle,
}

fn table(rows: impl IntoIterator<Item = Vec<String>>, header: &[&str]) -> String {
    let mut out = format!("| {} |\n|{}\n", header.join(" | "), " --- |".repeat(header.len()));
    for r in rows {
        let _ = writeln!(out, "| {} |", r.join(" | "));
    }
    out
}

/// Splits `packages` into order-preserving batches of at most `batch_size`
/// and renders one mapping prompt per batch.
pub fn build_semantic_mapping_prompts(
    packages: &[PendingPackage],
    concepts: &ConceptList,
    few_shots: &[PackageConcept],
    batch_size: usize,
) -> Result<Vec<MappingBatch>, PromptError> {
    if concepts.concepts.is_empty() {
        return Err(PromptError::EmptyConceptList);
    }
    let batch_size = batch_size.max(1);
    let instruction = format!(
        "Your task is to categorize the following packages in the given programming languages based on their {}",
        concepts.dimension
    );
    let context = format!(
        "Choose the concepts from the following list: {}. Given the package name and language in tabular format, add a \"Concept\" column and output the updated tabular data. Do not include concepts outside of this provided list. If you are absolutely not able to categorize a package, categorize it as \"Others\". Add <end> at the end of your response.",
        concepts.concepts.join(", ")
    );
    let shots = table(
        few_shots
            .iter()
            .map(|s| vec![s.package.clone(), s.language.clone(), s.concept.clone()]),
        &["Package", "Language", "Concept"],
    );
    let exemplars: Vec<Exemplar> = few_shots
        .iter()
        .map(|s| Exemplar {
            language: s.language.clone(),
            code_snippet: s.package.clone(),
            rendered_ast: String::new(),
            reasoning: String::new(),
            expected: s.concept.clone(),
        })
        .collect();

    Ok(packages
        .chunks(batch_size)
        .enumerate()
        .map(|(index, chunk)| {
            let input = table(
                chunk.iter().map(|p| vec![p.package.clone(), p.language.clone()]),
                &["Package", "Language"],
            );
            let mut rendered = render(MAPPING_SYSTEM, &instruction, &context);
            if !few_shots.is_empty() {
                let _ = write!(rendered, "\n## Examples\n{shots}");
            }
            let _ = write!(rendered, "\n## Input\n{input}");
            MappingBatch {
                index,
                packages: chunk.to_vec(),
                prompt: PromptBundle {
                    kind: PromptKind::SemanticMapping,
                    system_instruction: MAPPING_SYSTEM.to_string(),
                    instruction: instruction.clone(),
                    exemplars: exemplars.clone(),
                    test_input: TestInput::Packages {
                        rows: chunk.iter().map(|p| (p.package.clone(), p.language.clone())).collect(),
                    },
                    notes: Vec::new(),
                    rendered,
                },
            }
        })
        .collect())
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MappingError {
    #[error("response was truncated: no {END_SENTINEL} sentinel")]
    Truncated,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct MappingOutcome {
    /// Parsed triples; in batch order when a batch was given.
    pub mappings: Vec<PackageConcept>,
    pub warnings: Vec<String>,
    pub row_errors: Vec<String>,
    /// Batch packages the response did not cover.
    pub missing: Vec<PendingPackage>,
}

fn cells(line: &str) -> Option<Vec<String>> {
    let l = line.trim();
    if !l.starts_with('|') {
        return None;
    }
    let inner = l.trim_start_matches('|').trim_end_matches('|');
    Some(inner.split('|').map(|c| c.trim().to_string()).collect())
}

/// Parses a mapping response table up to the `<end>` sentinel. Concepts
/// outside `concepts` become "Others" with a warning. With `batch`, rows
/// are reordered to the batch order and rows for unrequested packages are
/// reported as errors.
pub fn parse_semantic_mapping_response(
    text: &str,
    concepts: &ConceptList,
    batch: Option<&[PendingPackage]>,
) -> Result<MappingOutcome, MappingError> {
    let end = text.find(END_SENTINEL).ok_or(MappingError::Truncated)?;
    let mut out = MappingOutcome::default();
    let mut parsed = Vec::new();
    for (lineno, line) in text[..end].lines().enumerate() {
        let Some(row) = cells(line) else { continue };
        if row.iter().all(|c| c.chars().all(|ch| matches!(ch, '-' | ':' | ' '))) {
            continue;
        }
        if row.first().is_some_and(|c| c.eq_ignore_ascii_case("package")) {
            continue;
        }
        let [package, language, concept] = row.as_slice() else {
            out.row_errors
                .push(format!("line {}: expected 3 cells, found {}", lineno + 1, row.len()));
            continue;
        };
        if package.is_empty() || language.is_empty() {
            out.row_errors.push(format!("line {}: empty package or language", lineno + 1));
            continue;
        }
        let concept = match concepts.canonical(concept) {
            Some(c) => c.to_string(),
            None => {
                out.warnings.push(format!(
                    "line {}: concept {concept:?} for {package} is not in the list; using {OTHERS}",
                    lineno + 1
                ));
                OTHERS.to_string()
            }
        };
        parsed.push(PackageConcept {
            package: package.clone(),
            language: language.clone(),
            concept,
        });
    }

    let Some(batch) = batch else {
        out.mappings = parsed;
        return Ok(out);
    };
    let key = |p: &str, l: &str| (normalize_package(p), l.trim().to_ascii_lowercase());
    let mut by_key: HashMap<(String, String), PackageConcept> = HashMap::new();
    for row in parsed {
        let k = key(&row.package, &row.language);
        if !batch.iter().any(|p| key(&p.package, &p.language) == k) {
            out.row_errors
                .push(format!("row for {} ({}) was not requested", row.package, row.language));
            continue;
        }
        if by_key.contains_key(&k) {
            out.row_errors
                .push(format!("repeated row for {} ({})", row.package, row.language));
            continue;
        }
        by_key.insert(k, row);
    }
    for p in batch {
        match by_key.remove(&key(&p.package, &p.language)) {
            Some(row) => out.mappings.push(PackageConcept {
                package: p.package.clone(),
                language: p.language.clone(),
                concept: row.concept,
            }),
            None => out.missing.push(p.clone()),
        }
    }
    Ok(out)
}
