//! Rule-driven traversal from syntax trees to UBSR documents.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ir::{to_tabular, EdgeTable, IrError, NodeId, NodeMetadata, NodeTable, UbsrDocument};
use crate::parser::{parse, ParseError, ParseTree, TreeNode};
use crate::registry::Registry;
use crate::rules::RuleDatabase;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OnError {
    #[default]
    SkipFile,
    FailFast,
}

#[derive(Debug, Clone, Default)]
pub struct ExtractionOptions {
    /// Only inputs in these languages are processed; `None` keeps all.
    pub languages: Option<BTreeSet<String>>,
    pub on_error: OnError,
    pub include_unmatched_stats: bool,
}

#[derive(Debug, Error)]
pub enum ExtractError {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("no rules loaded for language {0:?}")]
    NoRules(String),
    #[error("extractor failed on {ast_node_type} at stage {stage}: {message}")]
    Node {
        ast_node_type: String,
        stage: usize,
        message: String,
    },
    #[error(transparent)]
    Ir(#[from] IrError),
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("{path}: {message}")]
    File { path: String, message: String },
}

/// A node whose extractor failed; the node is still emitted with its raw
/// span as the value.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeFailure {
    pub node_id: u32,
    pub ast_node_type: String,
    pub stage: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Extraction {
    pub document: UbsrDocument,
    pub node_failures: Vec<NodeFailure>,
    /// Grammar node types seen without a rule, with occurrence counts.
    /// Only filled when requested.
    pub unmatched: BTreeMap<String, usize>,
}

/// Extracts a document from `code` with the rules for `language`.
pub fn extract(
    code: &str,
    language: &str,
    db: &RuleDatabase,
    registry: &Registry,
) -> Result<Extraction, ExtractError> {
    extract_at("", code, language, db, registry, false)
}

pub fn extract_at(
    source_path: &str,
    code: &str,
    language: &str,
    db: &RuleDatabase,
    registry: &Registry,
    unmatched_stats: bool,
) -> Result<Extraction, ExtractError> {
    let tree = parse(code, language, registry)?;
    if !db.has_language(tree.language.as_str()) {
        return Err(ExtractError::NoRules(tree.language.to_string()));
    }
    Ok(extract_tree(source_path, code, &tree, db, unmatched_stats))
}

/// Runs the traversal over an already parsed tree.
pub fn extract_tree(
    source_path: &str,
    code: &str,
    tree: &ParseTree,
    db: &RuleDatabase,
    unmatched_stats: bool,
) -> Extraction {
    let language = tree.language.as_str();
    let mut out = Extraction {
        document: UbsrDocument::new_root(source_path, language, code),
        node_failures: Vec::new(),
        unmatched: BTreeMap::new(),
    };
    visit(&tree.root, NodeId(0), code, language, db, unmatched_stats, &mut out);
    out
}

fn visit(
    node: &TreeNode,
    parent: NodeId,
    code: &str,
    language: &str,
    db: &RuleDatabase,
    unmatched_stats: bool,
    out: &mut Extraction,
) {
    let mut next_parent = parent;
    if let Some(rule) = db.lookup(language, &node.node_type) {
        let span = node.text(code);
        let (value, info, failure) = match rule.extract(span) {
            Ok(v) => (v, node.node_type.clone(), None),
            Err(e) => (
                span.to_string(),
                format!("extractor_error:{}", e.stage),
                Some((e.stage, e.kind.to_string())),
            ),
        };
        let id = out.document.push_child(
            parent,
            rule.ubsr_node_type,
            format!("{} {}", rule.ubsr_node_type, value),
            NodeMetadata::new(info, language, span),
        );
        if let Some((stage, message)) = failure {
            out.node_failures.push(NodeFailure {
                node_id: id.0,
                ast_node_type: node.node_type.clone(),
                stage,
                message,
            });
        }
        next_parent = id;
    } else if unmatched_stats {
        *out.unmatched.entry(node.node_type.clone()).or_default() += 1;
    }
    for child in &node.children {
        visit(child, next_parent, code, language, db, unmatched_stats, out);
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceInput {
    pub path: String,
    pub code: String,
    pub language: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileError {
    pub path: String,
    pub language: String,
    pub reason: String,
}

#[derive(Debug, Clone, Default)]
pub struct CorpusOutput {
    pub nodes: NodeTable,
    pub edges: EdgeTable,
    pub error_log: Vec<FileError>,
    pub node_failures: Vec<(String, NodeFailure)>,
    pub unmatched: BTreeMap<String, BTreeMap<String, usize>>,
}

/// Extracts every input. `doc_id` is the input's position, so a file's rows
/// never depend on other files. Files are processed in parallel and merged
/// in input order.
pub fn extract_corpus(
    inputs: &[SourceInput],
    db: &RuleDatabase,
    registry: &Registry,
    options: &ExtractionOptions,
) -> Result<CorpusOutput, ExtractError> {
    let results: Vec<Option<Result<(NodeTable, EdgeTable, Extraction), ExtractError>>> = inputs
        .par_iter()
        .enumerate()
        .map(|(i, input)| {
            if let Some(keep) = &options.languages {
                if !keep.contains(&input.language) {
                    return None;
                }
            }
            Some(one_file(i, input, db, registry, options))
        })
        .collect();

    let mut out = CorpusOutput::default();
    for (input, result) in inputs.iter().zip(results) {
        let Some(result) = result else { continue };
        match result {
            Ok((nodes, edges, ex)) => {
                out.nodes.rows.extend(nodes.rows);
                out.edges.rows.extend(edges.rows);
                out.node_failures
                    .extend(ex.node_failures.into_iter().map(|f| (input.path.clone(), f)));
                if options.include_unmatched_stats {
                    let slot = out.unmatched.entry(input.language.clone()).or_default();
                    for (k, n) in ex.unmatched {
                        *slot.entry(k).or_default() += n;
                    }
                }
            }
            Err(e) if options.on_error == OnError::FailFast => {
                return Err(ExtractError::File {
                    path: input.path.clone(),
                    message: e.to_string(),
                })
            }
            Err(e) => out.error_log.push(FileError {
                path: input.path.clone(),
                language: input.language.clone(),
                reason: e.to_string(),
            }),
        }
    }
    Ok(out)
}

fn one_file(
    index: usize,
    input: &SourceInput,
    db: &RuleDatabase,
    registry: &Registry,
    options: &ExtractionOptions,
) -> Result<(NodeTable, EdgeTable, Extraction), ExtractError> {
    let ex = extract_at(
        &input.path,
        &input.code,
        &input.language,
        db,
        registry,
        options.include_unmatched_stats,
    )?;
    if options.on_error == OnError::FailFast {
        if let Some(f) = ex.node_failures.first() {
            return Err(ExtractError::Node {
                ast_node_type: f.ast_node_type.clone(),
                stage: f.stage,
                message: f.message.clone(),
            });
        }
    }
    let (mut nodes, mut edges) = to_tabular(std::slice::from_ref(&ex.document))?;
    let doc_id = index as i64;
    nodes.rows.iter_mut().for_each(|r| r.doc_id = doc_id);
    edges.rows.iter_mut().for_each(|r| r.doc_id = doc_id);
    Ok((nodes, edges, ex))
}

/// Walks `dir` and collects files whose language can be detected, in path
/// order. `language_override` forces one language for every file with a
/// registered extension.
pub fn collect_inputs(
    dir: &Path,
    registry: &Registry,
    language_override: Option<&str>,
) -> Result<(Vec<SourceInput>, Vec<FileError>), ExtractError> {
    let mut files = Vec::new();
    walk(dir, &mut files)?;
    files.sort();
    let mut inputs = Vec::new();
    let mut errors = Vec::new();
    for path in files {
        let Some(entry) = registry.detect(&path) else { continue };
        let language = language_override.unwrap_or(entry.language.as_str()).to_string();
        let rel = path.strip_prefix(dir).unwrap_or(&path).to_string_lossy().replace('\\', "/");
        let bytes = fs::read(&path).map_err(|source| ExtractError::Read {
            path: path.clone(),
            source,
        })?;
        match String::from_utf8(bytes) {
            Ok(code) => inputs.push(SourceInput {
                path: rel,
                code,
                language,
            }),
            Err(_) => errors.push(FileError {
                path: rel,
                language,
                reason: "not valid UTF-8".into(),
            }),
        }
    }
    Ok((inputs, errors))
}

fn walk(dir: &Path, out: &mut Vec<PathBuf>) -> Result<(), ExtractError> {
    let read = |p: &Path| ExtractError::Read {
        path: p.to_path_buf(),
        source: std::io::Error::new(std::io::ErrorKind::NotFound, "unreadable directory"),
    };
    let entries = fs::read_dir(dir).map_err(|source| ExtractError::Read {
        path: dir.to_path_buf(),
        source,
    })?;
    for entry in entries {
        let entry = entry.map_err(|_| read(dir))?;
        let path = entry.path();
        let ty = entry.file_type().map_err(|_| read(&path))?;
        if ty.is_dir() {
            walk(&path, out)?;
        } else if ty.is_file() {
            out.push(path);
        }
    }
    Ok(())
}
