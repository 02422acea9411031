//! Declarative extractor programs.
//!
//! A program is an ordered list of text stages run over a matched node's
//! source span. The working value is either one string or a list of strings;
//! scalar stages applied to a list run element-wise. The final value must be
//! a single string.

use std::collections::HashMap;
use std::fmt;
use std::sync::{Arc, Mutex, OnceLock};

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Names accepted in the `op` field, in documentation order.
pub const STAGE_OPS: [&str; 9] = [
    "split_once",
    "split_all",
    "token_at",
    "segment_at",
    "trim",
    "strip_prefix",
    "regex_capture",
    "dedup",
    "join",
];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case", deny_unknown_fields)]
pub enum Stage {
    /// Split at the first occurrence of `separator` into at most two pieces
    /// and keep piece `take_index`.
    SplitOnce { separator: String, take_index: usize },
    /// Split on every occurrence; turns a string into a list.
    SplitAll { separator: String },
    /// Split on `separator`, drop empty pieces, keep piece `index`.
    TokenAt { separator: String, index: usize },
    /// Piece `index` of a split on `separator`, empty pieces kept. Input
    /// without the separator passes through whole.
    SegmentAt { separator: String, index: usize },
    Trim,
    /// Remove `text` from the front when present.
    StripPrefix { text: String },
    /// Capture group `group` of the first match of `pattern`.
    RegexCapture { pattern: String, group: usize },
    /// Drop repeated list items, keeping first occurrences.
    Dedup,
    /// Join a list into one string.
    Join { separator: String },
}

impl Stage {
    pub fn op(&self) -> &'static str {
        match self {
            Self::SplitOnce { .. } => "split_once",
            Self::SplitAll { .. } => "split_all",
            Self::TokenAt { .. } => "token_at",
            Self::SegmentAt { .. } => "segment_at",
            Self::Trim => "trim",
            Self::StripPrefix { .. } => "strip_prefix",
            Self::RegexCapture { .. } => "regex_capture",
            Self::Dedup => "dedup",
            Self::Join { .. } => "join",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ExtractorProgram {
    pub stages: Vec<Stage>,
}

impl ExtractorProgram {
    pub fn new(stages: Vec<Stage>) -> Self {
        Self { stages }
    }

    /// Parses a program from its JSON array form, naming the first unknown
    /// op instead of reporting a generic shape error.
    pub fn from_json(value: &serde_json::Value) -> Result<Self, ProgramError> {
        let items = value.as_array().ok_or(ProgramError::NotAnArray)?;
        let stages = items
            .iter()
            .enumerate()
            .map(|(i, item)| {
                let op = item
                    .get("op")
                    .and_then(|v| v.as_str())
                    .ok_or(ProgramError::MissingOp(i))?;
                if !STAGE_OPS.contains(&op) {
                    return Err(ProgramError::UnknownOp(op.to_string()));
                }
                let bad = |message: String| ProgramError::BadStage { index: i, message };
                let stage: Stage = serde_json::from_value(item.clone()).map_err(|e| bad(e.to_string()))?;
                // unit variants slip past deny_unknown_fields when tagged
                let canonical = serde_json::to_value(&stage).expect("stages serialize");
                if let (Some(a), Some(b)) = (item.as_object(), canonical.as_object()) {
                    if let Some(extra) = a.keys().find(|k| !b.contains_key(*k)) {
                        return Err(bad(format!("unknown field `{extra}`")));
                    }
                }
                Ok(stage)
            })
            .collect::<Result<_, _>>()?;
        Ok(Self { stages })
    }

    pub fn run(&self, snippet: &str) -> Result<String, ExtractError> {
        let mut value = Value::Scalar(snippet.to_string());
        for (i, stage) in self.stages.iter().enumerate() {
            value = apply(stage, value).map_err(|kind| ExtractError { stage: i, kind })?;
        }
        match value {
            Value::Scalar(s) => Ok(s),
            Value::List(_) => Err(ExtractError {
                stage: self.stages.len(),
                kind: StageFailure::ListResult,
            }),
        }
    }

    /// Runs the program and records the value after every stage.
    pub fn trace(&self, snippet: &str) -> (Vec<Value>, Result<String, ExtractError>) {
        let mut steps = Vec::with_capacity(self.stages.len());
        let mut value = Value::Scalar(snippet.to_string());
        for (i, stage) in self.stages.iter().enumerate() {
            match apply(stage, value) {
                Ok(v) => {
                    steps.push(v.clone());
                    value = v;
                }
                Err(kind) => return (steps, Err(ExtractError { stage: i, kind })),
            }
        }
        let result = match value {
            Value::Scalar(s) => Ok(s),
            Value::List(_) => Err(ExtractError {
                stage: self.stages.len(),
                kind: StageFailure::ListResult,
            }),
        };
        (steps, result)
    }
}

/// Runs `program` over `code_snippet`.
pub fn run_extractor(program: &ExtractorProgram, code_snippet: &str) -> Result<String, ExtractError> {
    program.run(code_snippet)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Value {
    Scalar(String),
    List(Vec<String>),
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Scalar(s) => write!(f, "{s:?}"),
            Self::List(v) => write!(f, "{v:?}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum StageFailure {
    #[error("index {index} out of range for {len} pieces")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("pattern did not match")]
    NoMatch,
    #[error("capture group {0} did not participate in the match")]
    NoGroup(usize),
    #[error("invalid pattern: {0}")]
    BadPattern(String),
    #[error("split_all applied to a list")]
    NestedSplit,
    #[error("program ended with a list; finish with join")]
    ListResult,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("stage {stage}: {kind}")]
pub struct ExtractError {
    pub stage: usize,
    pub kind: StageFailure,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProgramError {
    #[error("extractor must be a JSON array of stages")]
    NotAnArray,
    #[error("stage {0} has no \"op\" field")]
    MissingOp(usize),
    #[error("unknown stage op {0:?}")]
    UnknownOp(String),
    #[error("stage {index}: {message}")]
    BadStage { index: usize, message: String },
}

fn cached_regex(pattern: &str) -> Result<Arc<Regex>, StageFailure> {
    static CACHE: OnceLock<Mutex<HashMap<String, Arc<Regex>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(Default::default);
    let mut map = cache.lock().unwrap_or_else(|e| e.into_inner());
    if let Some(r) = map.get(pattern) {
        return Ok(Arc::clone(r));
    }
    let re = Arc::new(Regex::new(pattern).map_err(|e| StageFailure::BadPattern(e.to_string()))?);
    map.insert(pattern.to_string(), Arc::clone(&re));
    Ok(re)
}

fn pick(pieces: Vec<&str>, index: usize) -> Result<String, StageFailure> {
    let len = pieces.len();
    pieces
        .into_iter()
        .nth(index)
        .map(str::to_string)
        .ok_or(StageFailure::IndexOutOfRange { index, len })
}

fn scalar(stage: &Stage, s: &str) -> Result<String, StageFailure> {
    match stage {
        Stage::SplitOnce { separator, take_index } => pick(s.splitn(2, separator.as_str()).collect(), *take_index),
        Stage::TokenAt { separator, index } => pick(
            s.split(separator.as_str()).filter(|p| !p.is_empty()).collect(),
            *index,
        ),
        Stage::SegmentAt { separator, index } => {
            if separator.is_empty() || !s.contains(separator.as_str()) {
                Ok(s.to_string())
            } else {
                pick(s.split(separator.as_str()).collect(), *index)
            }
        }
        Stage::Trim => Ok(s.trim().to_string()),
        Stage::StripPrefix { text } => Ok(s.strip_prefix(text.as_str()).unwrap_or(s).to_string()),
        Stage::RegexCapture { pattern, group } => {
            let re = cached_regex(pattern)?;
            let caps = re.captures(s).ok_or(StageFailure::NoMatch)?;
            caps.get(*group)
                .map(|m| m.as_str().to_string())
                .ok_or(StageFailure::NoGroup(*group))
        }
        Stage::SplitAll { .. } | Stage::Dedup | Stage::Join { .. } => {
            unreachable!("list stages are handled in apply")
        }
    }
}

fn apply(stage: &Stage, value: Value) -> Result<Value, StageFailure> {
    match (stage, value) {
        (Stage::SplitAll { separator }, Value::Scalar(s)) => Ok(Value::List(
            s.split(separator.as_str()).map(str::to_string).collect(),
        )),
        (Stage::SplitAll { .. }, Value::List(_)) => Err(StageFailure::NestedSplit),
        (Stage::Dedup, Value::List(items)) => {
            let mut out: Vec<String> = Vec::with_capacity(items.len());
            for it in items {
                if !out.contains(&it) {
                    out.push(it);
                }
            }
            Ok(Value::List(out))
        }
        (Stage::Dedup, v @ Value::Scalar(_)) => Ok(v),
        (Stage::Join { separator }, Value::List(items)) => Ok(Value::Scalar(items.join(separator))),
        (Stage::Join { .. }, v @ Value::Scalar(_)) => Ok(v),
        (stage, Value::Scalar(s)) => scalar(stage, &s).map(Value::Scalar),
        (stage, Value::List(items)) => items
            .iter()
            .map(|s| scalar(stage, s))
            .collect::<Result<_, _>>()
            .map(Value::List),
    }
}
