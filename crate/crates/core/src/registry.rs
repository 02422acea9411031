//! Language registry: the supported languages, their syntactic paradigm,
//! whether they serve as exemplar ("known") languages, and which base
//! concepts they can express.

use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ir::Concept;

const BUILTIN: &str = include_str!("../data/registry.json");

/// Canonical lowercase language name.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LanguageId(String);

impl LanguageId {
    pub fn new(name: impl AsRef<str>) -> Self {
        Self(name.as_ref().trim().to_ascii_lowercase())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for LanguageId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for LanguageId {
    fn from(s: &str) -> Self {
        Self::new(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParadigmId {
    CLike,
    ScriptingDynamic,
    FunctionalExpression,
}

impl ParadigmId {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::CLike => "c_like",
            Self::ScriptingDynamic => "scripting_dynamic",
            Self::FunctionalExpression => "functional_expression",
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Self::CLike => "C-like Syntax",
            Self::ScriptingDynamic => "Scripting and Dynamic Syntax",
            Self::FunctionalExpression => "Functional and Expression-Oriented Syntax",
        }
    }
}

impl fmt::Display for ParadigmId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LanguageEntry {
    pub language: LanguageId,
    pub paradigm: ParadigmId,
    pub known: bool,
    pub supported_concepts: BTreeSet<Concept>,
}

impl LanguageEntry {
    pub fn supports(&self, concept: Concept) -> bool {
        self.supported_concepts.contains(&concept)
    }
}

#[derive(Debug, Error)]
pub enum RegistryError {
    #[error("language {0:?} is not registered")]
    Unregistered(String),
    #[error("language {0:?} registered twice")]
    Duplicate(String),
    #[error("malformed registry file: {0}")]
    Malformed(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Registry {
    pub version: u32,
    pub languages: Vec<LanguageEntry>,
}

impl Registry {
    /// The registry shipped with the crate.
    pub fn builtin() -> Self {
        Self::from_json(BUILTIN).expect("bundled registry is valid")
    }

    pub fn from_json(text: &str) -> Result<Self, RegistryError> {
        let reg: Self = serde_json::from_str(text)?;
        let mut seen = BTreeSet::new();
        for e in &reg.languages {
            if !seen.insert(e.language.clone()) {
                return Err(RegistryError::Duplicate(e.language.to_string()));
            }
        }
        Ok(reg)
    }

    pub fn load(path: &Path) -> Result<Self, RegistryError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn get(&self, language: &str) -> Result<&LanguageEntry, RegistryError> {
        let id = LanguageId::new(language);
        self.languages
            .iter()
            .find(|e| e.language == id)
            .ok_or_else(|| RegistryError::Unregistered(language.to_string()))
    }

    pub fn contains(&self, language: &str) -> bool {
        self.get(language).is_ok()
    }

    pub fn paradigm(&self, language: &str) -> Result<ParadigmId, RegistryError> {
        self.get(language).map(|e| e.paradigm)
    }

    pub fn known_languages(&self) -> impl Iterator<Item = &LanguageEntry> {
        self.languages.iter().filter(|e| e.known)
    }

    /// Language for a file, chosen by extension.
    pub fn detect(&self, path: &Path) -> Option<&LanguageEntry> {
        let ext = path.extension()?.to_str()?.to_ascii_lowercase();
        let lang = match ext.as_str() {
            "c" | "h" => "c",
            "java" => "java",
            "cs" => "csharp",
            "cpp" | "cc" | "cxx" | "hpp" | "hh" | "hxx" => "cpp",
            "m" | "mm" => "objective_c",
            "rs" => "rust",
            "go" => "go",
            "kt" | "kts" => "kotlin",
            "py" => "python",
            "js" | "mjs" | "cjs" => "javascript",
            "dart" => "dart",
            "ts" | "mts" | "cts" => "typescript",
            "qml" => "qml",
            "pl" | "pm" => "perl",
            "hs" => "haskell",
            "elm" => "elm",
            "agda" => "agda",
            "d" => "d",
            "nim" => "nim",
            "scala" | "sc" => "scala",
            "ml" => "ocaml",
            _ => return None,
        };
        self.get(lang).ok()
    }
}
