//! Base syntactic rule database: grammar node type to UBSR node type plus
//! an extractor program, one JSON file per language.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use serde::de::{MapAccess, Visitor};
use serde::{Deserialize, Deserializer, Serialize};
use thiserror::Error;

use crate::dsl::{ExtractError, ExtractorProgram, ProgramError};
use crate::ir::{Concept, UbsrNodeType};
use crate::registry::LanguageId;

pub const VERSION_FILE: &str = "VERSION";
const LOCK_FILE: &str = ".commit.lock";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SyntacticRule {
    pub language: LanguageId,
    pub ast_node_type: String,
    pub ubsr_node_type: UbsrNodeType,
    pub extractor: ExtractorProgram,
    pub test_snippet: String,
    pub expected: String,
}

impl SyntacticRule {
    pub fn concept(&self) -> Option<Concept> {
        self.ubsr_node_type.concept()
    }

    pub fn extract(&self, snippet: &str) -> Result<String, ExtractError> {
        self.extractor.run(snippet)
    }

    pub fn entry(&self) -> RuleEntry {
        RuleEntry {
            ubsr_node_type: self.ubsr_node_type,
            extractor: self.extractor.clone(),
            test_snippet: self.test_snippet.clone(),
            expected: self.expected.clone(),
        }
    }
}

/// On-disk form of one rule; the key (grammar node type) and language
/// come from the surrounding file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RuleEntry {
    pub ubsr_node_type: UbsrNodeType,
    pub extractor: ExtractorProgram,
    pub test_snippet: String,
    pub expected: String,
}

impl RuleEntry {
    pub fn into_rule(self, language: LanguageId, ast_node_type: String) -> SyntacticRule {
        SyntacticRule {
            language,
            ast_node_type,
            ubsr_node_type: self.ubsr_node_type,
            extractor: self.extractor,
            test_snippet: self.test_snippet,
            expected: self.expected,
        }
    }

    /// Parses one entry from JSON, reporting unknown stage ops by name.
    pub fn from_json(value: &serde_json::Value) -> Result<Self, RuleError> {
        let obj = value.as_object().ok_or_else(|| RuleError::Malformed("rule must be an object".into()))?;
        for key in obj.keys() {
            if !["ubsr_node_type", "extractor", "test_snippet", "expected"].contains(&key.as_str()) {
                return Err(RuleError::Malformed(format!("unknown field {key:?}")));
            }
        }
        let field = |k: &str| obj.get(k).ok_or_else(|| RuleError::Malformed(format!("missing field {k:?}")));
        let ubsr_node_type: UbsrNodeType = serde_json::from_value(field("ubsr_node_type")?.clone())
            .map_err(|e| RuleError::Malformed(e.to_string()))?;
        if ubsr_node_type == UbsrNodeType::Root {
            return Err(RuleError::RootTarget);
        }
        let extractor = ExtractorProgram::from_json(field("extractor")?)?;
        let text = |k: &str| -> Result<String, RuleError> {
            field(k)?
                .as_str()
                .map(str::to_string)
                .ok_or_else(|| RuleError::Malformed(format!("field {k:?} must be a string")))
        };
        Ok(Self {
            ubsr_node_type,
            extractor,
            test_snippet: text("test_snippet")?,
            expected: text("expected")?,
        })
    }
}

#[derive(Debug, Error)]
pub enum RuleError {
    #[error("malformed rule file: {0}")]
    Malformed(String),
    #[error("{path}: {message}")]
    MalformedFile { path: PathBuf, message: String },
    #[error(transparent)]
    Program(#[from] ProgramError),
    #[error("duplicate rule for ({language}, {ast_node_type})")]
    Duplicate { language: String, ast_node_type: String },
    #[error("rules may not target ubsr_root")]
    RootTarget,
    #[error("rules directory {0} does not exist")]
    MissingDir(PathBuf),
    #[error("stale version: database is at {current}, commit was based on {expected}")]
    StaleVersion { current: u64, expected: u64 },
    #[error("another commit is in progress ({0} exists)")]
    Locked(PathBuf),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Per-language rule file contents. Deserializing rejects duplicate keys,
/// which a plain map would silently collapse.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct RuleFile(pub BTreeMap<String, serde_json::Value>);

impl<'de> Deserialize<'de> for RuleFile {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct V;
        impl<'de> Visitor<'de> for V {
            type Value = RuleFile;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a map from grammar node type to rule")
            }
            fn visit_map<A: MapAccess<'de>>(self, mut m: A) -> Result<RuleFile, A::Error> {
                let mut out = BTreeMap::new();
                while let Some((k, v)) = m.next_entry::<String, serde_json::Value>()? {
                    if out.contains_key(&k) {
                        return Err(serde::de::Error::custom(format!("duplicate key {k:?}")));
                    }
                    out.insert(k, v);
                }
                Ok(RuleFile(out))
            }
        }
        d.deserialize_map(V)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct RuleDatabase {
    pub version: u64,
    rules: BTreeMap<(LanguageId, String), SyntacticRule>,
}

impl RuleDatabase {
    pub fn new(version: u64) -> Self {
        Self {
            version,
            rules: BTreeMap::new(),
        }
    }

    /// Bundled rules for the registered languages.
    pub fn builtin() -> Self {
        let mut db = Self::new(BUILTIN_VERSION);
        for (lang, text) in BUILTIN_RULES {
            db.merge_file(&LanguageId::new(lang), text)
                .unwrap_or_else(|e| panic!("bundled rules for {lang}: {e}"));
        }
        db
    }

    pub fn insert(&mut self, rule: SyntacticRule) -> Result<(), RuleError> {
        if rule.ubsr_node_type == UbsrNodeType::Root {
            return Err(RuleError::RootTarget);
        }
        let key = (rule.language.clone(), rule.ast_node_type.clone());
        if self.rules.contains_key(&key) {
            return Err(RuleError::Duplicate {
                language: key.0.to_string(),
                ast_node_type: key.1,
            });
        }
        self.rules.insert(key, rule);
        Ok(())
    }

    pub fn lookup(&self, language: &str, ast_node_type: &str) -> Option<&SyntacticRule> {
        self.rules
            .get(&(LanguageId::new(language), ast_node_type.to_string()))
    }

    pub fn rules(&self) -> impl Iterator<Item = &SyntacticRule> {
        self.rules.values()
    }

    pub fn rules_for<'a>(&'a self, language: &'a str) -> impl Iterator<Item = &'a SyntacticRule> + 'a {
        let id = LanguageId::new(language);
        self.rules.values().filter(move |r| r.language == id)
    }

    pub fn has_language(&self, language: &str) -> bool {
        self.rules_for(language).next().is_some()
    }

    pub fn languages(&self) -> Vec<LanguageId> {
        let mut out: Vec<LanguageId> = self.rules.keys().map(|k| k.0.clone()).collect();
        out.dedup();
        out
    }

    pub fn len(&self) -> usize {
        self.rules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }

    /// Concept tag for a grammar node type, as used by parse-time tagging.
    pub fn concept_of(&self, language: &str, ast_node_type: &str) -> Option<Concept> {
        self.lookup(language, ast_node_type).and_then(SyntacticRule::concept)
    }

    fn merge_file(&mut self, language: &LanguageId, text: &str) -> Result<(), RuleError> {
        let file: RuleFile = serde_json::from_str(text).map_err(|e| RuleError::Malformed(e.to_string()))?;
        for (key, value) in file.0 {
            let entry = RuleEntry::from_json(&value)?;
            self.insert(entry.into_rule(language.clone(), key))?;
        }
        Ok(())
    }

    /// Canonical text of one language's rule file: pretty JSON, keys
    /// sorted, trailing newline.
    pub fn render_language(&self, language: &str) -> String {
        let map: BTreeMap<&str, RuleEntry> = self
            .rules_for(language)
            .map(|r| (r.ast_node_type.as_str(), r.entry()))
            .collect();
        let mut s = serde_json::to_string_pretty(&map).expect("rule entries serialize");
        s.push('\n');
        s
    }
}

/// Loads every `<language>.json` in `dir` plus the `VERSION` stamp (0 when
/// absent).
pub fn load_rules(dir: &Path) -> Result<RuleDatabase, RuleError> {
    if !dir.is_dir() {
        return Err(RuleError::MissingDir(dir.to_path_buf()));
    }
    let mut db = RuleDatabase::new(read_version(dir)?);
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    paths.sort();
    for path in paths {
        let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or_default();
        let lang = LanguageId::new(stem);
        let text = fs::read_to_string(&path)?;
        db.merge_file(&lang, &text).map_err(|e| match e {
            RuleError::Duplicate { .. } => e,
            other => RuleError::MalformedFile {
                path: path.clone(),
                message: other.to_string(),
            },
        })?;
    }
    Ok(db)
}

/// Writes one file per language and the version stamp. Each file is
/// replaced atomically.
pub fn save_rules(db: &RuleDatabase, dir: &Path) -> Result<(), RuleError> {
    fs::create_dir_all(dir)?;
    for lang in db.languages() {
        write_atomic(&dir.join(format!("{lang}.json")), db.render_language(lang.as_str()).as_bytes())?;
    }
    write_atomic(&dir.join(VERSION_FILE), format!("{}\n", db.version).as_bytes())?;
    Ok(())
}

pub fn read_version(dir: &Path) -> Result<u64, RuleError> {
    match fs::read_to_string(dir.join(VERSION_FILE)) {
        Ok(s) => s
            .trim()
            .parse()
            .map_err(|_| RuleError::Malformed(format!("bad version stamp {:?}", s.trim()))),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(0),
        Err(e) => Err(e.into()),
    }
}

pub(crate) fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

/// Exclusive lock on a database directory for the duration of a commit.
pub(crate) struct CommitLock(PathBuf);

impl CommitLock {
    pub(crate) fn acquire(dir: &Path) -> Result<Self, RuleError> {
        let path = dir.join(LOCK_FILE);
        match fs::OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(_) => Ok(Self(path)),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => Err(RuleError::Locked(path)),
            Err(e) => Err(e.into()),
        }
    }
}

impl Drop for CommitLock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.0);
    }
}

/// Adds `rule` to the database in `dir`, provided the stored version still
/// equals `expected_version`. Returns the new version.
pub fn commit_rule(dir: &Path, rule: &SyntacticRule, expected_version: u64) -> Result<u64, RuleError> {
    if !dir.is_dir() {
        return Err(RuleError::MissingDir(dir.to_path_buf()));
    }
    let _lock = CommitLock::acquire(dir)?;
    let mut db = load_rules(dir)?;
    if db.version != expected_version {
        return Err(RuleError::StaleVersion {
            current: db.version,
            expected: expected_version,
        });
    }
    db.insert(rule.clone())?;
    db.version += 1;
    let lang = rule.language.as_str();
    write_atomic(&dir.join(format!("{lang}.json")), db.render_language(lang).as_bytes())?;
    write_atomic(&dir.join(VERSION_FILE), format!("{}\n", db.version).as_bytes())?;
    Ok(db.version)
}

const BUILTIN_VERSION: u64 = 1;

macro_rules! bundled {
    ($($lang:literal),* $(,)?) => {
        &[$(($lang, include_str!(concat!("../data/rules/", $lang, ".json")))),*]
    };
}

/// Bundled rule files, keyed by language.
pub const BUILTIN_RULES: &[(&str, &str)] = bundled!(
    "agda", "c", "cpp", "csharp", "d", "dart", "elm", "go", "haskell", "java", "javascript",
    "kotlin", "nim", "objective_c", "ocaml", "perl", "python", "qml", "rust", "scala", "typescript",
);

/// Writes the bundled rules into `dir`, as the starting point of an
/// editable database.
pub fn install_builtin(dir: &Path) -> Result<(), RuleError> {
    save_rules(&RuleDatabase::builtin(), dir)
}
