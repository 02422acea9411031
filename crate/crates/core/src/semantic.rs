//! Semantic rule sets: (package, language) to a concept per dimension,
//! and annotation of extracted packages.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ir::{NodeRow, NodeTable, UbsrNodeType};
use crate::rules::{write_atomic, CommitLock};
use crate::table::{Column, ColumnData, Table};
use crate::trie::Trie;

/// Fallback concept for packages that fit nowhere.
pub const OTHERS: &str = "Others";
pub const CONCEPT_PREFIX: &str = "concept_";

pub fn normalize_package(name: &str) -> String {
    name.trim().to_lowercase()
}

#[derive(Debug, Error)]
pub enum SemanticError {
    #[error("unknown dimension {0:?}")]
    UnknownDimension(String),
    #[error("duplicate rule for ({package}, {language})")]
    Duplicate { package: String, language: String },
    #[error("concept {concept:?} for {package} is not in the {dimension} list")]
    ConceptOutsideList {
        package: String,
        dimension: String,
        concept: String,
    },
    #[error("{package} ({language}) already maps {dimension} to {existing:?}")]
    KeyConflict {
        package: String,
        language: String,
        dimension: String,
        existing: String,
    },
    #[error("concept list: {0}")]
    ConceptList(String),
    #[error("bad header: expected package,language,concept_<dimension>..., got {0:?}")]
    Header(Vec<String>),
    #[error("stale version: rule set is at {current}, commit was based on {expected}")]
    StaleVersion { current: u64, expected: u64 },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Rules(#[from] crate::rules::RuleError),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConceptList {
    pub dimension: String,
    pub concepts: Vec<String>,
}

impl ConceptList {
    /// Trims names and drops blanks; rejects duplicates and "Others", which
    /// is always implied.
    pub fn new(dimension: impl Into<String>, concepts: impl IntoIterator<Item = impl Into<String>>) -> Result<Self, SemanticError> {
        let mut seen = HashSet::new();
        let mut out = Vec::new();
        for c in concepts {
            let c: String = c.into().trim().to_string();
            if c.is_empty() {
                continue;
            }
            if c.eq_ignore_ascii_case(OTHERS) {
                return Err(SemanticError::ConceptList(format!("{OTHERS:?} is implicit and may not be listed")));
            }
            if !seen.insert(c.to_lowercase()) {
                return Err(SemanticError::ConceptList(format!("duplicate concept {c:?}")));
            }
            out.push(c);
        }
        Ok(Self {
            dimension: dimension.into(),
            concepts: out,
        })
    }

    /// The listed name matching `name` case-insensitively, `Others` for the
    /// fallback, `None` otherwise.
    pub fn canonical(&self, name: &str) -> Option<&str> {
        let name = name.trim();
        if name.eq_ignore_ascii_case(OTHERS) {
            return Some(OTHERS);
        }
        self.concepts
            .iter()
            .find(|c| c.eq_ignore_ascii_case(name))
            .map(String::as_str)
    }

    /// One concept per line.
    pub fn load(path: &Path, dimension: &str) -> Result<Self, SemanticError> {
        let text = fs::read_to_string(path)?;
        Self::new(dimension, text.lines().map(|l| l.trim_start_matches(['-', '*', ' '])))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SemanticRule {
    pub package_name: String,
    pub language: String,
    pub concepts: BTreeMap<String, String>,
}

#[derive(Debug, Clone, Default)]
pub struct SemanticRuleSet {
    pub version: u64,
    dimensions: Vec<String>,
    rules: Vec<SemanticRule>,
    index: BTreeMap<String, Trie<usize>>,
}

impl PartialEq for SemanticRuleSet {
    fn eq(&self, other: &Self) -> bool {
        fn sorted(s: &SemanticRuleSet) -> Vec<&SemanticRule> {
            let mut r: Vec<&SemanticRule> = s.rules.iter().collect();
            r.sort_by(|a, b| (&a.language, &a.package_name).cmp(&(&b.language, &b.package_name)));
            r
        }
        self.version == other.version && self.dimensions == other.dimensions && sorted(self) == sorted(other)
    }
}

impl SemanticRuleSet {
    pub fn new(dimensions: impl IntoIterator<Item = impl Into<String>>) -> Self {
        Self {
            dimensions: dimensions.into_iter().map(Into::into).collect(),
            ..Default::default()
        }
    }

    pub fn dimensions(&self) -> &[String] {
        &self.dimensions
    }

    pub fn rules(&self) -> &[SemanticRule] {
        &self.rules
    }

    pub fn len(&self) -> usize {
        self.rules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }

    pub fn add_dimension(&mut self, dimension: &str) {
        if !self.dimensions.iter().any(|d| d == dimension) {
            self.dimensions.push(dimension.to_string());
        }
    }

    /// Adds a rule; names are normalized and empty concept cells dropped.
    pub fn insert(&mut self, mut rule: SemanticRule) -> Result<(), SemanticError> {
        rule.package_name = normalize_package(&rule.package_name);
        rule.language = rule.language.trim().to_ascii_lowercase();
        rule.concepts.retain(|_, v| !v.trim().is_empty());
        for d in rule.concepts.keys() {
            if !self.dimensions.contains(d) {
                return Err(SemanticError::UnknownDimension(d.clone()));
            }
        }
        let trie = self.index.entry(rule.language.clone()).or_default();
        if trie.contains_key(&rule.package_name) {
            return Err(SemanticError::Duplicate {
                package: rule.package_name,
                language: rule.language,
            });
        }
        trie.insert(&rule.package_name, self.rules.len());
        self.rules.push(rule);
        Ok(())
    }

    pub fn rule(&self, package: &str, language: &str) -> Option<&SemanticRule> {
        let lang = language.trim().to_ascii_lowercase();
        let i = *self.index.get(&lang)?.get(&normalize_package(package))?;
        Some(&self.rules[i])
    }

    /// Exact-match concept of `package` for `dimension`.
    pub fn lookup(&self, package: &str, language: &str, dimension: &str) -> Result<Option<&str>, SemanticError> {
        if !self.dimensions.iter().any(|d| d == dimension) {
            return Err(SemanticError::UnknownDimension(dimension.to_string()));
        }
        Ok(self
            .rule(package, language)
            .and_then(|r| r.concepts.get(dimension))
            .map(String::as_str))
    }

    /// Packages in `language` whose normalized names start with `prefix`.
    pub fn packages_with_prefix(&self, language: &str, prefix: &str) -> Vec<String> {
        self.index
            .get(&language.trim().to_ascii_lowercase())
            .map(|t| t.with_prefix(&normalize_package(prefix)).into_iter().map(|(k, _)| k).collect())
            .unwrap_or_default()
    }

    /// Records `concept` for each (package, language). A package already
    /// mapped to a different concept for this dimension is a conflict.
    pub fn merge_mappings(&mut self, dimension: &str, rows: &[PackageConcept]) -> Result<usize, SemanticError> {
        self.add_dimension(dimension);
        let mut added = 0;
        for row in rows {
            match self.rule(&row.package, &row.language).map(|r| r.concepts.get(dimension).cloned()) {
                Some(Some(existing)) if existing == row.concept => {}
                Some(Some(existing)) => {
                    return Err(SemanticError::KeyConflict {
                        package: normalize_package(&row.package),
                        language: row.language.clone(),
                        dimension: dimension.to_string(),
                        existing,
                    })
                }
                Some(None) => {
                    let lang = row.language.trim().to_ascii_lowercase();
                    let i = *self.index[&lang].get(&normalize_package(&row.package)).expect("rule present");
                    self.rules[i].concepts.insert(dimension.to_string(), row.concept.clone());
                    added += 1;
                }
                None => {
                    self.insert(SemanticRule {
                        package_name: row.package.clone(),
                        language: row.language.clone(),
                        concepts: BTreeMap::from([(dimension.to_string(), row.concept.clone())]),
                    })?;
                    added += 1;
                }
            }
        }
        Ok(added)
    }

    pub fn from_csv_reader(r: impl Read) -> Result<Self, SemanticError> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(r);
        let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
        let dims = parse_header(&header)?;
        let mut set = Self::new(dims.clone());
        for rec in rdr.records() {
            let rec = rec?;
            let concepts = dims
                .iter()
                .enumerate()
                .map(|(i, d)| (d.clone(), rec.get(i + 2).unwrap_or("").trim().to_string()))
                .filter(|(_, c)| !c.is_empty())
                .collect();
            set.insert(SemanticRule {
                package_name: rec.get(0).unwrap_or("").to_string(),
                language: rec.get(1).unwrap_or("").to_string(),
                concepts,
            })?;
        }
        Ok(set)
    }

    /// Rows sorted by (language, package).
    pub fn to_csv_string(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["package".to_string(), "language".to_string()];
        header.extend(self.dimensions.iter().map(|d| format!("{CONCEPT_PREFIX}{d}")));
        w.write_record(&header).expect("in-memory write");
        let mut rows: Vec<&SemanticRule> = self.rules.iter().collect();
        rows.sort_by(|a, b| (&a.language, &a.package_name).cmp(&(&b.language, &b.package_name)));
        for r in rows {
            let mut rec = vec![r.package_name.as_str(), r.language.as_str()];
            rec.extend(self.dimensions.iter().map(|d| r.concepts.get(d).map(String::as_str).unwrap_or("")));
            w.write_record(&rec).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv of utf-8 input")
    }

    /// Reads the CSV and its `.version` sidecar (0 when absent).
    pub fn load(path: &Path) -> Result<Self, SemanticError> {
        let mut set = Self::from_csv_reader(fs::File::open(path)?)?;
        set.version = read_version(path)?;
        Ok(set)
    }

    pub fn save(&self, path: &Path) -> Result<(), SemanticError> {
        if let Some(dir) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            fs::create_dir_all(dir)?;
        }
        write_atomic(path, self.to_csv_string().as_bytes())?;
        write_atomic(&version_path(path), format!("{}\n", self.version).as_bytes())?;
        Ok(())
    }
}

fn parse_header(header: &[String]) -> Result<Vec<String>, SemanticError> {
    let ok = header.len() >= 2 && header[0] == "package" && header[1] == "language";
    let dims: Option<Vec<String>> = header
        .iter()
        .skip(2)
        .map(|h| h.strip_prefix(CONCEPT_PREFIX).filter(|d| !d.is_empty()).map(str::to_string))
        .collect();
    match (ok, dims) {
        (true, Some(d)) => Ok(d),
        _ => Err(SemanticError::Header(header.to_vec())),
    }
}

pub fn version_path(csv_path: &Path) -> PathBuf {
    let mut name = csv_path.file_name().unwrap_or_default().to_os_string();
    name.push(".version");
    csv_path.with_file_name(name)
}

fn read_version(csv_path: &Path) -> Result<u64, SemanticError> {
    match fs::read_to_string(version_path(csv_path)) {
        Ok(s) => s
            .trim()
            .parse()
            .map_err(|_| SemanticError::Io(std::io::Error::new(std::io::ErrorKind::InvalidData, "bad version stamp"))),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(0),
        Err(e) => Err(e.into()),
    }
}

/// One (package, language, concept) mapping for a single dimension.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PackageConcept {
    pub package: String,
    pub language: String,
    pub concept: String,
}

/// Merges `rows` into the rule set at `csv_path` if its version is still
/// `expected_version`. A missing file counts as an empty set at version 0.
pub fn commit_mappings(
    csv_path: &Path,
    dimension: &str,
    rows: &[PackageConcept],
    expected_version: u64,
) -> Result<u64, SemanticError> {
    let dir = csv_path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir)?;
    let _lock = CommitLock::acquire(dir)?;
    let mut set = if csv_path.exists() {
        SemanticRuleSet::load(csv_path)?
    } else {
        SemanticRuleSet::new([dimension])
    };
    if set.version != expected_version {
        return Err(SemanticError::StaleVersion {
            current: set.version,
            expected: expected_version,
        });
    }
    set.merge_mappings(dimension, rows)?;
    set.version += 1;
    set.save(csv_path)?;
    Ok(set.version)
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PendingPackage {
    pub package: String,
    pub language: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DocumentConcepts {
    pub doc_id: i64,
    pub language: String,
    pub packages: Vec<String>,
    /// Concept of each mapped package occurrence, in package order.
    pub concepts: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Annotation {
    pub dimension: String,
    pub documents: Vec<DocumentConcepts>,
}

impl Annotation {
    pub fn column_name(&self) -> String {
        format!("{CONCEPT_PREFIX}{}", self.dimension)
    }

    pub fn to_table(&self) -> Table {
        let d = &self.documents;
        Table::new(vec![
            Column::new("doc_id", ColumnData::Int64(d.iter().map(|x| x.doc_id).collect())),
            Column::new("language", ColumnData::Utf8(d.iter().map(|x| x.language.clone()).collect())),
            Column::new("packages", ColumnData::Utf8List(d.iter().map(|x| x.packages.clone()).collect())),
            Column::new(self.column_name(), ColumnData::Utf8List(d.iter().map(|x| x.concepts.clone()).collect())),
        ])
    }
}

/// Package names carried by one package node. Multi-valued extractions are
/// joined with ", "; nodes whose extractor failed carry raw code and are
/// skipped.
pub fn package_names(row: &NodeRow) -> Vec<String> {
    if row.node_type != UbsrNodeType::Package || row.info.starts_with("extractor_error:") {
        return Vec::new();
    }
    let value = row
        .code_snippet
        .strip_prefix(UbsrNodeType::Package.as_str())
        .unwrap_or(&row.code_snippet);
    value
        .split(", ")
        .map(normalize_package)
        .filter(|p| !p.is_empty())
        .collect()
}

/// Concepts of every document's packages for `dimension`, plus the
/// packages that have no rule, deduplicated in first-seen order.
pub fn annotate(
    nodes: &NodeTable,
    rules: &SemanticRuleSet,
    dimension: &str,
) -> Result<(Annotation, Vec<PendingPackage>), SemanticError> {
    if !rules.dimensions().iter().any(|d| d == dimension) {
        return Err(SemanticError::UnknownDimension(dimension.to_string()));
    }
    let mut by_doc: BTreeMap<i64, Vec<&NodeRow>> = BTreeMap::new();
    for r in &nodes.rows {
        by_doc.entry(r.doc_id).or_default().push(r);
    }
    let per_doc: Vec<(DocumentConcepts, Vec<PendingPackage>)> = by_doc
        .into_par_iter()
        .map(|(doc_id, mut rows)| {
            rows.sort_by_key(|r| r.id);
            let language = rows
                .iter()
                .find(|r| r.node_type == UbsrNodeType::Root)
                .map(|r| r.language.clone())
                .unwrap_or_default();
            let mut doc = DocumentConcepts {
                doc_id,
                language,
                packages: Vec::new(),
                concepts: Vec::new(),
            };
            let mut pending = Vec::new();
            for row in &rows {
                for pkg in package_names(row) {
                    match rules.rule(&pkg, &row.language) {
                        Some(rule) => {
                            if let Some(c) = rule.concepts.get(dimension) {
                                doc.concepts.push(c.clone());
                            }
                        }
                        None => pending.push(PendingPackage {
                            package: pkg.clone(),
                            language: row.language.clone(),
                        }),
                    }
                    doc.packages.push(pkg);
                }
            }
            (doc, pending)
        })
        .collect();

    let mut seen = BTreeSet::new();
    let mut pending = Vec::new();
    let mut documents = Vec::with_capacity(per_doc.len());
    for (doc, p) in per_doc {
        documents.push(doc);
        for item in p {
            if seen.insert(item.clone()) {
                pending.push(item);
            }
        }
    }
    Ok((
        Annotation {
            dimension: dimension.to_string(),
            documents,
        },
        pending,
    ))
}

pub fn read_pending(path: &Path) -> Result<Vec<PendingPackage>, SemanticError> {
    let mut rdr = csv::Reader::from_path(path)?;
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    if header != ["package", "language"] {
        return Err(SemanticError::Header(header));
    }
    Ok(rdr.deserialize().collect::<Result<_, _>>()?)
}

pub fn write_pending(path: &Path, pending: &[PendingPackage]) -> Result<(), SemanticError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["package", "language"])?;
    for p in pending {
        w.write_record([&p.package, &p.language])?;
    }
    let bytes = w.into_inner().map_err(|e| std::io::Error::other(e.to_string()))?;
    let mut f = fs::File::create(path)?;
    f.write_all(&bytes)?;
    Ok(())
}
