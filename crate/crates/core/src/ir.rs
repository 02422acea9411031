//! The unified base syntactic representation (UBSR): a per-sample graph of
//! concept nodes hanging off a single root, plus its wide-table form.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::table::{Column, ColumnData, ColumnKind, Table, TableError};

/// Node kinds of the representation. Serialized names are fixed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum UbsrNodeType {
    #[serde(rename = "ubsr_root")]
    Root,
    #[serde(rename = "ubsr_package")]
    Package,
    #[serde(rename = "ubsr_function")]
    Function,
    #[serde(rename = "ubsr_comment")]
    Comment,
}

impl UbsrNodeType {
    pub const ALL: [UbsrNodeType; 4] = [Self::Root, Self::Package, Self::Function, Self::Comment];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Root => "ubsr_root",
            Self::Package => "ubsr_package",
            Self::Function => "ubsr_function",
            Self::Comment => "ubsr_comment",
        }
    }

    /// The base concept this node type encodes; `None` for the root.
    pub fn concept(self) -> Option<Concept> {
        match self {
            Self::Root => None,
            Self::Package => Some(Concept::Package),
            Self::Function => Some(Concept::Function),
            Self::Comment => Some(Concept::Comment),
        }
    }
}

impl fmt::Display for UbsrNodeType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for UbsrNodeType {
    type Err = IrError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| IrError::UnknownNodeType(s.to_string()))
    }
}

/// A base syntactic concept.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Concept {
    Package,
    Function,
    Comment,
}

impl Concept {
    pub const ALL: [Concept; 3] = [Self::Package, Self::Function, Self::Comment];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Package => "package",
            Self::Function => "function",
            Self::Comment => "comment",
        }
    }

    pub fn node_type(self) -> UbsrNodeType {
        match self {
            Self::Package => UbsrNodeType::Package,
            Self::Function => UbsrNodeType::Function,
            Self::Comment => UbsrNodeType::Comment,
        }
    }
}

impl fmt::Display for Concept {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Concept {
    type Err = IrError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| IrError::UnknownConcept(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub u32);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Number of lines in a span; the empty string has zero lines and a
/// trailing newline does not open a new one.
pub fn count_lines(text: &str) -> u64 {
    text.lines().count() as u64
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeMetadata {
    pub info: String,
    pub language: String,
    pub original_code: String,
    pub loc_original_code: u64,
}

impl NodeMetadata {
    pub fn new(info: impl Into<String>, language: impl Into<String>, original_code: impl Into<String>) -> Self {
        let original_code = original_code.into();
        let loc_original_code = count_lines(&original_code);
        Self {
            info: info.into(),
            language: language.into(),
            original_code,
            loc_original_code,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UbsrNode {
    pub id: NodeId,
    pub code_snippet: String,
    pub node_type: UbsrNodeType,
    pub parents: Vec<NodeId>,
    pub children: Vec<NodeId>,
    pub metadata: NodeMetadata,
}

/// Relation carried by an edge. Only parent→child exists today.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Relation {
    #[serde(rename = "parent_node")]
    ParentNode,
}

impl Relation {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::ParentNode => "parent_node",
        }
    }
}

impl FromStr for Relation {
    type Err = IrError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "parent_node" => Ok(Self::ParentNode),
            other => Err(IrError::UnknownRelation(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UbsrEdge {
    pub source: NodeId,
    pub target: NodeId,
    pub directed_relation: Relation,
    pub metadata: BTreeMap<String, String>,
}

impl UbsrEdge {
    pub fn parent(source: NodeId, target: NodeId) -> Self {
        Self {
            source,
            target,
            directed_relation: Relation::ParentNode,
            metadata: BTreeMap::new(),
        }
    }
}

/// One code sample's graph.
///
/// The root's `info` field carries `source_path`, which is how the path
/// survives the round trip through the wide tables.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UbsrDocument {
    pub nodes: Vec<UbsrNode>,
    pub edges: Vec<UbsrEdge>,
    pub source_path: String,
}

impl UbsrDocument {
    /// A root-only document for `code` written in `language`.
    pub fn new_root(source_path: impl Into<String>, language: &str, code: &str) -> Self {
        let source_path = source_path.into();
        let root = UbsrNode {
            id: NodeId(0),
            code_snippet: format!("{} {}", UbsrNodeType::Root.as_str(), language),
            node_type: UbsrNodeType::Root,
            parents: Vec::new(),
            children: Vec::new(),
            metadata: NodeMetadata::new(source_path.clone(), language, code),
        };
        Self {
            nodes: vec![root],
            edges: Vec::new(),
            source_path,
        }
    }

    pub fn root(&self) -> Option<&UbsrNode> {
        self.nodes.iter().find(|n| n.node_type == UbsrNodeType::Root)
    }

    pub fn node(&self, id: NodeId) -> Option<&UbsrNode> {
        self.nodes.iter().find(|n| n.id == id)
    }

    pub fn language(&self) -> &str {
        self.root().map(|r| r.metadata.language.as_str()).unwrap_or("")
    }

    /// Appends a concept node under `parent`, keeping the node lists and the
    /// edge set in sync. Ids are handed out densely in call order.
    pub fn push_child(&mut self, parent: NodeId, node_type: UbsrNodeType, code_snippet: String, metadata: NodeMetadata) -> NodeId {
        let id = NodeId(self.nodes.len() as u32);
        self.nodes.push(UbsrNode {
            id,
            code_snippet,
            node_type,
            parents: vec![parent],
            children: Vec::new(),
            metadata,
        });
        if let Some(p) = self.nodes.iter_mut().find(|n| n.id == parent) {
            p.children.push(id);
        }
        self.edges.push(UbsrEdge::parent(parent, id));
        id
    }

    pub fn count(&self, node_type: UbsrNodeType) -> usize {
        self.nodes.iter().filter(|n| n.node_type == node_type).count()
    }
}

/// A broken document invariant.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    DuplicateId(NodeId),
    RootCount(usize),
    RootId(NodeId),
    RootHasParents(NodeId),
    RootInfoMismatch { info: String, source_path: String },
    DanglingReference { node: NodeId, missing: NodeId },
    Asymmetric { parent: NodeId, child: NodeId },
    DanglingEdge { source: NodeId, target: NodeId },
    DuplicateEdge { source: NodeId, target: NodeId },
    MissingEdge { source: NodeId, target: NodeId },
    ExtraEdge { source: NodeId, target: NodeId },
    Cycle(NodeId),
    Unreachable(NodeId),
    LocMismatch { node: NodeId, stored: u64, actual: u64 },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::DuplicateId(id) => write!(f, "node {id}: id is not unique"),
            Self::RootCount(n) => write!(f, "document has {n} root nodes, expected exactly 1"),
            Self::RootId(id) => write!(f, "root node has id {id}, expected 0"),
            Self::RootHasParents(id) => write!(f, "root node {id} has parents"),
            Self::RootInfoMismatch { info, source_path } => {
                write!(f, "root info {info:?} does not carry source path {source_path:?}")
            }
            Self::DanglingReference { node, missing } => {
                write!(f, "node {node}: references missing node {missing}")
            }
            Self::Asymmetric { parent, child } => write!(
                f,
                "nodes {parent}->{child}: child/parent membership is not symmetric"
            ),
            Self::DanglingEdge { source, target } => {
                write!(f, "edge {source}->{target}: references a missing node")
            }
            Self::DuplicateEdge { source, target } => write!(f, "edge {source}->{target}: duplicated"),
            Self::MissingEdge { source, target } => {
                write!(f, "edge {source}->{target}: child list entry has no edge")
            }
            Self::ExtraEdge { source, target } => {
                write!(f, "edge {source}->{target}: no matching child list entry")
            }
            Self::Cycle(id) => write!(f, "node {id}: lies on a cycle"),
            Self::Unreachable(id) => write!(f, "node {id}: not reachable from root"),
            Self::LocMismatch { node, stored, actual } => write!(
                f,
                "node {node}: loc_original_code is {stored}, original_code has {actual} lines"
            ),
        }
    }
}

/// Checks every document invariant. Id uniqueness is checked first; when it
/// fails the structural checks are skipped since they key on ids.
pub fn validate_document(doc: &UbsrDocument) -> Vec<Violation> {
    let mut out = Vec::new();

    let mut seen = HashSet::new();
    let mut dup = BTreeSet::new();
    for n in &doc.nodes {
        if !seen.insert(n.id) {
            dup.insert(n.id);
        }
    }
    if !dup.is_empty() {
        out.extend(dup.into_iter().map(Violation::DuplicateId));
        return out;
    }
    let by_id: HashMap<NodeId, &UbsrNode> = doc.nodes.iter().map(|n| (n.id, n)).collect();

    let roots: Vec<&UbsrNode> = doc
        .nodes
        .iter()
        .filter(|n| n.node_type == UbsrNodeType::Root)
        .collect();
    if roots.len() != 1 {
        out.push(Violation::RootCount(roots.len()));
    }
    if let Some(root) = roots.first() {
        if root.id != NodeId(0) {
            out.push(Violation::RootId(root.id));
        }
        if !root.parents.is_empty() {
            out.push(Violation::RootHasParents(root.id));
        }
        if root.metadata.info != doc.source_path {
            out.push(Violation::RootInfoMismatch {
                info: root.metadata.info.clone(),
                source_path: doc.source_path.clone(),
            });
        }
    }

    for n in &doc.nodes {
        for &c in &n.children {
            match by_id.get(&c) {
                None => out.push(Violation::DanglingReference { node: n.id, missing: c }),
                Some(child) if !child.parents.contains(&n.id) => {
                    out.push(Violation::Asymmetric { parent: n.id, child: c })
                }
                _ => {}
            }
        }
        for &p in &n.parents {
            match by_id.get(&p) {
                None => out.push(Violation::DanglingReference { node: n.id, missing: p }),
                Some(parent) if !parent.children.contains(&n.id) => {
                    out.push(Violation::Asymmetric { parent: p, child: n.id })
                }
                _ => {}
            }
        }
        let actual = count_lines(&n.metadata.original_code);
        if actual != n.metadata.loc_original_code {
            out.push(Violation::LocMismatch {
                node: n.id,
                stored: n.metadata.loc_original_code,
                actual,
            });
        }
    }

    let adjacency: BTreeSet<(NodeId, NodeId)> = doc
        .nodes
        .iter()
        .flat_map(|n| n.children.iter().map(move |&c| (n.id, c)))
        .filter(|(_, c)| by_id.contains_key(c))
        .collect();
    let mut edge_pairs = BTreeSet::new();
    for e in &doc.edges {
        let pair = (e.source, e.target);
        if !by_id.contains_key(&e.source) || !by_id.contains_key(&e.target) {
            out.push(Violation::DanglingEdge { source: e.source, target: e.target });
            continue;
        }
        if !edge_pairs.insert(pair) {
            out.push(Violation::DuplicateEdge { source: e.source, target: e.target });
        } else if !adjacency.contains(&pair) {
            out.push(Violation::ExtraEdge { source: e.source, target: e.target });
        }
    }
    for &(s, t) in adjacency.difference(&edge_pairs) {
        out.push(Violation::MissingEdge { source: s, target: t });
    }

    // Cycle detection over the child lists (iterative three-colour DFS).
    let mut colour: HashMap<NodeId, u8> = HashMap::new();
    let mut on_cycle = BTreeSet::new();
    for start in doc.nodes.iter().map(|n| n.id) {
        if colour.contains_key(&start) {
            continue;
        }
        let mut stack = vec![(start, 0usize)];
        colour.insert(start, 1);
        while let Some((id, idx)) = stack.pop() {
            let children = &by_id[&id].children;
            if idx < children.len() {
                stack.push((id, idx + 1));
                let c = children[idx];
                match colour.get(&c) {
                    None if by_id.contains_key(&c) => {
                        colour.insert(c, 1);
                        stack.push((c, 0));
                    }
                    Some(1) => {
                        on_cycle.insert(c);
                    }
                    _ => {}
                }
            } else {
                colour.insert(id, 2);
            }
        }
    }
    out.extend(on_cycle.into_iter().map(Violation::Cycle));

    if let Some(root) = roots.first() {
        let mut reached = HashSet::from([root.id]);
        let mut queue = vec![root.id];
        while let Some(id) = queue.pop() {
            for &c in &by_id[&id].children {
                if by_id.contains_key(&c) && reached.insert(c) {
                    queue.push(c);
                }
            }
        }
        for n in &doc.nodes {
            if !reached.contains(&n.id) {
                out.push(Violation::Unreachable(n.id));
            }
        }
    }

    out
}

#[derive(Debug, Error)]
pub enum IrError {
    #[error("document {doc_index} ({source_path}) is invalid: {violation}")]
    InvalidDocument {
        doc_index: usize,
        source_path: String,
        violation: Violation,
    },
    #[error("unknown node type {0:?}")]
    UnknownNodeType(String),
    #[error("unknown concept {0:?}")]
    UnknownConcept(String),
    #[error("unknown relation {0:?}")]
    UnknownRelation(String),
    #[error("edge {from}->{target} in document {doc_id} references a missing node")]
    DanglingEdge { doc_id: i64, from: i64, target: i64 },
    #[error("document {0} has no root row")]
    MissingRoot(i64),
    #[error("bad edge metadata in document {doc_id}: {message}")]
    EdgeMetadata { doc_id: i64, message: String },
    #[error("value out of range in column {column}: {value}")]
    OutOfRange { column: &'static str, value: i64 },
    #[error(transparent)]
    Table(#[from] TableError),
}

pub mod columns {
    pub const DOC_ID: &str = "doc_id";
    pub const ID: &str = "id";
    pub const CODE_SNIPPET: &str = "code_snippet";
    pub const NODE_TYPE: &str = "node_type";
    pub const PARENTS: &str = "parents";
    pub const CHILDREN: &str = "children";
    pub const INFO: &str = "info";
    pub const LANGUAGE: &str = "language";
    pub const ORIGINAL_CODE: &str = "original_code";
    pub const LOC_ORIGINAL_CODE: &str = "loc_original_code";
    pub const SOURCE: &str = "source";
    pub const TARGET: &str = "target";
    pub const DIRECTED_RELATION: &str = "directed_relation";
    pub const METADATA: &str = "metadata";
}

/// One row of the node table.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NodeRow {
    pub doc_id: i64,
    pub id: i64,
    pub code_snippet: String,
    pub node_type: UbsrNodeType,
    pub parents: Vec<i64>,
    pub children: Vec<i64>,
    pub info: String,
    pub language: String,
    pub original_code: String,
    pub loc_original_code: i64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EdgeRow {
    pub doc_id: i64,
    pub source: i64,
    pub target: i64,
    pub directed_relation: Relation,
    pub metadata: BTreeMap<String, String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct NodeTable {
    pub rows: Vec<NodeRow>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct EdgeTable {
    pub rows: Vec<EdgeRow>,
}

pub const NODE_COLUMNS: [(&str, ColumnKind); 10] = [
    (columns::DOC_ID, ColumnKind::Int64),
    (columns::ID, ColumnKind::Int64),
    (columns::CODE_SNIPPET, ColumnKind::Utf8),
    (columns::NODE_TYPE, ColumnKind::Utf8),
    (columns::PARENTS, ColumnKind::Int64List),
    (columns::CHILDREN, ColumnKind::Int64List),
    (columns::INFO, ColumnKind::Utf8),
    (columns::LANGUAGE, ColumnKind::Utf8),
    (columns::ORIGINAL_CODE, ColumnKind::Utf8),
    (columns::LOC_ORIGINAL_CODE, ColumnKind::Int64),
];

pub const EDGE_COLUMNS: [(&str, ColumnKind); 5] = [
    (columns::DOC_ID, ColumnKind::Int64),
    (columns::SOURCE, ColumnKind::Int64),
    (columns::TARGET, ColumnKind::Int64),
    (columns::DIRECTED_RELATION, ColumnKind::Utf8),
    (columns::METADATA, ColumnKind::Utf8),
];

fn ids(v: &[NodeId]) -> Vec<i64> {
    v.iter().map(|id| i64::from(id.0)).collect()
}

fn node_id(column: &'static str, v: i64) -> Result<NodeId, IrError> {
    u32::try_from(v)
        .map(NodeId)
        .map_err(|_| IrError::OutOfRange { column, value: v })
}

/// Flattens documents into the node and edge tables. Documents get
/// `doc_id` equal to their position; node rows follow id order and edge rows
/// follow the document's edge order.
pub fn to_tabular(docs: &[UbsrDocument]) -> Result<(NodeTable, EdgeTable), IrError> {
    let mut nodes = NodeTable::default();
    let mut edges = EdgeTable::default();
    for (i, doc) in docs.iter().enumerate() {
        if let Some(v) = validate_document(doc).into_iter().next() {
            return Err(IrError::InvalidDocument {
                doc_index: i,
                source_path: doc.source_path.clone(),
                violation: v,
            });
        }
        let doc_id = i as i64;
        let mut sorted: Vec<&UbsrNode> = doc.nodes.iter().collect();
        sorted.sort_by_key(|n| n.id);
        nodes.rows.extend(sorted.into_iter().map(|n| NodeRow {
            doc_id,
            id: i64::from(n.id.0),
            code_snippet: n.code_snippet.clone(),
            node_type: n.node_type,
            parents: ids(&n.parents),
            children: ids(&n.children),
            info: n.metadata.info.clone(),
            language: n.metadata.language.clone(),
            original_code: n.metadata.original_code.clone(),
            loc_original_code: n.metadata.loc_original_code as i64,
        }));
        edges.rows.extend(doc.edges.iter().map(|e| EdgeRow {
            doc_id,
            source: i64::from(e.source.0),
            target: i64::from(e.target.0),
            directed_relation: e.directed_relation,
            metadata: e.metadata.clone(),
        }));
    }
    Ok((nodes, edges))
}

/// Rebuilds documents from the two tables, ordered by `doc_id`.
pub fn from_tabular(nodes: &NodeTable, edges: &EdgeTable) -> Result<Vec<UbsrDocument>, IrError> {
    let mut grouped: BTreeMap<i64, (Vec<UbsrNode>, Vec<UbsrEdge>)> = BTreeMap::new();
    for r in &nodes.rows {
        let node = UbsrNode {
            id: node_id(columns::ID, r.id)?,
            code_snippet: r.code_snippet.clone(),
            node_type: r.node_type,
            parents: r
                .parents
                .iter()
                .map(|&p| node_id(columns::PARENTS, p))
                .collect::<Result<_, _>>()?,
            children: r
                .children
                .iter()
                .map(|&c| node_id(columns::CHILDREN, c))
                .collect::<Result<_, _>>()?,
            metadata: NodeMetadata {
                info: r.info.clone(),
                language: r.language.clone(),
                original_code: r.original_code.clone(),
                loc_original_code: r.loc_original_code.max(0) as u64,
            },
        };
        grouped.entry(r.doc_id).or_default().0.push(node);
    }
    for r in &edges.rows {
        let dangling = || IrError::DanglingEdge {
            doc_id: r.doc_id,
            from: r.source,
            target: r.target,
        };
        let (doc_nodes, doc_edges) = grouped.get_mut(&r.doc_id).ok_or_else(dangling)?;
        let exists = |v: i64| doc_nodes.iter().any(|n| i64::from(n.id.0) == v);
        if !exists(r.source) || !exists(r.target) {
            return Err(dangling());
        }
        doc_edges.push(UbsrEdge {
            source: node_id(columns::SOURCE, r.source)?,
            target: node_id(columns::TARGET, r.target)?,
            directed_relation: r.directed_relation,
            metadata: r.metadata.clone(),
        });
    }
    grouped
        .into_iter()
        .map(|(doc_id, (nodes, edges))| {
            let source_path = nodes
                .iter()
                .find(|n| n.node_type == UbsrNodeType::Root)
                .map(|r| r.metadata.info.clone())
                .ok_or(IrError::MissingRoot(doc_id))?;
            Ok(UbsrDocument {
                nodes,
                edges,
                source_path,
            })
        })
        .collect()
}

impl NodeTable {
    pub fn to_table(&self) -> Table {
        let r = &self.rows;
        Table::new(vec![
            Column::new(columns::DOC_ID, ColumnData::Int64(r.iter().map(|x| x.doc_id).collect())),
            Column::new(columns::ID, ColumnData::Int64(r.iter().map(|x| x.id).collect())),
            Column::new(
                columns::CODE_SNIPPET,
                ColumnData::Utf8(r.iter().map(|x| x.code_snippet.clone()).collect()),
            ),
            Column::new(
                columns::NODE_TYPE,
                ColumnData::Utf8(r.iter().map(|x| x.node_type.as_str().to_string()).collect()),
            ),
            Column::new(
                columns::PARENTS,
                ColumnData::Int64List(r.iter().map(|x| x.parents.clone()).collect()),
            ),
            Column::new(
                columns::CHILDREN,
                ColumnData::Int64List(r.iter().map(|x| x.children.clone()).collect()),
            ),
            Column::new(columns::INFO, ColumnData::Utf8(r.iter().map(|x| x.info.clone()).collect())),
            Column::new(
                columns::LANGUAGE,
                ColumnData::Utf8(r.iter().map(|x| x.language.clone()).collect()),
            ),
            Column::new(
                columns::ORIGINAL_CODE,
                ColumnData::Utf8(r.iter().map(|x| x.original_code.clone()).collect()),
            ),
            Column::new(
                columns::LOC_ORIGINAL_CODE,
                ColumnData::Int64(r.iter().map(|x| x.loc_original_code).collect()),
            ),
        ])
    }

    pub fn from_table(t: &Table) -> Result<Self, IrError> {
        let mut t = t.clone();
        t.conform(&NODE_COLUMNS);
        t.check_schema(&NODE_COLUMNS)?;
        let n = t.num_rows();
        let doc_id = t.int64(columns::DOC_ID)?;
        let id = t.int64(columns::ID)?;
        let code = t.utf8(columns::CODE_SNIPPET)?;
        let ty = t.utf8(columns::NODE_TYPE)?;
        let parents = t.int64_list(columns::PARENTS)?;
        let children = t.int64_list(columns::CHILDREN)?;
        let info = t.utf8(columns::INFO)?;
        let lang = t.utf8(columns::LANGUAGE)?;
        let orig = t.utf8(columns::ORIGINAL_CODE)?;
        let loc = t.int64(columns::LOC_ORIGINAL_CODE)?;
        let rows = (0..n)
            .map(|i| {
                Ok(NodeRow {
                    doc_id: doc_id[i],
                    id: id[i],
                    code_snippet: code[i].clone(),
                    node_type: ty[i].parse()?,
                    parents: parents[i].clone(),
                    children: children[i].clone(),
                    info: info[i].clone(),
                    language: lang[i].clone(),
                    original_code: orig[i].clone(),
                    loc_original_code: loc[i],
                })
            })
            .collect::<Result<_, IrError>>()?;
        Ok(Self { rows })
    }

    /// Row indices grouped per document, in first-seen document order.
    pub fn by_document(&self) -> Vec<(i64, Vec<&NodeRow>)> {
        let mut order: Vec<i64> = Vec::new();
        let mut groups: HashMap<i64, Vec<&NodeRow>> = HashMap::new();
        for r in &self.rows {
            groups
                .entry(r.doc_id)
                .or_insert_with(|| {
                    order.push(r.doc_id);
                    Vec::new()
                })
                .push(r);
        }
        order
            .into_iter()
            .map(|d| {
                let rows = groups.remove(&d).unwrap_or_default();
                (d, rows)
            })
            .collect()
    }
}

impl EdgeTable {
    pub fn to_table(&self) -> Table {
        let r = &self.rows;
        Table::new(vec![
            Column::new(columns::DOC_ID, ColumnData::Int64(r.iter().map(|x| x.doc_id).collect())),
            Column::new(columns::SOURCE, ColumnData::Int64(r.iter().map(|x| x.source).collect())),
            Column::new(columns::TARGET, ColumnData::Int64(r.iter().map(|x| x.target).collect())),
            Column::new(
                columns::DIRECTED_RELATION,
                ColumnData::Utf8(
                    r.iter()
                        .map(|x| x.directed_relation.as_str().to_string())
                        .collect(),
                ),
            ),
            Column::new(
                columns::METADATA,
                ColumnData::Utf8(
                    r.iter()
                        .map(|x| serde_json::to_string(&x.metadata).expect("string map serializes"))
                        .collect(),
                ),
            ),
        ])
    }

    pub fn from_table(t: &Table) -> Result<Self, IrError> {
        let mut t = t.clone();
        t.conform(&EDGE_COLUMNS);
        t.check_schema(&EDGE_COLUMNS)?;
        let doc_id = t.int64(columns::DOC_ID)?;
        let source = t.int64(columns::SOURCE)?;
        let target = t.int64(columns::TARGET)?;
        let rel = t.utf8(columns::DIRECTED_RELATION)?;
        let meta = t.utf8(columns::METADATA)?;
        let rows = (0..t.num_rows())
            .map(|i| {
                let metadata = serde_json::from_str(&meta[i]).map_err(|e| IrError::EdgeMetadata {
                    doc_id: doc_id[i],
                    message: e.to_string(),
                })?;
                Ok(EdgeRow {
                    doc_id: doc_id[i],
                    source: source[i],
                    target: target[i],
                    directed_relation: rel[i].parse()?,
                    metadata,
                })
            })
            .collect::<Result<_, IrError>>()?;
        Ok(Self { rows })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fig3() -> UbsrDocument {
        let mut doc = UbsrDocument::new_root("sample.py", "python", "import math");
        doc.push_child(
            NodeId(0),
            UbsrNodeType::Package,
            "ubsr_package math".into(),
            NodeMetadata::new("", "python", "import math"),
        );
        doc
    }

    #[test]
    fn minimal_document_is_valid() {
        let doc = UbsrDocument::new_root("a", "python", "");
        assert_eq!(validate_document(&doc), vec![]);
        assert_eq!(doc.nodes[0].metadata.loc_original_code, 0);
        assert_eq!(doc.nodes[0].code_snippet, "ubsr_root python");
    }

    #[test]
    fn asymmetric_child_reported_once() {
        let mut doc = UbsrDocument::new_root("a", "python", "x");
        doc.nodes[0].children.push(NodeId(1));
        doc.nodes.push(UbsrNode {
            id: NodeId(1),
            code_snippet: "ubsr_comment x".into(),
            node_type: UbsrNodeType::Comment,
            parents: vec![],
            children: vec![],
            metadata: NodeMetadata::new("", "python", "# x"),
        });
        doc.edges.push(UbsrEdge::parent(NodeId(0), NodeId(1)));
        let v = validate_document(&doc);
        assert_eq!(v, vec![Violation::Asymmetric { parent: NodeId(0), child: NodeId(1) }]);
    }

    #[test]
    fn duplicate_ids_reported_once() {
        let mut doc = UbsrDocument::new_root("a", "python", "");
        let dup = doc.nodes[0].clone();
        doc.nodes.push(dup);
        assert_eq!(validate_document(&doc), vec![Violation::DuplicateId(NodeId(0))]);
    }

    #[test]
    fn cycle_and_unreachable_detected() {
        let mut doc = UbsrDocument::new_root("a", "c", "");
        for id in [1, 2] {
            doc.nodes.push(UbsrNode {
                id: NodeId(id),
                code_snippet: "ubsr_function f".into(),
                node_type: UbsrNodeType::Function,
                parents: vec![NodeId(3 - id)],
                children: vec![NodeId(3 - id)],
                metadata: NodeMetadata::new("", "c", ""),
            });
        }
        doc.edges.push(UbsrEdge::parent(NodeId(1), NodeId(2)));
        doc.edges.push(UbsrEdge::parent(NodeId(2), NodeId(1)));
        let v = validate_document(&doc);
        assert!(v.iter().any(|x| matches!(x, Violation::Cycle(_))), "{v:?}");
        assert!(v.contains(&Violation::Unreachable(NodeId(1))));
        assert!(v.contains(&Violation::Unreachable(NodeId(2))));
    }

    #[test]
    fn loc_and_edge_mismatches() {
        let mut doc = fig3();
        doc.nodes[1].metadata.loc_original_code = 7;
        doc.edges.clear();
        let v = validate_document(&doc);
        assert!(v.contains(&Violation::LocMismatch { node: NodeId(1), stored: 7, actual: 1 }));
        assert!(v.contains(&Violation::MissingEdge { source: NodeId(0), target: NodeId(1) }));
    }

    #[test]
    fn single_root_tabulates_to_one_row() {
        let (n, e) = to_tabular(&[UbsrDocument::new_root("a", "python", "")]).unwrap();
        assert_eq!(n.rows.len(), 1);
        assert!(e.rows.is_empty());
    }

    #[test]
    fn fig3_tables() {
        let (n, e) = to_tabular(&[fig3()]).unwrap();
        assert_eq!(n.rows.len(), 2);
        assert_eq!(n.rows[1].code_snippet, "ubsr_package math");
        assert_eq!(e.rows.len(), 1);
        assert_eq!(e.rows[0].directed_relation.as_str(), "parent_node");
        assert_eq!(from_tabular(&n, &e).unwrap(), vec![fig3()]);
    }

    #[test]
    fn invalid_document_rejected_with_first_violation() {
        let mut doc = fig3();
        doc.nodes[1].parents.clear();
        let err = to_tabular(&[doc]).unwrap_err();
        assert!(matches!(
            err,
            IrError::InvalidDocument { violation: Violation::Asymmetric { .. }, .. }
        ));
    }

    #[test]
    fn dangling_edge_rejected() {
        let (n, mut e) = to_tabular(&[fig3()]).unwrap();
        e.rows[0].target = 99;
        assert!(matches!(
            from_tabular(&n, &e),
            Err(IrError::DanglingEdge { target: 99, .. })
        ));
    }

    #[test]
    fn empty_tables_give_no_documents() {
        assert!(from_tabular(&NodeTable::default(), &EdgeTable::default())
            .unwrap()
            .is_empty());
    }

    #[test]
    fn node_type_names() {
        let names: Vec<_> = UbsrNodeType::ALL.iter().map(|t| t.as_str()).collect();
        assert_eq!(names, ["ubsr_root", "ubsr_package", "ubsr_function", "ubsr_comment"]);
        assert_eq!(
            serde_json::to_string(&UbsrNodeType::Package).unwrap(),
            "\"ubsr_package\""
        );
        assert!("ubsr_class".parse::<UbsrNodeType>().is_err());
    }

    #[test]
    fn line_counting() {
        assert_eq!(count_lines(""), 0);
        assert_eq!(count_lines("a"), 1);
        assert_eq!(count_lines("a\n"), 1);
        assert_eq!(count_lines("a\nb"), 2);
        assert_eq!(count_lines("\n\n"), 2);
    }
}
