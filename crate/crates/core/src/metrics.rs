//! Higher-order syntactic metrics computed from UBSR documents and node
//! tables.

use std::collections::BTreeMap;
use std::fmt::Debug;
use std::str::FromStr;

use num_rational::Ratio;
use num_traits::{Num, ToPrimitive};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ir::{NodeRow, NodeTable, UbsrDocument, UbsrNodeType};
use crate::table::{Column, ColumnData, Table};

/// Numeric type for ratio-valued metrics.
pub trait Scalar: Num + Copy + PartialOrd + Debug + Send + Sync {
    fn from_count(n: u64) -> Self;
    fn to_f64(self) -> f64;
}

impl Scalar for f64 {
    fn from_count(n: u64) -> Self {
        n as f64
    }
    fn to_f64(self) -> f64 {
        self
    }
}

impl Scalar for f32 {
    fn from_count(n: u64) -> Self {
        n as f32
    }
    fn to_f64(self) -> f64 {
        f64::from(self)
    }
}

impl Scalar for Ratio<u64> {
    fn from_count(n: u64) -> Self {
        Ratio::from_integer(n)
    }
    fn to_f64(self) -> f64 {
        ToPrimitive::to_f64(&self).unwrap_or(f64::NAN)
    }
}

/// `num / den`, or zero when `den` is zero.
pub fn ratio_or_zero<T: Scalar>(num: u64, den: u64) -> T {
    if den > 0 {
        T::from_count(num) / T::from_count(den)
    } else {
        T::zero()
    }
}

/// Which comment nodes count toward the comment line total.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CommentsScope {
    /// Comment children of the root only.
    Direct,
    /// Every comment node in the document.
    #[default]
    Transitive,
}

impl FromStr for CommentsScope {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "direct" => Ok(Self::Direct),
            "transitive" => Ok(Self::Transitive),
            _ => Err(format!("unknown comments scope {s:?} (direct|transitive)")),
        }
    }
}

/// Code-to-comment ratio: file lines over comment lines, zero without
/// comments.
pub fn compute_ccr<T: Scalar>(doc: &UbsrDocument, scope: CommentsScope) -> T {
    let Some(root) = doc.root() else { return T::zero() };
    let loc_snippet = root.metadata.loc_original_code;
    let total_comment_loc: u64 = doc
        .nodes
        .iter()
        .filter(|n| n.node_type == UbsrNodeType::Comment)
        .filter(|n| scope == CommentsScope::Transitive || n.parents.contains(&root.id))
        .map(|n| n.metadata.loc_original_code)
        .sum();
    ratio_or_zero(loc_snippet, total_comment_loc)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntacticProfileRow<T> {
    pub doc_id: i64,
    pub language: String,
    pub loc_snippet: u64,
    pub package_count: u64,
    pub function_count: u64,
    pub comment_count: u64,
    pub total_comment_loc: u64,
    pub ccr: T,
    pub mean_function_loc: T,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MetricsError {
    #[error("document {0} has no root row")]
    MissingRoot(i64),
    #[error("document {0} has {1} root rows")]
    ManyRoots(i64, usize),
    #[error("negative line count in document {0}")]
    NegativeLoc(i64),
}

/// One row per document in the node table, in `doc_id` order.
pub fn profile_rows<T: Scalar>(
    nodes: &NodeTable,
    scope: CommentsScope,
) -> Result<Vec<SyntacticProfileRow<T>>, MetricsError> {
    let mut docs: BTreeMap<i64, Vec<&NodeRow>> = BTreeMap::new();
    for r in &nodes.rows {
        docs.entry(r.doc_id).or_default().push(r);
    }
    docs.into_iter().map(|(doc_id, rows)| row_for(doc_id, &rows, scope)).collect()
}

fn row_for<T: Scalar>(
    doc_id: i64,
    rows: &[&NodeRow],
    scope: CommentsScope,
) -> Result<SyntacticProfileRow<T>, MetricsError> {
    let roots: Vec<&&NodeRow> = rows.iter().filter(|r| r.node_type == UbsrNodeType::Root).collect();
    let root = match roots.as_slice() {
        [r] => **r,
        [] => return Err(MetricsError::MissingRoot(doc_id)),
        many => return Err(MetricsError::ManyRoots(doc_id, many.len())),
    };
    let loc = |r: &NodeRow| u64::try_from(r.loc_original_code).map_err(|_| MetricsError::NegativeLoc(doc_id));
    let of = |t: UbsrNodeType| rows.iter().filter(move |r| r.node_type == t);

    let mut total_comment_loc = 0;
    for r in of(UbsrNodeType::Comment) {
        if scope == CommentsScope::Transitive || r.parents.contains(&root.id) {
            total_comment_loc += loc(r)?;
        }
    }
    let mut function_loc = 0;
    for r in of(UbsrNodeType::Function) {
        function_loc += loc(r)?;
    }
    let function_count = of(UbsrNodeType::Function).count() as u64;
    let loc_snippet = loc(root)?;
    Ok(SyntacticProfileRow {
        doc_id,
        language: root.language.clone(),
        loc_snippet,
        package_count: of(UbsrNodeType::Package).count() as u64,
        function_count,
        comment_count: of(UbsrNodeType::Comment).count() as u64,
        total_comment_loc,
        ccr: ratio_or_zero(loc_snippet, total_comment_loc),
        mean_function_loc: ratio_or_zero(function_loc, function_count),
    })
}

pub const METRIC_COLUMNS: [&str; 9] = [
    "doc_id",
    "language",
    "loc_snippet",
    "package_count",
    "function_count",
    "comment_count",
    "total_comment_loc",
    "ccr",
    "mean_function_loc",
];

/// Metrics table keyed by `doc_id`. Ratios are stored as floats.
pub fn metrics_table<T: Scalar>(rows: &[SyntacticProfileRow<T>]) -> Table {
    let ints = |f: &dyn Fn(&SyntacticProfileRow<T>) -> u64| {
        ColumnData::Int64(rows.iter().map(|r| f(r) as i64).collect())
    };
    Table::new(vec![
        Column::new("doc_id", ColumnData::Int64(rows.iter().map(|r| r.doc_id).collect())),
        Column::new("language", ColumnData::Utf8(rows.iter().map(|r| r.language.clone()).collect())),
        Column::new("loc_snippet", ints(&|r| r.loc_snippet)),
        Column::new("package_count", ints(&|r| r.package_count)),
        Column::new("function_count", ints(&|r| r.function_count)),
        Column::new("comment_count", ints(&|r| r.comment_count)),
        Column::new("total_comment_loc", ints(&|r| r.total_comment_loc)),
        Column::new("ccr", ColumnData::Float64(rows.iter().map(|r| r.ccr.to_f64()).collect())),
        Column::new(
            "mean_function_loc",
            ColumnData::Float64(rows.iter().map(|r| r.mean_function_loc.to_f64()).collect()),
        ),
    ])
}
