//! Corpus-level profiling report aggregated from persisted tables.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ir::{NodeTable, UbsrNodeType};
use crate::semantic::CONCEPT_PREFIX;
use crate::table::{Table, TableError};

/// Lower edges of the CCR buckets; the last bucket is open-ended.
pub const DEFAULT_CCR_EDGES: [f64; 6] = [0.0, 1.0, 2.0, 5.0, 10.0, 20.0];

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("bucket edges must start at 0 and strictly increase, got {0:?}")]
    BadEdges(Vec<f64>),
    #[error("metrics table has a negative or non-finite ccr {0}")]
    BadCcr(f64),
    #[error("concept table has no {CONCEPT_PREFIX}* column")]
    NoConceptColumn,
    #[error("concept table row {0}: more concepts than packages")]
    ConceptOverflow(usize),
    #[error(transparent)]
    Table(#[from] TableError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bucket {
    pub lower: f64,
    /// Exclusive upper edge; `None` for the last bucket.
    pub upper: Option<f64>,
    pub count: u64,
}

/// Buckets `[e0, e1), [e1, e2), ..., [en, inf)` over `values`.
pub fn histogram(values: &[f64], edges: &[f64]) -> Result<Vec<Bucket>, ReportError> {
    let valid = edges.first() == Some(&0.0) && edges.windows(2).all(|w| w[0] < w[1]) && edges.iter().all(|e| e.is_finite());
    if !valid {
        return Err(ReportError::BadEdges(edges.to_vec()));
    }
    let mut buckets: Vec<Bucket> = edges
        .iter()
        .enumerate()
        .map(|(i, &lower)| Bucket {
            lower,
            upper: edges.get(i + 1).copied(),
            count: 0,
        })
        .collect();
    for &v in values {
        if !v.is_finite() || v < 0.0 {
            return Err(ReportError::BadCcr(v));
        }
        let i = edges.partition_point(|&e| e <= v) - 1;
        buckets[i].count += 1;
    }
    Ok(buckets)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Totals {
    pub files: u64,
    pub nodes: BTreeMap<String, u64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConceptDistribution {
    pub counts: BTreeMap<String, u64>,
    pub package_occurrences: u64,
    /// Package occurrences without a concept for this dimension.
    pub unmapped: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Series {
    pub name: String,
    pub labels: Vec<String>,
    pub values: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileReport {
    pub corpus_id: String,
    pub generated_at: Option<String>,
    pub totals: Totals,
    pub language_distribution: BTreeMap<String, u64>,
    pub ccr_histogram: Vec<Bucket>,
    pub concept_distribution: BTreeMap<String, ConceptDistribution>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub series: Vec<Series>,
}

impl ProfileReport {
    /// Pretty JSON with a trailing newline.
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportOptions {
    pub corpus_id: String,
    pub generated_at: Option<String>,
    pub ccr_edges: Vec<f64>,
    pub include_series: bool,
}

impl Default for ReportOptions {
    fn default() -> Self {
        Self {
            corpus_id: String::new(),
            generated_at: None,
            ccr_edges: DEFAULT_CCR_EDGES.to_vec(),
            include_series: false,
        }
    }
}

/// Counts concepts in a concept table (`packages` plus one
/// `concept_<dimension>` list column). Returns the dimension name too.
pub fn concept_distribution(t: &Table) -> Result<(String, ConceptDistribution), ReportError> {
    let col = t
        .columns
        .iter()
        .find(|c| c.name.starts_with(CONCEPT_PREFIX))
        .ok_or(ReportError::NoConceptColumn)?;
    let dimension = col.name[CONCEPT_PREFIX.len()..].to_string();
    let concepts = t.utf8_list(&col.name)?;
    let packages = t.utf8_list("packages")?;
    let mut dist = ConceptDistribution {
        counts: BTreeMap::new(),
        package_occurrences: 0,
        unmapped: 0,
    };
    for (i, (p, c)) in packages.iter().zip(concepts).enumerate() {
        if c.len() > p.len() {
            return Err(ReportError::ConceptOverflow(i));
        }
        dist.package_occurrences += p.len() as u64;
        dist.unmapped += (p.len() - c.len()) as u64;
        for concept in c {
            *dist.counts.entry(concept.clone()).or_default() += 1;
        }
    }
    Ok((dimension, dist))
}

/// Aggregates the node table, the metrics table and any concept tables.
pub fn build_report(
    nodes: &NodeTable,
    metrics: &Table,
    concept_tables: &[Table],
    opts: &ReportOptions,
) -> Result<ProfileReport, ReportError> {
    let mut node_counts: BTreeMap<String, u64> =
        UbsrNodeType::ALL.iter().map(|t| (t.as_str().to_string(), 0)).collect();
    let mut language_distribution = BTreeMap::new();
    let mut files = 0;
    for r in &nodes.rows {
        *node_counts.entry(r.node_type.as_str().to_string()).or_default() += 1;
        if r.node_type == UbsrNodeType::Root {
            files += 1;
            *language_distribution.entry(r.language.clone()).or_default() += 1;
        }
    }
    let ccr_histogram = histogram(metrics.float64("ccr")?, &opts.ccr_edges)?;
    let mut concepts = BTreeMap::new();
    for t in concept_tables {
        let (dim, dist) = concept_distribution(t)?;
        concepts.insert(dim, dist);
    }

    let mut series = Vec::new();
    if opts.include_series {
        series.push(Series {
            name: "language_distribution".into(),
            labels: language_distribution.keys().cloned().collect(),
            values: language_distribution.values().copied().collect(),
        });
        series.push(Series {
            name: "ccr_histogram".into(),
            labels: ccr_histogram
                .iter()
                .map(|b| match b.upper {
                    Some(u) => format!("[{}, {})", b.lower, u),
                    None => format!("[{}, inf)", b.lower),
                })
                .collect(),
            values: ccr_histogram.iter().map(|b| b.count).collect(),
        });
        for (dim, d) in &concepts {
            series.push(Series {
                name: format!("{CONCEPT_PREFIX}{dim}"),
                labels: d.counts.keys().cloned().collect(),
                values: d.counts.values().copied().collect(),
            });
        }
    }

    Ok(ProfileReport {
        corpus_id: opts.corpus_id.clone(),
        generated_at: opts.generated_at.clone(),
        totals: Totals {
            files,
            nodes: node_counts,
        },
        language_distribution,
        ccr_histogram,
        concept_distribution: concepts,
        series,
    })
}
