//! Profiling of code data through a unified base syntactic representation.

pub mod dsl;
pub mod extract;
pub mod grammars;
pub mod ir;
pub mod metrics;
pub mod parser;
pub mod registry;
pub mod report;
pub mod rulegen;
pub mod rules;
pub mod semantic;
pub mod table;
pub mod trie;

/// Per-document metrics with float ratios.
pub type ProfileRow = metrics::SyntacticProfileRow<f64>;
/// Per-document metrics with exact ratios.
pub type ExactProfileRow = metrics::SyntacticProfileRow<num_rational::Ratio<u64>>;
