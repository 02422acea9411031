//! Commands behind the `ubsr` binary.

use std::collections::BTreeSet;
use std::fs;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, ensure, Context, Result};
use clap::{Args, Parser, Subcommand};
use time::format_description::well_known::Rfc3339;
use time::OffsetDateTime;

use ubsr_core::extract::{collect_inputs, extract_corpus, ExtractionOptions, OnError};
use ubsr_core::ir::{Concept, EdgeTable, NodeTable};
use ubsr_core::metrics::{metrics_table, profile_rows, CommentsScope};
use ubsr_core::registry::Registry;
use ubsr_core::report::{build_report, ReportOptions, DEFAULT_CCR_EDGES};
use ubsr_core::rulegen::{
    build_base_rule_prompt, build_concept_list_prompt, build_missing_concepts_prompt, build_semantic_mapping_prompts,
    commit_validated, completer_from_spec, parse_base_rule_response, parse_concept_list_response,
    parse_semantic_mapping_response, validate_candidate, BaseRuleRequest, Completer, ConceptListPersona,
    GenerationLimits, Pruning, TestCase, DEFAULT_BATCH_SIZE,
};
use ubsr_core::rules::{install_builtin, load_rules, read_version, RuleDatabase};
use ubsr_core::semantic::{
    annotate, commit_mappings, read_pending, write_pending, ConceptList, PackageConcept, SemanticRuleSet,
};
use ubsr_core::table::{Table, TableFormat};

pub const NODES: &str = "nodes";
pub const EDGES: &str = "edges";
pub const METRICS: &str = "metrics";
pub const CONCEPTS_PREFIX: &str = "concepts_";
pub const PENDING: &str = "pending.csv";
pub const ERRORS: &str = "errors.json";

#[derive(Debug, Parser)]
#[command(name = "ubsr", version, about = "Profile code corpora by language concepts")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Extract UBSR tables, metrics and semantic concepts from a source tree.
    Profile(ProfileArgs),
    /// Aggregate profile tables into a JSON report.
    Report(ReportArgs),
    /// Generate, validate and optionally commit a base syntactic rule.
    Rulegen(RulegenArgs),
    /// Build a concept list for a semantic dimension.
    Concepts(ConceptsArgs),
    /// Map pending packages to concepts and commit them to the semantic rules.
    Semmap(SemmapArgs),
    /// Write the bundled rule files into a directory.
    InitRules {
        dir: PathBuf,
    },
    /// Serve the rule studio HTTP API.
    Studio(StudioArgs),
}

#[derive(Debug, Args)]
pub struct ProfileArgs {
    /// Directory of source files.
    #[arg(long)]
    pub input: PathBuf,
    /// Output directory for tables.
    #[arg(long)]
    pub out: PathBuf,
    /// Rule directory; the bundled rules when omitted.
    #[arg(long)]
    pub rules: Option<PathBuf>,
    /// Semantic rule set CSV; no concept tables without it.
    #[arg(long)]
    pub semantic: Option<PathBuf>,
    /// Only process these languages.
    #[arg(long, value_delimiter = ',')]
    pub languages: Vec<String>,
    /// Treat every file with a known extension as this language.
    #[arg(long)]
    pub language_override: Option<String>,
    #[arg(long, default_value = "parquet")]
    pub format: TableFormat,
    #[arg(long, default_value = "transitive")]
    pub comments_scope: CommentsScope,
    /// Abort on the first file or node error instead of logging it.
    #[arg(long)]
    pub fail_fast: bool,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Directory written by `profile`.
    #[arg(long)]
    pub tables: PathBuf,
    /// Report path; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, default_value = "")]
    pub corpus_id: String,
    /// Lower bucket edges for the CCR histogram, starting at 0.
    #[arg(long, value_delimiter = ',')]
    pub ccr_edges: Vec<f64>,
    /// Add plot-ready series.
    #[arg(long)]
    pub series: bool,
    /// Timestamp to record; falls back to SOURCE_DATE_EPOCH, else none.
    #[arg(long)]
    pub generated_at: Option<String>,
}

#[derive(Debug, Args)]
pub struct CompleterArgs {
    /// `stub:<dir>` or `remote` (LLM_ENDPOINT, LLM_API_KEY, LLM_MODEL).
    #[arg(long, default_value = "remote")]
    pub completer: String,
    /// Print the prompt(s) and stop.
    #[arg(long)]
    pub dry_run: bool,
    #[arg(long, default_value_t = 2048)]
    pub max_tokens: u32,
}

impl CompleterArgs {
    fn build(&self) -> Result<Box<dyn Completer>> {
        Ok(completer_from_spec(&self.completer)?)
    }

    fn limits(&self) -> GenerationLimits {
        GenerationLimits {
            max_tokens: self.max_tokens,
            ..Default::default()
        }
    }
}

#[derive(Debug, Args)]
pub struct RulegenArgs {
    #[arg(long)]
    pub language: String,
    #[arg(long)]
    pub concept: Concept,
    #[arg(long, value_delimiter = ',', required = true)]
    pub exemplars: Vec<String>,
    /// `concept`, `none` or `depth:<k>`.
    #[arg(long, default_value = "concept", value_parser = parse_pruning)]
    pub pruning: Pruning,
    /// File with test code in the target language.
    #[arg(long)]
    pub code: PathBuf,
    #[arg(long)]
    pub cross_paradigm: bool,
    #[arg(long)]
    pub rules: PathBuf,
    /// JSON list of `{snippet, expected}` cases; the rule's own example is
    /// always checked too.
    #[arg(long)]
    pub cases: Option<PathBuf>,
    /// Commit the rule when validation accepts it.
    #[arg(long)]
    pub commit: bool,
    #[command(flatten)]
    pub llm: CompleterArgs,
}

pub fn parse_pruning(s: &str) -> Result<Pruning, String> {
    match s {
        "concept" => Ok(Pruning::Concept),
        "none" => Ok(Pruning::None),
        _ => s
            .strip_prefix("depth:")
            .and_then(|d| d.parse().ok())
            .map(|depth| Pruning::Depth { depth })
            .ok_or_else(|| format!("bad pruning {s:?} (concept, none or depth:<k>)")),
    }
}

#[derive(Debug, Args)]
pub struct ConceptsArgs {
    #[arg(long)]
    pub dimension: String,
    #[arg(long, value_delimiter = ',')]
    pub mandatory: Vec<String>,
    #[arg(long, default_value = "taxonomist", value_parser = parse_persona)]
    pub persona: ConceptListPersona,
    /// Existing list (one per line); asks only for missing concepts.
    #[arg(long)]
    pub previous: Option<PathBuf>,
    /// Where to write the list; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub llm: CompleterArgs,
}

fn parse_persona(s: &str) -> Result<ConceptListPersona, String> {
    match s {
        "enterprise" => Ok(ConceptListPersona::Enterprise),
        "taxonomist" => Ok(ConceptListPersona::Taxonomist),
        _ => Err(format!("unknown persona {s:?} (enterprise|taxonomist)")),
    }
}

#[derive(Debug, Args)]
pub struct SemmapArgs {
    /// Pending packages CSV (`package,language`).
    #[arg(long)]
    pub pending: PathBuf,
    /// Concept list, one per line.
    #[arg(long)]
    pub concepts: PathBuf,
    #[arg(long)]
    pub dimension: String,
    /// Semantic rule set CSV to commit into.
    #[arg(long)]
    pub semantic: PathBuf,
    /// Few-shot examples CSV (`package,language,concept`).
    #[arg(long)]
    pub few_shots: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_BATCH_SIZE)]
    pub batch_size: usize,
    #[command(flatten)]
    pub llm: CompleterArgs,
}

#[derive(Debug, Args)]
pub struct StudioArgs {
    #[arg(long, default_value = "127.0.0.1:8787")]
    pub addr: SocketAddr,
    #[arg(long)]
    pub rules: PathBuf,
    #[arg(long, default_value = "remote")]
    pub completer: String,
    #[arg(long)]
    pub bearer_token: Option<String>,
    #[arg(long)]
    pub cors_origin: Option<String>,
}

/// Runs a command, writing human-readable output to `out`. Returns the
/// process exit code.
pub fn run(cli: Cli, out: &mut dyn std::io::Write) -> Result<i32> {
    match cli.command {
        Command::Profile(a) => cmd_profile(&a, out),
        Command::Report(a) => cmd_report(&a, out),
        Command::Rulegen(a) => cmd_rulegen(&a, out),
        Command::Concepts(a) => cmd_concepts(&a, out),
        Command::Semmap(a) => cmd_semmap(&a, out),
        Command::InitRules { dir } => {
            install_builtin(&dir)?;
            writeln!(out, "wrote bundled rules to {}", dir.display())?;
            Ok(0)
        }
        Command::Studio(a) => cmd_studio(a),
    }
}

fn table_path(dir: &Path, name: &str, format: TableFormat) -> PathBuf {
    dir.join(format!("{name}.{}", format.extension()))
}

/// File-name-safe form of a dimension name.
pub fn dimension_slug(dimension: &str) -> String {
    dimension
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() { c.to_ascii_lowercase() } else { '_' })
        .collect()
}

pub fn cmd_profile(a: &ProfileArgs, out: &mut dyn std::io::Write) -> Result<i32> {
    ensure!(a.input.is_dir(), "input directory {} does not exist", a.input.display());
    let registry = Registry::builtin();
    let db = match &a.rules {
        Some(dir) => load_rules(dir).with_context(|| format!("loading rules from {}", dir.display()))?,
        None => RuleDatabase::builtin(),
    };
    let semantic = a
        .semantic
        .as_ref()
        .map(|p| SemanticRuleSet::load(p).with_context(|| format!("loading semantic rules from {}", p.display())))
        .transpose()?;
    if let Some(l) = &a.language_override {
        registry.get(l)?;
    }

    let (inputs, mut read_errors) = collect_inputs(&a.input, &registry, a.language_override.as_deref())?;
    let options = ExtractionOptions {
        languages: (!a.languages.is_empty()).then(|| a.languages.iter().cloned().collect::<BTreeSet<_>>()),
        on_error: if a.fail_fast { OnError::FailFast } else { OnError::SkipFile },
        include_unmatched_stats: false,
    };
    if a.fail_fast {
        if let Some(e) = read_errors.first() {
            bail!("{}: {}", e.path, e.reason);
        }
    }
    let corpus = extract_corpus(&inputs, &db, &registry, &options)?;
    let rows = profile_rows::<f64>(&corpus.nodes, a.comments_scope)?;

    fs::create_dir_all(&a.out)?;
    corpus.nodes.to_table().write(&table_path(&a.out, NODES, a.format), a.format)?;
    corpus.edges.to_table().write(&table_path(&a.out, EDGES, a.format), a.format)?;
    metrics_table(&rows).write(&table_path(&a.out, METRICS, a.format), a.format)?;

    let mut pending = Vec::new();
    if let Some(set) = &semantic {
        for dim in set.dimensions() {
            let (ann, p) = annotate(&corpus.nodes, set, dim)?;
            let name = format!("{CONCEPTS_PREFIX}{}", dimension_slug(dim));
            ann.to_table().write(&table_path(&a.out, &name, a.format), a.format)?;
            pending = p;
        }
    }
    if semantic.as_ref().map_or(true, |s| s.dimensions().is_empty()) {
        // every package is unknown without a rule set
        let empty = SemanticRuleSet::new(["_"]);
        pending = annotate(&corpus.nodes, &empty, "_")?.1;
    }
    write_pending(&a.out.join(PENDING), &pending)?;

    read_errors.extend(corpus.error_log.iter().cloned());
    let errors = serde_json::json!({
        "files": read_errors,
        "nodes": corpus.node_failures.iter().map(|(path, f)| serde_json::json!({"path": path, "failure": f})).collect::<Vec<_>>(),
    });
    fs::write(a.out.join(ERRORS), serde_json::to_string_pretty(&errors)? + "\n")?;

    writeln!(
        out,
        "profiled {} files ({} skipped, {} node extraction errors); {} pending packages; tables in {}",
        rows.len(),
        read_errors.len(),
        corpus.node_failures.len(),
        pending.len(),
        a.out.display()
    )?;
    Ok(0)
}

fn detect_format(dir: &Path) -> Result<TableFormat> {
    for f in [TableFormat::Parquet, TableFormat::Jsonl] {
        if table_path(dir, NODES, f).exists() {
            return Ok(f);
        }
    }
    bail!("no nodes table in {}", dir.display())
}

/// `SOURCE_DATE_EPOCH` as an RFC 3339 UTC timestamp.
fn source_date() -> Option<String> {
    let secs: i64 = std::env::var("SOURCE_DATE_EPOCH").ok()?.trim().parse().ok()?;
    OffsetDateTime::from_unix_timestamp(secs).ok()?.format(&Rfc3339).ok()
}

pub fn cmd_report(a: &ReportArgs, out: &mut dyn std::io::Write) -> Result<i32> {
    let format = detect_format(&a.tables)?;
    let nodes = NodeTable::from_table(&Table::read(&table_path(&a.tables, NODES, format), format)?)?;
    let metrics = Table::read(&table_path(&a.tables, METRICS, format), format)?;
    let mut concept_paths: Vec<PathBuf> = fs::read_dir(&a.tables)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.extension().is_some_and(|x| x == format.extension())
                && p.file_name().and_then(|n| n.to_str()).is_some_and(|n| n.starts_with(CONCEPTS_PREFIX))
        })
        .collect();
    concept_paths.sort();
    let concept_tables = concept_paths
        .iter()
        .map(|p| Table::read(p, format))
        .collect::<Result<Vec<_>, _>>()?;
    let opts = ReportOptions {
        corpus_id: a.corpus_id.clone(),
        generated_at: a.generated_at.clone().or_else(source_date),
        ccr_edges: if a.ccr_edges.is_empty() { DEFAULT_CCR_EDGES.to_vec() } else { a.ccr_edges.clone() },
        include_series: a.series,
    };
    let report = build_report(&nodes, &metrics, &concept_tables, &opts)?;
    match &a.out {
        Some(p) => {
            fs::write(p, report.to_json())?;
            writeln!(out, "wrote report for {} files to {}", report.totals.files, p.display())?;
        }
        None => out.write_all(report.to_json().as_bytes())?,
    }
    Ok(0)
}

pub fn cmd_rulegen(a: &RulegenArgs, out: &mut dyn std::io::Write) -> Result<i32> {
    let registry = Registry::builtin();
    let db = load_rules(&a.rules).with_context(|| format!("loading rules from {}", a.rules.display()))?;
    let test_code = fs::read_to_string(&a.code).with_context(|| format!("reading {}", a.code.display()))?;
    let req = BaseRuleRequest {
        test_language: a.language.clone(),
        concept: a.concept,
        exemplar_languages: a.exemplars.clone(),
        pruning: a.pruning,
        test_code,
        cross_paradigm: a.cross_paradigm,
    };
    let prompt = build_base_rule_prompt(&req, &registry, &db)?;
    for note in &prompt.notes {
        eprintln!("note: {note}");
    }
    if a.llm.dry_run {
        out.write_all(prompt.rendered.as_bytes())?;
        return Ok(0);
    }
    let response = a.llm.build()?.complete(&prompt.rendered, &a.llm.limits())?;
    let parsed = parse_base_rule_response(&response, &a.language)?;
    let mut cases = vec![TestCase {
        snippet: parsed.rule.test_snippet.clone(),
        expected: parsed.rule.expected.clone(),
    }];
    if let Some(p) = &a.cases {
        let extra: Vec<TestCase> = serde_json::from_str(&fs::read_to_string(p)?)
            .with_context(|| format!("reading test cases from {}", p.display()))?;
        cases.extend(extra);
    }
    let report = validate_candidate(&parsed.rule, &cases);
    writeln!(out, "{}", serde_json::to_string_pretty(&report)?)?;
    if report.accepted().is_none() {
        eprintln!("rejected: {}", report.reasons.join("; "));
        return Ok(2);
    }
    if a.commit {
        let version = commit_validated(&a.rules, &report, read_version(&a.rules)?)?;
        writeln!(out, "committed {}/{} at version {version}", parsed.rule.language, parsed.rule.ast_node_type)?;
    }
    Ok(0)
}

pub fn cmd_concepts(a: &ConceptsArgs, out: &mut dyn std::io::Write) -> Result<i32> {
    let previous = match &a.previous {
        Some(p) => ConceptList::load(p, &a.dimension)?.concepts,
        None => Vec::new(),
    };
    let prompt = if previous.is_empty() {
        build_concept_list_prompt(&a.dimension, &a.mandatory, a.persona)
    } else {
        build_missing_concepts_prompt(&a.dimension, &previous, a.persona)
    };
    if a.llm.dry_run {
        out.write_all(prompt.rendered.as_bytes())?;
        return Ok(0);
    }
    let response = a.llm.build()?.complete(&prompt.rendered, &a.llm.limits())?;
    let mut names = previous;
    names.extend(parse_concept_list_response(&response));
    names.extend(a.mandatory.iter().cloned());
    let mut seen = BTreeSet::new();
    names.retain(|n| seen.insert(n.to_lowercase()));
    let list = ConceptList::new(&a.dimension, names)?;
    let text: String = list.concepts.iter().map(|c| format!("{c}\n")).collect();
    match &a.out {
        Some(p) => {
            fs::write(p, &text)?;
            writeln!(out, "wrote {} concepts to {}", list.concepts.len(), p.display())?;
        }
        None => out.write_all(text.as_bytes())?,
    }
    Ok(0)
}

fn read_few_shots(path: &Path) -> Result<Vec<PackageConcept>> {
    let mut rdr = csv::Reader::from_path(path).with_context(|| format!("reading {}", path.display()))?;
    rdr.deserialize()
        .collect::<Result<Vec<PackageConcept>, _>>()
        .with_context(|| format!("{}: expected columns package,language,concept", path.display()))
}

pub fn cmd_semmap(a: &SemmapArgs, out: &mut dyn std::io::Write) -> Result<i32> {
    let pending = read_pending(&a.pending)?;
    let concepts = ConceptList::load(&a.concepts, &a.dimension)?;
    let few_shots = a.few_shots.as_deref().map(read_few_shots).transpose()?.unwrap_or_default();
    let batches = build_semantic_mapping_prompts(&pending, &concepts, &few_shots, a.batch_size)?;
    if a.llm.dry_run {
        for b in &batches {
            writeln!(out, "=== batch {} ({} packages)", b.index, b.packages.len())?;
            out.write_all(b.prompt.rendered.as_bytes())?;
        }
        return Ok(0);
    }
    let completer = a.llm.build()?;
    let limits = a.llm.limits();
    let mut mappings = Vec::new();
    let mut failed = false;
    for b in &batches {
        let response = completer.complete(&b.prompt.rendered, &limits)?;
        let outcome = parse_semantic_mapping_response(&response, &concepts, Some(&b.packages))
            .with_context(|| format!("batch {}", b.index))?;
        for w in outcome.warnings.iter().chain(&outcome.row_errors) {
            eprintln!("batch {}: {w}", b.index);
        }
        for m in &outcome.missing {
            eprintln!("batch {}: no row for {} ({})", b.index, m.package, m.language);
            failed = true;
        }
        mappings.extend(outcome.mappings);
    }
    let version = commit_mappings(&a.semantic, &a.dimension, &mappings, read_semantic_version(&a.semantic)?)?;
    writeln!(
        out,
        "committed {} mappings from {} batches to {} at version {version}",
        mappings.len(),
        batches.len(),
        a.semantic.display()
    )?;
    Ok(if failed { 3 } else { 0 })
}

fn read_semantic_version(path: &Path) -> Result<u64> {
    if !path.exists() {
        return Ok(0);
    }
    Ok(SemanticRuleSet::load(path)?.version)
}

fn cmd_studio(a: StudioArgs) -> Result<i32> {
    let completer: Arc<dyn Completer> = Arc::from(completer_from_spec(&a.completer)?);
    load_rules(&a.rules).with_context(|| format!("loading rules from {}", a.rules.display()))?;
    let mut cfg = ubsr_studio::StudioConfig::new(Registry::builtin(), &a.rules, completer);
    cfg.bearer_token = a.bearer_token;
    cfg.cors_origin = a.cors_origin;
    let rt = tokio::runtime::Runtime::new()?;
    eprintln!("studio listening on http://{}", a.addr);
    rt.block_on(ubsr_studio::serve(a.addr, cfg))?;
    Ok(0)
}

/// Convenience for reading a profile's tables back.
pub fn read_profile_tables(dir: &Path) -> Result<(NodeTable, EdgeTable, Table)> {
    let format = detect_format(dir)?;
    let nodes = NodeTable::from_table(&Table::read(&table_path(dir, NODES, format), format)?)?;
    let edges = EdgeTable::from_table(&Table::read(&table_path(dir, EDGES, format), format)?)?;
    let metrics = Table::read(&table_path(dir, METRICS, format), format)?;
    Ok((nodes, edges, metrics))
}
