//! Proptest generators shared by the property suites.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use proptest::prelude::*;
use ubsr_core::ir::{to_tabular, Concept, NodeId, NodeMetadata, NodeTable, UbsrDocument, UbsrNodeType};
use ubsr_core::parser::{ParseTree, TreeNode};
use ubsr_core::registry::LanguageId;
use ubsr_core::semantic::{SemanticRule, SemanticRuleSet};

pub const LANGUAGES: [&str; 4] = ["python", "java", "haskell", "c"];

fn lines(n: usize) -> String {
    (0..n).map(|i| format!("line {i}\n")).collect()
}

/// (parent pick, concept, loc, name index) for one non-root node.
fn node_spec() -> impl Strategy<Value = (usize, Concept, usize, usize)> {
    (
        any::<usize>(),
        prop::sample::select(Concept::ALL.to_vec()),
        0usize..6,
        0usize..12,
    )
}

/// Valid documents of up to 25 concept nodes hung under random earlier
/// nodes, with random line counts everywhere.
pub fn arb_document() -> impl Strategy<Value = UbsrDocument> {
    (
        prop::sample::select(LANGUAGES.to_vec()),
        0usize..60,
        prop::collection::vec(node_spec(), 0..25),
    )
        .prop_map(|(language, loc, specs)| {
            let mut doc = UbsrDocument::new_root("gen.txt", language, &lines(loc));
            for (pick, concept, loc, name) in specs {
                let parent = NodeId((pick % doc.nodes.len()) as u32);
                let node_type = concept.node_type();
                doc.push_child(
                    parent,
                    node_type,
                    format!("{} pkg{name}", node_type.as_str()),
                    NodeMetadata::new(format!("ast_{}", concept.as_str()), language, lines(loc)),
                );
            }
            doc
        })
}

pub fn arb_documents() -> impl Strategy<Value = Vec<UbsrDocument>> {
    prop::collection::vec(arb_document(), 0..6)
}

pub fn arb_node_table() -> impl Strategy<Value = NodeTable> {
    arb_documents().prop_map(|docs| to_tabular(&docs).expect("generated documents are valid").0)
}

fn arb_tags() -> impl Strategy<Value = BTreeSet<Concept>> {
    // most nodes carry no tag
    prop_oneof![
        3 => Just(BTreeSet::new()),
        1 => prop::collection::btree_set(prop::sample::select(Concept::ALL.to_vec()), 1..3),
    ]
}

fn renumber(n: &mut TreeNode, next: &mut usize) {
    n.byte_span = (*next, *next + 1);
    *next += 1;
    for c in &mut n.children {
        renumber(c, next);
    }
}

/// Random trees whose spans are unique pre-order numbers, so `byte_span`
/// identifies a node across pruning.
pub fn arb_tree() -> impl Strategy<Value = ParseTree> {
    let kind = prop::sample::select(vec!["module", "block", "call", "identifier", "import", "comment"]);
    let leaf = (kind.clone(), arb_tags()).prop_map(|(k, tags)| TreeNode {
        concept_tags: tags,
        ..TreeNode::leaf(k, (0, 0))
    });
    leaf.prop_recursive(7, 120, 5, move |inner| {
        (kind.clone(), arb_tags(), prop::collection::vec(inner, 0..5)).prop_map(|(k, tags, children)| TreeNode {
            node_type: k.to_string(),
            byte_span: (0, 0),
            children,
            concept_tags: tags,
        })
    })
    .prop_map(|mut root| {
        renumber(&mut root, &mut 0);
        ParseTree {
            language: LanguageId::new("python"),
            root,
        }
    })
}

/// Package names over a tiny alphabet so prefixes and case variants of
/// one another are common.
pub fn arb_package() -> impl Strategy<Value = String> {
    "[abAB]{1,3}(\\.[ab]{1,2})?"
}

pub const CONCEPTS: [&str; 3] = ["Database", "Mathematics", "Testing"];

/// Rule triples with unique (normalized package, language) keys.
pub fn arb_rule_triples() -> impl Strategy<Value = Vec<(String, String, String)>> {
    prop::collection::vec(
        (
            arb_package(),
            prop::sample::select(LANGUAGES.to_vec()),
            prop::sample::select(CONCEPTS.to_vec()),
        ),
        0..30,
    )
    .prop_map(|v| {
        let mut seen = BTreeSet::new();
        v.into_iter()
            .filter(|(p, l, _)| seen.insert((p.to_lowercase(), l.to_string())))
            .map(|(p, l, c)| (p, l.to_string(), c.to_string()))
            .collect()
    })
}

pub fn rule_set(dimension: &str, triples: &[(String, String, String)]) -> SemanticRuleSet {
    let mut set = SemanticRuleSet::new([dimension]);
    for (p, l, c) in triples {
        set.insert(SemanticRule {
            package_name: p.clone(),
            language: l.clone(),
            concepts: BTreeMap::from([(dimension.to_string(), c.clone())]),
        })
        .expect("keys are unique");
    }
    set
}

/// Node tables whose package nodes name packages from the same tiny
/// alphabet as the rule sets.
pub fn arb_package_table() -> impl Strategy<Value = NodeTable> {
    prop::collection::vec(
        (
            prop::sample::select(LANGUAGES.to_vec()),
            prop::collection::vec(prop::collection::vec(arb_package(), 1..3), 0..6),
        ),
        0..6,
    )
    .prop_map(|docs| {
        let docs: Vec<UbsrDocument> = docs
            .into_iter()
            .map(|(language, imports)| {
                let mut doc = UbsrDocument::new_root("gen.txt", language, "x\n");
                for names in imports {
                    let value = names.join(", ");
                    doc.push_child(
                        NodeId(0),
                        UbsrNodeType::Package,
                        format!("ubsr_package {value}"),
                        NodeMetadata::new("import", language, format!("import {value}")),
                    );
                }
                doc
            })
            .collect();
        to_tabular(&docs).expect("valid").0
    })
}
