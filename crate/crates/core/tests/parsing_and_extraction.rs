mod common;

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use proptest::prelude::*;
use ubsr_core::extract::{collect_inputs, extract, extract_corpus, ExtractionOptions};
use ubsr_core::ir::{validate_document, Concept, UbsrNodeType};
use ubsr_core::parser::{parse, prune_concept, prune_depth, render_sexpr, token_count, ParseTree, TreeNode};
use ubsr_core::registry::Registry;
use ubsr_core::rules::RuleDatabase;

use common::arb_tree;

type Span = (usize, usize);

/// span -> parent span, for every node.
fn parents(t: &ParseTree) -> BTreeMap<Span, Option<Span>> {
    fn go(n: &TreeNode, parent: Option<Span>, out: &mut BTreeMap<Span, Option<Span>>) {
        out.insert(n.byte_span, parent);
        for c in &n.children {
            go(c, Some(n.byte_span), out);
        }
    }
    let mut out = BTreeMap::new();
    go(&t.root, None, &mut out);
    out
}

fn tagged(t: &ParseTree, concepts: &BTreeSet<Concept>) -> Vec<Span> {
    let mut out = Vec::new();
    t.root.walk(&mut |n, _| {
        if n.concept_tags.iter().any(|c| concepts.contains(c)) {
            out.push(n.byte_span);
        }
    });
    out
}

fn concept_sets() -> impl Strategy<Value = BTreeSet<Concept>> {
    prop::collection::btree_set(prop::sample::select(Concept::ALL.to_vec()), 0..4)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn depth_pruning_is_monotone(t in arb_tree()) {
        let h = t.root.height();
        for k in 0..=h {
            let a = prune_depth(&t, k);
            let b = prune_depth(&t, k + 1);
            prop_assert!(a.size() <= b.size());
            prop_assert!(b.size() <= t.size());
            prop_assert!(a.root.height() <= k + 1);
        }
        prop_assert_eq!(prune_depth(&t, h), t);
    }

    #[test]
    fn concept_pruning_keeps_tagged_paths(t in arb_tree(), concepts in concept_sets()) {
        let pruned = prune_concept(&t, &concepts);
        prop_assert!(pruned.size() <= t.size());
        let orig = parents(&t);
        let kept = parents(&pruned);
        // same parent as before, so nothing was re-hung
        for (span, parent) in &kept {
            prop_assert_eq!(orig.get(span), Some(parent));
        }
        for span in tagged(&t, &concepts) {
            let mut at = Some(span);
            while let Some(s) = at {
                prop_assert!(kept.contains_key(&s));
                at = orig[&s];
            }
        }
    }

    #[test]
    fn pruned_renderings_are_no_longer(t in arb_tree(), k in 0usize..8, concepts in concept_sets()) {
        let full = token_count(&render_sexpr(&t));
        prop_assert_eq!(full, t.size());
        prop_assert!(token_count(&render_sexpr(&prune_depth(&t, k))) <= full);
        prop_assert!(token_count(&render_sexpr(&prune_concept(&t, &concepts))) <= full);
    }

    #[test]
    fn extractor_programs_are_pure(snippet in "(import|from|def|#|//| |[a-z.,]){0,40}") {
        for rule in RuleDatabase::builtin().rules() {
            prop_assert_eq!(rule.extract(&snippet), rule.extract(&snippet));
        }
    }

    #[test]
    fn extraction_yields_valid_documents(
        (language, code) in prop::sample::select(PIECES.to_vec()).prop_flat_map(|(lang, pieces)| {
            (Just(lang), prop::collection::vec(prop::sample::select(pieces.to_vec()), 0..20).prop_map(|v| v.concat()))
        })
    ) {
        let ex = extract(&code, language, &RuleDatabase::builtin(), &Registry::builtin()).unwrap();
        prop_assert!(validate_document(&ex.document).is_empty());
        for n in ex.document.nodes.iter().filter(|n| n.node_type != UbsrNodeType::Root) {
            prop_assert!(code.contains(&n.metadata.original_code));
        }
        let again = extract(&code, language, &RuleDatabase::builtin(), &Registry::builtin()).unwrap();
        prop_assert_eq!(again.document, ex.document);
    }
}

const PIECES: [(&str, &[&str]); 4] = [
    ("python", &["import os\n", "from a.b import c\n", "def f(x):\n", "    # note\n", "    return x\n", "class K:\n", "    def m(self): pass\n", "'''doc'''\n", "(", "\n"]),
    ("java", &["import java.util.List;\n", "class A {\n", "}\n", "void f() {\n", "// c\n", "/* b */\n", "int x = 1;\n", "A() {}\n", "{"]),
    ("c", &["#include <stdio.h>\n", "int main(void) {\n", "}\n", "/* c */\n", "// d\n", "static int g(int a) { return a; }\n", "#define X 1\n"]),
    ("haskell", &["module M where\n", "import Data.List\n", "f x = x\n", "-- c\n", "{- b -}\n", "g :: Int -> Int\n", "g = id\n"]),
];

fn fixtures() -> &'static Path {
    Path::new(concat!(env!("CARGO_MANIFEST_DIR"), "/../../fixtures"))
}

#[test]
fn fixture_files_parse_deterministically() {
    let registry = Registry::builtin();
    for dir in ["corpora/cpp", "corpora/typescript", "corpora/scala", "synthetic"] {
        let (inputs, _) = collect_inputs(&fixtures().join(dir), &registry, None).unwrap();
        assert!(!inputs.is_empty());
        for i in &inputs {
            assert_eq!(parse(&i.code, &i.language, &registry).unwrap(), parse(&i.code, &i.language, &registry).unwrap());
        }
    }
}

#[test]
fn fixture_extraction_is_valid_and_per_file() {
    let registry = Registry::builtin();
    let db = RuleDatabase::builtin();
    let (inputs, _) = collect_inputs(&fixtures().join("synthetic"), &registry, None).unwrap();
    let whole = extract_corpus(&inputs, &db, &registry, &ExtractionOptions::default()).unwrap();
    for (i, input) in inputs.iter().enumerate() {
        let ex = extract(&input.code, &input.language, &db, &registry).unwrap();
        assert!(validate_document(&ex.document).is_empty(), "{}", input.path);
        for n in &ex.document.nodes[1..] {
            assert!(input.code.contains(&n.metadata.original_code));
        }
        // alone or within the corpus, a file yields the same rows
        let mut alone = extract_corpus(std::slice::from_ref(input), &db, &registry, &ExtractionOptions::default()).unwrap();
        alone.nodes.rows.iter_mut().for_each(|r| r.doc_id = i as i64);
        let within: Vec<_> = whole.nodes.rows.iter().filter(|r| r.doc_id == i as i64).cloned().collect();
        assert_eq!(alone.nodes.rows, within, "{}", input.path);
    }
}
