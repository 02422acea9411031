//! Source text to owned syntax trees, plus depth and concept pruning.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grammars;
use crate::ir::Concept;
use crate::registry::{LanguageId, Registry};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ParseError {
    #[error("language {0:?} is not registered")]
    Unregistered(String),
    #[error("no parser backend available for {0:?}")]
    BackendUnavailable(String),
    #[error("parser gave up on {0:?} input")]
    Aborted(String),
}

/// One named grammar node. Anonymous tokens (punctuation, keywords) are
/// not kept.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TreeNode {
    pub node_type: String,
    pub byte_span: (usize, usize),
    pub children: Vec<TreeNode>,
    #[serde(default, skip_serializing_if = "BTreeSet::is_empty")]
    pub concept_tags: BTreeSet<Concept>,
}

impl TreeNode {
    pub fn leaf(node_type: impl Into<String>, byte_span: (usize, usize)) -> Self {
        Self {
            node_type: node_type.into(),
            byte_span,
            children: Vec::new(),
            concept_tags: BTreeSet::new(),
        }
    }

    pub fn size(&self) -> usize {
        1 + self.children.iter().map(TreeNode::size).sum::<usize>()
    }

    /// Number of levels, counting this node as one.
    pub fn height(&self) -> usize {
        1 + self.children.iter().map(TreeNode::height).max().unwrap_or(0)
    }

    /// Pre-order walk.
    pub fn walk<'a>(&'a self, f: &mut impl FnMut(&'a TreeNode, usize)) {
        fn go<'a>(n: &'a TreeNode, depth: usize, f: &mut impl FnMut(&'a TreeNode, usize)) {
            f(n, depth);
            for c in &n.children {
                go(c, depth + 1, f);
            }
        }
        go(self, 0, f)
    }

    pub fn text<'s>(&self, source: &'s str) -> &'s str {
        &source[self.byte_span.0..self.byte_span.1]
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParseTree {
    pub language: LanguageId,
    pub root: TreeNode,
}

impl ParseTree {
    pub fn size(&self) -> usize {
        self.root.size()
    }

    /// Attaches concept tags; `tag_of` maps a grammar node type to the
    /// concept a rule assigns it, if any.
    pub fn tag_with(&mut self, tag_of: impl Fn(&str) -> Option<Concept>) {
        fn go(n: &mut TreeNode, tag_of: &impl Fn(&str) -> Option<Concept>) {
            n.concept_tags.clear();
            if let Some(c) = tag_of(&n.node_type) {
                n.concept_tags.insert(c);
            }
            for c in &mut n.children {
                go(c, tag_of);
            }
        }
        go(&mut self.root, &tag_of)
    }

    pub fn tagged_count(&self) -> usize {
        let mut n = 0;
        self.root.walk(&mut |node, _| {
            if !node.concept_tags.is_empty() {
                n += 1;
            }
        });
        n
    }
}

/// Parses `code` with the grammar registered for `language`. Malformed
/// input still yields a tree; the grammar marks bad regions with `ERROR`
/// nodes.
pub fn parse(code: &str, language: &str, registry: &Registry) -> Result<ParseTree, ParseError> {
    let entry = registry
        .get(language)
        .map_err(|_| ParseError::Unregistered(language.to_string()))?;
    let id = entry.language.clone();
    let grammar = grammars::grammar(id.as_str())
        .ok_or_else(|| ParseError::BackendUnavailable(id.to_string()))?;
    let mut parser = tree_sitter::Parser::new();
    parser
        .set_language(&grammar)
        .map_err(|_| ParseError::BackendUnavailable(id.to_string()))?;
    let tree = parser
        .parse(code, None)
        .ok_or_else(|| ParseError::Aborted(id.to_string()))?;
    Ok(ParseTree {
        language: id,
        root: convert(tree.root_node()),
    })
}

// Iterative so deeply nested inputs cannot exhaust the stack during
// conversion. Named nodes under an anonymous node attach to the nearest
// named ancestor.
fn convert(root: tree_sitter::Node<'_>) -> TreeNode {
    let mut cursor = root.walk();
    let mut stack: Vec<TreeNode> = vec![TreeNode::leaf(root.kind(), (root.start_byte(), root.end_byte()))];
    // named-ness of every node on the cursor path below the root
    let mut path: Vec<bool> = Vec::new();
    if !cursor.goto_first_child() {
        return stack.pop().expect("root");
    }
    loop {
        let node = cursor.node();
        let named = node.is_named() && !node.is_missing();
        if named {
            stack.push(TreeNode::leaf(node.kind(), (node.start_byte(), node.end_byte())));
        }
        path.push(named);
        if cursor.goto_first_child() {
            continue;
        }
        // leave nodes until a sibling is available
        loop {
            if path.pop().expect("path tracks cursor") {
                let done = stack.pop().expect("stack tracks named nodes");
                stack.last_mut().expect("root stays on stack").children.push(done);
            }
            if cursor.goto_next_sibling() {
                break;
            }
            if !cursor.goto_parent() || path.is_empty() {
                return finish(stack);
            }
        }
    }
}

fn finish(mut stack: Vec<TreeNode>) -> TreeNode {
    while stack.len() > 1 {
        let done = stack.pop().expect("len > 1");
        stack.last_mut().expect("len > 0").children.push(done);
    }
    stack.pop().expect("root")
}

/// Keeps nodes at most `max_depth` edges below the root, so `1` keeps the
/// root and its direct children. Spans are untouched.
pub fn prune_depth(tree: &ParseTree, max_depth: usize) -> ParseTree {
    fn go(n: &TreeNode, left: usize) -> TreeNode {
        TreeNode {
            node_type: n.node_type.clone(),
            byte_span: n.byte_span,
            concept_tags: n.concept_tags.clone(),
            children: if left == 0 {
                Vec::new()
            } else {
                n.children.iter().map(|c| go(c, left - 1)).collect()
            },
        }
    }
    ParseTree {
        language: tree.language.clone(),
        root: go(&tree.root, max_depth),
    }
}

/// Keeps nodes tagged with any of `concepts`, their ancestors and the root.
pub fn prune_concept(tree: &ParseTree, concepts: &BTreeSet<Concept>) -> ParseTree {
    fn go(n: &TreeNode, concepts: &BTreeSet<Concept>) -> Option<TreeNode> {
        let children: Vec<TreeNode> = n.children.iter().filter_map(|c| go(c, concepts)).collect();
        let hit = n.concept_tags.iter().any(|t| concepts.contains(t));
        (hit || !children.is_empty()).then(|| TreeNode {
            node_type: n.node_type.clone(),
            byte_span: n.byte_span,
            children,
            concept_tags: n.concept_tags.clone(),
        })
    }
    let root = go(&tree.root, concepts).unwrap_or_else(|| TreeNode {
        children: Vec::new(),
        ..tree.root.clone()
    });
    ParseTree {
        language: tree.language.clone(),
        root,
    }
}

/// Parenthesized node-type rendering, e.g. `(module (import_statement (dotted_name (identifier))))`.
/// Every node contributes exactly one whitespace-delimited token.
pub fn render_sexpr(tree: &ParseTree) -> String {
    fn go(n: &TreeNode, out: &mut String) {
        let _ = write!(out, "({}", n.node_type);
        for c in &n.children {
            out.push(' ');
            go(c, out);
        }
        out.push(')');
    }
    let mut out = String::new();
    go(&tree.root, &mut out);
    out
}

/// Whitespace-delimited token count.
pub fn token_count(rendered: &str) -> usize {
    rendered.split_whitespace().count()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn py(code: &str) -> ParseTree {
        parse(code, "python", &Registry::builtin()).unwrap()
    }

    #[test]
    fn python_import_has_import_statement_child() {
        let t = py("import math");
        assert_eq!(t.root.node_type, "module");
        assert_eq!(t.root.children[0].node_type, "import_statement");
        assert_eq!(render_sexpr(&t), "(module (import_statement (dotted_name (identifier))))");
    }

    #[test]
    fn empty_code_is_a_bare_root() {
        let t = py("");
        assert!(t.root.children.is_empty());
        assert_eq!(render_sexpr(&t), "(module)");
    }

    #[test]
    fn cpp_include() {
        let t = parse("#include <stdio.h>", "cpp", &Registry::builtin()).unwrap();
        let mut found = false;
        t.root.walk(&mut |n, _| found |= n.node_type == "preproc_include");
        assert!(found);
    }

    #[test]
    fn unregistered_language() {
        assert_eq!(
            parse("x", "cobol", &Registry::builtin()).unwrap_err(),
            ParseError::Unregistered("cobol".into())
        );
    }

    #[test]
    fn depth_one_keeps_statements_only() {
        let t = py("import math\nimport os\n");
        let p = prune_depth(&t, 1);
        assert_eq!(render_sexpr(&p), "(module (import_statement) (import_statement))");
        assert_eq!(prune_depth(&t, t.root.height()), t);
    }

    #[test]
    fn concept_pruning_keeps_tagged_paths() {
        let mut t = py("x = 1\nimport math\n");
        t.tag_with(|k| (k == "import_statement").then_some(Concept::Package));
        let p = prune_concept(&t, &BTreeSet::from([Concept::Package]));
        assert_eq!(render_sexpr(&p), "(module (import_statement))");
        let none = prune_concept(&t, &BTreeSet::from([Concept::Comment]));
        assert_eq!(render_sexpr(&none), "(module)");
    }

    #[test]
    fn spans_nest() {
        let t = py("def f(a):\n    # c\n    return a + 1\n");
        fn check(n: &TreeNode) {
            let mut prev = n.byte_span.0;
            for c in &n.children {
                assert!(c.byte_span.0 >= prev && c.byte_span.1 <= n.byte_span.1);
                prev = c.byte_span.0;
                check(c);
            }
        }
        check(&t.root);
    }

    #[test]
    fn malformed_input_still_parses() {
        let t = py("def (:\n");
        let mut err = false;
        t.root.walk(&mut |n, _| err |= n.node_type == "ERROR");
        assert!(err);
    }
}
