//! Character trie with exact lookup and prefix enumeration.

use std::collections::BTreeMap;

#[derive(Debug, Clone, PartialEq, Eq)]
struct Node<V> {
    children: BTreeMap<char, usize>,
    value: Option<V>,
}

impl<V> Node<V> {
    fn empty() -> Self {
        Self {
            children: BTreeMap::new(),
            value: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Trie<V> {
    nodes: Vec<Node<V>>,
    len: usize,
}

impl<V> Default for Trie<V> {
    fn default() -> Self {
        Self::new()
    }
}

impl<V> Trie<V> {
    pub fn new() -> Self {
        Self {
            nodes: vec![Node::empty()],
            len: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Stores `value` under `key`, returning the value it replaced.
    pub fn insert(&mut self, key: &str, value: V) -> Option<V> {
        let mut at = 0;
        for ch in key.chars() {
            at = match self.nodes[at].children.get(&ch) {
                Some(&next) => next,
                None => {
                    self.nodes.push(Node::empty());
                    let next = self.nodes.len() - 1;
                    self.nodes[at].children.insert(ch, next);
                    next
                }
            };
        }
        let old = self.nodes[at].value.replace(value);
        if old.is_none() {
            self.len += 1;
        }
        old
    }

    fn find(&self, key: &str) -> Option<usize> {
        let mut at = 0;
        for ch in key.chars() {
            at = *self.nodes[at].children.get(&ch)?;
        }
        Some(at)
    }

    pub fn get(&self, key: &str) -> Option<&V> {
        self.find(key).and_then(|i| self.nodes[i].value.as_ref())
    }

    pub fn contains_key(&self, key: &str) -> bool {
        self.get(key).is_some()
    }

    /// Keys starting with `prefix`, in lexicographic order.
    pub fn with_prefix(&self, prefix: &str) -> Vec<(String, &V)> {
        let mut out = Vec::new();
        let Some(start) = self.find(prefix) else { return out };
        let mut stack = vec![(start, prefix.to_string())];
        while let Some((i, key)) = stack.pop() {
            if let Some(v) = &self.nodes[i].value {
                out.push((key.clone(), v));
            }
            for (ch, &next) in self.nodes[i].children.iter().rev() {
                let mut k = key.clone();
                k.push(*ch);
                stack.push((next, k));
            }
        }
        out
    }
}
