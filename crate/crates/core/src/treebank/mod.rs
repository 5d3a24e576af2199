//! Bracketed constituency trees: reading, writing, binarization and head rules.

mod binarize;
mod head_rules;
mod reader;

use std::fmt;

pub use binarize::{binarize, unbinarize, BinLabel, BinarizedTree, HeadSide};
pub use head_rules::{Direction, HeadDirective, HeadRules};
pub use reader::{read_trees, read_trees_with, write_tree, write_trees, ReadOptions};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TreebankError {
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("head rules, line {line}: {message}")]
    HeadRules { line: usize, message: String },
    #[error("temporary (starred) node {0} cannot be the root of a binarized tree")]
    TemporaryRoot(String),
    #[error("invalid token: {0}")]
    InvalidToken(String),
}

/// A word of the input sentence together with its part-of-speech tag.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Token {
    pub form: String,
    pub pos: String,
}

impl Token {
    pub fn new(form: impl Into<String>, pos: impl Into<String>) -> Result<Self, TreebankError> {
        let token = Token {
            form: form.into(),
            pos: pos.into(),
        };
        for field in [&token.form, &token.pos] {
            if field.is_empty() || field.chars().any(char::is_whitespace) {
                return Err(TreebankError::InvalidToken(format!(
                    "{:?}/{:?}",
                    token.form, token.pos
                )));
            }
        }
        Ok(token)
    }
}

/// A constituent tree over token positions.
///
/// Leaves hold 0-based indices into the sentence; the part-of-speech tags live in the
/// accompanying [`Token`] list, so a preterminal `(DT The)` is simply `Leaf(i)`. The label type
/// is generic so binarized trees can reuse the same shape with [`BinLabel`] labels.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Tree<L = String> {
    Leaf(usize),
    Node { label: L, children: Vec<Tree<L>> },
}

impl<L> Tree<L> {
    pub fn node(label: impl Into<L>, children: Vec<Tree<L>>) -> Self {
        Tree::Node {
            label: label.into(),
            children,
        }
    }

    pub fn is_leaf(&self) -> bool {
        matches!(self, Tree::Leaf(_))
    }

    pub fn label(&self) -> Option<&L> {
        match self {
            Tree::Leaf(_) => None,
            Tree::Node { label, .. } => Some(label),
        }
    }

    pub fn children(&self) -> &[Tree<L>] {
        match self {
            Tree::Leaf(_) => &[],
            Tree::Node { children, .. } => children,
        }
    }

    /// Token indices of the leaves, left to right.
    pub fn leaves(&self) -> Vec<usize> {
        let mut out = Vec::new();
        self.collect_leaves(&mut out);
        out
    }

    fn collect_leaves(&self, out: &mut Vec<usize>) {
        match self {
            Tree::Leaf(i) => out.push(*i),
            Tree::Node { children, .. } => children.iter().for_each(|c| c.collect_leaves(out)),
        }
    }

    pub fn num_leaves(&self) -> usize {
        match self {
            Tree::Leaf(_) => 1,
            Tree::Node { children, .. } => children.iter().map(Tree::num_leaves).sum(),
        }
    }

    /// Number of internal (labeled) nodes.
    pub fn num_internal(&self) -> usize {
        match self {
            Tree::Leaf(_) => 0,
            Tree::Node { children, .. } => {
                1 + children.iter().map(Tree::num_internal).sum::<usize>()
            }
        }
    }

    /// Number of internal nodes with exactly one child.
    pub fn num_unary(&self) -> usize {
        match self {
            Tree::Leaf(_) => 0,
            Tree::Node { children, .. } => {
                usize::from(children.len() == 1)
                    + children.iter().map(Tree::num_unary).sum::<usize>()
            }
        }
    }

    /// Length of the chain of single-child nodes starting at this node.
    pub fn unary_chain_len(&self) -> usize {
        let mut len = 0;
        let mut cur = self;
        while let Tree::Node { children, .. } = cur {
            if children.len() != 1 {
                break;
            }
            len += 1;
            cur = &children[0];
        }
        len
    }

    pub fn max_arity(&self) -> usize {
        match self {
            Tree::Leaf(_) => 0,
            Tree::Node { children, .. } => children
                .iter()
                .map(Tree::max_arity)
                .max()
                .unwrap_or(0)
                .max(children.len()),
        }
    }

    pub fn map_labels<M>(&self, f: &mut impl FnMut(&L) -> M) -> Tree<M> {
        match self {
            Tree::Leaf(i) => Tree::Leaf(*i),
            Tree::Node { label, children } => Tree::Node {
                label: f(label),
                children: children.iter().map(|c| c.map_labels(f)).collect(),
            },
        }
    }

    /// Checks that the leaves cover `0..n` exactly once, in order, and that every
    /// internal node has at least one child.
    pub fn is_well_formed(&self, n: usize) -> bool {
        fn nonempty<L>(t: &Tree<L>) -> bool {
            match t {
                Tree::Leaf(_) => true,
                Tree::Node { children, .. } => {
                    !children.is_empty() && children.iter().all(nonempty)
                }
            }
        }
        nonempty(self) && self.leaves().into_iter().eq(0..n)
    }
}

impl<L: fmt::Display> Tree<L> {
    /// Bracketed rendering with bare token indices as leaves, for diagnostics.
    pub fn skeleton(&self) -> String {
        match self {
            Tree::Leaf(i) => i.to_string(),
            Tree::Node { label, children } => {
                let inner: Vec<String> = children.iter().map(Tree::skeleton).collect();
                format!("({} {})", label, inner.join(" "))
            }
        }
    }
}

/// Strips function tags and coindexation from a nonterminal label:
/// `NP-SBJ-1` becomes `NP`, `NP=2` becomes `NP`. Labels starting with `-` (`-NONE-`,
/// `-LRB-`) are left alone.
pub fn strip_function_tags(label: &str) -> &str {
    if label.starts_with('-') {
        return label;
    }
    match label
        .char_indices()
        .skip(1)
        .find(|&(_, c)| c == '-' || c == '=')
    {
        Some((i, _)) => &label[..i],
        None => label,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn function_tags() {
        assert_eq!(strip_function_tags("NP-SBJ-1"), "NP");
        assert_eq!(strip_function_tags("NP=2"), "NP");
        assert_eq!(strip_function_tags("-NONE-"), "-NONE-");
        assert_eq!(strip_function_tags("PRP$"), "PRP$");
    }

    #[test]
    fn counts() {
        let t: Tree = Tree::node(
            "S",
            vec![
                Tree::node("NP", vec![Tree::Leaf(0)]),
                Tree::node("VP", vec![Tree::Leaf(1), Tree::Leaf(2)]),
            ],
        );
        assert_eq!(t.num_leaves(), 3);
        assert_eq!(t.num_internal(), 3);
        assert_eq!(t.num_unary(), 1);
        assert_eq!(t.max_arity(), 2);
        assert!(t.is_well_formed(3));
        assert!(!t.is_well_formed(4));
        assert_eq!(t.skeleton(), "(S (NP 0) (VP 1 2))");
        assert_eq!(t.children()[0].unary_chain_len(), 1);
    }

    #[test]
    fn token_validation() {
        assert!(Token::new("a", "DT").is_ok());
        assert!(Token::new("", "DT").is_err());
        assert!(Token::new("a b", "DT").is_err());
    }
}
