use std::fmt;

use super::{HeadRules, Token, Tree, TreebankError};

/// Which child of a binary node is its head.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum HeadSide {
    Left,
    Right,
}

impl HeadSide {
    pub fn mark(self) -> char {
        match self {
            HeadSide::Left => 'l',
            HeadSide::Right => 'r',
        }
    }
}

/// Label of a binarized node. Serialized as `NP-r*`: head mark for binary nodes, `*` for
/// intermediate nodes introduced by binarization.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BinLabel {
    pub label: String,
    pub head: Option<HeadSide>,
    pub temporary: bool,
}

impl BinLabel {
    pub fn plain(label: impl Into<String>) -> Self {
        BinLabel {
            label: label.into(),
            head: None,
            temporary: false,
        }
    }
}

impl From<&str> for BinLabel {
    fn from(label: &str) -> Self {
        BinLabel::plain(label)
    }
}

impl fmt::Display for BinLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label)?;
        if let Some(side) = self.head {
            write!(f, "-{}", side.mark())?;
        }
        if self.temporary {
            f.write_str("*")?;
        }
        Ok(())
    }
}

pub type BinarizedTree = Tree<BinLabel>;

fn child_label<'a>(child: &'a Tree, tokens: &'a [Token]) -> &'a str {
    match child {
        Tree::Leaf(i) => &tokens[*i].pos,
        Tree::Node { label, .. } => label,
    }
}

/// Head-outward binarization.
///
/// The head child first absorbs its right siblings, nearest first, then its left siblings,
/// nearest first. Every intermediate node carries the parent label with a `*`; the topmost
/// node of the chain is unstarred. Unary nodes are kept as they are.
pub fn binarize(tree: &Tree, tokens: &[Token], rules: &HeadRules) -> BinarizedTree {
    let (label, children) = match tree {
        Tree::Leaf(i) => return Tree::Leaf(*i),
        Tree::Node { label, children } => (label, children),
    };
    if children.len() == 1 {
        return Tree::node(
            BinLabel::plain(label.clone()),
            vec![binarize(&children[0], tokens, rules)],
        );
    }

    let labels: Vec<&str> = children.iter().map(|c| child_label(c, tokens)).collect();
    let head = rules.find_head(label, &labels);
    let mut bin: Vec<Option<BinarizedTree>> = children
        .iter()
        .map(|c| Some(binarize(c, tokens, rules)))
        .collect();
    let joins = children.len() - 1;
    let mut done = 0;
    let mut join = |side: HeadSide, pair: Vec<BinarizedTree>| {
        done += 1;
        Tree::node(
            BinLabel {
                label: label.clone(),
                head: Some(side),
                temporary: done < joins,
            },
            pair,
        )
    };

    let mut current = bin[head].take().expect("head child");
    for slot in bin.iter_mut().skip(head + 1) {
        let right = slot.take().expect("right sibling");
        current = join(HeadSide::Left, vec![current, right]);
    }
    for slot in bin[..head].iter_mut().rev() {
        let left = slot.take().expect("left sibling");
        current = join(HeadSide::Right, vec![left, current]);
    }
    current
}

/// Splices intermediate nodes back into their parents and drops head marks.
pub fn unbinarize(tree: &BinarizedTree) -> Result<Tree, TreebankError> {
    match tree {
        Tree::Leaf(i) => Ok(Tree::Leaf(*i)),
        Tree::Node { label, .. } if label.temporary => {
            Err(TreebankError::TemporaryRoot(label.to_string()))
        }
        Tree::Node { label, children } => {
            let mut out = Vec::with_capacity(children.len());
            splice(children, &mut out);
            Ok(Tree::node(label.label.clone(), out))
        }
    }
}

fn splice(children: &[BinarizedTree], out: &mut Vec<Tree>) {
    for child in children {
        match child {
            Tree::Leaf(i) => out.push(Tree::Leaf(*i)),
            Tree::Node { label, children } if label.temporary => splice(children, out),
            Tree::Node { label, children } => {
                let mut inner = Vec::with_capacity(children.len());
                splice(children, &mut inner);
                out.push(Tree::node(label.label.clone(), inner));
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::treebank::read_trees;

    fn little_boy() -> (Tree, Vec<Token>) {
        read_trees(
            "(S (NP (DT The) (JJ little) (NN boy)) (VP (VBZ likes) (NP (JJ red) (NNS tomatoes))) (. .))",
        )
        .unwrap()
        .remove(0)
    }

    #[test]
    fn little_boy_binarization() {
        let (tree, tokens) = little_boy();
        let bin = binarize(&tree, &tokens, &HeadRules::default());
        assert_eq!(
            bin.skeleton(),
            "(S-r (NP-r 0 (NP-r* 1 2)) (S-l* (VP-l 3 (NP-r 4 5)) 6))"
        );
        assert_eq!(unbinarize(&bin).unwrap(), tree);
    }

    #[test]
    fn rightmost_head_noun_phrase() {
        let (tree, tokens) = read_trees("(NP (DT The) (JJ little) (NN boy))")
            .unwrap()
            .remove(0);
        let bin = binarize(&tree, &tokens, &HeadRules::rightmost());
        assert_eq!(bin.skeleton(), "(NP-r 0 (NP-r* 1 2))");
    }

    #[test]
    fn unary_unchanged() {
        let (tree, tokens) = read_trees("(S (NP (DT a)))").unwrap().remove(0);
        let bin = binarize(&tree, &tokens, &HeadRules::default());
        assert_eq!(bin.skeleton(), "(S (NP 0))");
        assert_eq!(unbinarize(&bin).unwrap(), tree);
    }

    #[test]
    fn temporary_root_rejected() {
        let bin: BinarizedTree = Tree::node(
            BinLabel {
                label: "NP".into(),
                head: Some(HeadSide::Left),
                temporary: true,
            },
            vec![Tree::Leaf(0), Tree::Leaf(1)],
        );
        assert!(matches!(
            unbinarize(&bin),
            Err(TreebankError::TemporaryRoot(_))
        ));
    }

    #[test]
    fn head_in_middle() {
        let tree: Tree = Tree::node("X", (0..5).map(Tree::Leaf).collect());
        let tokens: Vec<Token> = ["A", "B", "H", "C", "D"]
            .iter()
            .enumerate()
            .map(|(i, p)| Token::new(format!("w{i}"), *p).unwrap())
            .collect();
        let rules = HeadRules::parse("X left H").unwrap();
        let bin = binarize(&tree, &tokens, &rules);
        assert_eq!(bin.skeleton(), "(X-r 0 (X-r* 1 (X-l* (X-l* 2 3) 4)))");
        assert_eq!(unbinarize(&bin).unwrap(), tree);
    }
}
