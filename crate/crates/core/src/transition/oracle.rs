//! Static oracles (gold tree → action sequence), traversal orders, and execution of action
//! sequences back into trees.

use crate::treebank::{binarize, unbinarize, BinarizedTree, HeadRules, Token, Tree};

use super::{Action, ParserState, System, TransitionError, TransitionSystem};

/// How many leftmost children are visited before their parent.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TraversalK {
    Finite(usize),
    /// Post-order: a node after all of its children.
    Infinite,
}

impl TraversalK {
    fn before_parent(self, children: usize) -> usize {
        match self {
            TraversalK::Finite(k) => k.min(children),
            TraversalK::Infinite => children,
        }
    }
}

/// System plus traversal parameter: top-down is `k = 0`, in-order `k >= 1` (only `k = 1`
/// can be executed), bottom-up `k = ∞`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OracleConfig {
    pub system: System,
    pub k: TraversalK,
}

impl OracleConfig {
    pub fn new(system: System) -> Self {
        let k = match system {
            System::BottomUp => TraversalK::Infinite,
            System::TopDown => TraversalK::Finite(0),
            System::InOrder => TraversalK::Finite(1),
        };
        OracleConfig { system, k }
    }

    pub fn with_k(system: System, k: TraversalK) -> Result<Self, TransitionError> {
        let ok = match (system, k) {
            (System::BottomUp, TraversalK::Infinite) => true,
            (System::TopDown, TraversalK::Finite(0)) => true,
            (System::InOrder, TraversalK::Finite(k)) => k >= 1,
            _ => false,
        };
        if ok {
            Ok(OracleConfig { system, k })
        } else {
            Err(TransitionError::BadK {
                system,
                k: match k {
                    TraversalK::Finite(k) => k.to_string(),
                    TraversalK::Infinite => "inf".into(),
                },
            })
        }
    }
}

/// Node identifiers in pre-order (leaves included), emitted in `k`-traversal order.
///
/// `k = 0` gives pre-order, `Infinite` post-order; in between, a node comes after its first
/// `min(k, children)` subtrees.
pub fn traversal_order<L>(tree: &Tree<L>, k: TraversalK) -> Vec<usize> {
    fn visit<L>(tree: &Tree<L>, k: TraversalK, next_id: &mut usize, out: &mut Vec<usize>) {
        let id = *next_id;
        *next_id += 1;
        match tree {
            Tree::Leaf(_) => out.push(id),
            Tree::Node { children, .. } => {
                let before = k.before_parent(children.len());
                for (c, child) in children.iter().enumerate() {
                    if c == before {
                        out.push(id);
                    }
                    visit(child, k, next_id, out);
                }
                if before == children.len() {
                    out.push(id);
                }
            }
        }
    }
    let mut out = Vec::new();
    visit(tree, k, &mut 0, &mut out);
    out
}

/// Top-down oracle: pre-order, `NT_X` before a node's children and `REDUCE` after them.
pub fn oracle_top_down(tree: &Tree) -> Result<Vec<Action>, TransitionError> {
    fn walk(tree: &Tree, out: &mut Vec<Action>) {
        match tree {
            Tree::Leaf(_) => out.push(Action::Shift),
            Tree::Node { label, children } => {
                out.push(Action::Nt(label.clone()));
                children.iter().for_each(|c| walk(c, out));
                out.push(Action::Reduce);
            }
        }
    }
    if tree.is_leaf() {
        return Err(TransitionError::NoConstituent);
    }
    let mut out = Vec::new();
    walk(tree, &mut out);
    Ok(out)
}

/// `k`-in-order oracle: a node is projected (`PJ_X`) after its first `min(k, c)` children and
/// reduced after the rest. Ends with `FINISH`.
pub fn oracle_in_order(tree: &Tree, k: usize) -> Result<Vec<Action>, TransitionError> {
    fn walk(tree: &Tree, k: usize, out: &mut Vec<Action>) {
        match tree {
            Tree::Leaf(_) => out.push(Action::Shift),
            Tree::Node { label, children } => {
                let before = k.min(children.len());
                for child in &children[..before] {
                    walk(child, k, out);
                }
                out.push(Action::Pj(label.clone()));
                for child in &children[before..] {
                    walk(child, k, out);
                }
                out.push(Action::Reduce);
            }
        }
    }
    if k == 0 {
        return Err(TransitionError::BadK {
            system: System::InOrder,
            k: "0".into(),
        });
    }
    if tree.is_leaf() {
        return Err(TransitionError::NoConstituent);
    }
    let mut out = Vec::new();
    walk(tree, k, &mut out);
    out.push(Action::Finish);
    Ok(out)
}

/// Bottom-up oracle over a binarized tree: post-order with `REDUCE_L/R_X` for binary nodes and
/// `UNARY_X` for unary ones, then `FINISH`.
pub fn oracle_bottom_up(tree: &BinarizedTree) -> Result<Vec<Action>, TransitionError> {
    fn walk(tree: &BinarizedTree, out: &mut Vec<Action>) -> Result<(), TransitionError> {
        match tree {
            Tree::Leaf(_) => out.push(Action::Shift),
            Tree::Node { label, children } => {
                for child in children {
                    walk(child, out)?;
                }
                match (children.len(), label.head) {
                    (1, _) => out.push(Action::Unary(label.label.clone())),
                    (2, Some(head)) => out.push(Action::ReduceLR {
                        head,
                        label: label.label.clone(),
                        temporary: label.temporary,
                    }),
                    (arity, _) => {
                        return Err(TransitionError::NotBinarized {
                            label: label.to_string(),
                            arity,
                        })
                    }
                }
            }
        }
        Ok(())
    }
    if tree.is_leaf() {
        return Err(TransitionError::NoConstituent);
    }
    let mut out = Vec::new();
    walk(tree, &mut out)?;
    out.push(Action::Finish);
    Ok(out)
}

/// Gold action sequence for `tree` under `config`; bottom-up binarizes with `rules` first.
pub fn oracle(
    tree: &Tree,
    tokens: &[Token],
    config: &OracleConfig,
    rules: &HeadRules,
) -> Result<Vec<Action>, TransitionError> {
    match (config.system, config.k) {
        (System::BottomUp, _) => {
            if let Some(label) = star_label(tree) {
                return Err(TransitionError::ReservedLabel(label.clone()));
            }
            oracle_bottom_up(&binarize(tree, tokens, rules))
        }
        (System::TopDown, _) => oracle_top_down(tree),
        (System::InOrder, TraversalK::Finite(k)) => oracle_in_order(tree, k),
        (System::InOrder, TraversalK::Infinite) => Err(TransitionError::BadK {
            system: System::InOrder,
            k: "inf".into(),
        }),
    }
}

fn star_label(tree: &Tree) -> Option<&String> {
    match tree {
        Tree::Leaf(_) => None,
        Tree::Node { label, children } if !label.ends_with('*') => {
            children.iter().find_map(star_label)
        }
        Tree::Node { label, .. } => Some(label),
    }
}

/// Runs `actions` from the start state over `sentence_len` words and returns the finished
/// tree; bottom-up results are unbinarized.
pub fn execute(
    actions: &[Action],
    sentence_len: usize,
    system: System,
) -> Result<Tree, TransitionError> {
    // Labels only matter for enumerating actions, not for checking them.
    let ts = TransitionSystem::new(system, std::iter::empty());
    let mut state = ParserState::start(sentence_len);
    for (step, action) in actions.iter().enumerate() {
        ts.apply_in_place(&mut state, action)
            .map_err(|e| TransitionError::AtStep {
                step,
                source: Box::new(e),
            })?;
    }
    let Some(tree) = state.result() else {
        return Err(TransitionError::Incomplete(format!(
            "{} actions leave {} stack items with {} of {} words shifted",
            actions.len(),
            state.stack().len(),
            state.buffer_index(),
            sentence_len
        )));
    };
    if system.binarized() {
        Ok(unbinarize(tree)?)
    } else {
        Ok(tree.map_labels(&mut |l| l.label.clone()))
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

    fn spell(actions: &[Action]) -> Vec<String> {
        actions.iter().map(Action::to_string).collect()
    }

    #[test]
    fn little_boy_in_order() {
        let (tree, _) = little_boy();
        let got = oracle_in_order(&tree, 1).unwrap();
        assert_eq!(
            spell(&got).join(" "),
            "SHIFT PJ_NP SHIFT SHIFT REDUCE PJ_S SHIFT PJ_VP SHIFT PJ_NP SHIFT REDUCE REDUCE SHIFT REDUCE FINISH"
        );
    }

    #[test]
    fn little_boy_top_down() {
        let (tree, _) = little_boy();
        let got = oracle_top_down(&tree).unwrap();
        assert_eq!(
            spell(&got).join(" "),
            "NT_S NT_NP SHIFT SHIFT SHIFT REDUCE NT_VP SHIFT NT_NP SHIFT SHIFT REDUCE REDUCE SHIFT REDUCE"
        );
    }

    #[test]
    fn little_boy_bottom_up() {
        let (tree, tokens) = little_boy();
        let got = oracle(
            &tree,
            &tokens,
            &OracleConfig::new(System::BottomUp),
            &HeadRules::default(),
        )
        .unwrap();
        assert_eq!(
            spell(&got).join(" "),
            "SHIFT SHIFT SHIFT REDUCE_R_NP* REDUCE_R_NP SHIFT SHIFT SHIFT REDUCE_R_NP REDUCE_L_VP \
             SHIFT REDUCE_L_S* REDUCE_R_S FINISH"
        );
    }

    #[test]
    fn little_boy_round_trips() {
        let (tree, tokens) = little_boy();
        for system in System::ALL {
            let actions = oracle(
                &tree,
                &tokens,
                &OracleConfig::new(system),
                &HeadRules::default(),
            )
            .unwrap();
            assert_eq!(execute(&actions, 7, system).unwrap(), tree, "{system}");
        }
    }

    #[test]
    fn traversal_examples() {
        let flat: Tree = Tree::node("S", (0..4).map(Tree::Leaf).collect());
        // ids: S=0, a=1, b=2, c=3, d=4
        assert_eq!(
            traversal_order(&flat, TraversalK::Finite(1)),
            vec![1, 0, 2, 3, 4]
        );
        assert_eq!(
            traversal_order(&flat, TraversalK::Finite(2)),
            vec![1, 2, 0, 3, 4]
        );
        assert_eq!(
            traversal_order(&flat, TraversalK::Finite(0)),
            vec![0, 1, 2, 3, 4]
        );
        assert_eq!(
            traversal_order(&flat, TraversalK::Infinite),
            vec![1, 2, 3, 4, 0]
        );
        assert_eq!(
            traversal_order(&flat, TraversalK::Finite(9)),
            vec![1, 2, 3, 4, 0]
        );

        let (tree, _) = little_boy();
        let circled: Vec<usize> = traversal_order(&tree, TraversalK::Finite(1))
            .into_iter()
            .map(|id| id + 1)
            .collect();
        assert_eq!(circled, vec![3, 2, 4, 5, 1, 7, 6, 9, 8, 10, 11]);
    }

    #[test]
    fn two_in_order_oracle() {
        let flat: Tree = Tree::node("S", (0..4).map(Tree::Leaf).collect());
        assert_eq!(
            spell(&oracle_in_order(&flat, 2).unwrap()).join(" "),
            "SHIFT SHIFT PJ_S SHIFT SHIFT REDUCE FINISH"
        );
    }

    #[test]
    fn execute_errors() {
        match execute(&[], 3, System::InOrder) {
            Err(TransitionError::Incomplete(_)) => {}
            other => panic!("{other:?}"),
        }
        let bad = [Action::Shift, Action::Reduce];
        match execute(&bad, 1, System::InOrder) {
            Err(TransitionError::AtStep { step: 1, .. }) => {}
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn oracle_errors() {
        let leaf: Tree = Tree::Leaf(0);
        assert_eq!(oracle_top_down(&leaf), Err(TransitionError::NoConstituent));
        let ternary = Tree::node(
            crate::treebank::BinLabel::plain("X"),
            vec![Tree::Leaf(0), Tree::Leaf(1), Tree::Leaf(2)],
        );
        assert!(matches!(
            oracle_bottom_up(&ternary),
            Err(TransitionError::NotBinarized { arity: 3, .. })
        ));
        assert!(OracleConfig::with_k(System::TopDown, TraversalK::Finite(1)).is_err());
        assert!(OracleConfig::with_k(System::InOrder, TraversalK::Finite(2)).is_ok());
    }

    #[test]
    fn star_labels_are_reserved_for_bottom_up() {
        let (tree, tokens) = read_trees("(X* (Y y) (Z z))").unwrap().remove(0);
        let rules = HeadRules::default();
        assert!(matches!(
            oracle(&tree, &tokens, &OracleConfig::new(System::BottomUp), &rules),
            Err(TransitionError::ReservedLabel(l)) if l == "X*"
        ));
        assert!(oracle(&tree, &tokens, &OracleConfig::new(System::InOrder), &rules).is_ok());
    }
}
