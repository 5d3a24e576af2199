//! Parser configurations, the three action inventories, legality and state transitions.
//!
//! A configuration is a stack, a buffer cursor and a finished flag. The three systems
//! differ in how constituents get built:
//!
//! * bottom-up: words are shifted, then binary `REDUCE_L/R_X` and `UNARY_X` build a
//!   binarized tree; `FINISH` ends the parse;
//! * top-down: `NT_X` opens a nonterminal before its words, `REDUCE` closes it;
//! * in-order: `PJ_X` projects a nonterminal above a finished leftmost child, `REDUCE` closes
//!   it and takes that child with it; `FINISH` ends the parse.

mod oracle;
mod oracle_file;

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::treebank::{BinLabel, BinarizedTree, HeadSide, Tree, TreebankError};

pub use oracle::{
    execute, oracle, oracle_bottom_up, oracle_in_order, oracle_top_down, traversal_order,
    OracleConfig, TraversalK,
};
pub use oracle_file::{read_oracle_file, write_oracle_file, OracleEntry};

/// Maximum number of simultaneously open nonterminals.
pub const MAX_OPEN_NONTERMINALS: usize = 100;
/// Maximum length of a chain of unary constituents built over one item.
pub const UNARY_LIMIT: usize = 3;

/// Most actions a derivation over `n` words may take. Legality keeps every derivation within
/// it: an action is refused when the shortest completion afterwards would overrun.
pub fn action_budget(n: usize) -> usize {
    10 * n + 50
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TransitionError {
    #[error("{action} is illegal: {reason}")]
    Illegal {
        action: String,
        reason: &'static str,
    },
    #[error("step {step}: {source}")]
    AtStep {
        step: usize,
        #[source]
        source: Box<TransitionError>,
    },
    #[error("{action} does not belong to the {system} system")]
    WrongSystem { action: String, system: System },
    #[error("incomplete derivation: {0}")]
    Incomplete(String),
    #[error("bottom-up oracle needs a binarized tree, but a {label} node has {arity} children")]
    NotBinarized { label: String, arity: usize },
    #[error("label {0:?} ends with '*', which marks temporary bottom-up nodes")]
    ReservedLabel(String),
    #[error("tree has no constituent above its single word")]
    NoConstituent,
    #[error("k = {k} is not valid for the {system} system")]
    BadK { system: System, k: String },
    #[error("cannot parse action {0:?}")]
    BadAction(String),
    #[error("oracle file, line {line}: {message}")]
    OracleFile { line: usize, message: String },
    #[error(transparent)]
    Treebank(#[from] TreebankError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum System {
    BottomUp,
    TopDown,
    InOrder,
}

impl System {
    pub const ALL: [System; 3] = [System::BottomUp, System::TopDown, System::InOrder];

    pub fn name(self) -> &'static str {
        match self {
            System::BottomUp => "bottom-up",
            System::TopDown => "top-down",
            System::InOrder => "in-order",
        }
    }

    /// Whether `action` belongs to this system's inventory.
    pub fn permits(self, action: &Action) -> bool {
        use Action::*;
        matches!(
            (self, action),
            (_, Shift)
                | (System::BottomUp, ReduceLR { .. } | Unary(_) | Finish)
                | (System::TopDown, Nt(_) | Reduce)
                | (System::InOrder, Pj(_) | Reduce | Finish)
        )
    }

    /// Bottom-up derivations operate on binarized trees.
    pub fn binarized(self) -> bool {
        self == System::BottomUp
    }
}

impl fmt::Display for System {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for System {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "bottom-up" | "bottomup" | "bu" => Ok(System::BottomUp),
            "top-down" | "topdown" | "td" => Ok(System::TopDown),
            "in-order" | "inorder" | "io" => Ok(System::InOrder),
            other => Err(format!(
                "unknown transition system {other:?} (expected bottom-up, top-down or in-order)"
            )),
        }
    }
}

/// A transition. Which variants are valid depends on the [`System`].
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Action {
    Shift,
    /// Bottom-up binary reduce. `temporary` marks an intermediate (`*`) node.
    ReduceLR {
        head: HeadSide,
        label: String,
        temporary: bool,
    },
    Unary(String),
    Nt(String),
    Pj(String),
    Reduce,
    Finish,
}

impl Action {
    pub fn label(&self) -> Option<&str> {
        match self {
            Action::ReduceLR { label, .. }
            | Action::Unary(label)
            | Action::Nt(label)
            | Action::Pj(label) => Some(label),
            _ => None,
        }
    }
}

impl fmt::Display for Action {
    /// Canonical spelling used in oracle files: `SHIFT`, `REDUCE_L_NP`, `REDUCE_R_NP*`,
    /// `UNARY_S`, `NT_S`, `PJ_NP`, `REDUCE`, `FINISH`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Action::Shift => f.write_str("SHIFT"),
            Action::ReduceLR {
                head,
                label,
                temporary,
            } => {
                let side = match head {
                    HeadSide::Left => 'L',
                    HeadSide::Right => 'R',
                };
                write!(
                    f,
                    "REDUCE_{side}_{label}{}",
                    if *temporary { "*" } else { "" }
                )
            }
            Action::Unary(l) => write!(f, "UNARY_{l}"),
            Action::Nt(l) => write!(f, "NT_{l}"),
            Action::Pj(l) => write!(f, "PJ_{l}"),
            Action::Reduce => f.write_str("REDUCE"),
            Action::Finish => f.write_str("FINISH"),
        }
    }
}

impl FromStr for Action {
    type Err = TransitionError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || TransitionError::BadAction(s.to_string());
        let nonempty = |l: &str| {
            if l.is_empty() {
                Err(bad())
            } else {
                Ok(l.to_string())
            }
        };
        Ok(match s {
            "SHIFT" => Action::Shift,
            "REDUCE" => Action::Reduce,
            "FINISH" => Action::Finish,
            _ => {
                if let Some(rest) = s.strip_prefix("REDUCE_") {
                    let (head, rest) = match rest.split_at_checked(2) {
                        Some(("L_", rest)) => (HeadSide::Left, rest),
                        Some(("R_", rest)) => (HeadSide::Right, rest),
                        _ => return Err(bad()),
                    };
                    let (label, temporary) = match rest.strip_suffix('*') {
                        Some(label) => (label, true),
                        None => (rest, false),
                    };
                    Action::ReduceLR {
                        head,
                        label: nonempty(label)?,
                        temporary,
                    }
                } else if let Some(l) = s.strip_prefix("UNARY_") {
                    Action::Unary(nonempty(l)?)
                } else if let Some(l) = s.strip_prefix("NT_") {
                    Action::Nt(nonempty(l)?)
                } else if let Some(l) = s.strip_prefix("PJ_") {
                    Action::Pj(nonempty(l)?)
                } else {
                    return Err(bad());
                }
            }
        })
    }
}

/// One stack element.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StackItem {
    /// A shifted word, by token index.
    Terminal(usize),
    /// An open (top-down) or projected (in-order) nonterminal.
    Open(String),
    /// A finished constituent. Bottom-up subtrees carry head marks and `*` flags; the other
    /// systems use plain labels.
    Completed(BinarizedTree),
}

impl StackItem {
    fn as_subtree(&self) -> BinarizedTree {
        match self {
            StackItem::Terminal(i) => Tree::Leaf(*i),
            StackItem::Completed(t) => t.clone(),
            StackItem::Open(_) => unreachable!("open nonterminals never become children"),
        }
    }

    fn is_open(&self) -> bool {
        matches!(self, StackItem::Open(_))
    }

    fn unary_chain_len(&self) -> usize {
        match self {
            StackItem::Completed(t) => t.unary_chain_len(),
            _ => 0,
        }
    }

    fn is_temporary(&self) -> bool {
        matches!(self, StackItem::Completed(Tree::Node { label, .. }) if label.temporary)
    }
}

/// The configuration `[stack, i, finished]` over a sentence of `sentence_len` words.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParserState {
    stack: Vec<StackItem>,
    buffer_index: usize,
    finished: bool,
    sentence_len: usize,
    open_count: usize,
    steps: usize,
}

impl ParserState {
    /// The start state `[∅, 0, false]`.
    pub fn start(sentence_len: usize) -> Self {
        ParserState {
            stack: Vec::new(),
            buffer_index: 0,
            finished: false,
            sentence_len,
            open_count: 0,
            steps: 0,
        }
    }

    pub fn stack(&self) -> &[StackItem] {
        &self.stack
    }

    pub fn buffer_index(&self) -> usize {
        self.buffer_index
    }

    pub fn sentence_len(&self) -> usize {
        self.sentence_len
    }

    pub fn is_finished(&self) -> bool {
        self.finished
    }

    pub fn open_count(&self) -> usize {
        self.open_count
    }

    /// Number of actions applied so far.
    pub fn steps(&self) -> usize {
        self.steps
    }

    fn buffer_empty(&self) -> bool {
        self.buffer_index == self.sentence_len
    }

    fn top(&self) -> Option<&StackItem> {
        self.stack.last()
    }

    /// Position of the topmost open nonterminal.
    fn topmost_open(&self) -> Option<usize> {
        self.stack.iter().rposition(StackItem::is_open)
    }

    /// The finished tree of a final state.
    pub fn result(&self) -> Option<&BinarizedTree> {
        match (self.finished, self.stack.as_slice()) {
            (true, [StackItem::Completed(t)]) => Some(t),
            _ => None,
        }
    }
}

/// Summary of a state used to bound the cost of finishing it.
#[derive(Debug, Clone, Copy)]
struct Shape {
    remaining: usize,
    items: usize,
    open: usize,
    top_completed: bool,
}

/// A transition system together with its nonterminal inventory.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransitionSystem {
    system: System,
    labels: Vec<String>,
    inventory: Vec<Action>,
}

impl TransitionSystem {
    /// `labels` are plain nonterminal labels; duplicates are removed and the order fixed.
    pub fn new(system: System, labels: impl IntoIterator<Item = String>) -> Self {
        let mut labels: Vec<String> = labels.into_iter().collect();
        labels.sort();
        labels.dedup();
        let mut inventory = vec![Action::Shift];
        match system {
            System::BottomUp => {
                inventory.push(Action::Finish);
                for label in &labels {
                    for temporary in [false, true] {
                        for head in [HeadSide::Left, HeadSide::Right] {
                            inventory.push(Action::ReduceLR {
                                head,
                                label: label.clone(),
                                temporary,
                            });
                        }
                    }
                    inventory.push(Action::Unary(label.clone()));
                }
            }
            System::TopDown => {
                inventory.push(Action::Reduce);
                inventory.extend(labels.iter().cloned().map(Action::Nt));
            }
            System::InOrder => {
                inventory.push(Action::Reduce);
                inventory.push(Action::Finish);
                inventory.extend(labels.iter().cloned().map(Action::Pj));
            }
        }
        TransitionSystem {
            system,
            labels,
            inventory,
        }
    }

    pub fn system(&self) -> System {
        self.system
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    /// Every action of the system in canonical order; an action's position is its id.
    pub fn inventory(&self) -> &[Action] {
        &self.inventory
    }

    /// Legal actions in inventory order. Empty exactly for final states.
    pub fn legal_actions(&self, state: &ParserState) -> Vec<Action> {
        self.inventory
            .iter()
            .filter(|a| self.check(state, a).is_ok())
            .cloned()
            .collect()
    }

    /// Ids (inventory positions) of the legal actions.
    pub fn legal_ids(&self, state: &ParserState) -> Vec<usize> {
        (0..self.inventory.len())
            .filter(|&i| self.check(state, &self.inventory[i]).is_ok())
            .collect()
    }

    pub fn is_legal(&self, state: &ParserState, action: &Action) -> bool {
        self.check(state, action).is_ok()
    }

    /// Checks the premises of `action` in `state`, naming the first one violated.
    pub fn check(&self, state: &ParserState, action: &Action) -> Result<(), TransitionError> {
        if !self.system.permits(action) {
            return Err(TransitionError::WrongSystem {
                action: action.to_string(),
                system: self.system,
            });
        }
        let fail = |reason| {
            Err(TransitionError::Illegal {
                action: action.to_string(),
                reason,
            })
        };
        if state.finished {
            return fail("the parse is already finished");
        }
        let len = state.stack.len();
        let top = state.top();
        match (self.system, action) {
            (_, Action::Shift) => {
                if state.buffer_empty() {
                    return fail("the buffer is empty");
                }
                if self.system != System::BottomUp && len > 0 && state.open_count == 0 {
                    return fail("no open nonterminal to attach the word to");
                }
                if self.system == System::TopDown && len == 0 {
                    return fail("the first action must open a nonterminal");
                }
            }
            (System::BottomUp, Action::ReduceLR { temporary, .. }) => {
                if len < 2 {
                    return fail("needs two items on the stack");
                }
                if *temporary && len == 2 && state.buffer_empty() {
                    return fail("a temporary node cannot become the root");
                }
            }
            (System::BottomUp, Action::Unary(_)) => match top {
                None => return fail("needs an item on the stack"),
                Some(item) if item.is_temporary() => {
                    return fail("temporary nodes cannot take a unary parent")
                }
                Some(item) if item.unary_chain_len() >= UNARY_LIMIT => {
                    return fail("unary chain limit reached")
                }
                _ => {}
            },
            (System::BottomUp | System::InOrder, Action::Finish) => match state.stack.as_slice() {
                [StackItem::Completed(t)] if state.buffer_empty() => {
                    if t.label().is_some_and(|l| l.temporary) {
                        return fail("a temporary node cannot be the root");
                    }
                }
                _ => return fail("needs exactly one completed constituent and an empty buffer"),
            },
            (System::TopDown, Action::Nt(_)) => {
                if state.buffer_empty() {
                    return fail("the buffer is empty");
                }
                if state.open_count >= MAX_OPEN_NONTERMINALS {
                    return fail("too many open nonterminals");
                }
                if len > 0 && state.open_count == 0 {
                    return fail("the tree already has a root");
                }
            }
            (System::TopDown, Action::Reduce) => {
                if state.open_count == 0 {
                    return fail("no open nonterminal");
                }
                if top.is_none_or(StackItem::is_open) {
                    return fail("the open nonterminal has no children");
                }
                if state.open_count == 1 && !state.buffer_empty() {
                    return fail("closing the root would strand the remaining words");
                }
            }
            (System::InOrder, Action::Pj(_)) => match top {
                None => return fail("needs a completed item to project from"),
                Some(item) if item.is_open() => {
                    return fail("cannot project from an open nonterminal")
                }
                Some(item) => {
                    if state.open_count >= MAX_OPEN_NONTERMINALS {
                        return fail("too many open nonterminals");
                    }
                    if state.buffer_empty() && item.unary_chain_len() >= UNARY_LIMIT {
                        return fail("unary chain limit reached");
                    }
                }
            },
            (System::InOrder, Action::Reduce) => {
                let Some(open) = state.topmost_open() else {
                    return fail("no projected nonterminal");
                };
                if open == 0 {
                    return fail("no leftmost child below the projected nonterminal");
                }
                if open == len - 1 && state.stack[open - 1].unary_chain_len() >= UNARY_LIMIT {
                    return fail("unary chain limit reached");
                }
            }
            _ => unreachable!("filtered by System::permits"),
        }
        if *action != Action::Finish {
            let cost = self.completion_cost(self.shape_after(state, action));
            if state.steps + 1 + cost > action_budget(state.sentence_len) {
                return fail("the derivation could not finish within the action budget");
            }
        }
        Ok(())
    }

    fn shape_after(&self, state: &ParserState, action: &Action) -> Shape {
        let len = state.stack.len();
        let mut shape = Shape {
            remaining: state.sentence_len - state.buffer_index,
            items: len,
            open: state.open_count,
            top_completed: true,
        };
        match action {
            Action::Shift => {
                shape.remaining -= 1;
                shape.items += 1;
                shape.top_completed = false;
            }
            Action::ReduceLR { .. } => shape.items -= 1,
            Action::Unary(_) | Action::Finish => {}
            Action::Nt(_) | Action::Pj(_) => {
                shape.items += 1;
                shape.open += 1;
                shape.top_completed = false;
            }
            Action::Reduce => {
                let open = state.topmost_open().expect("checked");
                shape.items = if self.system == System::InOrder {
                    open
                } else {
                    open + 1
                };
                shape.open -= 1;
            }
        }
        shape
    }

    /// Length of a completion that is always legal: shift the remaining words, then close
    /// or combine what is on the stack.
    fn completion_cost(&self, s: Shape) -> usize {
        match self.system {
            System::TopDown => s.remaining + s.open + if s.items == 0 { 2 } else { 0 },
            System::BottomUp => {
                let total = s.items + s.remaining;
                let unary = usize::from(total == 1 && !(s.items == 1 && s.top_completed));
                s.remaining + total.saturating_sub(1) + unary + 1
            }
            System::InOrder => {
                let done = s.open == 0 && s.items == 1 && s.top_completed && s.remaining == 0;
                s.remaining + s.open + 2 * usize::from(s.open == 0 && !done) + 1
            }
        }
    }

    /// The successor state. Pure: `state` is not modified.
    pub fn apply(
        &self,
        state: &ParserState,
        action: &Action,
    ) -> Result<ParserState, TransitionError> {
        let mut next = state.clone();
        self.apply_in_place(&mut next, action)?;
        Ok(next)
    }

    pub fn apply_in_place(
        &self,
        state: &mut ParserState,
        action: &Action,
    ) -> Result<(), TransitionError> {
        self.check(state, action)?;
        state.steps += 1;
        match action {
            Action::Shift => {
                state.stack.push(StackItem::Terminal(state.buffer_index));
                state.buffer_index += 1;
            }
            Action::ReduceLR {
                head,
                label,
                temporary,
            } => {
                let right = state.stack.pop().expect("checked").as_subtree();
                let left = state.stack.pop().expect("checked").as_subtree();
                state.stack.push(StackItem::Completed(Tree::node(
                    BinLabel {
                        label: label.clone(),
                        head: Some(*head),
                        temporary: *temporary,
                    },
                    vec![left, right],
                )));
            }
            Action::Unary(label) => {
                let child = state.stack.pop().expect("checked").as_subtree();
                state.stack.push(StackItem::Completed(Tree::node(
                    BinLabel::plain(label.clone()),
                    vec![child],
                )));
            }
            Action::Nt(label) | Action::Pj(label) => {
                state.stack.push(StackItem::Open(label.clone()));
                state.open_count += 1;
            }
            Action::Reduce => {
                let open = state.topmost_open().expect("checked");
                let mut children: Vec<BinarizedTree> = state
                    .stack
                    .drain(open + 1..)
                    .map(|i| i.as_subtree())
                    .collect();
                let Some(StackItem::Open(label)) = state.stack.pop() else {
                    unreachable!("topmost_open points at an open item")
                };
                state.open_count -= 1;
                if self.system == System::InOrder {
                    let leftmost = state.stack.pop().expect("checked").as_subtree();
                    children.insert(0, leftmost);
                }
                state.stack.push(StackItem::Completed(Tree::node(
                    BinLabel::plain(label),
                    children,
                )));
                if self.system == System::TopDown && state.stack.len() == 1 && state.buffer_empty()
                {
                    state.finished = true;
                }
            }
            Action::Finish => state.finished = true,
        }
        Ok(())
    }
}
