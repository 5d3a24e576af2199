use crate::nn::{Expr, Graph, StackLstm};
use crate::transition::{Action, ParserState, StackItem, System};
use crate::treebank::{BinarizedTree, HeadSide, Tree};

use super::{Model, ModelError, WordIds};

/// The three summaries fed to the output layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EncodedState {
    pub h_stk: Expr,
    pub h_buf: Expr,
    pub h_ah: Expr,
}

#[derive(Debug, Clone, Copy)]
struct Item {
    vector: Expr,
    /// Nonterminal row of an open item.
    open: Option<usize>,
}

/// Incremental state encoder, kept in step with a [`ParserState`] by feeding it the same
/// actions. The buffer LSTM is filled right to left up front so that a shift is a pop.
pub struct Encoder<'m> {
    model: &'m Model,
    words: Vec<Expr>,
    shifted: usize,
    items: Vec<Item>,
    stack: StackLstm<'m>,
    buffer: StackLstm<'m>,
    history: StackLstm<'m>,
}

impl<'m> Encoder<'m> {
    pub fn new(model: &'m Model, g: &mut Graph, words: &[WordIds]) -> Result<Self, ModelError> {
        let words: Vec<Expr> = words.iter().map(|&w| model.word_rep(g, w)).collect();
        let mut buffer = StackLstm::new(&model.ids.buffer, g);
        for &x in words.iter().rev() {
            buffer.push(g, x)?;
        }
        Ok(Encoder {
            model,
            words,
            shifted: 0,
            items: Vec::new(),
            stack: StackLstm::new(&model.ids.stack, g),
            buffer,
            history: StackLstm::new(&model.ids.history, g),
        })
    }

    pub fn encoded(&self) -> EncodedState {
        EncodedState {
            h_stk: self.stack.summary(),
            h_buf: self.buffer.summary(),
            h_ah: self.history.summary(),
        }
    }

    fn push(&mut self, g: &mut Graph, vector: Expr, open: Option<usize>) -> Result<(), ModelError> {
        self.stack.push(g, vector)?;
        self.items.push(Item { vector, open });
        Ok(())
    }

    fn pop(&mut self) -> Item {
        self.stack.pop();
        self.items
            .pop()
            .expect("encoder stack out of sync with the parser state")
    }

    /// Mirrors the effect of inventory action `action_id`, which must be legal in the parser
    /// state this encoder tracks.
    pub fn apply(&mut self, g: &mut Graph, action_id: usize) -> Result<(), ModelError> {
        let model = self.model;
        let vocab = &model.vocab;
        match &model.transitions.inventory()[action_id] {
            Action::Shift => {
                self.buffer.pop();
                let x = self.words[self.shifted];
                self.shifted += 1;
                self.push(g, x, None)?;
            }
            Action::ReduceLR {
                head,
                label,
                temporary,
            } => {
                let right = self.pop().vector;
                let left = self.pop().vector;
                let nt = vocab.nonterminal_id(label, *temporary)?;
                let c = match head {
                    HeadSide::Left => model.compose_binarized(g, nt, left, right)?,
                    HeadSide::Right => model.compose_binarized(g, nt, right, left)?,
                };
                self.push(g, c, None)?;
            }
            Action::Unary(label) => {
                let child = self.pop().vector;
                let c = model.compose_unary(g, vocab.nonterminal_id(label, false)?, child)?;
                self.push(g, c, None)?;
            }
            Action::Nt(label) | Action::Pj(label) => {
                let nt = vocab.nonterminal_id(label, false)?;
                let e = model.nonterminal(g, nt);
                self.push(g, e, Some(nt))?;
            }
            Action::Reduce => {
                let mut children = Vec::new();
                let nt = loop {
                    let item = self.pop();
                    match item.open {
                        Some(nt) => break nt,
                        None => children.push(item.vector),
                    }
                };
                if model.system == System::InOrder {
                    children.push(self.pop().vector);
                }
                children.reverse();
                let c = model.compose(g, nt, &children)?;
                self.push(g, c, None)?;
            }
            Action::Finish => {}
        }
        let e = model.action_embedding(g, action_id);
        self.history.push(g, e)?;
        Ok(())
    }
}

/// Encodes `state` from scratch: every stack item, the unshifted words and the action
/// history are re-read by fresh LSTM runs. Agrees bit for bit with [`Encoder`].
pub fn encode_state(
    model: &Model,
    g: &mut Graph,
    words: &[WordIds],
    state: &ParserState,
    history: &[usize],
) -> Result<EncodedState, ModelError> {
    let mut stack = StackLstm::new(&model.ids.stack, g);
    for item in state.stack() {
        let v = match item {
            StackItem::Terminal(i) => model.word_rep(g, words[*i]),
            StackItem::Open(label) => {
                let nt = model.vocab.nonterminal_id(label, false)?;
                model.nonterminal(g, nt)
            }
            StackItem::Completed(tree) => compose_tree(model, g, words, tree)?,
        };
        stack.push(g, v)?;
    }
    let mut buffer = StackLstm::new(&model.ids.buffer, g);
    for &w in words[state.buffer_index()..].iter().rev() {
        let x = model.word_rep(g, w);
        buffer.push(g, x)?;
    }
    let mut hist = StackLstm::new(&model.ids.history, g);
    for &a in history {
        let e = model.action_embedding(g, a);
        hist.push(g, e)?;
    }
    Ok(EncodedState {
        h_stk: stack.summary(),
        h_buf: buffer.summary(),
        h_ah: hist.summary(),
    })
}

fn compose_tree(
    model: &Model,
    g: &mut Graph,
    words: &[WordIds],
    tree: &BinarizedTree,
) -> Result<Expr, ModelError> {
    let Tree::Node { label, children } = tree else {
        let Tree::Leaf(i) = tree else { unreachable!() };
        return Ok(model.word_rep(g, words[*i]));
    };
    let kids = children
        .iter()
        .map(|c| compose_tree(model, g, words, c))
        .collect::<Result<Vec<_>, _>>()?;
    let vocab = &model.vocab;
    if !model.system.binarized() {
        return model.compose(g, vocab.nonterminal_id(&label.label, false)?, &kids);
    }
    match (kids.as_slice(), label.head) {
        ([child], _) => model.compose_unary(g, vocab.nonterminal_id(&label.label, false)?, *child),
        ([left, right], Some(head)) => {
            let nt = vocab.nonterminal_id(&label.label, label.temporary)?;
            match head {
                HeadSide::Left => model.compose_binarized(g, nt, *left, *right),
                HeadSide::Right => model.compose_binarized(g, nt, *right, *left),
            }
        }
        _ => Err(ModelError::Format(format!(
            "bottom-up constituent {} with {} children",
            label,
            kids.len()
        ))),
    }
}
