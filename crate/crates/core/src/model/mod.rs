//! The stack-LSTM parsing model shared by all three transition systems.
//!
//! Words are embedded as `ReLU(W_input [e_pos; e_pretrained; e_word] + b_input)`. The parser
//! state is summarized by three LSTMs (stack, buffer, action history) whose final hidden states
//! are concatenated and fed to a softmax over the legal actions. Reduced constituents are
//! encoded by a bidirectional LSTM over the nonterminal embedding and the children.

mod encoder;
mod hyper;
mod io;
mod train;
mod vocab;

use std::collections::HashMap;

use rand::Rng;

use crate::nn::{Expr, Graph, LstmParams, NnError, ParamId, ParamStore, Tensor};
use crate::transition::{Action, System, TransitionError, TransitionSystem};
use crate::treebank::TreebankError;

pub use encoder::{encode_state, EncodedState, Encoder};
pub use hyper::Hyperparams;
pub use io::{load_model, save_model, FORMAT_VERSION, MAGIC};
pub use train::{
    evaluate, sentence_loss, train, EpochLog, SentenceLoss, TrainOptions, TrainOutcome,
};
pub use vocab::{Index, Pretrained, Vocabulary, WordIds, UNK};

#[derive(Debug, thiserror::Error)]
pub enum ModelError {
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Transition(#[from] TransitionError),
    #[error(transparent)]
    Treebank(#[from] TreebankError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("config line {line}: {message}")]
    Config { line: usize, message: String },
    #[error("embeddings line {line}: {message}")]
    Embeddings { line: usize, message: String },
    #[error("model file: {0}")]
    Format(String),
    #[error("unknown nonterminal {0:?}")]
    UnknownLabel(String),
    #[error("training corpus is empty")]
    EmptyCorpus,
    #[error("gold action {action} is illegal at step {step}: {reason}")]
    GoldIllegal {
        step: usize,
        action: String,
        reason: String,
    },
    #[error("composition needs at least one child")]
    NoChildren,
}

#[derive(Debug, Clone)]
struct Ids {
    e_w: ParamId,
    e_pre: ParamId,
    e_p: ParamId,
    e_act: ParamId,
    e_nt: ParamId,
    w_input: ParamId,
    b_input: ParamId,
    w_comp: ParamId,
    b_comp: ParamId,
    w_out: ParamId,
    b_out: ParamId,
    stack: LstmParams,
    buffer: LstmParams,
    history: LstmParams,
    comp_fwd: LstmParams,
    comp_bwd: LstmParams,
}

/// A parser for one transition system: settings, vocabulary, action inventory and all
/// learned tensors.
#[derive(Debug, Clone)]
pub struct Model {
    system: System,
    hyper: Hyperparams,
    vocab: Vocabulary,
    transitions: TransitionSystem,
    action_ids: HashMap<Action, usize>,
    store: ParamStore,
    ids: Ids,
}

fn zeros(n: usize) -> Tensor {
    Tensor::zeros(&[n])
}

impl Model {
    /// A freshly initialized model. `pretrained` must list exactly the words of
    /// `vocab.pretrained`, with `hyper.pretrained_dim` values each.
    pub fn new<R: Rng>(
        system: System,
        hyper: Hyperparams,
        vocab: Vocabulary,
        pretrained: Option<&Pretrained>,
        rng: &mut R,
    ) -> Result<Self, ModelError> {
        hyper
            .validate()
            .map_err(|message| ModelError::Config { line: 0, message })?;
        let pre_dim = hyper.pretrained_dim;
        let mut pre_table = Tensor::zeros(&[vocab.pretrained.len() + 1, pre_dim]);
        match pretrained {
            Some(p) => {
                if p.dim != pre_dim {
                    return Err(ModelError::Format(format!(
                        "pretrained embeddings have dimension {}, settings say {pre_dim}",
                        p.dim
                    )));
                }
                if p.words != vocab.pretrained.items() {
                    return Err(ModelError::Format(
                        "pretrained words do not match the vocabulary".into(),
                    ));
                }
                pre_table.data_mut()[pre_dim..].copy_from_slice(&p.vectors);
            }
            None if !vocab.pretrained.is_empty() => {
                return Err(ModelError::Format(
                    "vocabulary lists pretrained words but none were given".into(),
                ));
            }
            None => {}
        }

        let transitions = TransitionSystem::new(system, vocab.labels.iter().cloned());
        let h = &hyper;
        let (input, hidden, layers) = (h.lstm_input_dim, h.lstm_hidden_dim, h.lstm_layers);
        let mut s = ParamStore::new();
        let e_w = s.add(
            "e_w",
            Tensor::glorot(vocab.words.len(), h.word_dim, rng),
            true,
        );
        let e_pre = s.add("e_pre", pre_table, false);
        let e_p = s.add("e_p", Tensor::glorot(vocab.pos.len(), h.pos_dim, rng), true);
        let e_act = s.add(
            "e_act",
            Tensor::glorot(transitions.inventory().len(), h.action_dim, rng),
            true,
        );
        let e_nt = s.add(
            "e_nt",
            Tensor::glorot(vocab.nonterminals.len(), input, rng),
            true,
        );
        let word_in = h.pos_dim + pre_dim + h.word_dim;
        let w_input = s.add("w_input", Tensor::glorot(input, word_in, rng), true);
        let b_input = s.add("b_input", zeros(input), true);
        let stack = LstmParams::new(&mut s, "stack", layers, input, hidden, rng);
        let buffer = LstmParams::new(&mut s, "buffer", layers, input, hidden, rng);
        let history = LstmParams::new(&mut s, "history", layers, h.action_dim, hidden, rng);
        let comp = if system.binarized() { "bcomp" } else { "comp" };
        let comp_fwd = LstmParams::new(&mut s, &format!("{comp}_fwd"), layers, input, hidden, rng);
        let comp_bwd = LstmParams::new(&mut s, &format!("{comp}_bwd"), layers, input, hidden, rng);
        let w_comp = s.add(
            format!("w_{comp}"),
            Tensor::glorot(input, 2 * hidden, rng),
            true,
        );
        let b_comp = s.add(format!("b_{comp}"), zeros(input), true);
        let n_actions = transitions.inventory().len();
        let w_out = s.add("w_out", Tensor::glorot(n_actions, 3 * hidden, rng), true);
        let b_out = s.add("b_out", zeros(n_actions), true);

        let action_ids = transitions
            .inventory()
            .iter()
            .enumerate()
            .map(|(i, a)| (a.clone(), i))
            .collect();
        Ok(Model {
            system,
            hyper,
            vocab,
            transitions,
            action_ids,
            store: s,
            ids: Ids {
                e_w,
                e_pre,
                e_p,
                e_act,
                e_nt,
                w_input,
                b_input,
                w_comp,
                b_comp,
                w_out,
                b_out,
                stack,
                buffer,
                history,
                comp_fwd,
                comp_bwd,
            },
        })
    }

    pub fn system(&self) -> System {
        self.system
    }

    pub fn hyper(&self) -> &Hyperparams {
        &self.hyper
    }

    pub fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    pub fn transitions(&self) -> &TransitionSystem {
        &self.transitions
    }

    /// Inventory position of `action`, if the model knows its label.
    pub fn action_id(&self, action: &Action) -> Option<usize> {
        self.action_ids.get(action).copied()
    }

    pub fn store(&self) -> &ParamStore {
        &self.store
    }

    pub fn store_mut(&mut self) -> &mut ParamStore {
        &mut self.store
    }

    /// The frozen pretrained embedding table.
    pub fn pretrained_table(&self) -> &Tensor {
        self.store.value(self.ids.e_pre)
    }

    /// `ReLU(W_input [e_pos; e_pretrained; e_word] + b_input)`.
    pub fn word_rep(&self, g: &mut Graph, ids: WordIds) -> Expr {
        let p = g.lookup(self.ids.e_p, ids.pos);
        let pre = g.lookup(self.ids.e_pre, ids.pretrained);
        let w = g.lookup(self.ids.e_w, ids.word);
        let x = g.concat(&[p, pre, w]);
        let wi = g.param(self.ids.w_input);
        let bi = g.param(self.ids.b_input);
        let a = g.affine(wi, x, bi);
        g.relu(a)
    }

    pub fn nonterminal(&self, g: &mut Graph, nt_id: usize) -> Expr {
        g.lookup(self.ids.e_nt, nt_id)
    }

    pub fn action_embedding(&self, g: &mut Graph, action_id: usize) -> Expr {
        g.lookup(self.ids.e_act, action_id)
    }

    fn bi_compose(
        &self,
        g: &mut Graph,
        nt: Expr,
        forward: &[Expr],
        backward: &[Expr],
    ) -> Result<Expr, ModelError> {
        let mut fwd = Vec::with_capacity(forward.len() + 1);
        fwd.push(nt);
        fwd.extend_from_slice(forward);
        let mut bwd = Vec::with_capacity(backward.len() + 1);
        bwd.push(nt);
        bwd.extend_from_slice(backward);
        let f = self.ids.comp_fwd.run(g, &fwd)?;
        let b = self.ids.comp_bwd.run(g, &bwd)?;
        let both = g.concat(&[f, b]);
        let w = g.param(self.ids.w_comp);
        let bias = g.param(self.ids.b_comp);
        let a = g.affine(w, both, bias);
        Ok(g.relu(a))
    }

    /// Composition of an unbinarized constituent: a forward LSTM reads the label embedding
    /// then the children left to right, a backward LSTM reads the label then the children
    /// right to left.
    pub fn compose(
        &self,
        g: &mut Graph,
        nt_id: usize,
        children: &[Expr],
    ) -> Result<Expr, ModelError> {
        if children.is_empty() {
            return Err(ModelError::NoChildren);
        }
        let nt = self.nonterminal(g, nt_id);
        let reversed: Vec<Expr> = children.iter().rev().copied().collect();
        self.bi_compose(g, nt, children, &reversed)
    }

    /// Composition of a binary node: the head child is read before the non-head child in
    /// the forward direction.
    pub fn compose_binarized(
        &self,
        g: &mut Graph,
        nt_id: usize,
        head: Expr,
        nonhead: Expr,
    ) -> Result<Expr, ModelError> {
        let nt = self.nonterminal(g, nt_id);
        self.bi_compose(g, nt, &[head, nonhead], &[nonhead, head])
    }

    /// Composition of a bottom-up unary node.
    pub fn compose_unary(
        &self,
        g: &mut Graph,
        nt_id: usize,
        child: Expr,
    ) -> Result<Expr, ModelError> {
        let nt = self.nonterminal(g, nt_id);
        self.bi_compose(g, nt, &[child], &[child])
    }

    /// Log-probabilities of the `legal` action ids (in that order) under
    /// `softmax(W_out [h_stk; h_buf; h_ah] + b_out)` restricted to the legal set.
    pub fn action_log_probs(&self, g: &mut Graph, encoded: &EncodedState, legal: &[usize]) -> Expr {
        let h = g.concat(&[encoded.h_stk, encoded.h_buf, encoded.h_ah]);
        let w = g.param(self.ids.w_out);
        let b = g.param(self.ids.b_out);
        let logits = g.affine(w, h, b);
        let sel = g.gather(logits, legal);
        g.log_softmax(sel)
    }

    /// Probability of every action in the inventory; illegal actions get exactly 0.
    pub fn action_distribution(
        &self,
        g: &mut Graph,
        encoded: &EncodedState,
        legal: &[usize],
    ) -> Vec<f64> {
        let mut p = vec![0.0; self.transitions.inventory().len()];
        match legal {
            [] => {}
            [only] => p[*only] = 1.0,
            _ => {
                let lp = self.action_log_probs(g, encoded, legal);
                for (&id, v) in legal.iter().zip(g.value(lp)) {
                    p[id] = v.exp();
                }
            }
        }
        p
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::treebank::{read_trees, Token};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    pub(crate) fn tiny_hyper() -> Hyperparams {
        Hyperparams {
            word_dim: 3,
            pretrained_dim: 2,
            pos_dim: 2,
            action_dim: 2,
            lstm_input_dim: 4,
            lstm_hidden_dim: 3,
            ..Hyperparams::default()
        }
    }

    fn model(system: System, hyper: Hyperparams) -> Model {
        let corpus = read_trees("(S (NP (DT the) (NN dog)) (VP (VBZ barks)))").unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        if hyper.pretrained_dim == 2 {
            let pre = Pretrained::parse("dog 0.5 -0.5\n", 2).unwrap();
            let vocab = Vocabulary::build(&corpus, system, pre.words.clone()).unwrap();
            Model::new(system, hyper, vocab, Some(&pre), &mut rng).unwrap()
        } else {
            let vocab = Vocabulary::build(&corpus, system, vec![]).unwrap();
            Model::new(system, hyper, vocab, None, &mut rng).unwrap()
        }
    }

    #[test]
    fn default_dimensions() {
        let m = model(System::InOrder, Hyperparams::default());
        let s = m.store();
        let dims = |n: &str| s.value(s.id(n).unwrap()).shape().to_vec();
        assert_eq!(dims("w_input"), vec![128, 12 + 100 + 32]);
        assert_eq!(dims("e_nt")[1], 128);
        assert_eq!(dims("e_act")[1], 16);
        assert_eq!(dims("history.l0.wx"), vec![512, 16]);
        assert_eq!(dims("stack.l1.wx"), vec![512, 128]);
        assert_eq!(dims("w_comp"), vec![128, 256]);
        assert_eq!(dims("w_out"), vec![m.transitions().inventory().len(), 384]);
        assert!(s.id("bcomp_fwd.l0.wx").is_none());
        let mut g = Graph::new(s);
        let ids = m.vocab().word_ids(&Token::new("dog", "NN").unwrap());
        let x = m.word_rep(&mut g, ids);
        assert_eq!(g.dim(x), 128);
    }

    #[test]
    fn zero_parameters_give_zero_representations() {
        let mut m = model(System::BottomUp, tiny_hyper());
        let ids: Vec<_> = m.store().iter().map(|(id, _)| id).collect();
        for id in ids {
            m.store_mut().value_mut(id).data_mut().fill(0.0);
        }
        let mut g = Graph::new(m.store());
        let w = m.word_rep(
            &mut g,
            WordIds {
                word: 1,
                pos: 1,
                pretrained: 1,
            },
        );
        assert!(g.value(w).iter().all(|&v| v == 0.0));
        let a = g.input(vec![0.3; 4]);
        let b = g.input(vec![-0.2; 4]);
        let c = m.compose_binarized(&mut g, 0, a, b).unwrap();
        assert!(g.value(c).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn unknown_substitution_matches_unseen_word() {
        let m = model(System::TopDown, tiny_hyper());
        let v = m.vocab();
        let mut barks = v.word_ids(&Token::new("barks", "VBZ").unwrap());
        barks.word = 0;
        let unseen = v.word_ids(&Token::new("meows", "VBZ").unwrap());
        let mut g = Graph::new(m.store());
        let a = m.word_rep(&mut g, barks);
        let b = m.word_rep(&mut g, unseen);
        assert_eq!(g.value(a), g.value(b));
    }

    #[test]
    fn composition_is_order_sensitive() {
        let m = model(System::InOrder, tiny_hyper());
        let bu = model(System::BottomUp, tiny_hyper());
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for (model, binarized) in [(&m, false), (&bu, true)] {
            let mut g = Graph::new(model.store());
            let a = g.input((0..4).map(|_| rng.gen_range(-1.0..1.0)).collect());
            let b = g.input((0..4).map(|_| rng.gen_range(-1.0..1.0)).collect());
            let (x, y) = if binarized {
                (
                    model.compose_binarized(&mut g, 0, a, b).unwrap(),
                    model.compose_binarized(&mut g, 0, b, a).unwrap(),
                )
            } else {
                (
                    model.compose(&mut g, 0, &[a, b]).unwrap(),
                    model.compose(&mut g, 0, &[b, a]).unwrap(),
                )
            };
            assert_ne!(g.value(x), g.value(y));
            assert_eq!(g.dim(x), 4);
        }
        let mut g = Graph::new(m.store());
        assert!(matches!(
            m.compose(&mut g, 0, &[]),
            Err(ModelError::NoChildren)
        ));
    }

    #[test]
    fn distribution_masks_illegal_actions() {
        let mut m = model(System::InOrder, tiny_hyper());
        let mut g = Graph::new(m.store());
        let enc = Encoder::new(
            &m,
            &mut g,
            &[WordIds {
                word: 1,
                pos: 1,
                pretrained: 0,
            }],
        )
        .unwrap()
        .encoded();
        let n = m.transitions().inventory().len();
        let p = m.action_distribution(&mut g, &enc, &[0, 2, 3]);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(p
            .iter()
            .enumerate()
            .all(|(i, &v)| [0, 2, 3].contains(&i) || v == 0.0));
        assert_eq!(m.action_distribution(&mut g, &enc, &[4])[4], 1.0);
        assert_eq!(p.len(), n);
        drop(g);

        for name in ["w_out", "b_out"] {
            let id = m.store().id(name).unwrap();
            m.store_mut().value_mut(id).data_mut().fill(0.0);
        }
        let mut g = Graph::new(m.store());
        let enc = Encoder::new(
            &m,
            &mut g,
            &[WordIds {
                word: 1,
                pos: 1,
                pretrained: 0,
            }],
        )
        .unwrap()
        .encoded();
        let p = m.action_distribution(&mut g, &enc, &[0, 1, 3, 4]);
        for i in [0, 1, 3, 4] {
            assert!((p[i] - 0.25).abs() < 1e-15);
        }
    }
}
