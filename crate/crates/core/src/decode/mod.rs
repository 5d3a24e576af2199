//! Greedy decoding and exponentiated ancestral sampling.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::model::{Encoder, Model, ModelError, WordIds};
use crate::nn::Graph;
pub use crate::transition::action_budget;
use crate::transition::{Action, ParserState, TransitionError, TransitionSystem};
use crate::treebank::{unbinarize, Token, Tree, TreebankError};

pub const DEFAULT_ALPHA: f64 = 0.8;
pub const DEFAULT_SAMPLES: usize = 100;

#[derive(Debug, thiserror::Error)]
pub enum DecodeError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Transition(#[from] TransitionError),
    #[error(transparent)]
    Treebank(#[from] TreebankError),
    #[error("action budget of {limit} exhausted; partial derivation: {partial}")]
    Budget { limit: usize, partial: String },
    #[error("no legal action after {0}")]
    Stuck(String),
    #[error("cannot parse an empty sentence")]
    EmptySentence,
    #[error("alpha must be in (0, 1], got {0}")]
    InvalidAlpha(f64),
    #[error("sample count must be at least 1")]
    NoSamples,
}

/// A complete derivation with the sum of its action log-probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct Derivation {
    pub actions: Vec<Action>,
    pub log_prob: f64,
    pub tree: Tree,
}

/// Seed of the sampler for sentence `index` of a corpus.
pub fn sentence_seed(seed: u64, index: usize) -> u64 {
    seed ^ index as u64
}

/// Something that scores the legal actions of a derivation in progress.
pub trait Scorer {
    type Run<'s>: ScorerRun
    where
        Self: 's;

    fn transitions(&self) -> &TransitionSystem;

    fn begin<'s>(&'s self, tokens: &[Token]) -> Result<Self::Run<'s>, DecodeError>;
}

/// One derivation's incremental scoring state.
pub trait ScorerRun {
    /// Log-probabilities of the `legal` inventory ids, in the same order.
    fn log_probs(&mut self, legal: &[usize]) -> Result<Vec<f64>, DecodeError>;

    /// Records that inventory action `action_id` was taken.
    fn advance(&mut self, action_id: usize) -> Result<(), DecodeError>;
}

pub struct ModelRun<'m> {
    model: &'m Model,
    graph: Graph<'m>,
    encoder: Encoder<'m>,
}

impl Scorer for Model {
    type Run<'s> = ModelRun<'s>;

    fn transitions(&self) -> &TransitionSystem {
        Model::transitions(self)
    }

    fn begin<'s>(&'s self, tokens: &[Token]) -> Result<ModelRun<'s>, DecodeError> {
        let words: Vec<WordIds> = tokens.iter().map(|t| self.vocab().word_ids(t)).collect();
        let mut graph = Graph::new(self.store());
        let encoder = Encoder::new(self, &mut graph, &words)?;
        Ok(ModelRun {
            model: self,
            graph,
            encoder,
        })
    }
}

impl ScorerRun for ModelRun<'_> {
    fn log_probs(&mut self, legal: &[usize]) -> Result<Vec<f64>, DecodeError> {
        if legal.len() == 1 {
            return Ok(vec![0.0]);
        }
        let lp = self
            .model
            .action_log_probs(&mut self.graph, &self.encoder.encoded(), legal);
        self.graph.check_finite().map_err(ModelError::from)?;
        Ok(self.graph.value(lp).to_vec())
    }

    fn advance(&mut self, action_id: usize) -> Result<(), DecodeError> {
        Ok(self.encoder.apply(&mut self.graph, action_id)?)
    }
}

fn spell(actions: &[Action]) -> String {
    actions
        .iter()
        .map(Action::to_string)
        .collect::<Vec<_>>()
        .join(" ")
}

/// Runs one derivation, choosing each action from the legal ids and their log-probabilities.
fn derive<S: Scorer>(
    scorer: &S,
    tokens: &[Token],
    mut choose: impl FnMut(&[usize], &[f64]) -> usize,
) -> Result<Derivation, DecodeError> {
    if tokens.is_empty() {
        return Err(DecodeError::EmptySentence);
    }
    let ts = scorer.transitions();
    let mut run = scorer.begin(tokens)?;
    let mut state = ParserState::start(tokens.len());
    let mut actions = Vec::new();
    let mut log_prob = 0.0;
    let limit = action_budget(tokens.len());
    while !state.is_finished() {
        if actions.len() >= limit {
            return Err(DecodeError::Budget {
                limit,
                partial: spell(&actions),
            });
        }
        let legal = ts.legal_ids(&state);
        if legal.is_empty() {
            return Err(DecodeError::Stuck(spell(&actions)));
        }
        let lp = run.log_probs(&legal)?;
        let k = choose(&legal, &lp);
        let action = ts.inventory()[legal[k]].clone();
        log_prob += lp[k];
        ts.apply_in_place(&mut state, &action)?;
        run.advance(legal[k])?;
        actions.push(action);
    }
    let tree = state.result().expect("finished states hold one tree");
    let tree = if ts.system().binarized() {
        unbinarize(tree)?
    } else {
        tree.map_labels(&mut |l| l.label.clone())
    };
    Ok(Derivation {
        actions,
        log_prob,
        tree,
    })
}

/// Position of the largest value; ties go to the earliest position.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Takes the most probable legal action at every step; ties go to the lowest action id.
pub fn parse_greedy<S: Scorer>(scorer: &S, tokens: &[Token]) -> Result<Derivation, DecodeError> {
    derive(scorer, tokens, |_, lp| argmax(lp))
}

/// The distribution `p^alpha / Σ p^alpha` from log-probabilities.
pub fn exponentiate(log_probs: &[f64], alpha: f64) -> Vec<f64> {
    let max = log_probs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = log_probs
        .iter()
        .map(|lp| (alpha * (lp - max)).exp())
        .collect();
    let z: f64 = w.iter().sum();
    w.into_iter().map(|v| v / z).collect()
}

/// Draws an index from a normalized distribution.
pub fn draw<R: Rng>(probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    // Rounding left `acc` just below 1: fall back to the last non-zero entry.
    probs.iter().rposition(|&p| p > 0.0).unwrap_or(0)
}

/// `count` ancestral samples where each step draws from the legal distribution raised to
/// `alpha` and renormalized. Derivations carry their unexponentiated log-probabilities and
/// come sorted from most to least probable; duplicates are kept.
pub fn sample<S: Scorer>(
    scorer: &S,
    tokens: &[Token],
    alpha: f64,
    count: usize,
    seed: u64,
) -> Result<Vec<Derivation>, DecodeError> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(DecodeError::InvalidAlpha(alpha));
    }
    if count == 0 {
        return Err(DecodeError::NoSamples);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = (0..count)
        .map(|_| {
            derive(scorer, tokens, |_, lp| {
                draw(&exponentiate(lp, alpha), &mut rng)
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    out.sort_by(|a, b| b.log_prob.total_cmp(&a.log_prob));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Hyperparams, Vocabulary};
    use crate::transition::{execute, System};
    use crate::treebank::read_trees;

    fn tiny(system: System) -> (Model, Vec<Token>) {
        let corpus =
            read_trees("(S (NP (DT the) (NN dog)) (VP (VBZ barks) (ADVP (RB loudly))) (. .))")
                .unwrap();
        let hyper = Hyperparams {
            word_dim: 4,
            pretrained_dim: 2,
            pos_dim: 2,
            action_dim: 3,
            lstm_input_dim: 6,
            lstm_hidden_dim: 5,
            ..Hyperparams::default()
        };
        let vocab = Vocabulary::build(&corpus, system, vec![]).unwrap();
        let model = Model::new(
            system,
            hyper,
            vocab,
            None,
            &mut ChaCha8Rng::seed_from_u64(2),
        )
        .unwrap();
        (model, corpus[0].1.clone())
    }

    #[test]
    fn exponentiation_closed_form() {
        let p = exponentiate(&[0.9f64.ln(), 0.1f64.ln()], 0.5);
        let want = 0.9f64.sqrt() / (0.9f64.sqrt() + 0.1f64.sqrt());
        assert!((p[0] - want).abs() < 1e-12);
        let p = exponentiate(&[0.9f64.ln(), 0.1f64.ln()], 1.0);
        assert!((p[0] - 0.9).abs() < 1e-12);
        assert_eq!(argmax(&[0.1, 0.5, 0.5]), 1);
    }

    #[test]
    fn greedy_is_deterministic_and_complete() {
        for system in System::ALL {
            let (model, tokens) = tiny(system);
            let a = parse_greedy(&model, &tokens).unwrap();
            let b = parse_greedy(&model, &tokens).unwrap();
            assert_eq!(a, b);
            assert!(a.tree.is_well_formed(tokens.len()));
            assert!(a.log_prob <= 0.0);
            assert_eq!(execute(&a.actions, tokens.len(), system).unwrap(), a.tree);
        }
    }

    #[test]
    fn uniform_model_takes_lowest_legal_ids() {
        for system in System::ALL {
            let (mut model, tokens) = tiny(system);
            for name in ["w_out", "b_out"] {
                let id = model.store().id(name).unwrap();
                model.store_mut().value_mut(id).data_mut().fill(0.0);
            }
            let d = parse_greedy(&model, &tokens).unwrap();
            let ts = model.transitions();
            let mut state = ParserState::start(tokens.len());
            for a in &d.actions {
                assert_eq!(&ts.inventory()[ts.legal_ids(&state)[0]], a);
                ts.apply_in_place(&mut state, a).unwrap();
            }
            assert!(d.actions.len() <= action_budget(tokens.len()));
        }
    }

    #[test]
    fn samples_are_sorted_legal_and_reproducible() {
        let (model, tokens) = tiny(System::InOrder);
        let s = sample(&model, &tokens, DEFAULT_ALPHA, 20, 7).unwrap();
        assert_eq!(s.len(), 20);
        assert!(s.windows(2).all(|w| w[0].log_prob >= w[1].log_prob));
        for d in &s {
            assert_eq!(
                execute(&d.actions, tokens.len(), System::InOrder).unwrap(),
                d.tree
            );
        }
        assert_eq!(s, sample(&model, &tokens, DEFAULT_ALPHA, 20, 7).unwrap());
        assert!(matches!(
            sample(&model, &tokens, 0.0, 1, 0),
            Err(DecodeError::InvalidAlpha(_))
        ));
        assert!(matches!(
            sample(&model, &tokens, 1.0, 0, 0),
            Err(DecodeError::NoSamples)
        ));
        assert!(matches!(
            parse_greedy(&model, &[]),
            Err(DecodeError::EmptySentence)
        ));
    }
}
