//! Random and grammar-generated treebanks for tests, benchmarks and smoke runs.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::transition::UNARY_LIMIT;
use crate::treebank::{Token, Tree};

pub const RANDOM_LABELS: [&str; 5] = ["S", "NP", "VP", "PP", "ADJP"];
const RANDOM_TAGS: [&str; 5] = ["NN", "DT", "VB", "JJ", "IN"];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RandomTreeConfig {
    pub max_tokens: usize,
    pub max_children: usize,
    /// Probability of wrapping a finished node in one more unary node.
    pub unary_prob: f64,
}

impl Default for RandomTreeConfig {
    fn default() -> Self {
        RandomTreeConfig {
            max_tokens: 12,
            max_children: 4,
            unary_prob: 0.15,
        }
    }
}

/// A random tree over `1..=max_tokens` words, labels from [`RANDOM_LABELS`], unary chains
/// no longer than the transition systems allow.
pub fn random_tree<R: Rng>(rng: &mut R, config: &RandomTreeConfig) -> (Tree, Vec<Token>) {
    let n = rng.gen_range(1..=config.max_tokens);
    let mut tree = subtree(rng, config, 0, n);
    if tree.is_leaf() {
        tree = Tree::node(random_label(rng), vec![tree]);
    }
    let tokens = (0..n)
        .map(|i| Token::new(format!("w{i}"), *RANDOM_TAGS.choose(rng).unwrap()).unwrap())
        .collect();
    (tree, tokens)
}

pub fn random_corpus<R: Rng>(
    rng: &mut R,
    count: usize,
    config: &RandomTreeConfig,
) -> Vec<(Tree, Vec<Token>)> {
    (0..count).map(|_| random_tree(rng, config)).collect()
}

fn random_label<R: Rng>(rng: &mut R) -> String {
    RANDOM_LABELS.choose(rng).unwrap().to_string()
}

fn subtree<R: Rng>(rng: &mut R, config: &RandomTreeConfig, start: usize, n: usize) -> Tree {
    if n == 1 && rng.gen_bool(0.5) {
        return Tree::Leaf(start);
    }
    let mut node = if n == 1 {
        Tree::node(random_label(rng), vec![Tree::Leaf(start)])
    } else {
        let k = rng.gen_range(2..=config.max_children.min(n));
        let mut cuts = rand::seq::index::sample(rng, n - 1, k - 1).into_vec();
        cuts.sort_unstable();
        let mut children = Vec::with_capacity(k);
        let mut from = 0;
        for cut in cuts.into_iter().map(|c| c + 1).chain(std::iter::once(n)) {
            children.push(subtree(rng, config, start + from, cut - from));
            from = cut;
        }
        Tree::node(random_label(rng), children)
    };
    while node.unary_chain_len() < UNARY_LIMIT && rng.gen_bool(config.unary_prob) {
        node = Tree::node(random_label(rng), vec![node]);
    }
    node
}

/// Sentences from a small unambiguous grammar:
///
/// ```text
/// S  -> NP VP .
/// NP -> DT NN | DT JJ NN | NNP
/// VP -> VBZ NP | VBZ NP PP | VBD
/// PP -> IN NP
/// ```
pub fn toy_corpus<R: Rng>(rng: &mut R, count: usize) -> Vec<(Tree, Vec<Token>)> {
    (0..count).map(|_| toy_sentence(rng)).collect()
}

struct Builder<'r, R> {
    rng: &'r mut R,
    tokens: Vec<Token>,
}

impl<R: Rng> Builder<'_, R> {
    fn word(&mut self, pos: &str, words: &[&str]) -> Tree {
        let form = words.choose(self.rng).unwrap();
        self.tokens.push(Token::new(*form, pos).unwrap());
        Tree::Leaf(self.tokens.len() - 1)
    }

    fn np(&mut self) -> Tree {
        let children = match self.rng.gen_range(0..3) {
            0 => vec![self.word("DT", DT), self.word("NN", NN)],
            1 => vec![
                self.word("DT", DT),
                self.word("JJ", JJ),
                self.word("NN", NN),
            ],
            _ => vec![self.word("NNP", NNP)],
        };
        Tree::node("NP", children)
    }

    fn vp(&mut self) -> Tree {
        let children = match self.rng.gen_range(0..3) {
            0 => vec![self.word("VBZ", VBZ), self.np()],
            1 => {
                let v = self.word("VBZ", VBZ);
                let obj = self.np();
                let prep = self.word("IN", IN);
                let pobj = self.np();
                vec![v, obj, Tree::node("PP", vec![prep, pobj])]
            }
            _ => vec![self.word("VBD", VBD)],
        };
        Tree::node("VP", children)
    }
}

const DT: &[&str] = &["the", "a"];
const NN: &[&str] = &["dog", "cat", "boy", "park", "ball", "telescope"];
const JJ: &[&str] = &["little", "red", "big"];
const NNP: &[&str] = &["John", "Mary"];
const VBZ: &[&str] = &["likes", "sees"];
const VBD: &[&str] = &["slept", "ran"];
const IN: &[&str] = &["in", "with"];

fn toy_sentence<R: Rng>(rng: &mut R) -> (Tree, Vec<Token>) {
    let mut b = Builder {
        rng,
        tokens: Vec::new(),
    };
    let subj = b.np();
    let vp = b.vp();
    let stop = b.word(".", &["."]);
    (Tree::node("S", vec![subj, vp, stop]), b.tokens)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn random_trees_respect_limits() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let config = RandomTreeConfig::default();
        let mut saw_unary_chain = false;
        for _ in 0..500 {
            let (t, tokens) = random_tree(&mut rng, &config);
            assert!(t.is_well_formed(tokens.len()));
            assert!(tokens.len() <= 12);
            assert!(t.max_arity() <= 4);
            assert!(!t.is_leaf());
            fn chains_ok(t: &Tree) -> bool {
                t.unary_chain_len() <= UNARY_LIMIT && t.children().iter().all(chains_ok)
            }
            assert!(chains_ok(&t));
            saw_unary_chain |= t.unary_chain_len() >= 2;
        }
        assert!(saw_unary_chain);
    }

    #[test]
    fn toy_corpus_is_deterministic() {
        let a = toy_corpus(&mut ChaCha8Rng::seed_from_u64(5), 50);
        let b = toy_corpus(&mut ChaCha8Rng::seed_from_u64(5), 50);
        assert_eq!(a, b);
        for (t, tokens) in &a {
            assert!(t.is_well_formed(tokens.len()));
            assert_eq!(t.label().map(String::as_str), Some("S"));
        }
    }
}
