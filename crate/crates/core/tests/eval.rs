use inorder_core::eval::{length_bin, score, Counts, EvalConfig, SPAN_CAP};
use inorder_core::synth::{random_tree, RandomTreeConfig};
use inorder_core::treebank::{Token, Tree};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Gold and predicted trees over the same tokens, some of them punctuation.
fn pair(seed: u64) -> (Tree, Tree, Vec<Token>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (gold, mut tokens) = random_tree(&mut rng, &RandomTreeConfig::default());
    let n = tokens.len();
    let config = RandomTreeConfig {
        max_tokens: n,
        ..RandomTreeConfig::default()
    };
    let pred = loop {
        let (t, _) = random_tree(&mut rng, &config);
        if t.num_leaves() == n {
            break t;
        }
    };
    for tok in &mut tokens {
        if rng.gen_bool(0.2) {
            *tok = Token::new(",", ",").unwrap();
        }
    }
    (gold, pred, tokens)
}

fn sum<'a>(counts: impl Iterator<Item = &'a Counts>) -> Counts {
    counts.fold(Counts::default(), |a, c| Counts {
        gold: a.gold + c.gold,
        pred: a.pred + c.pred,
        correct: a.correct + c.correct,
    })
}

proptest! {
    #[test]
    fn swapping_gold_and_pred_swaps_recall_and_precision(seeds in prop::collection::vec(any::<u64>(), 1..6)) {
        let pairs: Vec<_> = seeds.into_iter().map(pair).collect();
        let config = EvalConfig::default();
        let gold: Vec<_> = pairs.iter().map(|(g, _, t)| (g.clone(), t.clone())).collect();
        let pred: Vec<_> = pairs.iter().map(|(_, p, _)| p.clone()).collect();
        let flipped_gold: Vec<_> = pairs.iter().map(|(_, p, t)| (p.clone(), t.clone())).collect();
        let flipped_pred: Vec<_> = pairs.iter().map(|(g, _, _)| g.clone()).collect();
        let a = score(&gold, &pred, &config).unwrap();
        let b = score(&flipped_gold, &flipped_pred, &config).unwrap();
        prop_assert_eq!(a.lr(), b.lp());
        prop_assert_eq!(a.lp(), b.lr());
        prop_assert_eq!(a.f1(), b.f1());
        prop_assert_eq!(a.exact_match, b.exact_match);
    }

    #[test]
    fn a_tree_scores_perfectly_against_itself(seed in any::<u64>()) {
        let (gold, _, tokens) = pair(seed);
        let report = score(&[(gold.clone(), tokens)], &[gold], &EvalConfig::default()).unwrap();
        prop_assert_eq!(report.total.gold, report.total.correct);
        prop_assert_eq!(report.exact_match, 1);
        if report.total.gold > 0 {
            prop_assert_eq!(report.f1(), 100.0);
        }
    }

    #[test]
    fn breakdowns_partition_the_total(seeds in prop::collection::vec(any::<u64>(), 1..10)) {
        let pairs: Vec<_> = seeds.into_iter().map(pair).collect();
        let gold: Vec<_> = pairs.iter().map(|(g, _, t)| (g.clone(), t.clone())).collect();
        let pred: Vec<_> = pairs.iter().map(|(_, p, _)| p.clone()).collect();
        let report = score(&gold, &pred, &EvalConfig::default()).unwrap();
        prop_assert_eq!(sum(report.per_label.values()), report.total);
        prop_assert_eq!(sum(report.by_length.values()), report.total);
        prop_assert_eq!(sum(report.by_span.values()), report.total);
        prop_assert!(report.by_span.keys().all(|&k| (1..=SPAN_CAP).contains(&k)));
        prop_assert!(report.total.correct <= report.total.gold.min(report.total.pred));
    }

    #[test]
    fn length_bins_are_decades(len in 1usize..200) {
        let bin = length_bin(len);
        prop_assert_eq!(bin % 10, 0);
        prop_assert!(bin - 10 < len && len <= bin);
    }
}

#[test]
fn mismatched_pairs_are_rejected() {
    let (gold, _, tokens) = pair(3);
    let config = EvalConfig::default();
    assert!(score(&[(gold.clone(), tokens.clone())], &[], &config).is_err());
    let short: Tree = Tree::node("S".to_string(), vec![Tree::Leaf(0)]);
    if tokens.len() > 1 {
        assert!(score(&[(gold, tokens)], &[short], &config).is_err());
    }
}
