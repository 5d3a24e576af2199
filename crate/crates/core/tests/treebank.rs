use inorder_core::synth::{random_tree, RandomTreeConfig};
use inorder_core::treebank::{
    binarize, read_trees, unbinarize, write_tree, write_trees, HeadRules, Tree,
};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn tree_from(seed: u64) -> (Tree, Vec<inorder_core::treebank::Token>) {
    random_tree(
        &mut ChaCha8Rng::seed_from_u64(seed),
        &RandomTreeConfig::default(),
    )
}

fn binary(t: &Tree<impl Clone>) -> bool {
    t.children().len() <= 2 && t.children().iter().all(binary)
}

proptest! {
    #[test]
    fn write_then_read_is_identity(seed in any::<u64>()) {
        let (tree, tokens) = tree_from(seed);
        let text = write_tree(&tree, &tokens);
        let back = read_trees(&text).unwrap();
        prop_assert_eq!(back.len(), 1);
        prop_assert_eq!(&back[0].0, &tree);
        prop_assert_eq!(&back[0].1, &tokens);
    }

    #[test]
    fn corpus_round_trip(seeds in prop::collection::vec(any::<u64>(), 0..8)) {
        let corpus: Vec<_> = seeds.into_iter().map(tree_from).collect();
        prop_assert_eq!(read_trees(&write_trees(&corpus)).unwrap(), corpus);
    }

    #[test]
    fn binarization_round_trips(seed in any::<u64>(), rightmost in any::<bool>()) {
        let (tree, tokens) = tree_from(seed);
        let rules = if rightmost { HeadRules::rightmost() } else { HeadRules::default() };
        let bin = binarize(&tree, &tokens, &rules);
        prop_assert!(binary(&bin));
        prop_assert_eq!(bin.num_leaves(), tree.num_leaves());
        prop_assert_eq!(bin.num_unary(), tree.num_unary());
        prop_assert_eq!(unbinarize(&bin).unwrap(), tree);
    }
}
