//! Seeded synthetic data: random concept hierarchies, random trees, complete
//! trees, and vocabulary-disjoint text blocks for segmentation benchmarks.
//!
//! Everything here is deterministic under a caller-supplied seed; the same
//! seed and parameters always produce byte-identical output.

use rand::prelude::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::taxonomy::{ConceptDag, ConceptId, ConceptNode};

/// Parameters for `random_taxonomy`.
#[derive(Debug, Clone)]
pub struct TaxonomyGen {
    pub nodes: usize,
    /// Chance that a node gets a second parent (multiple inheritance).
    pub extra_parent_prob: f64,
    /// Chance that an internal node is anonymous (no headword, no gloss).
    pub anonymous_prob: f64,
}

impl Default for TaxonomyGen {
    fn default() -> Self {
        TaxonomyGen { nodes: 40, extra_parent_prob: 0.15, anonymous_prob: 0.2 }
    }
}

fn concept_id(i: usize) -> String {
    format!("c{i:04}")
}

/// A random connected DAG: node 0 is the sole root, every later node picks a
/// uniform parent among its predecessors, plus an optional extra parent.
/// Only nodes with children may be anonymous, so every leaf is nameable.
pub fn random_taxonomy(gen: &TaxonomyGen, seed: u64) -> ConceptDag {
    assert!(gen.nodes >= 1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges: Vec<(usize, usize)> = Vec::new();
    let mut has_children = vec![false; gen.nodes];
    for i in 1..gen.nodes {
        let parent = rng.random_range(0..i);
        edges.push((i, parent));
        has_children[parent] = true;
        if i > 1 && rng.random_bool(gen.extra_parent_prob) {
            let extra = rng.random_range(0..i);
            if extra != parent {
                edges.push((i, extra));
                has_children[extra] = true;
            }
        }
    }
    let nodes = (0..gen.nodes)
        .map(|i| {
            let anonymous = has_children[i] && rng.random_bool(gen.anonymous_prob);
            let headword = (!anonymous).then(|| format!("word{i:04}"));
            ConceptNode::new(concept_id(i), headword, None)
        })
        .collect();
    let edges = edges
        .into_iter()
        .map(|(c, p)| (ConceptId::new(concept_id(c)), ConceptId::new(concept_id(p))))
        .collect();
    ConceptDag::from_parts(nodes, edges).expect("generated DAG is valid by construction")
}

/// A random rooted tree with every node named: node 0 is the root, node i
/// hangs under a uniform predecessor.
pub fn random_tree(nodes: usize, seed: u64) -> ConceptDag {
    assert!(nodes >= 1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut node_list = Vec::with_capacity(nodes);
    let mut edges = Vec::with_capacity(nodes.saturating_sub(1));
    for i in 0..nodes {
        node_list.push(ConceptNode::new(concept_id(i), Some(format!("word{i:04}")), None));
        if i > 0 {
            let parent = rng.random_range(0..i);
            edges.push((ConceptId::new(concept_id(i)), ConceptId::new(concept_id(parent))));
        }
    }
    ConceptDag::from_parts(node_list, edges).expect("generated tree is valid")
}

/// The complete `branching`-ary tree with `depth` levels of nodes; depth 1
/// is a single node. Every node is named.
pub fn complete_tree(branching: u32, depth: u32) -> ConceptDag {
    assert!(branching >= 1 && depth >= 1);
    let mut nodes = Vec::new();
    let mut edges = Vec::new();
    // Breadth-first construction; children of node k are appended in order.
    let mut level_start = 0usize;
    nodes.push(ConceptNode::new(concept_id(0), Some("word0000".into()), None));
    for _ in 1..depth {
        let level_end = nodes.len();
        for parent in level_start..level_end {
            for _ in 0..branching {
                let child = nodes.len();
                nodes.push(ConceptNode::new(
                    concept_id(child),
                    Some(format!("word{child:04}")),
                    None,
                ));
                edges.push((ConceptId::new(concept_id(child)), ConceptId::new(concept_id(parent))));
            }
        }
        level_start = level_end;
    }
    ConceptDag::from_parts(nodes, edges).expect("complete tree is valid")
}

/// Samples `min_size..=max_size` distinct named, non-orphan concepts; the
/// result is sorted by id for determinism independent of sampling order.
pub fn random_bag(dag: &ConceptDag, min_size: usize, max_size: usize, seed: u64) -> Vec<ConceptId> {
    assert!(min_size >= 1 && min_size <= max_size);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let eligible: Vec<&ConceptId> = dag
        .ids()
        .filter(|id| {
            let node = dag.node(id).unwrap();
            !node.is_anonymous() && !dag.is_orphan(id).unwrap()
        })
        .collect();
    assert!(!eligible.is_empty(), "taxonomy has no selectable concepts");
    let want = rng.random_range(min_size..=max_size.min(eligible.len()));
    let mut picked: Vec<ConceptId> = eligible
        .choose_multiple(&mut rng, want)
        .map(|id| (*id).clone())
        .collect();
    picked.sort();
    picked
}

/// Parameters for `disjoint_blocks`.
#[derive(Debug, Clone)]
pub struct CorpusGen {
    pub blocks: usize,
    pub words_per_block: usize,
    /// Distinct word types available to each block; smaller values mean more
    /// repetition and stronger within-block cohesion.
    pub vocab_per_block: usize,
}

impl Default for CorpusGen {
    fn default() -> Self {
        CorpusGen { blocks: 5, words_per_block: 240, vocab_per_block: 30 }
    }
}

/// One text per block, each cycling a seeded permutation of its own private
/// vocabulary, so adjacent blocks share no words at all.
///
/// Cycling (rather than independent draws) keeps the term distribution of
/// equal-sized word windows inside a block identical, so the inter-window
/// similarity curve is flat away from block junctions and drops only there.
/// That is the construction under which boundary detection must recover
/// exactly the junctions; independent draws would add sampling noise and
/// spurious shallow minima that the benchmark is not about.
pub fn disjoint_blocks(gen: &CorpusGen, seed: u64) -> Vec<String> {
    assert!(gen.blocks >= 1 && gen.words_per_block >= 1 && gen.vocab_per_block >= 1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..gen.blocks)
        .map(|b| {
            let mut vocab: Vec<String> =
                (0..gen.vocab_per_block).map(|v| format!("t{b:02}x{v:02}")).collect();
            vocab.shuffle(&mut rng);
            let words: Vec<&str> = (0..gen.words_per_block)
                .map(|i| vocab[i % vocab.len()].as_str())
                .collect();
            words.join(" ")
        })
        .collect()
}

// ---------------------------------------------------------------------------

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn random_taxonomy_is_connected_and_seed_stable() {
        let gen = TaxonomyGen::default();
        let a = random_taxonomy(&gen, 7);
        let b = random_taxonomy(&gen, 7);
        assert_eq!(a.to_text(), b.to_text());
        assert_eq!(a.len(), gen.nodes);
        assert_eq!(a.roots().len(), 1, "single root by construction");
        assert!(a.orphans().is_empty());
        let c = random_taxonomy(&gen, 8);
        assert_ne!(a.to_text(), c.to_text(), "different seeds differ");
    }

    #[test]
    fn random_taxonomy_only_internal_nodes_are_anonymous() {
        for seed in 0..20 {
            let dag = random_taxonomy(&TaxonomyGen::default(), seed);
            for id in dag.ids() {
                let node = dag.node(id).unwrap();
                if node.is_anonymous() {
                    assert!(
                        dag.leaf_path_count(id).unwrap() > 0
                            && dag.path_stats(id).unwrap().leaf_separation > 0.0,
                        "anonymous node {id} must have children"
                    );
                }
            }
        }
    }

    #[test]
    fn random_tree_nodes_have_exactly_one_parent() {
        let tree = random_tree(12, 3);
        assert_eq!(tree.len(), 12);
        assert_eq!(tree.roots().len(), 1);
        // In a tree, every node reaches each leaf along exactly one path,
        // so upward path counts are all 1.
        for id in tree.ids() {
            assert_eq!(tree.path_stats(id).unwrap().n_up, 1, "{id}");
        }
    }

    #[test]
    fn complete_tree_shape() {
        let t = complete_tree(3, 3);
        assert_eq!(t.len(), 1 + 3 + 9);
        assert_eq!(t.max_depth(), 3);
        let root = ConceptId::new("c0000");
        assert_eq!(t.leaf_path_count(&root).unwrap(), 9);
        let single = complete_tree(2, 1);
        assert_eq!(single.len(), 1);
    }

    #[test]
    fn random_bag_is_sorted_named_and_seed_stable() {
        let dag = random_taxonomy(&TaxonomyGen::default(), 11);
        let a = random_bag(&dag, 2, 6, 5);
        let b = random_bag(&dag, 2, 6, 5);
        assert_eq!(a, b);
        assert!(a.len() >= 2 && a.len() <= 6);
        assert!(a.windows(2).all(|w| w[0] < w[1]), "sorted, distinct");
        for id in &a {
            assert!(!dag.node(id).unwrap().is_anonymous());
        }
    }

    #[test]
    fn disjoint_blocks_share_no_vocabulary() {
        let gen = CorpusGen { blocks: 3, words_per_block: 50, vocab_per_block: 10 };
        let blocks = disjoint_blocks(&gen, 42);
        assert_eq!(blocks.len(), 3);
        let vocab = |s: &str| -> std::collections::BTreeSet<String> {
            s.split_whitespace().map(str::to_owned).collect()
        };
        for i in 0..blocks.len() {
            assert_eq!(blocks[i].split_whitespace().count(), 50);
            for j in i + 1..blocks.len() {
                assert!(vocab(&blocks[i]).is_disjoint(&vocab(&blocks[j])));
            }
        }
        assert_eq!(blocks, disjoint_blocks(&gen, 42), "seed stable");
    }

    #[test]
    fn block_words_cycle_the_whole_vocabulary_evenly() {
        // 50 words over 10 types: cycling gives exactly 5 of each, so any
        // window whose size is a multiple of 10 has an identical profile.
        let gen = CorpusGen { blocks: 2, words_per_block: 50, vocab_per_block: 10 };
        for block in disjoint_blocks(&gen, 9) {
            let mut counts = std::collections::BTreeMap::new();
            for word in block.split_whitespace() {
                *counts.entry(word.to_owned()).or_insert(0u32) += 1;
            }
            assert_eq!(counts.len(), 10, "every type is used");
            assert!(counts.values().all(|&c| c == 5), "counts are even");
        }
    }
}
