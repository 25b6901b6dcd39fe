//! Topic extraction: generalize a bag of concepts to the best cut of its
//! spanning sub-hierarchy.
//!
//! The bag collects every taxonomy concept triggered by a token. Its
//! ancestors form the spanning DAG, where each node knows how many downward
//! paths to bag concepts it covers (`n_i`, multiple-inheritance paths counted
//! separately, total `M`). Nodes score U = S1^(1-a) * S2^a, combining
//! genericity S1 = (n_i-1)/(M-1) with informativeness S2 = 1 - d_norm. A cut
//! is a concept set whose covered path sets partition all M paths; the
//! extractor finds a cut maximizing the per-path average of U via one
//! bottom-up pass (store max of the local score and the children's weighted
//! average, mark expansion when the local score does not win) and one
//! top-down pass collecting non-expanded nodes.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::lexicon::Token;
use crate::segmenter::{segment, DocumentSegmentation, SegmenterConfig};
use crate::taxonomy::{ConceptDag, ConceptId, PathStats, TaxonomyError};

#[derive(Debug, Error)]
pub enum ExtractError {
    #[error("empty bag of concepts, nothing to extract")]
    EmptyBag,
    #[error("brute force requires a tree, but {0}")]
    NotATree(String),
    #[error("brute force limited to 20 nodes, got {0}")]
    TooLarge(usize),
    #[error("cut covers {covered} of {total} leaf paths")]
    CutNotCovering { covered: u64, total: u64 },
    #[error("cut concept {0} is not in the spanning DAG")]
    UnknownCutConcept(ConceptId),
    #[error("cut count overflows for branching {branching}, depth {depth}")]
    CountOverflow { branching: u32, depth: u32 },
    #[error(transparent)]
    Taxonomy(#[from] TaxonomyError),
}

/// Why a concept id attached to some token was left out of the bag.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum SkipReason {
    NotInTaxonomy,
    Anonymous,
    Orphan,
}

#[derive(Debug, Clone, Default)]
pub struct BagEntry {
    /// Lemmas whose readings triggered the concept.
    pub lemmas: BTreeSet<String>,
    /// Indices of triggering tokens in the token list handed in.
    pub positions: Vec<usize>,
    /// One occurrence per triggering token (a token with two readings of
    /// the same concept counts once).
    pub occurrences: u64,
}

/// The concepts a stretch of text talks about, with bookkeeping for skipped
/// ids. Only named, non-orphan taxonomy concepts enter; anything else is
/// recorded in `skipped` so callers can warn.
#[derive(Debug, Default)]
pub struct BagOfConcepts {
    entries: BTreeMap<ConceptId, BagEntry>,
    skipped: Vec<(ConceptId, SkipReason)>,
}

impl BagOfConcepts {
    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn entries(&self) -> impl Iterator<Item = (&ConceptId, &BagEntry)> {
        self.entries.iter()
    }

    pub fn concepts(&self) -> impl Iterator<Item = &ConceptId> {
        self.entries.keys()
    }

    pub fn skipped(&self) -> &[(ConceptId, SkipReason)] {
        &self.skipped
    }

    /// A bag from bare concept ids, one occurrence each; skips ids exactly
    /// like token-driven construction. Useful for file-driven runs.
    pub fn from_concepts(ids: &[ConceptId], taxonomy: &ConceptDag) -> BagOfConcepts {
        let mut bag = BagOfConcepts::default();
        let mut skipped = BTreeSet::new();
        for (i, id) in ids.iter().enumerate() {
            match admit(id, taxonomy) {
                Ok(()) => {
                    let entry = bag.entries.entry(id.clone()).or_default();
                    entry.positions.push(i);
                    entry.occurrences += 1;
                }
                Err(reason) => {
                    skipped.insert((id.clone(), reason));
                }
            }
        }
        bag.skipped = skipped.into_iter().collect();
        bag
    }
}

fn admit(id: &ConceptId, taxonomy: &ConceptDag) -> Result<(), SkipReason> {
    let Some(node) = taxonomy.node(id) else {
        return Err(SkipReason::NotInTaxonomy);
    };
    if node.is_anonymous() {
        return Err(SkipReason::Anonymous);
    }
    if taxonomy.is_orphan(id).unwrap_or(true) {
        return Err(SkipReason::Orphan);
    }
    Ok(())
}

/// Collects the union of concept ids over every token's readings. Each token
/// contributes one occurrence per distinct concept, with no sense
/// disambiguation: an ambiguous token feeds all its senses into the bag.
pub fn bag_of_concepts(tokens: &[Token], taxonomy: &ConceptDag) -> BagOfConcepts {
    let mut bag = BagOfConcepts::default();
    let mut skipped = BTreeSet::new();
    for (position, token) in tokens.iter().enumerate() {
        let mut seen: BTreeMap<&ConceptId, BTreeSet<&str>> = BTreeMap::new();
        for candidate in &token.lemma_candidates {
            for concept in &candidate.concepts {
                seen.entry(concept).or_default().insert(candidate.lemma.as_str());
            }
        }
        for (concept, lemmas) in seen {
            match admit(concept, taxonomy) {
                Ok(()) => {
                    let entry = bag.entries.entry(concept.clone()).or_default();
                    entry.lemmas.extend(lemmas.iter().map(|l| l.to_string()));
                    entry.positions.push(position);
                    entry.occurrences += 1;
                }
                Err(reason) => {
                    skipped.insert((concept.clone(), reason));
                }
            }
        }
    }
    bag.skipped = skipped.into_iter().collect();
    bag
}

/// One node of the spanning DAG.
#[derive(Debug, Clone)]
pub struct SpanNode {
    pub concept: ConceptId,
    pub anonymous: bool,
    /// Bag member: a path terminus. Termini are never expanded, since no
    /// descendant can cover the path that ends here.
    pub terminus: bool,
    /// Indices into the spanning DAG's node list.
    pub parents: Vec<usize>,
    pub children: Vec<usize>,
    /// n_i: downward paths from here that end at bag concepts.
    pub paths: u64,
    /// S1 = (n_i - 1) / (M - 1); 0 everywhere when M = 1.
    pub genericity: f64,
    /// S2 = 1 - normalized leaf separation, from the full taxonomy.
    pub informativeness: f64,
}

/// The sub-hierarchy induced by a bag: the bag concepts plus all their
/// ancestors, with per-node path counts and scores.
#[derive(Debug)]
pub struct SpanningDag {
    nodes: Vec<SpanNode>,
    index: BTreeMap<ConceptId, usize>,
    roots: Vec<usize>,
    /// Parents before children.
    topo: Vec<usize>,
    total_paths: u64,
}

impl SpanningDag {
    pub fn nodes(&self) -> &[SpanNode] {
        &self.nodes
    }

    pub fn node(&self, id: &ConceptId) -> Option<&SpanNode> {
        self.index.get(id).map(|&i| &self.nodes[i])
    }

    pub fn roots(&self) -> impl Iterator<Item = &SpanNode> {
        self.roots.iter().map(|&i| &self.nodes[i])
    }

    /// M: total number of leaf paths; equals the sum of `paths` over roots.
    pub fn total_paths(&self) -> u64 {
        self.total_paths
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

/// Genericity of a node covering `covered` of `total` leaf paths: 0 for a
/// single path, 1 for all of them. A one-path DAG scores 0 throughout.
pub fn score_s1(covered: u64, total: u64) -> f64 {
    assert!(covered >= 1 && covered <= total);
    if total == 1 {
        0.0
    } else {
        (covered - 1) as f64 / (total - 1) as f64
    }
}

/// Informativeness from taxonomy-global path statistics: 1 at a leaf, 0 at
/// a root.
pub fn score_s2(stats: &PathStats) -> f64 {
    1.0 - stats.leaf_separation
}

/// Weighted geometric mean U = s1^(1-a) * s2^a. The endpoints are exact by
/// construction: a = 0 returns s1 itself, a = 1 returns s2; 0^0 counts as 1.
pub fn combine_scores(s1: f64, s2: f64, a: f64) -> f64 {
    assert!((0.0..=1.0).contains(&s1), "s1 out of range: {s1}");
    assert!((0.0..=1.0).contains(&s2), "s2 out of range: {s2}");
    assert!((0.0..=1.0).contains(&a), "a out of range: {a}");
    if a == 0.0 {
        s1
    } else if a == 1.0 {
        s2
    } else {
        s1.powf(1.0 - a) * s2.powf(a)
    }
}

/// Builds the spanning DAG for a bag: ancestor closure, path counts, and
/// static scores. Fails on an empty bag so callers can distinguish "nothing
/// to extract" from a real cut.
pub fn build_spanning_dag(
    bag: &BagOfConcepts,
    taxonomy: &ConceptDag,
) -> Result<SpanningDag, ExtractError> {
    if bag.is_empty() {
        return Err(ExtractError::EmptyBag);
    }
    // Ancestor closure over taxonomy indices.
    let mut included = BTreeSet::new();
    let mut stack = Vec::new();
    for id in bag.concepts() {
        let idx = taxonomy.idx(id).ok_or_else(|| ExtractError::UnknownCutConcept(id.clone()))?;
        if included.insert(idx) {
            stack.push(idx);
        }
    }
    let termini: BTreeSet<usize> = included.iter().copied().collect();
    while let Some(v) = stack.pop() {
        for &p in taxonomy.parents_idx(v) {
            if included.insert(p) {
                stack.push(p);
            }
        }
    }

    // Taxonomy index → spanning index, in taxonomy order for determinism.
    let tax_to_span: BTreeMap<usize, usize> =
        included.iter().enumerate().map(|(s, &t)| (t, s)).collect();
    let mut nodes: Vec<SpanNode> = included
        .iter()
        .map(|&t| {
            let node = taxonomy.node_at(t);
            SpanNode {
                concept: node.id.clone(),
                anonymous: node.is_anonymous(),
                terminus: termini.contains(&t),
                parents: taxonomy
                    .parents_idx(t)
                    .iter()
                    .map(|p| tax_to_span[p])
                    .collect(),
                children: taxonomy
                    .children_idx(t)
                    .iter()
                    .filter_map(|c| tax_to_span.get(c).copied())
                    .collect(),
                paths: 0,
                genericity: 0.0,
                informativeness: 0.0,
            }
        })
        .collect();

    // All parents of an included node are included, so a node without
    // spanning parents is a taxonomy root; Kahn order needs no re-check.
    let topo = {
        let mut indeg: Vec<usize> = nodes.iter().map(|n| n.parents.len()).collect();
        let mut queue: Vec<usize> = (0..nodes.len()).filter(|&v| indeg[v] == 0).collect();
        let mut order = Vec::with_capacity(nodes.len());
        while let Some(v) = queue.pop() {
            order.push(v);
            for i in 0..nodes[v].children.len() {
                let c = nodes[v].children[i];
                indeg[c] -= 1;
                if indeg[c] == 0 {
                    queue.push(c);
                }
            }
        }
        assert_eq!(order.len(), nodes.len(), "taxonomy acyclicity is inherited");
        order
    };

    // n_i: one path ends here per terminus membership, plus everything the
    // children cover. Children first, hence reverse topological order.
    for &v in topo.iter().rev() {
        let mut n = u64::from(nodes[v].terminus);
        for i in 0..nodes[v].children.len() {
            n += nodes[nodes[v].children[i]].paths;
        }
        debug_assert!(n >= 1, "every spanning node reaches a terminus");
        nodes[v].paths = n;
    }
    let roots: Vec<usize> = (0..nodes.len()).filter(|&v| nodes[v].parents.is_empty()).collect();
    let total_paths: u64 = roots.iter().map(|&r| nodes[r].paths).sum();

    for node in &mut nodes {
        node.genericity = score_s1(node.paths, total_paths);
        node.informativeness = score_s2(taxonomy.path_stats(&node.concept)?);
    }

    let index = nodes.iter().enumerate().map(|(i, n)| (n.concept.clone(), i)).collect();
    Ok(SpanningDag { nodes, index, roots, topo, total_paths })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ExtractionConfig {
    /// Balance between genericity (a = 0) and informativeness (a = 1).
    pub balance: Balance,
    /// Average children by covered path counts (default) or plainly.
    pub unweighted_average: bool,
}

/// Wrapper keeping the a parameter in [0,1] at construction time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Balance(f64);

impl Balance {
    pub fn new(a: f64) -> Balance {
        assert!((0.0..=1.0).contains(&a), "balance parameter must be in [0,1]");
        Balance(a)
    }

    pub fn get(self) -> f64 {
        self.0
    }
}

impl Default for Balance {
    fn default() -> Self {
        Balance(0.5)
    }
}

impl Eq for Balance {}

/// Per-node trace of the cut dynamic program, exposed for debugging dumps.
#[derive(Debug, Clone)]
pub struct DpNode {
    pub concept: ConceptId,
    pub paths: u64,
    pub genericity: f64,
    pub informativeness: f64,
    /// Local score U; `None` for anonymous nodes, which are unselectable.
    pub local: Option<f64>,
    /// max(local, children average): the best per-path score under here.
    pub stored: f64,
    /// True when the children's average won (or the node is anonymous):
    /// the optimum descends instead of selecting this node.
    pub expand: bool,
}

/// Runs the bottom-up scoring pass and returns the per-node table.
pub fn dp_scores(dag: &SpanningDag, cfg: &ExtractionConfig) -> Vec<DpNode> {
    let a = cfg.balance.get();
    let mut table: Vec<Option<DpNode>> = vec![None; dag.nodes.len()];
    for &v in dag.topo.iter().rev() {
        let node = &dag.nodes[v];
        let local = (!node.anonymous)
            .then(|| combine_scores(node.genericity, node.informativeness, a));
        let children_avg = if node.children.is_empty() {
            None
        } else {
            let mut weight_sum = 0.0;
            let mut score_sum = 0.0;
            for &c in &node.children {
                let child = table[c].as_ref().expect("children scored first");
                let w = if cfg.unweighted_average { 1.0 } else { dag.nodes[c].paths as f64 };
                weight_sum += w;
                score_sum += w * child.stored;
            }
            Some(score_sum / weight_sum)
        };
        let (stored, expand) = if node.terminus {
            // A terminus must cover its own path; it can only be selected.
            (local.expect("termini are named"), false)
        } else {
            match (local, children_avg) {
                (Some(l), Some(g)) => (l.max(g), l <= g),
                (None, Some(g)) => (g, true),
                (Some(l), None) => (l, false),
                (None, None) => unreachable!("anonymous leaf cannot reach a terminus"),
            }
        };
        table[v] = Some(DpNode {
            concept: node.concept.clone(),
            paths: node.paths,
            genericity: node.genericity,
            informativeness: node.informativeness,
            local,
            stored,
            expand,
        });
    }
    table.into_iter().map(Option::unwrap).collect()
}

/// One selected concept of a cut and the leaf paths it covers.
#[derive(Debug, Clone, PartialEq)]
pub struct CutConcept {
    pub concept: ConceptId,
    pub covered_paths: u64,
    /// The concept's own U score at the extraction's balance.
    pub local_score: f64,
}

/// A cut: selected concepts whose covered path counts sum to M, plus the
/// per-path average score S.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredCut {
    pub selected: Vec<CutConcept>,
    pub score: f64,
}

impl ScoredCut {
    pub fn empty() -> ScoredCut {
        ScoredCut { selected: Vec::new(), score: 0.0 }
    }

    pub fn concepts(&self) -> impl Iterator<Item = &ConceptId> {
        self.selected.iter().map(|c| &c.concept)
    }
}

/// Extracts the best cut: bottom-up DP scores, then a top-down pass from the
/// roots that descends through expanded nodes and claims every arrival at a
/// selected node. A node reached along several routes is emitted once with
/// the merged path count. The claimed counts always partition all M paths.
pub fn extract_cut(dag: &SpanningDag, cfg: &ExtractionConfig) -> Result<ScoredCut, ExtractError> {
    if dag.is_empty() {
        return Err(ExtractError::EmptyBag);
    }
    let table = dp_scores(dag, cfg);
    // arrivals[v]: how many of v's n_i path copies the cut delegates to v.
    // Each arrival unit stands for one upstream route, multiplying n_i.
    let mut arrivals = vec![0u64; dag.nodes.len()];
    for &r in &dag.roots {
        arrivals[r] = 1;
    }
    let mut claimed: BTreeMap<usize, u64> = BTreeMap::new();
    for &v in &dag.topo {
        if arrivals[v] == 0 {
            continue;
        }
        if table[v].expand {
            for &c in &dag.nodes[v].children {
                arrivals[c] += arrivals[v];
            }
        } else {
            *claimed.entry(v).or_insert(0) += arrivals[v] * dag.nodes[v].paths;
        }
    }
    let covered: u64 = claimed.values().sum();
    assert_eq!(covered, dag.total_paths, "cut must partition all leaf paths");

    let mut score_sum = 0.0;
    let selected: Vec<CutConcept> = claimed
        .iter()
        .map(|(&v, &paths)| {
            let local = table[v].local.expect("selected nodes are named");
            score_sum += paths as f64 * local;
            CutConcept {
                concept: dag.nodes[v].concept.clone(),
                covered_paths: paths,
                local_score: local,
            }
        })
        .collect();
    Ok(ScoredCut { selected, score: score_sum / dag.total_paths as f64 })
}

/// Recomputes S from a cut's own covered counts and local scores; errors if
/// the counts do not partition all M paths or a concept is foreign.
pub fn cut_score(cut: &ScoredCut, dag: &SpanningDag) -> Result<f64, ExtractError> {
    let mut covered = 0u64;
    let mut sum = 0.0;
    for c in &cut.selected {
        if dag.node(&c.concept).is_none() {
            return Err(ExtractError::UnknownCutConcept(c.concept.clone()));
        }
        covered += c.covered_paths;
        sum += c.covered_paths as f64 * c.local_score;
    }
    if covered != dag.total_paths {
        return Err(ExtractError::CutNotCovering { covered, total: dag.total_paths });
    }
    Ok(sum / dag.total_paths as f64)
}

/// Number of distinct cuts of a complete `branching`-ary tree with `depth`
/// levels: C(1) = 1, C(p) = C(p-1)^branching + 1.
pub fn count_cuts(branching: u32, depth: u32) -> Result<u128, ExtractError> {
    assert!(branching >= 1 && depth >= 1);
    let overflow = || ExtractError::CountOverflow { branching, depth };
    let mut count: u128 = 1;
    for _ in 1..depth {
        count = count.checked_pow(branching).ok_or_else(overflow)?;
        count = count.checked_add(1).ok_or_else(overflow)?;
    }
    Ok(count)
}

/// Exhaustive cut enumeration; the test oracle for `extract_cut`. Only
/// accepts tree-shaped spanning DAGs of at most 20 nodes.
pub fn brute_force_best_cut(
    dag: &SpanningDag,
    cfg: &ExtractionConfig,
) -> Result<ScoredCut, ExtractError> {
    if dag.is_empty() {
        return Err(ExtractError::EmptyBag);
    }
    if dag.len() > 20 {
        return Err(ExtractError::TooLarge(dag.len()));
    }
    if dag.roots.len() != 1 {
        return Err(ExtractError::NotATree(format!("{} roots", dag.roots.len())));
    }
    for node in &dag.nodes {
        if node.parents.len() > 1 {
            return Err(ExtractError::NotATree(format!(
                "{} has {} parents",
                node.concept,
                node.parents.len()
            )));
        }
    }

    let table = dp_scores(dag, cfg);
    // All ways to cover the subtree of v, as selected node-index sets.
    fn cuts_of(dag: &SpanningDag, table: &[DpNode], v: usize) -> Vec<Vec<usize>> {
        let node = &dag.nodes[v];
        let mut options = Vec::new();
        if !node.anonymous && table[v].local.is_some() {
            options.push(vec![v]);
        }
        // A terminus owns a path no descendant covers: selection is forced.
        if !node.terminus && !node.children.is_empty() {
            let per_child: Vec<Vec<Vec<usize>>> =
                node.children.iter().map(|&c| cuts_of(dag, table, c)).collect();
            let mut combos: Vec<Vec<usize>> = vec![Vec::new()];
            for child_cuts in &per_child {
                let mut next = Vec::with_capacity(combos.len() * child_cuts.len());
                for combo in &combos {
                    for cut in child_cuts {
                        let mut merged = combo.clone();
                        merged.extend_from_slice(cut);
                        next.push(merged);
                    }
                }
                combos = next;
            }
            options.extend(combos);
        }
        options
    }

    let root = dag.roots[0];
    let mut best: Option<(f64, Vec<usize>)> = None;
    for cut in cuts_of(dag, &table, root) {
        let score: f64 = cut
            .iter()
            .map(|&v| dag.nodes[v].paths as f64 * table[v].local.unwrap())
            .sum::<f64>()
            / dag.total_paths as f64;
        if best.as_ref().is_none_or(|(s, _)| score > *s) {
            best = Some((score, cut));
        }
    }
    let (score, chosen) = best.expect("a tree always has at least one cut");
    let selected = chosen
        .into_iter()
        .map(|v| CutConcept {
            concept: dag.nodes[v].concept.clone(),
            covered_paths: dag.nodes[v].paths,
            local_score: table[v].local.unwrap(),
        })
        .collect();
    Ok(ScoredCut { selected, score })
}

/// One segment's extraction result.
#[derive(Debug)]
pub struct SegmentAnnotation {
    /// Half-open token range in the document's full token stream.
    pub span: (usize, usize),
    /// Empty cut (no selected concepts, score 0) when the segment's bag is
    /// empty.
    pub cut: ScoredCut,
    /// Concept ids skipped while building the segment's bag.
    pub skipped: Vec<(ConceptId, SkipReason)>,
}

/// A segmented document with one cut per segment.
#[derive(Debug)]
pub struct AnnotatedDocument {
    pub segmentation: DocumentSegmentation,
    pub segments: Vec<SegmentAnnotation>,
}

/// The full pipeline: segment the text, then extract one cut per segment
/// from the concepts of the segment's tokens.
pub fn annotate(
    text: &str,
    lexicon: &crate::lexicon::Lexicon,
    taxonomy: &ConceptDag,
    seg_config: &SegmenterConfig,
    ext_config: &ExtractionConfig,
) -> Result<AnnotatedDocument, ExtractError> {
    let segmentation = segment(text, lexicon, seg_config);
    let mut segments = Vec::with_capacity(segmentation.segments.len());
    for &(start, end) in &segmentation.segments {
        let bag = bag_of_concepts(&segmentation.tokens[start..end], taxonomy);
        let cut = if bag.is_empty() {
            ScoredCut::empty()
        } else {
            extract_cut(&build_spanning_dag(&bag, taxonomy)?, ext_config)?
        };
        segments.push(SegmentAnnotation {
            span: (start, end),
            cut,
            skipped: bag.skipped().to_vec(),
        });
    }
    Ok(AnnotatedDocument { segmentation, segments })
}

// ---------------------------------------------------------------------------
