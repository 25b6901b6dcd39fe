//! Evaluation metrics for segmentation and concept annotation.
//!
//! Segmentation quality: each word maps to its segment ordinal, pairwise
//! ordinal distances form a triangular position matrix per segmentation, and
//! the error is the mean absolute entry difference between the two matrices.
//!
//! Annotation quality: the normalized Leacock-Chodorow similarity between a
//! produced and a reference concept acts as a match probability; per-concept
//! marginals combine over the other side's concepts, and precision, recall,
//! F-measure, and accuracy are expectations over those marginals, swept over
//! an acceptance threshold.

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::taxonomy::{ConceptDag, ConceptId, TaxonomyError};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("segmentations cover {real} vs {found} words")]
    WordCountMismatch { real: usize, found: usize },
    #[error("segment start {start} outside word range 2..={word_count}")]
    StartOutOfRange { start: usize, word_count: usize },
    #[error("segment starts must be strictly increasing")]
    UnsortedStarts,
    #[error("produced concept list is empty, precision undefined")]
    EmptyProduced,
    #[error("reference concept list is empty, recall undefined")]
    EmptyReference,
    #[error("F-measure weight must be positive, got {0}")]
    InvalidBeta(f64),
    #[error("probability {0} outside [0,1]")]
    InvalidProbability(f64),
    #[error("need at least {need} documents, got {have}")]
    InsufficientDocs { have: usize, need: usize },
    #[error("group size must be at least 2, got {0}")]
    BadGroupSize(usize),
    #[error("pair matrix shape {rows}x{cols} does not match {produced}x{reference}")]
    BadMatrixShape { rows: usize, cols: usize, produced: usize, reference: usize },
    #[error(transparent)]
    Taxonomy(#[from] TaxonomyError),
}

/// A document split into consecutive word segments. Boundaries are encoded
/// as the 1-based word indices that *start* a new segment, each in
/// `2..=word_count`; the first segment implicitly starts at word 1.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Segmentation {
    word_count: usize,
    starts: Vec<usize>,
}

impl Segmentation {
    pub fn new(word_count: usize, starts: Vec<usize>) -> Result<Segmentation, EvalError> {
        for pair in starts.windows(2) {
            if pair[0] >= pair[1] {
                return Err(EvalError::UnsortedStarts);
            }
        }
        if let Some(&bad) = starts.iter().find(|&&s| s < 2 || s > word_count) {
            return Err(EvalError::StartOutOfRange { start: bad, word_count });
        }
        Ok(Segmentation { word_count, starts })
    }

    pub fn word_count(&self) -> usize {
        self.word_count
    }

    pub fn starts(&self) -> &[usize] {
        &self.starts
    }

    pub fn segment_count(&self) -> usize {
        self.starts.len() + 1
    }
}

/// D: 1-based segment ordinal per word; `D[i] = 1 +` number of segment
/// starts at or before word `i+1`. Non-decreasing, begins at 1.
pub fn position_vector(seg: &Segmentation) -> Vec<u32> {
    let mut d = Vec::with_capacity(seg.word_count);
    let mut ordinal = 1u32;
    let mut next = seg.starts.iter().peekable();
    for word in 1..=seg.word_count {
        while next.peek().is_some_and(|&&s| s <= word) {
            next.next();
            ordinal += 1;
        }
        d.push(ordinal);
    }
    d
}

/// Lower-triangular matrix of pairwise ordinal distances, diagonal included:
/// `rows[i][k] = |D[i] - D[k]|` for `k <= i`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PositionMatrix {
    pub rows: Vec<Vec<u32>>,
}

impl PositionMatrix {
    pub fn from_positions(d: &[u32]) -> PositionMatrix {
        let rows = (0..d.len())
            .map(|i| (0..=i).map(|k| d[i].abs_diff(d[k])).collect())
            .collect();
        PositionMatrix { rows }
    }

    /// Entrywise absolute difference; the matrices must be the same size.
    pub fn abs_diff(&self, other: &PositionMatrix) -> Result<PositionMatrix, EvalError> {
        if self.rows.len() != other.rows.len() {
            return Err(EvalError::WordCountMismatch {
                real: self.rows.len(),
                found: other.rows.len(),
            });
        }
        let rows = self
            .rows
            .iter()
            .zip(&other.rows)
            .map(|(a, b)| a.iter().zip(b).map(|(x, y)| x.abs_diff(*y)).collect())
            .collect();
        Ok(PositionMatrix { rows })
    }

    /// Mean over the strictly-lower-triangular entries (word pairs i < j).
    pub fn strict_lower_mean(&self) -> f64 {
        let n = self.rows.len();
        if n < 2 {
            return 0.0;
        }
        let sum: u64 = self
            .rows
            .iter()
            .enumerate()
            .map(|(i, row)| row[..i].iter().map(|&e| u64::from(e)).sum::<u64>())
            .sum();
        sum as f64 / (n * (n - 1) / 2) as f64
    }
}

/// Mean absolute difference of pairwise segment-ordinal distances between
/// two segmentations of the same word stream. Zero iff the position vectors
/// agree up to translation; fewer than two words trivially score 0.
///
/// Equivalent to building both position matrices and averaging their
/// entrywise absolute difference, but computed in O(n log n) through the
/// per-word ordinal deltas.
pub fn segmentation_error(real: &Segmentation, found: &Segmentation) -> Result<f64, EvalError> {
    if real.word_count != found.word_count {
        return Err(EvalError::WordCountMismatch {
            real: real.word_count,
            found: found.word_count,
        });
    }
    let n = real.word_count;
    if n < 2 {
        return Ok(0.0);
    }
    let dr = position_vector(real);
    let df = position_vector(found);
    // |R_ji - F_ji| = |(dr_j - dr_i) - (df_j - df_i)| = |delta_j - delta_i|:
    // summing |delta_j - delta_i| over pairs only needs the sorted deltas.
    let mut delta: Vec<i64> = dr
        .iter()
        .zip(&df)
        .map(|(&r, &f)| i64::from(r) - i64::from(f))
        .collect();
    delta.sort_unstable();
    let mut sum: i128 = 0;
    for (k, &v) in delta.iter().enumerate() {
        sum += i128::from(v) * (2 * k as i128 + 1 - n as i128);
    }
    debug_assert!(sum >= 0);
    Ok(sum as f64 / (n as u64 * (n as u64 - 1) / 2) as f64)
}

/// Match probability of two concepts: their Leacock-Chodorow similarity
/// normalized by the identity-pair maximum `ln(2D)`. 1 iff identical, 0 for
/// concepts in different components (reported by the caller as a warning).
pub fn match_probability(
    taxonomy: &ConceptDag,
    produced: &ConceptId,
    reference: &ConceptId,
) -> Result<f64, EvalError> {
    match taxonomy.lch_similarity(produced, reference)? {
        Some(s) => Ok(s / ((2 * taxonomy.max_depth()) as f64).ln()),
        None => Ok(0.0),
    }
}

/// Marginal match probabilities of produced and reference concept lists,
/// each sorted descending (ties by id) for threshold sweeps.
#[derive(Debug, Clone)]
pub struct MatchProbabilities {
    produced: Vec<(ConceptId, f64)>,
    reference: Vec<(ConceptId, f64)>,
    /// Pair matrix in the sorted orders: `pairs[i][k] = p(produced_i | reference_k)`.
    /// Absent when the marginals were supplied directly.
    pairs: Option<Vec<Vec<f64>>>,
    /// Produced/reference pairs living in disconnected taxonomy components.
    unreachable: Vec<(ConceptId, ConceptId)>,
}

fn sort_marginals(list: &mut [(ConceptId, f64)]) {
    list.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then_with(|| a.0.cmp(&b.0)));
}

impl MatchProbabilities {
    /// Builds marginals from an explicit pair matrix:
    /// `p(c) = 1 - prod_k (1 - p(c|C_k))` over the reference side, and dually
    /// for reference concepts over the produced side.
    pub fn from_pair_matrix(
        produced: Vec<ConceptId>,
        reference: Vec<ConceptId>,
        pairs: Vec<Vec<f64>>,
    ) -> Result<MatchProbabilities, EvalError> {
        if produced.is_empty() {
            return Err(EvalError::EmptyProduced);
        }
        if reference.is_empty() {
            return Err(EvalError::EmptyReference);
        }
        if pairs.len() != produced.len()
            || pairs.iter().any(|row| row.len() != reference.len())
        {
            return Err(EvalError::BadMatrixShape {
                rows: pairs.len(),
                cols: pairs.first().map_or(0, Vec::len),
                produced: produced.len(),
                reference: reference.len(),
            });
        }
        for &p in pairs.iter().flatten() {
            if !(0.0..=1.0).contains(&p) {
                return Err(EvalError::InvalidProbability(p));
            }
        }
        let mut produced: Vec<(ConceptId, f64)> = produced
            .into_iter()
            .enumerate()
            .map(|(i, c)| {
                let miss: f64 = pairs[i].iter().map(|p| 1.0 - p).product();
                (c, 1.0 - miss)
            })
            .collect();
        let mut reference: Vec<(ConceptId, f64)> = reference
            .into_iter()
            .enumerate()
            .map(|(k, c)| {
                let miss: f64 = pairs.iter().map(|row| 1.0 - row[k]).product();
                (c, 1.0 - miss)
            })
            .collect();
        // Permute the matrix rows/columns along with the sorted lists.
        let row_order = sorted_permutation(&produced);
        let col_order = sorted_permutation(&reference);
        let pairs = row_order
            .iter()
            .map(|&i| col_order.iter().map(|&k| pairs[i][k]).collect())
            .collect();
        sort_marginals(&mut produced);
        sort_marginals(&mut reference);
        Ok(MatchProbabilities { produced, reference, pairs: Some(pairs), unreachable: Vec::new() })
    }

    /// Wraps marginals that were computed elsewhere (fixture tables).
    pub fn from_marginals(
        mut produced: Vec<(ConceptId, f64)>,
        mut reference: Vec<(ConceptId, f64)>,
    ) -> Result<MatchProbabilities, EvalError> {
        if produced.is_empty() {
            return Err(EvalError::EmptyProduced);
        }
        if reference.is_empty() {
            return Err(EvalError::EmptyReference);
        }
        for &(_, p) in produced.iter().chain(&reference) {
            if !(0.0..=1.0).contains(&p) {
                return Err(EvalError::InvalidProbability(p));
            }
        }
        sort_marginals(&mut produced);
        sort_marginals(&mut reference);
        Ok(MatchProbabilities { produced, reference, pairs: None, unreachable: Vec::new() })
    }

    pub fn produced(&self) -> &[(ConceptId, f64)] {
        &self.produced
    }

    pub fn reference(&self) -> &[(ConceptId, f64)] {
        &self.reference
    }

    pub fn pairs(&self) -> Option<&Vec<Vec<f64>>> {
        self.pairs.as_ref()
    }

    pub fn unreachable_pairs(&self) -> &[(ConceptId, ConceptId)] {
        &self.unreachable
    }
}

fn sorted_permutation(list: &[(ConceptId, f64)]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..list.len()).collect();
    order.sort_by(|&a, &b| {
        list[b].1.partial_cmp(&list[a].1).unwrap().then_with(|| list[a].0.cmp(&list[b].0))
    });
    order
}

/// Computes the full pair matrix of match probabilities through the
/// taxonomy, then the marginals. Disconnected pairs contribute probability 0
/// and are listed in `unreachable_pairs` for warning output.
pub fn aggregate_probabilities(
    produced: &[ConceptId],
    reference: &[ConceptId],
    taxonomy: &ConceptDag,
) -> Result<MatchProbabilities, EvalError> {
    if produced.is_empty() {
        return Err(EvalError::EmptyProduced);
    }
    if reference.is_empty() {
        return Err(EvalError::EmptyReference);
    }
    let mut unreachable = Vec::new();
    let mut pairs = Vec::with_capacity(produced.len());
    for c in produced {
        let mut row = Vec::with_capacity(reference.len());
        for r in reference {
            let p = match_probability(taxonomy, c, r)?;
            if p == 0.0 && taxonomy.shortest_node_path(c, r)?.is_none() {
                unreachable.push((c.clone(), r.clone()));
            }
            row.push(p);
        }
        pairs.push(row);
    }
    let mut mp =
        MatchProbabilities::from_pair_matrix(produced.to_vec(), reference.to_vec(), pairs)?;
    mp.unreachable = unreachable;
    Ok(mp)
}

/// Expected precision and recall: the means of the produced and reference
/// marginals respectively.
pub fn precision_recall(mp: &MatchProbabilities) -> (f64, f64) {
    let p = mp.produced.iter().map(|&(_, p)| p).sum::<f64>() / mp.produced.len() as f64;
    let r = mp.reference.iter().map(|&(_, p)| p).sum::<f64>() / mp.reference.len() as f64;
    (p, r)
}

/// Weighted F-measure `(b^2 + 1)PR / (b^2 P + R)`; 0 when both inputs are 0,
/// rejected for non-positive `b`.
pub fn f_measure(precision: f64, recall: f64, b: f64) -> Result<f64, EvalError> {
    if b.is_nan() || b <= 0.0 {
        return Err(EvalError::InvalidBeta(b));
    }
    if precision == 0.0 && recall == 0.0 {
        return Ok(0.0);
    }
    Ok((b * b + 1.0) * precision * recall / (b * b * precision + recall))
}

/// Probability that every produced concept matches: the product of the
/// produced marginals.
pub fn accuracy(mp: &MatchProbabilities) -> f64 {
    mp.produced.iter().map(|&(_, p)| p).product()
}

/// One row of a threshold sweep; `None` marks values undefined at this
/// threshold (every produced concept eliminated).
#[derive(Debug, Clone, PartialEq)]
pub struct PrPoint {
    pub theta: f64,
    pub precision: Option<f64>,
    pub recall: f64,
    pub f_measure: Option<f64>,
    pub accuracy: Option<f64>,
    pub produced_survivors: usize,
    pub reference_survivors: usize,
}

/// Restricts both sides to marginals strictly above each threshold.
/// Precision and accuracy average/multiply over the surviving produced
/// concepts; recall keeps the full reference count in its denominator, so
/// eliminated reference concepts count as misses.
pub fn threshold_sweep(mp: &MatchProbabilities, thetas: &[f64]) -> Vec<PrPoint> {
    assert!(
        thetas.iter().all(|t| (0.0..1.0).contains(t)),
        "thresholds must lie in [0,1)"
    );
    thetas
        .iter()
        .map(|&theta| {
            let produced: Vec<f64> = mp
                .produced
                .iter()
                .map(|&(_, p)| p)
                .filter(|&p| p > theta)
                .collect();
            let reference: Vec<f64> = mp
                .reference
                .iter()
                .map(|&(_, p)| p)
                .filter(|&p| p > theta)
                .collect();
            let precision = (!produced.is_empty())
                .then(|| produced.iter().sum::<f64>() / produced.len() as f64);
            let recall = reference.iter().sum::<f64>() / mp.reference.len() as f64;
            let f = precision.and_then(|p| f_measure(p, recall, 1.0).ok());
            let acc = (!produced.is_empty()).then(|| produced.iter().product());
            PrPoint {
                theta,
                precision,
                recall,
                f_measure: f,
                accuracy: acc,
                produced_survivors: produced.len(),
                reference_survivors: reference.len(),
            }
        })
        .collect()
}

/// Set-overlap precision/recall/F1: the strict baseline where only identical
/// concept ids count as matches. An empty side scores 0 for its metric.
pub fn evaluate_exact_match(produced: &[ConceptId], reference: &[ConceptId]) -> (f64, f64, f64) {
    let prod: BTreeSet<&ConceptId> = produced.iter().collect();
    let refs: BTreeSet<&ConceptId> = reference.iter().collect();
    let hits = prod.intersection(&refs).count() as f64;
    let p = if prod.is_empty() { 0.0 } else { hits / prod.len() as f64 };
    let r = if refs.is_empty() { 0.0 } else { hits / refs.len() as f64 };
    let f = f_measure(p, r, 1.0).expect("b = 1 is valid");
    (p, r, f)
}

/// Concatenates `group_size` randomly chosen documents (whitespace word
/// streams) into one benchmark text, returning it with the ground-truth
/// segmentation at the document junctions. Deterministic under `seed`.
pub fn synthesize_eval_corpus(
    docs: &[String],
    group_size: usize,
    seed: u64,
) -> Result<(String, Segmentation), EvalError> {
    if group_size < 2 {
        return Err(EvalError::BadGroupSize(group_size));
    }
    if docs.len() < group_size {
        return Err(EvalError::InsufficientDocs { have: docs.len(), need: group_size });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // Partial Fisher-Yates: draw group_size distinct indices in order.
    let mut indices: Vec<usize> = (0..docs.len()).collect();
    for i in 0..group_size {
        let j = rng.random_range(i..indices.len());
        indices.swap(i, j);
    }
    let chosen = &indices[..group_size];

    let mut text = String::new();
    let mut starts = Vec::new();
    let mut words = 0usize;
    for (slot, &doc) in chosen.iter().enumerate() {
        let doc_words = docs[doc].split_whitespace().count();
        if slot > 0 {
            text.push('\n');
            starts.push(words + 1);
        }
        text.push_str(docs[doc].trim_end());
        words += doc_words;
    }
    Ok((text, Segmentation::new(words, starts)?))
}

// ---------------------------------------------------------------------------

#[cfg(test)]
mod tests {
    use super::*;
    use crate::taxonomy::ConceptNode;

    fn id(s: &str) -> ConceptId {
        ConceptId::new(s)
    }

    fn seg(words: usize, starts: &[usize]) -> Segmentation {
        Segmentation::new(words, starts.to_vec()).unwrap()
    }

    // ---- position vectors ----

    #[test]
    fn six_word_reference_positions() {
        // Segments (1), (2,3), (4), (5,6): starts at words 2, 4, 5.
        assert_eq!(position_vector(&seg(6, &[2, 4, 5])), vec![1, 2, 2, 3, 4, 4]);
    }

    #[test]
    fn six_word_found_positions() {
        assert_eq!(position_vector(&seg(6, &[2, 3, 5])), vec![1, 2, 3, 3, 4, 4]);
    }

    #[test]
    fn no_boundaries_is_all_ones() {
        assert_eq!(position_vector(&seg(4, &[])), vec![1, 1, 1, 1]);
    }

    #[test]
    fn boundary_after_every_word_counts_up() {
        assert_eq!(position_vector(&seg(6, &[2, 3, 4, 5, 6])), vec![1, 2, 3, 4, 5, 6]);
    }

    #[test]
    fn invalid_starts_are_rejected() {
        assert!(matches!(
            Segmentation::new(6, vec![7]),
            Err(EvalError::StartOutOfRange { start: 7, word_count: 6 })
        ));
        assert!(matches!(
            Segmentation::new(6, vec![1]),
            Err(EvalError::StartOutOfRange { .. })
        ));
        assert!(matches!(
            Segmentation::new(6, vec![3, 3]),
            Err(EvalError::UnsortedStarts)
        ));
    }

    // ---- matrices and error ----

    #[test]
    fn position_matrix_of_the_reference_example() {
        let m = PositionMatrix::from_positions(&[1, 2, 2, 3, 4, 4]);
        assert_eq!(
            m.rows,
            vec![
                vec![0],
                vec![1, 0],
                vec![1, 0, 0],
                vec![2, 1, 1, 0],
                vec![3, 2, 2, 1, 0],
                vec![3, 2, 2, 1, 0, 0],
            ]
        );
    }

    #[test]
    fn error_of_the_worked_pair_of_segmentations() {
        // |R - F| has ones at five strict-lower entries; 5/15 = 1/3.
        let err = segmentation_error(&seg(6, &[2, 4, 5]), &seg(6, &[2, 3, 5])).unwrap();
        assert!((err - 5.0 / 15.0).abs() < 1e-12, "{err}");
    }

    #[test]
    fn identical_segmentations_have_zero_error() {
        let s = seg(6, &[2, 4, 5]);
        assert_eq!(segmentation_error(&s, &s).unwrap(), 0.0);
    }

    #[test]
    fn one_segment_versus_three_singletons() {
        let err = segmentation_error(&seg(3, &[]), &seg(3, &[2, 3])).unwrap();
        assert!((err - 4.0 / 3.0).abs() < 1e-12, "{err}");
    }

    #[test]
    fn mismatched_word_counts_error_out() {
        assert!(matches!(
            segmentation_error(&seg(5, &[]), &seg(6, &[])),
            Err(EvalError::WordCountMismatch { real: 5, found: 6 })
        ));
    }

    #[test]
    fn fast_path_equals_matrix_definition() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..50 {
            let words = rng.random_range(2..40);
            let mut pick = || -> Vec<usize> {
                (2..=words).filter(|_| rng.random_bool(0.3)).collect()
            };
            let real = seg(words, &pick());
            let found = seg(words, &pick());
            let fast = segmentation_error(&real, &found).unwrap();
            let r = PositionMatrix::from_positions(&position_vector(&real));
            let f = PositionMatrix::from_positions(&position_vector(&found));
            let naive = r.abs_diff(&f).unwrap().strict_lower_mean();
            assert!((fast - naive).abs() < 1e-12, "{fast} vs {naive}");
        }
    }

    #[test]
    fn error_is_symmetric_and_bounded_by_max_segment_count() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..50 {
            let words = rng.random_range(2..30);
            let mut pick = || -> Vec<usize> {
                (2..=words).filter(|_| rng.random_bool(0.4)).collect()
            };
            let a = seg(words, &pick());
            let b = seg(words, &pick());
            let ab = segmentation_error(&a, &b).unwrap();
            let ba = segmentation_error(&b, &a).unwrap();
            assert_eq!(ab, ba);
            let bound = (a.segment_count().max(b.segment_count()) - 1) as f64;
            assert!(ab <= bound + 1e-12, "{ab} > {bound}");
        }
    }

    // ---- match probabilities ----

    fn chain17() -> ConceptDag {
        // A 17-node chain: depth D = 17, the worked similarity setting.
        let nodes: Vec<ConceptNode> = (0..17)
            .map(|i| ConceptNode::new(format!("n{i:02}"), Some(format!("w{i}")), None))
            .collect();
        let edges = (1..17)
            .map(|i| (id(&format!("n{i:02}")), id(&format!("n{:02}", i - 1))))
            .collect();
        ConceptDag::from_parts(nodes, edges).unwrap()
    }

    #[test]
    fn identical_concepts_match_with_probability_one() {
        let dag = chain17();
        assert_eq!(match_probability(&dag, &id("n03"), &id("n03")).unwrap(), 1.0);
    }

    #[test]
    fn adjacent_concepts_at_depth_17_match_worked_value() {
        let dag = chain17();
        assert_eq!(dag.max_depth(), 17);
        let p = match_probability(&dag, &id("n03"), &id("n04")).unwrap();
        assert!((p - 17f64.ln() / 34f64.ln()).abs() < 1e-12);
        assert!((p - 0.8034).abs() < 1e-4);
    }

    #[test]
    fn disconnected_concepts_never_match() {
        let dag = ConceptDag::from_parts(
            vec![
                ConceptNode::new("a", Some("a".into()), None),
                ConceptNode::new("b", Some("b".into()), None),
                ConceptNode::new("x", Some("x".into()), None),
                ConceptNode::new("y", Some("y".into()), None),
            ],
            vec![(id("b"), id("a")), (id("y"), id("x"))],
        )
        .unwrap();
        assert_eq!(match_probability(&dag, &id("a"), &id("y")).unwrap(), 0.0);
    }

    #[test]
    fn single_reference_marginal_is_the_pair_probability() {
        let mp = MatchProbabilities::from_pair_matrix(
            vec![id("c")],
            vec![id("C")],
            vec![vec![0.5]],
        )
        .unwrap();
        assert_eq!(mp.produced()[0].1, 0.5);
    }

    #[test]
    fn two_half_references_combine_to_three_quarters() {
        let mp = MatchProbabilities::from_pair_matrix(
            vec![id("c")],
            vec![id("C1"), id("C2")],
            vec![vec![0.5, 0.5]],
        )
        .unwrap();
        assert!((mp.produced()[0].1 - 0.75).abs() < 1e-15);
    }

    #[test]
    fn certain_pair_forces_marginal_one() {
        let mp = MatchProbabilities::from_pair_matrix(
            vec![id("c")],
            vec![id("C1"), id("C2")],
            vec![vec![1.0, 0.3]],
        )
        .unwrap();
        assert_eq!(mp.produced()[0].1, 1.0);
    }

    #[test]
    fn empty_sides_are_rejected() {
        assert!(matches!(
            MatchProbabilities::from_pair_matrix(vec![], vec![id("C")], vec![]),
            Err(EvalError::EmptyProduced)
        ));
        assert!(matches!(
            MatchProbabilities::from_pair_matrix(vec![id("c")], vec![], vec![vec![]]),
            Err(EvalError::EmptyReference)
        ));
    }

    #[test]
    fn aggregation_through_a_taxonomy_flags_unreachable_pairs() {
        let dag = ConceptDag::from_parts(
            vec![
                ConceptNode::new("a", Some("a".into()), None),
                ConceptNode::new("b", Some("b".into()), None),
                ConceptNode::new("x", Some("x".into()), None),
                ConceptNode::new("y", Some("y".into()), None),
            ],
            vec![(id("b"), id("a")), (id("y"), id("x"))],
        )
        .unwrap();
        let mp =
            aggregate_probabilities(&[id("b")], &[id("a"), id("y")], &dag).unwrap();
        assert_eq!(mp.unreachable_pairs(), &[(id("b"), id("y"))]);
        let (p, _r) = precision_recall(&mp);
        assert!(p > 0.0, "reachable reference still contributes");
    }

    #[test]
    fn marginals_are_monotone_in_the_reference_set() {
        let base = MatchProbabilities::from_pair_matrix(
            vec![id("c")],
            vec![id("C1")],
            vec![vec![0.4]],
        )
        .unwrap();
        let extended = MatchProbabilities::from_pair_matrix(
            vec![id("c")],
            vec![id("C1"), id("C2")],
            vec![vec![0.4, 0.2]],
        )
        .unwrap();
        assert!(extended.produced()[0].1 >= base.produced()[0].1);
    }

    // ---- precision / recall / F / accuracy ----

    #[test]
    fn all_ones_gives_perfect_scores() {
        let mp = MatchProbabilities::from_pair_matrix(
            vec![id("c1"), id("c2")],
            vec![id("C1")],
            vec![vec![1.0], vec![1.0]],
        )
        .unwrap();
        let (p, r) = precision_recall(&mp);
        assert_eq!((p, r), (1.0, 1.0));
        assert_eq!(accuracy(&mp), 1.0);
    }

    #[test]
    fn identical_singletons_are_perfect() {
        let dag = chain17();
        let mp = aggregate_probabilities(&[id("n05")], &[id("n05")], &dag).unwrap();
        let (p, r) = precision_recall(&mp);
        assert_eq!((p, r), (1.0, 1.0));
    }

    #[test]
    fn f_measure_values() {
        assert_eq!(f_measure(0.7, 0.7, 1.0).unwrap(), 0.7);
        assert!((f_measure(1.0, 0.5, 1.0).unwrap() - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(f_measure(0.0, 0.0, 1.0).unwrap(), 0.0);
        assert!(matches!(f_measure(0.5, 0.5, 0.0), Err(EvalError::InvalidBeta(_))));
        assert!(matches!(f_measure(0.5, 0.5, -1.0), Err(EvalError::InvalidBeta(_))));
    }

    #[test]
    fn f_measure_lies_between_precision_and_recall() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..100 {
            let p: f64 = rng.random_range(0.01..1.0);
            let r: f64 = rng.random_range(0.01..1.0);
            let b: f64 = rng.random_range(0.1..4.0);
            let f = f_measure(p, r, b).unwrap();
            assert!(f >= p.min(r) - 1e-12 && f <= p.max(r) + 1e-12);
        }
    }

    #[test]
    fn accuracy_is_the_product_of_produced_marginals() {
        let mp = MatchProbabilities::from_marginals(
            vec![(id("a"), 0.9), (id("b"), 0.8)],
            vec![(id("R"), 1.0)],
        )
        .unwrap();
        assert!((accuracy(&mp) - 0.72).abs() < 1e-12);
        let with_zero = MatchProbabilities::from_marginals(
            vec![(id("a"), 0.0), (id("b"), 0.8)],
            vec![(id("R"), 1.0)],
        )
        .unwrap();
        assert_eq!(accuracy(&with_zero), 0.0);
    }

    // ---- threshold sweep ----

    /// The nine produced and eight reference marginals of the worked
    /// evaluation table.
    fn worked_table() -> MatchProbabilities {
        let produced = [
            ("p393453", 0.99999954),
            ("p358943", 0.99999950),
            ("p359232", 0.99999866),
            ("p358845", 0.99999859),
            ("p460912", 0.94022170),
            ("p404568", 0.91138175),
            ("p402831", 0.90216440),
            ("p423743", 0.88603944),
            ("p422997", 0.88603944),
        ];
        let reference = [
            ("r22607", 0.98911961),
            ("r22606", 0.97798610),
            ("r84062", 0.74886709),
            ("r395795", 0.74886709),
            ("r391576", 0.74886709),
            ("r364931", 0.71981943),
            ("r393495", 0.71068739),
            ("r364267", 0.71068739),
        ];
        MatchProbabilities::from_marginals(
            produced.iter().map(|&(c, p)| (id(c), p)).collect(),
            reference.iter().map(|&(c, p)| (id(c), p)).collect(),
        )
        .unwrap()
    }

    #[test]
    fn sweep_at_favored_threshold_matches_the_worked_fractions() {
        let points = threshold_sweep(&worked_table(), &[0.97]);
        let point = &points[0];
        assert_eq!(point.produced_survivors, 4);
        assert_eq!(point.reference_survivors, 2);
        assert!((point.precision.unwrap() - 3.99999629 / 4.0).abs() < 1e-8);
        assert!((point.recall - 1.96710571 / 8.0).abs() < 1e-8);
    }

    #[test]
    fn sweep_at_zero_reproduces_full_precision_recall_for_positive_marginals() {
        let mp = worked_table();
        let (p, r) = precision_recall(&mp);
        let point = &threshold_sweep(&mp, &[0.0])[0];
        assert_eq!(point.precision.unwrap(), p);
        assert_eq!(point.recall, r);
        assert_eq!(point.accuracy.unwrap(), accuracy(&mp));
    }

    #[test]
    fn extreme_threshold_keeps_only_the_top_produced_concepts() {
        // Strictly above 0.999999 only the top two produced marginals
        // survive (0.99999866 < 0.999999); the reference side is wiped out.
        let point = &threshold_sweep(&worked_table(), &[0.999999])[0];
        assert_eq!(point.produced_survivors, 2);
        assert_eq!(point.reference_survivors, 0);
        assert_eq!(point.recall, 0.0);
        let expected = (0.99999954 + 0.99999950) / 2.0;
        assert!((point.precision.unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn threshold_eliminating_all_produced_flags_the_point_undefined() {
        let mp = MatchProbabilities::from_marginals(
            vec![(id("a"), 0.3)],
            vec![(id("R"), 0.9)],
        )
        .unwrap();
        let point = &threshold_sweep(&mp, &[0.5])[0];
        assert_eq!(point.precision, None);
        assert_eq!(point.f_measure, None);
        assert_eq!(point.accuracy, None);
        assert_eq!(point.recall, 0.9);
    }

    // ---- exact-match baseline ----

    #[test]
    fn exact_match_scores() {
        let (p, r, f) = evaluate_exact_match(&[id("a"), id("b")], &[id("b"), id("c")]);
        assert_eq!((p, r, f), (0.5, 0.5, 0.5));
        let (p, r, f) = evaluate_exact_match(&[id("a")], &[id("b")]);
        assert_eq!((p, r, f), (0.0, 0.0, 0.0));
        let same = [id("x"), id("y"), id("z")];
        assert_eq!(evaluate_exact_match(&same, &same), (1.0, 1.0, 1.0));
    }

    // ---- corpus synthesis ----

    #[test]
    fn corpus_boundaries_fall_at_document_junctions() {
        let docs: Vec<String> = vec![
            "a b c".into(),
            "d e".into(),
            "f g h i".into(),
            "j".into(),
            "k l".into(),
        ];
        let (text, real) = synthesize_eval_corpus(&docs, 5, 7).unwrap();
        assert_eq!(real.segment_count(), 5);
        assert_eq!(real.word_count(), 12);
        assert_eq!(text.split_whitespace().count(), 12);
        // Each start is one past a cumulative document length.
        let mut words_seen = 0;
        let mut starts = real.starts().iter();
        for line in text.lines().take(4) {
            words_seen += line.split_whitespace().count();
            assert_eq!(starts.next(), Some(&(words_seen + 1)));
        }
    }

    #[test]
    fn corpus_synthesis_is_seed_stable() {
        let docs: Vec<String> = (0..10).map(|i| format!("w{i} x{i} y{i}")).collect();
        let a = synthesize_eval_corpus(&docs, 5, 42).unwrap();
        let b = synthesize_eval_corpus(&docs, 5, 42).unwrap();
        assert_eq!(a.0, b.0);
        assert_eq!(a.1, b.1);
        let c = synthesize_eval_corpus(&docs, 5, 43).unwrap();
        assert!(a.0 != c.0 || a.1 != c.1, "different seed, different corpus");
    }

    #[test]
    fn corpus_synthesis_validates_inputs() {
        let docs: Vec<String> = vec!["a".into(), "b".into()];
        assert!(matches!(
            synthesize_eval_corpus(&docs, 1, 0),
            Err(EvalError::BadGroupSize(1))
        ));
        assert!(matches!(
            synthesize_eval_corpus(&docs, 5, 0),
            Err(EvalError::InsufficientDocs { have: 2, need: 5 })
        ));
    }

    // ---- Monte-Carlo expectation check (small version) ----

    #[test]
    fn simulated_matching_converges_to_expected_precision_and_recall() {
        let produced: Vec<ConceptId> = (0..3).map(|i| id(&format!("p{i}"))).collect();
        let reference: Vec<ConceptId> = (0..4).map(|i| id(&format!("r{i}"))).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let pairs: Vec<Vec<f64>> = (0..3)
            .map(|_| (0..4).map(|_| rng.random_range(0.0..1.0)).collect())
            .collect();
        let mp = MatchProbabilities::from_pair_matrix(
            produced.clone(),
            reference.clone(),
            pairs.clone(),
        )
        .unwrap();
        let (p, r) = precision_recall(&mp);

        let samples = 20_000;
        let sorted_pairs = mp.pairs().unwrap();
        let (mut p_sum, mut p_sq, mut r_sum, mut r_sq) = (0.0, 0.0, 0.0, 0.0);
        for _ in 0..samples {
            let matched: Vec<Vec<bool>> = sorted_pairs
                .iter()
                .map(|row| row.iter().map(|&q| rng.random_bool(q)).collect())
                .collect();
            let frac_p = matched.iter().filter(|row| row.iter().any(|&m| m)).count()
                as f64
                / 3.0;
            let frac_r = (0..4)
                .filter(|&k| matched.iter().any(|row| row[k]))
                .count() as f64
                / 4.0;
            p_sum += frac_p;
            p_sq += frac_p * frac_p;
            r_sum += frac_r;
            r_sq += frac_r * frac_r;
        }
        let check = |sum: f64, sq: f64, expected: f64| {
            let n = samples as f64;
            let mean = sum / n;
            let var = (sq / n - mean * mean).max(0.0);
            let sigma = (var / n).sqrt();
            assert!(
                (mean - expected).abs() <= 3.0 * sigma + 1e-9,
                "mean {mean} expected {expected} sigma {sigma}"
            );
        };
        check(p_sum, p_sq, p);
        check(r_sum, r_sq, r);
    }
}
