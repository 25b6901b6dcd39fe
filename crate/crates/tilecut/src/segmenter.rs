//! Topic segmentation via TextTiling.
//!
//! The pipeline: tokenize, drop stopwords, partition the kept tokens into
//! fixed-size windows, weight window terms by within-window frequency times
//! inverse window frequency, plot the Dice similarity of adjacent windows,
//! smooth the curve, and place boundaries at local minima scored by how far
//! they dip below their flanking maxima. Everything is deterministic; there
//! is no randomness anywhere in the pipeline.

use std::collections::{BTreeMap, BTreeSet};

use crate::lexicon::{filter_stopwords, tokenize, Lexicon, Token};

/// Which Dice denominator to use. `Normalized` is the standard bounded form
/// `2·Σuv / (Σu² + Σv²)`; `ProductCompat` reproduces the unnormalized
/// product denominator `2·Σuv / (Σu² · Σv²)` for comparison runs. Values
/// are only guaranteed to stay in [0,1] under `Normalized`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DiceForm {
    #[default]
    Normalized,
    ProductCompat,
}

#[derive(Debug, Clone)]
pub struct SegmenterConfig {
    /// Tokens per window (the last window may be shorter).
    pub window_size: usize,
    /// Fraction of the distance toward the neighbor midpoint each smoothing
    /// iteration moves an interior point; in (0, 1].
    pub lambda: f64,
    pub smooth_iterations: usize,
    /// Drop boundaries whose relevance is below this.
    pub min_relevance: Option<f64>,
    /// Keep only this many boundaries, strongest first.
    pub max_boundaries: Option<usize>,
    pub dice: DiceForm,
}

impl Default for SegmenterConfig {
    fn default() -> Self {
        SegmenterConfig {
            window_size: 25,
            lambda: 0.5,
            smooth_iterations: 2,
            min_relevance: None,
            max_boundaries: None,
            dice: DiceForm::Normalized,
        }
    }
}

/// One window over the kept-token stream.
#[derive(Debug, Clone)]
pub struct Window {
    pub index: usize,
    /// (first, last) indices into the token list given to `make_windows`,
    /// inclusive.
    pub token_span: (usize, usize),
    /// Term → within-window occurrence count.
    pub counts: BTreeMap<String, u32>,
}

/// TF-IDF weights of one window; absent terms weigh zero.
#[derive(Debug, Clone, Default)]
pub struct WeightedVector {
    pub weights: BTreeMap<String, f64>,
}

/// Source position of the gap between two adjacent windows: the first token
/// of the right window, in original-stream and character coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CurveEdge {
    pub token_offset: usize,
    pub char_offset: usize,
}

/// Similarity per adjacent window pair; `values.len() == windows - 1`.
#[derive(Debug, Clone)]
pub struct SimilarityCurve {
    pub values: Vec<f64>,
    /// One edge per gap, parallel to `values`.
    pub edges: Vec<CurveEdge>,
    /// Values after each smoothing iteration; empty on a raw curve.
    pub smoothing_trace: Vec<Vec<f64>>,
}

impl SimilarityCurve {
    /// A bare curve for direct inspection; gap g is given the positions of a
    /// unit-token windowing, i.e. token and char offset g + 1.
    pub fn from_values(values: Vec<f64>) -> SimilarityCurve {
        let edges = (0..values.len())
            .map(|g| CurveEdge { token_offset: g + 1, char_offset: g + 1 })
            .collect();
        SimilarityCurve { values, edges, smoothing_trace: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Boundary {
    /// Index of the similarity-curve gap the boundary sits in.
    pub gap_index: usize,
    /// Original-stream index of the first token of the new segment.
    pub token_offset: usize,
    /// Character offset of that token in the source text.
    pub char_offset: usize,
    /// Mean of the flanking local maxima minus the minimum value; ≥ 0.
    pub relevance: f64,
}

/// Full segmentation result: everything the pipeline produced, so callers
/// can inspect intermediate stages (curve dumps, window layout) as well as
/// the final segments.
#[derive(Debug)]
pub struct DocumentSegmentation {
    /// The complete token stream, stopwords included.
    pub tokens: Vec<Token>,
    /// Indices into `tokens` of the non-stopword tokens the windows cover.
    pub kept: Vec<usize>,
    pub windows: Vec<Window>,
    pub raw_curve: SimilarityCurve,
    pub smoothed_curve: SimilarityCurve,
    pub boundaries: Vec<Boundary>,
    /// Half-open `(start, end)` ranges over `tokens`; empty for an empty
    /// document, otherwise a partition of the whole stream.
    pub segments: Vec<(usize, usize)>,
}

/// The vocabulary term a token contributes: its lemma when all candidate
/// readings agree on one, otherwise the surface form; lowercased either way.
fn term_of(token: &Token) -> String {
    let lemmas: BTreeSet<&str> =
        token.lemma_candidates.iter().map(|c| c.lemma.as_str()).collect();
    if lemmas.len() == 1 {
        lemmas.iter().next().unwrap().to_lowercase()
    } else {
        token.surface.to_lowercase()
    }
}

/// Partitions `tokens` (already stopword-filtered) into ⌈len/size⌉ windows;
/// every window holds exactly `window_size` tokens except possibly the last.
pub fn make_windows(tokens: &[Token], window_size: usize) -> Vec<Window> {
    assert!(window_size >= 1, "window_size must be positive");
    let mut windows = Vec::new();
    for (index, chunk) in tokens.chunks(window_size).enumerate() {
        let first = index * window_size;
        let mut counts: BTreeMap<String, u32> = BTreeMap::new();
        for token in chunk {
            *counts.entry(term_of(token)).or_insert(0) += 1;
        }
        windows.push(Window {
            index,
            token_span: (first, first + chunk.len() - 1),
            counts,
        });
    }
    windows
}

/// Weights every window: `w = g · ln(N / df)` with `g` the within-window
/// count and `df` the number of windows containing the term. Terms present
/// in all windows weigh zero and are omitted. The final partial window
/// participates in `df` like any other.
pub fn weight_windows(windows: &[Window]) -> Vec<WeightedVector> {
    let n = windows.len();
    let mut df: BTreeMap<&str, usize> = BTreeMap::new();
    for w in windows {
        for term in w.counts.keys() {
            *df.entry(term).or_insert(0) += 1;
        }
    }
    windows
        .iter()
        .map(|w| {
            let mut weights = BTreeMap::new();
            for (term, &g) in &w.counts {
                let d = df[term.as_str()];
                if d < n {
                    let w_ij = g as f64 * (n as f64 / d as f64).ln();
                    weights.insert(term.clone(), w_ij);
                }
            }
            WeightedVector { weights }
        })
        .collect()
}

/// Normalized Dice similarity `2·Σuv / (Σu² + Σv²)`, in [0,1] for
/// nonnegative weights; two zero vectors score 0.
pub fn dice_similarity(u: &WeightedVector, v: &WeightedVector) -> f64 {
    let (dot, su2, sv2) = dice_terms(u, v);
    if su2 + sv2 == 0.0 {
        0.0
    } else {
        2.0 * dot / (su2 + sv2)
    }
}

/// Product-denominator Dice variant `2·Σuv / (Σu² · Σv²)`; unnormalized,
/// kept only for comparison runs.
pub fn dice_similarity_product(u: &WeightedVector, v: &WeightedVector) -> f64 {
    let (dot, su2, sv2) = dice_terms(u, v);
    if su2 * sv2 == 0.0 {
        0.0
    } else {
        2.0 * dot / (su2 * sv2)
    }
}

fn dice_terms(u: &WeightedVector, v: &WeightedVector) -> (f64, f64, f64) {
    let mut dot = 0.0;
    for (term, &uw) in &u.weights {
        if let Some(&vw) = v.weights.get(term) {
            dot += uw * vw;
        }
    }
    let su2: f64 = u.weights.values().map(|w| w * w).sum();
    let sv2: f64 = v.weights.values().map(|w| w * w).sum();
    (dot, su2, sv2)
}

/// Similarity of each adjacent vector pair, in order.
pub fn similarity_values(vectors: &[WeightedVector], form: DiceForm) -> Vec<f64> {
    let sim = match form {
        DiceForm::Normalized => dice_similarity,
        DiceForm::ProductCompat => dice_similarity_product,
    };
    vectors.windows(2).map(|pair| sim(&pair[0], &pair[1])).collect()
}

/// Runs `iterations` smoothing passes: each interior point moves fraction
/// `lambda` of the way toward the midpoint of its neighbors, all points
/// updated simultaneously; the endpoints never move. Snapshots of every
/// iteration are recorded in the returned curve's `smoothing_trace`.
pub fn smooth_curve(curve: &SimilarityCurve, lambda: f64, iterations: usize) -> SimilarityCurve {
    assert!(lambda > 0.0 && lambda <= 1.0, "lambda must be in (0, 1]");
    let mut values = curve.values.clone();
    let mut trace = Vec::with_capacity(iterations);
    for _ in 0..iterations {
        if values.len() > 2 {
            let prev = values.clone();
            for i in 1..prev.len() - 1 {
                let midpoint = (prev[i - 1] + prev[i + 1]) / 2.0;
                values[i] = prev[i] + lambda * (midpoint - prev[i]);
            }
        }
        trace.push(values.clone());
    }
    SimilarityCurve { values, edges: curve.edges.clone(), smoothing_trace: trace }
}

/// Places one boundary at every interior local minimum of the curve. A
/// plateau of equal minimal values yields a single boundary at its leftmost
/// index. Relevance is the mean of the last local maximum before and the
/// first local maximum after the minimum, minus the minimum value; the
/// flanking maxima are found by climbing while the curve strictly rises.
pub fn detect_boundaries(curve: &SimilarityCurve) -> Vec<Boundary> {
    let v = &curve.values;
    let n = v.len();
    let mut boundaries = Vec::new();
    if n < 3 {
        return boundaries;
    }
    for i in 1..n - 1 {
        // Leftmost plateau index only: the immediate left value must differ.
        if v[i - 1] <= v[i] {
            continue;
        }
        // The nearest differing value to the right must be higher.
        let mut r = i + 1;
        while r < n && v[r] == v[i] {
            r += 1;
        }
        if r == n || v[r] < v[i] {
            continue;
        }
        let left_max = climb(v, i, -1);
        let right_max = climb(v, i, 1);
        boundaries.push(Boundary {
            gap_index: i,
            token_offset: curve.edges[i].token_offset,
            char_offset: curve.edges[i].char_offset,
            relevance: (left_max + right_max) / 2.0 - v[i],
        });
    }
    boundaries
}

/// From `start`, cross the minimum's own plateau of equal values, then walk
/// in `dir` while the curve strictly rises; returns the value where the
/// climb stops (a plateau or a dip ends it).
fn climb(v: &[f64], start: usize, dir: isize) -> f64 {
    let step = |i: usize| {
        let next = i as isize + dir;
        (next >= 0 && (next as usize) < v.len()).then_some(next as usize)
    };
    let mut i = start;
    while let Some(next) = step(i) {
        if v[next] != v[start] {
            break;
        }
        i = next;
    }
    while let Some(next) = step(i) {
        if v[next] <= v[i] {
            break;
        }
        i = next;
    }
    v[i]
}

/// Applies the relevance floor, then keeps the `max_count` strongest
/// boundaries (ties broken toward the earlier position), re-sorted by
/// position.
pub fn filter_boundaries(
    mut boundaries: Vec<Boundary>,
    min_relevance: Option<f64>,
    max_count: Option<usize>,
) -> Vec<Boundary> {
    if let Some(floor) = min_relevance {
        boundaries.retain(|b| b.relevance >= floor);
    }
    if let Some(cap) = max_count {
        if boundaries.len() > cap {
            boundaries.sort_by(|a, b| {
                b.relevance
                    .partial_cmp(&a.relevance)
                    .unwrap()
                    .then(a.gap_index.cmp(&b.gap_index))
            });
            boundaries.truncate(cap);
            boundaries.sort_by_key(|b| b.gap_index);
        }
    }
    boundaries
}

/// The full pipeline for one document. Boundaries land on window edges; a
/// document yielding fewer than four windows (or no kept tokens at all)
/// comes back as a single segment.
pub fn segment(text: &str, lexicon: &Lexicon, config: &SegmenterConfig) -> DocumentSegmentation {
    let tokens = tokenize(text, lexicon);
    let kept: Vec<usize> =
        (0..tokens.len()).filter(|&i| !tokens[i].is_stopword).collect();
    let kept_tokens: Vec<Token> = {
        let filtered = filter_stopwords(&tokens, lexicon);
        debug_assert_eq!(filtered.len(), kept.len());
        filtered
    };
    let windows = make_windows(&kept_tokens, config.window_size);
    let vectors = weight_windows(&windows);
    let values = similarity_values(&vectors, config.dice);
    let edges: Vec<CurveEdge> = windows
        .iter()
        .skip(1)
        .map(|w| {
            let orig = kept[w.token_span.0];
            CurveEdge { token_offset: orig, char_offset: tokens[orig].char_span.0 }
        })
        .collect();
    let raw_curve = SimilarityCurve { values, edges, smoothing_trace: Vec::new() };
    let smoothed_curve = smooth_curve(&raw_curve, config.lambda, config.smooth_iterations);
    let boundaries = filter_boundaries(
        detect_boundaries(&smoothed_curve),
        config.min_relevance,
        config.max_boundaries,
    );
    let mut segments = Vec::new();
    if !tokens.is_empty() {
        let mut start = 0;
        for b in &boundaries {
            segments.push((start, b.token_offset));
            start = b.token_offset;
        }
        segments.push((start, tokens.len()));
    }
    DocumentSegmentation {
        tokens,
        kept,
        windows,
        raw_curve,
        smoothed_curve,
        boundaries,
        segments,
    }
}

// ---------------------------------------------------------------------------
