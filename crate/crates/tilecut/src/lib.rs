//! Topic segmentation and concept-hierarchy annotation.
//!
//! The pipeline has three stages:
//!
//! 1. [`segmenter`] splits a document into topically homogeneous blocks
//!    (TextTiling: windowed TF-IDF vectors, Dice similarity, smoothed-curve
//!    minima).
//! 2. [`extractor`] maps each block's lemmas to leaf concepts of a taxonomy
//!    ([`taxonomy`]) and generalizes them to an optimal cut in the induced
//!    sub-hierarchy.
//! 3. [`evaluation`] scores segmentations (pairwise position error) and
//!    extracted concept sets (probabilistic precision/recall built on
//!    Leacock-Chodorow similarity).
//!
//! [`lexicon`] supplies the surface-form dictionary driving tokenization,
//! and [`synth`] generates seeded random taxonomies and corpora for
//! benchmarks and tests.

pub mod evaluation;
pub mod extractor;
pub mod lexicon;
pub mod segmenter;
pub mod synth;
pub mod taxonomy;
