//! DOVER-style consensus combination of speaker-diarization hypotheses.
//!
//! Given N diarization outputs for the same recording, the combiner maps
//! their anonymous speaker labels into a shared name space using a
//! DER-minimizing injective assignment, then decides each region of the
//! timeline by weighted majority vote. The crate also provides an exact
//! integer-tick DER scorer with optimal speaker mapping, RTTM and JSON
//! I/O, centroid-based input ranking, and a synthetic-data experiment
//! harness.
//!
//! All time arithmetic uses integer millisecond ticks and half-open
//! intervals, so results are exact and fully deterministic.

pub mod assignment;
pub mod dover;
pub mod rttm;
pub mod scoring;
pub mod synth;
pub mod timeline;

/// Time tick in integer milliseconds.
pub type Tick = i64;

pub use dover::{
    canonical_speaker_names, dover_combine, incremental_map, make_labels_disjoint,
    multi_anchor_combine, rank_inputs, rank_weights, vote, Anchor, CombineOptions, CombineOutcome,
    DoverError, TiePolicy,
};
pub use scoring::{
    optimal_mapping, pairwise_der_matrix, score, LabelMapping, MappingEntry, ScoreError,
    ScoreReport,
};
pub use timeline::{build_regions, overlap_matrix, Diarization, TimelineError, Turn};
