//! Diarization error rate with optimal injective speaker-label assignment.
//!
//! The label assignment maximizes total matched overlap duration, which for
//! fixed segmentations is the same as minimizing DER because the reference
//! speech time is constant. The DER denominator is total scored reference
//! speech time.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::assignment::max_assignment_value;
use crate::timeline::{overlap_matrix, Diarization};
use crate::Tick;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ScoreError {
    #[error("reference contains no scored speech; error rates are undefined")]
    EmptyReference,
}

/// One `source → target` correspondence with its shared speech duration.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MappingEntry {
    pub source: String,
    pub target: String,
    pub shared: Tick,
}

/// An injective label correspondence between two hypotheses.
///
/// No two entries share a source and no two share a target. Entries are
/// kept sorted by `(source, target)`.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct LabelMapping {
    entries: Vec<MappingEntry>,
}

impl LabelMapping {
    pub fn entries(&self) -> &[MappingEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Sum of shared durations over all entries.
    pub fn matched_total(&self) -> Tick {
        self.entries.iter().map(|e| e.shared).sum()
    }

    pub fn target_of(&self, source: &str) -> Option<&str> {
        self.entries
            .iter()
            .find(|e| e.source == source)
            .map(|e| e.target.as_str())
    }

    /// The mapping as a source → target label map.
    pub fn to_label_map(&self) -> BTreeMap<String, String> {
        self.entries
            .iter()
            .map(|e| (e.source.clone(), e.target.clone()))
            .collect()
    }
}

/// Builds the max-overlap injective mapping from sparse pair durations.
///
/// Among all assignments achieving the maximal total, the one whose sorted
/// `(source, target)` entry sequence is lexicographically smallest is
/// returned, so ties break deterministically. Pairs with zero overlap never
/// map; such labels are retained unmapped by callers.
pub(crate) fn best_mapping(pairs: &BTreeMap<(String, String), Tick>) -> LabelMapping {
    let sources: Vec<&String> = pairs
        .keys()
        .map(|(s, _)| s)
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let targets: Vec<&String> = pairs
        .keys()
        .map(|(_, t)| t)
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let weight = |r: usize, c: usize| -> i64 {
        pairs
            .get(&(sources[r].clone(), targets[c].clone()))
            .copied()
            .unwrap_or(0)
    };
    let matrix: Vec<Vec<i64>> = (0..sources.len())
        .map(|r| (0..targets.len()).map(|c| weight(r, c)).collect())
        .collect();
    let best_total = max_assignment_value(&matrix);

    // Greedy refinement: scan candidate pairs in (source, target) order and
    // force a pair whenever some optimal assignment still contains all
    // forced pairs plus it. A single forward pass suffices because forcing
    // only shrinks the feasible set.
    let mut used_source = vec![false; sources.len()];
    let mut used_target = vec![false; targets.len()];
    let mut forced_total = 0i64;
    let mut entries = Vec::new();
    for r in 0..sources.len() {
        for c in 0..targets.len() {
            if used_source[r] || used_target[c] || matrix[r][c] == 0 {
                continue;
            }
            let rest: Vec<Vec<i64>> = (0..sources.len())
                .filter(|&rr| !used_source[rr] && rr != r)
                .map(|rr| {
                    (0..targets.len())
                        .filter(|&cc| !used_target[cc] && cc != c)
                        .map(|cc| matrix[rr][cc])
                        .collect()
                })
                .collect();
            if forced_total + matrix[r][c] + max_assignment_value(&rest) == best_total {
                forced_total += matrix[r][c];
                used_source[r] = true;
                used_target[c] = true;
                entries.push(MappingEntry {
                    source: sources[r].clone(),
                    target: targets[c].clone(),
                    shared: matrix[r][c],
                });
            }
        }
    }
    debug_assert_eq!(forced_total, best_total);
    LabelMapping { entries }
}

/// The injective hypothesis→reference label assignment maximizing total
/// matched overlap duration. Labels whose best match has zero overlap stay
/// unmapped.
pub fn optimal_mapping(hyp: &Diarization, reference: &Diarization) -> LabelMapping {
    best_mapping(&overlap_matrix(hyp, reference).entries)
}

/// Miss, false alarm and speaker error durations plus derived rates for one
/// (hypothesis, reference) pair.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreReport {
    pub miss: Tick,
    pub false_alarm: Tick,
    pub speaker_error: Tick,
    /// Scored reference speech, the DER denominator.
    pub ref_speech_total: Tick,
    pub der: f64,
    pub spkerr_rate: f64,
    pub mapping: LabelMapping,
}

/// Tallies accumulated over the scored (non-excluded) part of the timeline.
#[derive(Debug, Default)]
struct ScoredTallies {
    pairs: BTreeMap<(String, String), Tick>,
    hyp_speech: Tick,
    ref_speech: Tick,
    both_speech: Tick,
}

fn merge_intervals(mut intervals: Vec<(Tick, Tick)>) -> Vec<(Tick, Tick)> {
    intervals.sort_unstable();
    let mut merged: Vec<(Tick, Tick)> = Vec::with_capacity(intervals.len());
    for (b, e) in intervals {
        match merged.last_mut() {
            Some(last) if b <= last.1 => last.1 = last.1.max(e),
            _ => merged.push((b, e)),
        }
    }
    merged
}

fn scored_tallies(hyp: &Diarization, reference: &Diarization, collar: Tick) -> ScoredTallies {
    // The collar excludes ±collar around every reference turn boundary
    // from all tallies, including the DER denominator.
    let excluded: Vec<(Tick, Tick)> = if collar > 0 {
        merge_intervals(
            reference
                .turns()
                .iter()
                .flat_map(|t| [t.begin, t.end])
                .map(|b| (b - collar, b + collar))
                .collect(),
        )
    } else {
        Vec::new()
    };

    let mut bounds: BTreeSet<Tick> = BTreeSet::new();
    for d in [hyp, reference] {
        for t in d.turns() {
            bounds.insert(t.begin);
            bounds.insert(t.end);
        }
    }
    for &(b, e) in &excluded {
        bounds.insert(b);
        bounds.insert(e);
    }
    let boundaries: Vec<Tick> = bounds.into_iter().collect();

    let mut out = ScoredTallies::default();
    let mut hyp_cursor = hyp.turns().iter().peekable();
    let mut ref_cursor = reference.turns().iter().peekable();
    let mut excl_cursor = excluded.iter().peekable();
    for window in boundaries.windows(2) {
        let (begin, end) = (window[0], window[1]);
        let len = end - begin;
        while excl_cursor.peek().is_some_and(|&&(_, e)| e <= begin) {
            excl_cursor.next();
        }
        let is_excluded = excl_cursor.peek().is_some_and(|&&(b, _)| b <= begin);
        while hyp_cursor.peek().is_some_and(|t| t.end <= begin) {
            hyp_cursor.next();
        }
        while ref_cursor.peek().is_some_and(|t| t.end <= begin) {
            ref_cursor.next();
        }
        if is_excluded {
            continue;
        }
        let hyp_label = hyp_cursor
            .peek()
            .filter(|t| t.begin <= begin)
            .map(|t| t.label.as_str());
        let ref_label = ref_cursor
            .peek()
            .filter(|t| t.begin <= begin)
            .map(|t| t.label.as_str());
        if hyp_label.is_some() {
            out.hyp_speech += len;
        }
        if ref_label.is_some() {
            out.ref_speech += len;
        }
        if let (Some(h), Some(r)) = (hyp_label, ref_label) {
            out.both_speech += len;
            *out.pairs.entry((h.to_string(), r.to_string())).or_insert(0) += len;
        }
    }
    out
}

/// Scores a hypothesis against a reference under the optimal label mapping.
///
/// `miss` is reference speech the hypothesis left silent, `false_alarm` is
/// hypothesis speech outside reference speech, and `speaker_error` is time
/// where both speak but the mapped labels differ. A positive collar
/// excludes ±collar around every reference turn boundary from all tallies.
pub fn score(
    hyp: &Diarization,
    reference: &Diarization,
    collar: Tick,
) -> Result<ScoreReport, ScoreError> {
    let tallies = scored_tallies(hyp, reference, collar);
    if tallies.ref_speech == 0 {
        return Err(ScoreError::EmptyReference);
    }
    let mapping = best_mapping(&tallies.pairs);
    let speaker_error = tallies.both_speech - mapping.matched_total();
    let miss = tallies.ref_speech - tallies.both_speech;
    let false_alarm = tallies.hyp_speech - tallies.both_speech;
    let denom = tallies.ref_speech as f64;
    Ok(ScoreReport {
        miss,
        false_alarm,
        speaker_error,
        ref_speech_total: tallies.ref_speech,
        der: (miss + false_alarm + speaker_error) as f64 / denom,
        spkerr_rate: speaker_error as f64 / denom,
        mapping,
    })
}

/// N×N matrix with entry `(i, j)` = DER of input `i` scored against input
/// `j` as reference; the diagonal is zero.
pub fn pairwise_der_matrix(
    inputs: &[Diarization],
    collar: Tick,
) -> Result<Vec<Vec<f64>>, ScoreError> {
    let n = inputs.len();
    let mut matrix = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            if i != j {
                matrix[i][j] = score(&inputs[i], &inputs[j], collar)?.der;
            }
        }
    }
    Ok(matrix)
}

/// Row means of the pairwise DER matrix over the off-diagonal entries:
/// each input's average DER to all the others.
pub fn average_der_to_others(inputs: &[Diarization], collar: Tick) -> Result<Vec<f64>, ScoreError> {
    let n = inputs.len();
    if n < 2 {
        return Ok(vec![0.0; n]);
    }
    let matrix = pairwise_der_matrix(inputs, collar)?;
    Ok(matrix
        .iter()
        .map(|row| row.iter().sum::<f64>() / (n - 1) as f64)
        .collect())
}
