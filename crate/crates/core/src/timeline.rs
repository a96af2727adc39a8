//! Exact interval algebra over speaker timelines.
//!
//! All intervals are half-open `[begin, end)` in millisecond ticks: a
//! boundary tick belongs to the region it starts, so zero-measure points
//! can never double-count.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::Tick;

/// One labeled speech segment.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Turn {
    pub label: String,
    pub begin: Tick,
    pub end: Tick,
}

impl Turn {
    pub fn new(label: impl Into<String>, begin: Tick, end: Tick) -> Self {
        Self {
            label: label.into(),
            begin,
            end,
        }
    }

    pub fn duration(&self) -> Tick {
        self.end - self.begin
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TimelineError {
    #[error("turn {label:?} [{begin}, {end}) ms has no duration")]
    EmptyTurn {
        label: String,
        begin: Tick,
        end: Tick,
    },
    #[error(
        "turns {first_label:?} [{first_begin}, {first_end}) ms and {second_label:?} \
         [{second_begin}, {second_end}) ms overlap at [{overlap_begin}, {overlap_end}) ms"
    )]
    OverlappingTurns {
        first_label: String,
        first_begin: Tick,
        first_end: Tick,
        second_label: String,
        second_begin: Tick,
        second_end: Tick,
        overlap_begin: Tick,
        overlap_end: Tick,
    },
    #[error("no diarization inputs given")]
    NoInputs,
}

/// A validated, time-sorted, non-overlapping speaker timeline for one
/// recording.
///
/// Construction goes through [`Diarization::validate`], so every value of
/// this type upholds the ordering and non-overlap invariants.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diarization {
    turns: Vec<Turn>,
    source_id: String,
}

impl Diarization {
    /// Canonicalizes a turn list: sorts by begin, rejects zero-length
    /// turns, rejects overlapping turns (reporting the first offending
    /// pair), and merges adjacent same-label turns that touch exactly.
    pub fn validate(turns: Vec<Turn>, source_id: impl Into<String>) -> Result<Self, TimelineError> {
        let mut turns = turns;
        for t in &turns {
            if t.begin >= t.end {
                return Err(TimelineError::EmptyTurn {
                    label: t.label.clone(),
                    begin: t.begin,
                    end: t.end,
                });
            }
        }
        turns.sort_by(|a, b| (a.begin, a.end, &a.label).cmp(&(b.begin, b.end, &b.label)));
        for pair in turns.windows(2) {
            if pair[0].end > pair[1].begin {
                return Err(TimelineError::OverlappingTurns {
                    first_label: pair[0].label.clone(),
                    first_begin: pair[0].begin,
                    first_end: pair[0].end,
                    second_label: pair[1].label.clone(),
                    second_begin: pair[1].begin,
                    second_end: pair[1].end,
                    overlap_begin: pair[1].begin,
                    overlap_end: pair[0].end.min(pair[1].end),
                });
            }
        }
        Ok(Self {
            turns: merge_touching(turns),
            source_id: source_id.into(),
        })
    }

    pub fn empty(source_id: impl Into<String>) -> Self {
        Self {
            turns: Vec::new(),
            source_id: source_id.into(),
        }
    }

    pub fn turns(&self) -> &[Turn] {
        &self.turns
    }

    pub fn source_id(&self) -> &str {
        &self.source_id
    }

    pub fn len(&self) -> usize {
        self.turns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.turns.is_empty()
    }

    /// Distinct labels in sorted order.
    pub fn labels(&self) -> Vec<&str> {
        let set: BTreeSet<&str> = self.turns.iter().map(|t| t.label.as_str()).collect();
        set.into_iter().collect()
    }

    /// Total speech duration in ticks.
    pub fn speech_total(&self) -> Tick {
        self.turns.iter().map(Turn::duration).sum()
    }

    /// Smallest begin and largest end, if any turns exist.
    pub fn extent(&self) -> Option<(Tick, Tick)> {
        match (self.turns.first(), self.turns.last()) {
            (Some(first), Some(last)) => Some((first.begin, last.end)),
            _ => None,
        }
    }

    /// Applies a label map; labels missing from the map keep their name.
    /// Adjacent turns that end up with equal labels and touch exactly are
    /// merged, so the result stays canonical.
    pub fn relabel(&self, map: &BTreeMap<String, String>) -> Diarization {
        let turns = self
            .turns
            .iter()
            .map(|t| {
                let label = map
                    .get(&t.label)
                    .cloned()
                    .unwrap_or_else(|| t.label.clone());
                Turn::new(label, t.begin, t.end)
            })
            .collect();
        Diarization {
            turns: merge_touching(turns),
            source_id: self.source_id.clone(),
        }
    }

    pub fn with_source_id(&self, source_id: impl Into<String>) -> Diarization {
        Diarization {
            turns: self.turns.clone(),
            source_id: source_id.into(),
        }
    }
}

fn merge_touching(turns: Vec<Turn>) -> Vec<Turn> {
    let mut merged: Vec<Turn> = Vec::with_capacity(turns.len());
    for t in turns {
        match merged.last_mut() {
            Some(prev) if prev.end == t.begin && prev.label == t.label => prev.end = t.end,
            _ => merged.push(t),
        }
    }
    merged
}

/// The maximal segmentation induced by the union of all input boundaries.
///
/// Every input is label-constant on each region: a region lies either
/// fully inside one of the input's turns or fully outside all of them.
#[derive(Debug, Clone)]
pub struct RegionPartition {
    boundaries: Vec<Tick>,
    /// `labels[r][i]` is input `i`'s label on region `r`, or `None` for
    /// nonspeech.
    labels: Vec<Vec<Option<String>>>,
}

/// One region of a [`RegionPartition`] with each input's label on it.
#[derive(Debug, Clone, Copy)]
pub struct Region<'a> {
    pub begin: Tick,
    pub end: Tick,
    pub labels: &'a [Option<String>],
}

impl RegionPartition {
    pub fn boundaries(&self) -> &[Tick] {
        &self.boundaries
    }

    pub fn num_regions(&self) -> usize {
        self.labels.len()
    }

    pub fn regions(&self) -> impl Iterator<Item = Region<'_>> {
        self.boundaries
            .windows(2)
            .zip(self.labels.iter())
            .map(|(bounds, labels)| Region {
                begin: bounds[0],
                end: bounds[1],
                labels,
            })
    }
}

/// Builds the region partition for a set of inputs: boundaries are the
/// sorted, deduplicated union of all turn begins and ends, and each region
/// is annotated with every input's label (or nonspeech) on it.
pub fn build_regions(inputs: &[Diarization]) -> Result<RegionPartition, TimelineError> {
    if inputs.is_empty() {
        return Err(TimelineError::NoInputs);
    }
    let mut bounds: BTreeSet<Tick> = BTreeSet::new();
    for d in inputs {
        for t in d.turns() {
            bounds.insert(t.begin);
            bounds.insert(t.end);
        }
    }
    let boundaries: Vec<Tick> = bounds.into_iter().collect();
    let num_regions = boundaries.len().saturating_sub(1);
    let mut labels = vec![vec![None; inputs.len()]; num_regions];
    for (i, d) in inputs.iter().enumerate() {
        let mut cursor = d.turns().iter().peekable();
        for (r, window) in boundaries.windows(2).enumerate() {
            let begin = window[0];
            while cursor.peek().is_some_and(|t| t.end <= begin) {
                cursor.next();
            }
            if let Some(t) = cursor.peek() {
                if t.begin <= begin {
                    labels[r][i] = Some(t.label.clone());
                }
            }
        }
    }
    Ok(RegionPartition { boundaries, labels })
}

/// Pairwise label-overlap durations between two timelines, plus the
/// speech/nonspeech mismatch totals.
#[derive(Debug, Clone, Default)]
pub struct OverlapMatrix {
    /// `(label of a, label of b)` → shared ticks; only positive entries
    /// are stored.
    pub entries: BTreeMap<(String, String), Tick>,
    /// Per-label speech duration in `a`.
    pub a_speech: BTreeMap<String, Tick>,
    /// Per-label speech duration in `b`.
    pub b_speech: BTreeMap<String, Tick>,
    /// Ticks where `a` is in speech and `b` is not.
    pub a_speech_b_nonspeech: Tick,
    /// Ticks where `b` is in speech and `a` is not.
    pub b_speech_a_nonspeech: Tick,
}

impl OverlapMatrix {
    /// Total ticks where both timelines are in speech.
    pub fn both_speech_total(&self) -> Tick {
        self.entries.values().sum()
    }
}

/// Computes the overlap matrix by a two-pointer sweep over both sorted
/// turn lists.
pub fn overlap_matrix(a: &Diarization, b: &Diarization) -> OverlapMatrix {
    let mut out = OverlapMatrix::default();
    for t in a.turns() {
        *out.a_speech.entry(t.label.clone()).or_insert(0) += t.duration();
    }
    for t in b.turns() {
        *out.b_speech.entry(t.label.clone()).or_insert(0) += t.duration();
    }
    let (mut i, mut j) = (0, 0);
    let (ta, tb) = (a.turns(), b.turns());
    while i < ta.len() && j < tb.len() {
        let begin = ta[i].begin.max(tb[j].begin);
        let end = ta[i].end.min(tb[j].end);
        if begin < end {
            *out.entries
                .entry((ta[i].label.clone(), tb[j].label.clone()))
                .or_insert(0) += end - begin;
        }
        if ta[i].end <= tb[j].end {
            i += 1;
        } else {
            j += 1;
        }
    }
    let both = out.both_speech_total();
    out.a_speech_b_nonspeech = a.speech_total() - both;
    out.b_speech_a_nonspeech = b.speech_total() - both;
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d(turns: &[(&str, Tick, Tick)]) -> Diarization {
        Diarization::validate(
            turns.iter().map(|&(l, b, e)| Turn::new(l, b, e)).collect(),
            "test",
        )
        .unwrap()
    }

    #[test]
    fn validate_accepts_sorted_disjoint() {
        let v = d(&[("A", 0, 5000), ("B", 5000, 10_000)]);
        assert_eq!(v.len(), 2);
        assert_eq!(v.speech_total(), 10_000);
    }

    #[test]
    fn validate_rejects_overlap() {
        let err = Diarization::validate(
            vec![Turn::new("A", 0, 6000), Turn::new("B", 5000, 10_000)],
            "test",
        )
        .unwrap_err();
        match err {
            TimelineError::OverlappingTurns {
                overlap_begin,
                overlap_end,
                ..
            } => {
                assert_eq!((overlap_begin, overlap_end), (5000, 6000));
            }
            other => panic!("unexpected error: {other}"),
        }
    }

    #[test]
    fn validate_rejects_zero_length() {
        let err = Diarization::validate(vec![Turn::new("A", 3, 3)], "test").unwrap_err();
        assert!(matches!(err, TimelineError::EmptyTurn { .. }));
    }

    #[test]
    fn validate_merges_touching_same_label() {
        let v = d(&[("A", 0, 5000), ("A", 5000, 8000)]);
        assert_eq!(v.turns(), &[Turn::new("A", 0, 8000)]);
    }

    #[test]
    fn validate_sorts_input() {
        let v = d(&[("B", 5000, 10_000), ("A", 0, 5000)]);
        assert_eq!(v.turns()[0].label, "A");
    }

    #[test]
    fn regions_from_two_inputs() {
        let a = d(&[("A1", 0, 5000), ("A2", 5000, 10_000)]);
        let b = d(&[("B1", 0, 4000), ("B2", 4000, 10_000)]);
        let p = build_regions(&[a, b]).unwrap();
        assert_eq!(p.boundaries(), &[0, 4000, 5000, 10_000]);
        assert_eq!(p.num_regions(), 3);
        let regions: Vec<_> = p.regions().collect();
        assert_eq!(regions[1].labels[0].as_deref(), Some("A1"));
        assert_eq!(regions[1].labels[1].as_deref(), Some("B2"));
    }

    #[test]
    fn regions_single_input_match_its_turns() {
        let a = d(&[("A1", 0, 5000), ("A2", 5000, 10_000)]);
        let p = build_regions(std::slice::from_ref(&a)).unwrap();
        assert_eq!(p.boundaries(), &[0, 5000, 10_000]);
    }

    #[test]
    fn regions_identical_inputs_match_either() {
        let a = d(&[("A1", 0, 5000), ("A2", 6000, 9000)]);
        let b = a.clone();
        let p = build_regions(&[a, b]).unwrap();
        assert_eq!(p.boundaries(), &[0, 5000, 6000, 9000]);
        // The gap region [5000, 6000) is nonspeech for both inputs.
        let regions: Vec<_> = p.regions().collect();
        assert!(regions[1].labels.iter().all(Option::is_none));
    }

    #[test]
    fn regions_require_inputs() {
        assert!(matches!(build_regions(&[]), Err(TimelineError::NoInputs)));
    }

    #[test]
    fn overlap_hand_example() {
        let a = d(&[("X", 0, 4000), ("Y", 4000, 10_000)]);
        let b = d(&[("P", 0, 5000), ("Q", 5000, 10_000)]);
        let m = overlap_matrix(&a, &b);
        let get = |x: &str, y: &str| m.entries.get(&(x.into(), y.into())).copied();
        assert_eq!(get("X", "P"), Some(4000));
        assert_eq!(get("Y", "P"), Some(1000));
        assert_eq!(get("Y", "Q"), Some(5000));
        assert_eq!(m.entries.len(), 3);
        assert_eq!(m.both_speech_total(), 10_000);
    }

    #[test]
    fn overlap_self_is_diagonal() {
        let a = d(&[("X", 0, 4000), ("Y", 4000, 10_000), ("X", 12_000, 13_000)]);
        let m = overlap_matrix(&a, &a);
        assert_eq!(m.entries.len(), 2);
        assert_eq!(m.entries[&("X".into(), "X".into())], 5000);
        assert_eq!(m.entries[&("Y".into(), "Y".into())], 6000);
    }

    #[test]
    fn overlap_disjoint_supports_is_empty() {
        let a = d(&[("X", 0, 1000)]);
        let b = d(&[("P", 2000, 3000)]);
        let m = overlap_matrix(&a, &b);
        assert!(m.entries.is_empty());
        assert_eq!(m.a_speech_b_nonspeech, 1000);
        assert_eq!(m.b_speech_a_nonspeech, 1000);
    }
}
