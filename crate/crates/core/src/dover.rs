//! The DOVER combination pipeline: centroid-based anchoring, incremental
//! global label mapping with conflict pruning, and weighted per-region
//! voting.
//!
//! Voting is performed per region of the joint boundary partition rather
//! than per time instant; labels are piecewise constant on regions, so the
//! result is exact.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::scoring::{average_der_to_others, optimal_mapping, ScoreError};
use crate::timeline::{build_regions, Diarization, Turn};
use crate::Tick;

#[derive(Debug, Error)]
pub enum DoverError {
    #[error("no inputs to combine")]
    NoInputs,
    #[error("anchor index {index} out of range for {count} inputs")]
    AnchorOutOfRange { index: usize, count: usize },
    #[error(
        "label {label:?} appears in inputs {first} and {second}; labels must be \
         disjoint across inputs"
    )]
    NonDisjointLabels {
        label: String,
        first: usize,
        second: usize,
    },
    #[error("expected {expected} weights, got {got}")]
    WeightCountMismatch { expected: usize, got: usize },
    #[error("weight {weight} at position {index} is negative")]
    NegativeWeight { weight: f64, index: usize },
    #[error("total weight must be positive")]
    ZeroTotalWeight,
    #[error(transparent)]
    Score(#[from] ScoreError),
}

/// How the first (anchor) input of the incremental mapping is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Anchor {
    /// Rank all inputs by average DER to the others; the centroid comes
    /// first and rank-decay weights apply.
    Rank,
    /// Keep the given input order; decay weights by position.
    GivenOrder,
    /// Move input `k` to the front, keeping the rest in given order.
    Index(usize),
    /// Run once per input as anchor, then combine the outputs again.
    All,
}

impl std::str::FromStr for Anchor {
    type Err = String;

    /// Accepts `rank`, `given-order`, `index:K`, or `all`.
    fn from_str(text: &str) -> Result<Self, Self::Err> {
        match text {
            "rank" => Ok(Anchor::Rank),
            "given-order" => Ok(Anchor::GivenOrder),
            "all" => Ok(Anchor::All),
            other => match other.strip_prefix("index:") {
                Some(k) => k
                    .parse::<usize>()
                    .map(Anchor::Index)
                    .map_err(|_| format!("bad anchor index {k:?}")),
                None => Err(format!(
                    "unknown anchor {other:?}; use rank, given-order, index:K, or all"
                )),
            },
        }
    }
}

/// Tie handling when several labels share the maximal tally in a region.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TiePolicy {
    /// Pick the tied label voted by the highest-ranked input present in
    /// the region.
    First,
    /// Pick the lexicographically smallest tied label.
    Lexicographic,
    /// Draw uniformly from the tied set with a run-seeded generator.
    Random { seed: u64 },
}

/// Stateful tie-breaker so that random draws consume one generator across
/// all regions of a voting pass.
pub struct TieBreaker {
    policy: TiePolicy,
    rng: Option<ChaCha8Rng>,
}

impl TieBreaker {
    pub fn new(policy: TiePolicy) -> Self {
        let rng = match policy {
            TiePolicy::Random { seed } => Some(ChaCha8Rng::seed_from_u64(seed)),
            _ => None,
        };
        Self { policy, rng }
    }

    /// Picks the winning label for one region. `labels_by_rank` holds each
    /// input's label on the region, in rank order. Returns `None` only for
    /// an empty tally map.
    pub fn choose<'a>(
        &mut self,
        tallies: &BTreeMap<&'a str, f64>,
        labels_by_rank: &[Option<&'a str>],
    ) -> Option<&'a str> {
        let max_tally = tallies.values().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        let tied: Vec<&str> = tallies
            .iter()
            .filter(|&(_, &t)| t == max_tally)
            .map(|(&l, _)| l)
            .collect();
        match tied.as_slice() {
            [] => None,
            [only] => Some(only),
            _ => Some(match self.policy {
                TiePolicy::First => labels_by_rank
                    .iter()
                    .flatten()
                    .find(|l| tied.contains(l))
                    .copied()
                    .unwrap_or(tied[0]),
                TiePolicy::Lexicographic => tied[0],
                TiePolicy::Random { .. } => {
                    let rng = self.rng.as_mut().expect("random policy carries an rng");
                    tied[rng.gen_range(0..tied.len())]
                }
            }),
        }
    }
}

/// One-shot tie break over a single region's tallies.
pub fn break_tie<'a>(
    tallies: &BTreeMap<&'a str, f64>,
    labels_by_rank: &[Option<&'a str>],
    policy: TiePolicy,
) -> Option<&'a str> {
    TieBreaker::new(policy).choose(tallies, labels_by_rank)
}

/// Orders inputs by ascending average DER to all the other inputs, so the
/// centroid comes first and outliers sink to the bottom. Ties keep the
/// original input order.
pub fn rank_inputs(inputs: &[Diarization], collar: Tick) -> Result<Vec<usize>, ScoreError> {
    let averages = average_der_to_others(inputs, collar)?;
    let mut order: Vec<usize> = (0..inputs.len()).collect();
    order.sort_by(|&a, &b| averages[a].partial_cmp(&averages[b]).expect("finite DER"));
    Ok(order)
}

/// Rank-decay weights `w_i = external_i * i^(-0.1)` with 1-based rank `i`.
/// External weights default to all ones and must align with ranked order.
pub fn rank_weights(n: usize, external: Option<&[f64]>) -> Result<Vec<f64>, DoverError> {
    if let Some(ext) = external {
        if ext.len() != n {
            return Err(DoverError::WeightCountMismatch {
                expected: n,
                got: ext.len(),
            });
        }
        if let Some((index, &weight)) = ext.iter().enumerate().find(|&(_, &w)| w < 0.0) {
            return Err(DoverError::NegativeWeight { weight, index });
        }
    }
    Ok((1..=n)
        .map(|rank| {
            let ext = external.map_or(1.0, |e| e[rank - 1]);
            ext * (rank as f64).powf(-0.1)
        })
        .collect())
}

fn check_disjoint_labels(inputs: &[Diarization]) -> Result<(), DoverError> {
    let mut owner: BTreeMap<&str, usize> = BTreeMap::new();
    for (i, d) in inputs.iter().enumerate() {
        for label in d.labels() {
            if let Some(&first) = owner.get(label) {
                if first != i {
                    return Err(DoverError::NonDisjointLabels {
                        label: label.to_string(),
                        first,
                        second: i,
                    });
                }
            } else {
                owner.insert(label, i);
            }
        }
    }
    Ok(())
}

/// Prefixes every label with its input index ("S0:", "S1:", ...) so label
/// spaces are guaranteed disjoint across inputs.
pub fn make_labels_disjoint(inputs: &[Diarization]) -> Vec<Diarization> {
    inputs
        .iter()
        .enumerate()
        .map(|(i, d)| {
            let map: BTreeMap<String, String> = d
                .labels()
                .iter()
                .map(|&l| (l.to_string(), format!("S{i}:{l}")))
                .collect();
            d.relabel(&map)
        })
        .collect()
}

/// Renames speakers to `spk1..spkK` in order of first appearance.
pub fn canonical_speaker_names(d: &Diarization) -> Diarization {
    let mut map: BTreeMap<String, String> = BTreeMap::new();
    let mut next = 1;
    for t in d.turns() {
        if !map.contains_key(&t.label) {
            map.insert(t.label.clone(), format!("spk{next}"));
            next += 1;
        }
    }
    d.relabel(&map)
}

/// Maps all inputs into a shared label space, in anchored order.
///
/// For each input `i` from the second on, an optimal mapping is computed
/// against every already-relabeled earlier input; the union of entries is
/// pruned so each source keeps only its longest-shared-duration target and
/// each target keeps only its longest-shared-duration source. Surviving
/// entries relabel input `i`; unmapped labels keep their globally unique
/// names.
pub fn incremental_map(ranked: &[Diarization]) -> Result<Vec<Diarization>, DoverError> {
    check_disjoint_labels(ranked)?;
    let mut mapped: Vec<Diarization> = Vec::with_capacity(ranked.len());
    for (i, input) in ranked.iter().enumerate() {
        if i == 0 {
            mapped.push(input.clone());
            continue;
        }
        // (source, target) → (shared duration, earliest partner index).
        // The same pairing measured against several earlier inputs keeps
        // its largest observed overlap.
        let mut candidates: BTreeMap<(String, String), (Tick, usize)> = BTreeMap::new();
        for (k, earlier) in mapped.iter().enumerate() {
            for entry in optimal_mapping(input, earlier).entries() {
                let key = (entry.source.clone(), entry.target.clone());
                let value = (entry.shared, k);
                candidates
                    .entry(key)
                    .and_modify(|existing| {
                        if entry.shared > existing.0 {
                            *existing = value;
                        }
                    })
                    .or_insert(value);
            }
        }
        let survivors = prune_conflicts(&candidates);
        mapped.push(input.relabel(&survivors));
    }
    Ok(mapped)
}

/// Resolves mapping conflicts in favor of the longest shared duration.
///
/// First each target keeps only its longest-duration source; then each
/// source keeps only its longest surviving target, so a source that loses
/// one target to a stronger competitor can still map through its next-best
/// pairing. Exact duration ties prefer the entry found against the
/// better-ranked partner, then the lexicographically smallest label.
fn prune_conflicts(
    candidates: &BTreeMap<(String, String), (Tick, usize)>,
) -> BTreeMap<String, String> {
    // Larger shared duration wins; then smaller partner index; then the
    // smaller competing label on the opposite side.
    let beats = |a: (Tick, usize, &str), b: (Tick, usize, &str)| -> bool {
        (a.0, std::cmp::Reverse(a.1), std::cmp::Reverse(a.2))
            > (b.0, std::cmp::Reverse(b.1), std::cmp::Reverse(b.2))
    };
    let mut best_for_target: BTreeMap<&str, (Tick, usize, &str)> = BTreeMap::new();
    for ((source, target), &(shared, partner)) in candidates {
        let entry = (shared, partner, source.as_str());
        best_for_target
            .entry(target)
            .and_modify(|cur| {
                if beats(entry, *cur) {
                    *cur = entry;
                }
            })
            .or_insert(entry);
    }
    let mut best_for_source: BTreeMap<&str, (Tick, usize, &str)> = BTreeMap::new();
    for (target, &(shared, partner, source)) in &best_for_target {
        let entry = (shared, partner, *target);
        best_for_source
            .entry(source)
            .and_modify(|cur| {
                if beats(entry, *cur) {
                    *cur = entry;
                }
            })
            .or_insert(entry);
    }
    best_for_source
        .into_iter()
        .map(|(source, (_, _, target))| (source.to_string(), target.to_string()))
        .collect()
}

/// Weighted per-region voting over inputs that share a label space.
///
/// Each region tallies every input's label with its weight; the max-tally
/// label is emitted iff the total speech tally reaches half the total
/// weight, otherwise the region stays nonspeech. Adjacent equal-label
/// regions merge in the result.
pub fn vote(
    mapped: &[Diarization],
    weights: &[f64],
    tie_policy: TiePolicy,
) -> Result<Diarization, DoverError> {
    if mapped.is_empty() {
        return Err(DoverError::NoInputs);
    }
    if weights.len() != mapped.len() {
        return Err(DoverError::WeightCountMismatch {
            expected: mapped.len(),
            got: weights.len(),
        });
    }
    if let Some((index, &weight)) = weights.iter().enumerate().find(|&(_, &w)| w < 0.0) {
        return Err(DoverError::NegativeWeight { weight, index });
    }
    let total_weight: f64 = weights.iter().sum();
    if total_weight <= 0.0 {
        return Err(DoverError::ZeroTotalWeight);
    }

    let partition = build_regions(mapped).expect("at least one input");
    let mut breaker = TieBreaker::new(tie_policy);
    let mut turns: Vec<Turn> = Vec::new();
    for region in partition.regions() {
        let mut tallies: BTreeMap<&str, f64> = BTreeMap::new();
        for (label, &weight) in region.labels.iter().zip(weights) {
            if let Some(label) = label.as_deref() {
                *tallies.entry(label).or_insert(0.0) += weight;
            }
        }
        if tallies.is_empty() {
            continue;
        }
        let speech_tally: f64 = tallies.values().sum();
        if speech_tally < 0.5 * total_weight {
            continue;
        }
        let labels_by_rank: Vec<Option<&str>> =
            region.labels.iter().map(Option::as_deref).collect();
        if let Some(winner) = breaker.choose(&tallies, &labels_by_rank) {
            turns.push(Turn::new(winner, region.begin, region.end));
        }
    }
    Ok(Diarization::validate(turns, "consensus").expect("regions are sorted and disjoint"))
}

/// Options for [`dover_combine`].
#[derive(Debug, Clone)]
pub struct CombineOptions {
    /// Per-input weights aligned with the *given* input order; multiplied
    /// with the rank-decay weights after anchoring.
    pub external_weights: Option<Vec<f64>>,
    pub anchor: Anchor,
    pub tie_policy: TiePolicy,
    /// Collar used when scoring inputs against each other for ranking.
    pub ranking_collar: Tick,
}

impl Default for CombineOptions {
    fn default() -> Self {
        Self {
            external_weights: None,
            anchor: Anchor::Rank,
            tie_policy: TiePolicy::First,
            ranking_collar: 0,
        }
    }
}

/// A combination result: the consensus plus the anchored input order and
/// the final weights, aligned with that order.
#[derive(Debug, Clone)]
pub struct CombineOutcome {
    pub consensus: Diarization,
    pub order: Vec<usize>,
    pub weights: Vec<f64>,
}

/// Runs the full combination pipeline: anchor, weight, map, vote.
///
/// Input label spaces must be disjoint (see [`make_labels_disjoint`]).
pub fn dover_combine(
    inputs: &[Diarization],
    options: &CombineOptions,
) -> Result<CombineOutcome, DoverError> {
    if inputs.is_empty() {
        return Err(DoverError::NoInputs);
    }
    check_disjoint_labels(inputs)?;
    let n = inputs.len();
    let order: Vec<usize> = match options.anchor {
        Anchor::Rank => rank_inputs(inputs, options.ranking_collar)?,
        Anchor::GivenOrder => (0..n).collect(),
        Anchor::Index(k) => {
            if k >= n {
                return Err(DoverError::AnchorOutOfRange { index: k, count: n });
            }
            std::iter::once(k)
                .chain((0..n).filter(|&i| i != k))
                .collect()
        }
        Anchor::All => return multi_anchor_combine(inputs, options),
    };
    let ranked: Vec<Diarization> = order.iter().map(|&i| inputs[i].clone()).collect();
    let external_ranked: Option<Vec<f64>> = match &options.external_weights {
        Some(ext) => {
            if ext.len() != n {
                return Err(DoverError::WeightCountMismatch {
                    expected: n,
                    got: ext.len(),
                });
            }
            Some(order.iter().map(|&i| ext[i]).collect())
        }
        None => None,
    };
    let weights = rank_weights(n, external_ranked.as_deref())?;
    let mapped = incremental_map(&ranked)?;
    let consensus = vote(&mapped, &weights, options.tie_policy)?;
    Ok(CombineOutcome {
        consensus,
        order,
        weights,
    })
}

/// Runs the pipeline once per input as anchor, then combines the N outputs
/// again with equal external weights under rank anchoring: N+1 passes in
/// total.
pub fn multi_anchor_combine(
    inputs: &[Diarization],
    options: &CombineOptions,
) -> Result<CombineOutcome, DoverError> {
    if inputs.is_empty() {
        return Err(DoverError::NoInputs);
    }
    let mut pass_outputs: Vec<Diarization> = Vec::with_capacity(inputs.len());
    for k in 0..inputs.len() {
        let pass = CombineOptions {
            anchor: Anchor::Index(k),
            external_weights: options.external_weights.clone(),
            tie_policy: options.tie_policy,
            ranking_collar: options.ranking_collar,
        };
        pass_outputs.push(dover_combine(inputs, &pass)?.consensus);
    }
    let disjoint = make_labels_disjoint(&pass_outputs);
    let rerun = CombineOptions {
        anchor: Anchor::Rank,
        external_weights: None,
        tie_policy: options.tie_policy,
        ranking_collar: options.ranking_collar,
    };
    dover_combine(&disjoint, &rerun)
}
