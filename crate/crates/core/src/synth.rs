//! Synthetic reference generation, per-channel degradation, and a batch
//! experiment runner that reports max/avg/min input error against the
//! combined output, per trial and macro-averaged.
//!
//! Everything is driven by seeded ChaCha8 generators: the same parameters
//! and seeds reproduce every output byte.

use std::fmt::Write as _;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::Serialize;
use thiserror::Error;

use crate::dover::{dover_combine, CombineOptions, DoverError};
use crate::rttm::emit_rttm;
use crate::scoring::{score, ScoreError};
use crate::timeline::{Diarization, TimelineError, Turn};
use crate::Tick;

/// Shortest generated turn; exponential draws are clamped up to this.
const MIN_TURN: Tick = 250;
/// Shortest generated pause.
const MIN_PAUSE: Tick = 100;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid synthesis parameters: {0}")]
    BadParams(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Dover(#[from] DoverError),
    #[error(transparent)]
    Score(#[from] ScoreError),
    #[error(transparent)]
    Timeline(#[from] TimelineError),
}

/// Parameters for reference generation and channel degradation.
#[derive(Debug, Clone, Serialize)]
pub struct SynthParams {
    pub num_speakers: usize,
    /// Reference timeline length in ticks.
    pub total_duration: Tick,
    /// Mean turn duration in ticks; draws are exponential-like.
    pub mean_turn: Tick,
    /// Probability of a pause after each turn.
    pub pause_prob: f64,
    /// Standard deviation of boundary jitter in ticks.
    pub boundary_jitter_sigma: Tick,
    /// Probability of relabeling a turn to a random other speaker.
    pub relabel_prob: f64,
    /// Probability of splitting a turn / merging into the previous one.
    pub split_merge_prob: f64,
    pub seed: u64,
}

impl Default for SynthParams {
    fn default() -> Self {
        Self {
            num_speakers: 4,
            total_duration: 600_000,
            mean_turn: 5_000,
            pause_prob: 0.2,
            boundary_jitter_sigma: 0,
            relabel_prob: 0.0,
            split_merge_prob: 0.0,
            seed: 0,
        }
    }
}

impl SynthParams {
    pub fn validate(&self) -> Result<(), SynthError> {
        if self.num_speakers < 1 {
            return Err(SynthError::BadParams("num_speakers must be >= 1".into()));
        }
        if self.total_duration <= 0 || self.mean_turn <= 0 {
            return Err(SynthError::BadParams("durations must be positive".into()));
        }
        if self.boundary_jitter_sigma < 0 {
            return Err(SynthError::BadParams("jitter sigma must be >= 0".into()));
        }
        for (name, p) in [
            ("pause_prob", self.pause_prob),
            ("relabel_prob", self.relabel_prob),
            ("split_merge_prob", self.split_merge_prob),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(SynthError::BadParams(format!(
                    "{name} must be in [0, 1], got {p}"
                )));
            }
        }
        Ok(())
    }
}

/// splitmix64-style stream derivation so that the reference, each channel,
/// and each trial consume independent generators.
fn mix_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn exp_ticks(rng: &mut ChaCha8Rng, mean: Tick, floor: Tick) -> Tick {
    let u: f64 = rng.gen();
    let draw = (-(mean as f64) * (1.0 - u).ln()).round() as Tick;
    draw.max(floor)
}

/// Generates a reference timeline: speakers take alternating turns with
/// exponential-like durations around `mean_turn`, separated by pauses with
/// probability `pause_prob`. The first turns cycle through all speakers so
/// everyone appears when the duration allows.
pub fn gen_reference(params: &SynthParams) -> Result<Diarization, SynthError> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(params.seed, 1));
    let mut turns: Vec<Turn> = Vec::new();
    let mut t: Tick = 0;
    let mut turn_index = 0usize;
    let mut prev_speaker = usize::MAX;
    while t < params.total_duration {
        let speaker = if turn_index < params.num_speakers {
            turn_index
        } else if params.num_speakers == 1 {
            0
        } else {
            // Uniform over the other speakers.
            let offset = rng.gen_range(1..params.num_speakers);
            (prev_speaker + offset) % params.num_speakers
        };
        let duration =
            exp_ticks(&mut rng, params.mean_turn, MIN_TURN).min(params.total_duration - t);
        turns.push(Turn::new(format!("spk{}", speaker + 1), t, t + duration));
        t += duration;
        if t < params.total_duration && rng.gen_bool(params.pause_prob) {
            t += exp_ticks(&mut rng, params.mean_turn / 2, MIN_PAUSE);
        }
        prev_speaker = speaker;
        turn_index += 1;
    }
    Ok(Diarization::validate(
        turns,
        format!("synth-ref-{}", params.seed),
    )?)
}

/// Degrades a reference into one channel's hypothesis: random turn splits
/// and merges, random relabeling to another speaker, Gaussian boundary
/// jitter clamped to preserve ordering, then channel-unique label renaming.
pub fn perturb(
    reference: &Diarization,
    params: &SynthParams,
    channel_seed: u64,
) -> Result<Diarization, SynthError> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(mix_seed(params.seed, 2), channel_seed));
    let pool: Vec<String> = reference.labels().iter().map(|&l| l.to_string()).collect();
    let mut turns: Vec<Turn> = Vec::new();

    // Split pass: cut a turn at a random interior tick; the second half
    // takes a random speaker from the pool.
    for t in reference.turns() {
        if t.duration() >= 2 && rng.gen_bool(params.split_merge_prob) {
            let cut = t.begin + rng.gen_range(1..t.duration());
            let second = pool[rng.gen_range(0..pool.len())].clone();
            turns.push(Turn::new(t.label.clone(), t.begin, cut));
            turns.push(Turn::new(second, cut, t.end));
        } else {
            turns.push(t.clone());
        }
    }

    // Merge pass: a turn may absorb the label of its predecessor.
    for j in 1..turns.len() {
        if rng.gen_bool(params.split_merge_prob) {
            turns[j].label = turns[j - 1].label.clone();
        }
    }

    // Relabel pass: swap a turn to a uniformly random *other* speaker.
    if pool.len() > 1 {
        for t in &mut turns {
            if rng.gen_bool(params.relabel_prob) {
                let others: Vec<&String> = pool.iter().filter(|&l| *l != t.label).collect();
                t.label = others[rng.gen_range(0..others.len())].clone();
            }
        }
    } else {
        // Keep the generator stream aligned with the multi-speaker path.
        for _ in &turns {
            rng.gen_bool(params.relabel_prob);
        }
    }

    // Jitter pass: move every boundary independently, clamping so that
    // turns stay ordered, non-overlapping, and at least one tick long.
    if params.boundary_jitter_sigma > 0 {
        let normal = Normal::new(0.0, params.boundary_jitter_sigma as f64)
            .expect("positive standard deviation");
        let mut prev_end: Tick = 0;
        for t in &mut turns {
            let begin = t.begin + normal.sample(&mut rng).round() as Tick;
            let end = t.end + normal.sample(&mut rng).round() as Tick;
            t.begin = begin.max(prev_end).max(0);
            t.end = end.max(t.begin + 1);
            prev_end = t.end;
        }
    }

    // Channel-unique names keep label spaces disjoint across channels.
    for t in &mut turns {
        t.label = format!("c{channel_seed}:{}", t.label);
    }
    Ok(Diarization::validate(
        turns,
        format!("{}#c{channel_seed}", reference.source_id()),
    )?)
}

/// Max / average / min over the per-channel values of one trial.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ChannelStats {
    pub max: f64,
    pub avg: f64,
    pub min: f64,
}

impl ChannelStats {
    fn from_values(values: &[f64]) -> Self {
        let max = values.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        let min = values.iter().fold(f64::INFINITY, |a, &b| a.min(b));
        let avg = values.iter().sum::<f64>() / values.len() as f64;
        Self { max, avg, min }
    }
}

/// One trial's input spread and combined-output rates.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct TrialRow {
    pub trial: usize,
    pub input_spkerr: ChannelStats,
    pub input_der: ChannelStats,
    pub dover_spkerr: f64,
    pub dover_der: f64,
}

/// Column-wise macro average over all trials.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct MacroRow {
    pub input_spkerr: ChannelStats,
    pub input_der: ChannelStats,
    pub dover_spkerr: f64,
    pub dover_der: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ExperimentReport {
    pub schema_version: u32,
    pub params: SynthParams,
    pub num_channels: usize,
    pub rows: Vec<TrialRow>,
    #[serde(rename = "macro")]
    pub macro_row: MacroRow,
}

impl ExperimentReport {
    /// Number of trials where the combined speaker error is at most the
    /// per-trial input average.
    pub fn trials_at_or_below_input_average(&self) -> usize {
        self.rows
            .iter()
            .filter(|r| r.dover_spkerr <= r.input_spkerr.avg)
            .count()
    }

    pub fn to_json(&self) -> String {
        let mut text = serde_json::to_string_pretty(self).expect("serializable report");
        text.push('\n');
        text
    }

    /// One row per trial plus a final macro row.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from(
            "trial\tin_spkerr_max\tin_spkerr_avg\tin_spkerr_min\tin_der_max\tin_der_avg\t\
             in_der_min\tdover_spkerr\tdover_der\n",
        );
        let mut push = |tag: &str, se: &ChannelStats, der: &ChannelStats, dse: f64, dder: f64| {
            writeln!(
                out,
                "{tag}\t{:.6}\t{:.6}\t{:.6}\t{:.6}\t{:.6}\t{:.6}\t{:.6}\t{:.6}",
                se.max, se.avg, se.min, der.max, der.avg, der.min, dse, dder
            )
            .expect("string writes cannot fail");
        };
        for row in &self.rows {
            push(
                &row.trial.to_string(),
                &row.input_spkerr,
                &row.input_der,
                row.dover_spkerr,
                row.dover_der,
            );
        }
        push(
            "macro",
            &self.macro_row.input_spkerr,
            &self.macro_row.input_der,
            self.macro_row.dover_spkerr,
            self.macro_row.dover_der,
        );
        out
    }
}

/// Runs the full experiment: per trial, generate a reference, degrade it
/// into `num_channels` hypotheses, combine them (rank anchoring), and score
/// every hypothesis and the consensus against the reference with collar 0.
/// When `dump_dir` is given, all per-trial RTTM files are written there.
pub fn run_experiment(
    params: &SynthParams,
    num_channels: usize,
    trials: usize,
    dump_dir: Option<&Path>,
) -> Result<ExperimentReport, SynthError> {
    params.validate()?;
    if num_channels < 2 {
        return Err(SynthError::BadParams("need at least 2 channels".into()));
    }
    if trials < 1 {
        return Err(SynthError::BadParams("need at least 1 trial".into()));
    }
    if let Some(dir) = dump_dir {
        std::fs::create_dir_all(dir)?;
    }

    let mut rows: Vec<TrialRow> = Vec::with_capacity(trials);
    for trial in 0..trials {
        let trial_params = SynthParams {
            seed: mix_seed(params.seed, 0x1000 + trial as u64),
            ..params.clone()
        };
        let reference = gen_reference(&trial_params)?;
        let hypotheses: Vec<Diarization> = (0..num_channels)
            .map(|c| perturb(&reference, &trial_params, c as u64))
            .collect::<Result<_, _>>()?;
        let outcome = dover_combine(&hypotheses, &CombineOptions::default())?;

        let mut spkerr = Vec::with_capacity(num_channels);
        let mut der = Vec::with_capacity(num_channels);
        for hyp in &hypotheses {
            let report = score(hyp, &reference, 0)?;
            spkerr.push(report.spkerr_rate);
            der.push(report.der);
        }
        let dover_report = score(&outcome.consensus, &reference, 0)?;

        if let Some(dir) = dump_dir {
            std::fs::write(
                dir.join(format!("trial{trial:03}_ref.rttm")),
                emit_rttm(&reference, "synth", "1"),
            )?;
            for (c, hyp) in hypotheses.iter().enumerate() {
                std::fs::write(
                    dir.join(format!("trial{trial:03}_ch{c}.rttm")),
                    emit_rttm(hyp, "synth", "1"),
                )?;
            }
            std::fs::write(
                dir.join(format!("trial{trial:03}_dover.rttm")),
                emit_rttm(&outcome.consensus, "synth", "1"),
            )?;
        }

        rows.push(TrialRow {
            trial,
            input_spkerr: ChannelStats::from_values(&spkerr),
            input_der: ChannelStats::from_values(&der),
            dover_spkerr: dover_report.spkerr_rate,
            dover_der: dover_report.der,
        });
    }

    let mean =
        |f: fn(&TrialRow) -> f64| -> f64 { rows.iter().map(f).sum::<f64>() / rows.len() as f64 };
    let macro_row = MacroRow {
        input_spkerr: ChannelStats {
            max: mean(|r| r.input_spkerr.max),
            avg: mean(|r| r.input_spkerr.avg),
            min: mean(|r| r.input_spkerr.min),
        },
        input_der: ChannelStats {
            max: mean(|r| r.input_der.max),
            avg: mean(|r| r.input_der.avg),
            min: mean(|r| r.input_der.min),
        },
        dover_spkerr: mean(|r| r.dover_spkerr),
        dover_der: mean(|r| r.dover_der),
    };
    Ok(ExperimentReport {
        schema_version: 1,
        params: params.clone(),
        num_channels,
        rows,
        macro_row,
    })
}
