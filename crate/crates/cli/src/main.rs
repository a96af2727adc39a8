//! `dover` command-line tool: combine, score, rank, experiment.
//!
//! Data goes to stdout or the `-o` file; every diagnostic goes to stderr.
//! Exit codes: 0 success, 1 I/O error, 2 parse error, 3 validation error
//! (e.g. overlapping turns within one input), 4 bad flags or parameters,
//! 5 reference without scored speech.

use std::fmt;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use dover_core::dover::{
    canonical_speaker_names, dover_combine, make_labels_disjoint, rank_inputs, rank_weights,
    Anchor, CombineOptions, DoverError, TiePolicy,
};
use dover_core::rttm::{
    emit_json, emit_rttm, parse_rttm_to_diarization, parse_seconds_to_ticks, RttmError,
};
use dover_core::scoring::{average_der_to_others, score, ScoreError, ScoreReport};
use dover_core::synth::{run_experiment, SynthError, SynthParams};
use dover_core::timeline::Diarization;
use dover_core::Tick;

const SCHEMA_VERSION: u32 = 1;

#[derive(Parser)]
#[command(
    name = "dover",
    version,
    about = "Combine speaker-diarization hypotheses by weighted voting; score and rank them"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Combine N diarization hypotheses into a consensus RTTM
    Combine(CombineArgs),
    /// Score a hypothesis against a reference (DER with optimal mapping)
    Score(ScoreArgs),
    /// Rank inputs by average DER to the others
    Rank(RankArgs),
    /// Run the synthetic multi-channel experiment
    Experiment(ExperimentArgs),
}

#[derive(Args)]
struct CombineArgs {
    /// Input RTTM files
    #[arg(required = true)]
    inputs: Vec<PathBuf>,

    /// Output path (stdout when omitted)
    #[arg(short, long)]
    output: Option<PathBuf>,

    /// Comma-separated external weights, one per input, in input order
    #[arg(long, value_delimiter = ',')]
    weights: Option<Vec<f64>>,

    /// Anchoring: rank | given-order | index:K | all
    #[arg(long, default_value = "rank", value_parser = parse_anchor)]
    anchor: Anchor,

    /// Tie policy for equal tallies
    #[arg(long, value_enum, default_value_t = TieArg::First)]
    tie: TieArg,

    /// Seed for the random tie policy
    #[arg(long, default_value_t = 0)]
    seed: u64,

    /// Keep only records with this file id
    #[arg(long)]
    file_id: Option<String>,

    /// Output format
    #[arg(long, value_enum, default_value_t = DiarFormat::Rttm)]
    format: DiarFormat,
}

#[derive(Args)]
struct ScoreArgs {
    /// Hypothesis RTTM
    #[arg(long)]
    hyp: PathBuf,

    /// Reference RTTM
    #[arg(long = "ref")]
    reference: PathBuf,

    /// Scoring collar in seconds around reference turn boundaries
    #[arg(long, default_value = "0")]
    collar: String,

    /// Keep only records with this file id
    #[arg(long)]
    file_id: Option<String>,

    /// Write the optimal speaker mapping to this file
    #[arg(long)]
    dump_mapping: Option<PathBuf>,

    /// Output path for the JSON report (stdout when omitted)
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct RankArgs {
    /// Input RTTM files (at least two)
    #[arg(required = true)]
    inputs: Vec<PathBuf>,

    /// Collar in seconds for the pairwise scoring
    #[arg(long, default_value = "0")]
    collar: String,

    /// Keep only records with this file id
    #[arg(long)]
    file_id: Option<String>,
}

#[derive(Args)]
struct ExperimentArgs {
    /// Number of degraded channels per trial
    #[arg(long, default_value_t = 7)]
    channels: usize,

    /// Number of trials
    #[arg(long, default_value_t = 10)]
    trials: usize,

    #[arg(long, default_value_t = 0)]
    seed: u64,

    /// Reference speakers
    #[arg(long, default_value_t = 4)]
    speakers: usize,

    /// Reference duration in seconds
    #[arg(long, default_value = "600")]
    duration: String,

    /// Mean turn duration in seconds
    #[arg(long, default_value = "5")]
    mean_turn: String,

    /// Probability of a pause after each turn
    #[arg(long, default_value_t = 0.2)]
    pause_prob: f64,

    /// Boundary jitter standard deviation in seconds
    #[arg(long, default_value = "0.25")]
    jitter: String,

    /// Probability of relabeling a turn to another speaker
    #[arg(long, default_value_t = 0.1)]
    relabel: f64,

    /// Probability of splitting/merging turns
    #[arg(long, default_value_t = 0.05)]
    splitmerge: f64,

    /// Report format
    #[arg(long, value_enum, default_value_t = ReportFormat::Tsv)]
    format: ReportFormat,

    /// Output path (stdout when omitted)
    #[arg(short, long)]
    output: Option<PathBuf>,

    /// Directory for per-trial RTTM dumps
    #[arg(long)]
    dump_rttm: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum TieArg {
    First,
    Lex,
    Random,
}

#[derive(Clone, Copy, ValueEnum)]
enum DiarFormat {
    Rttm,
    Json,
}

#[derive(Clone, Copy, ValueEnum)]
enum ReportFormat {
    Tsv,
    Json,
}

fn parse_anchor(text: &str) -> Result<Anchor, String> {
    text.parse()
}

enum CliError {
    Io(String),
    Parse(String),
    Validation(String),
    Usage(String),
    EmptyReference(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Io(_) => 1,
            CliError::Parse(_) => 2,
            CliError::Validation(_) => 3,
            CliError::Usage(_) => 4,
            CliError::EmptyReference(_) => 5,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Io(m)
            | CliError::Parse(m)
            | CliError::Validation(m)
            | CliError::Usage(m)
            | CliError::EmptyReference(m) => f.write_str(m),
        }
    }
}

impl From<RttmError> for CliError {
    fn from(e: RttmError) -> Self {
        match e {
            RttmError::Timeline(inner) => CliError::Validation(inner.to_string()),
            RttmError::MixedFileIds { .. } => CliError::Validation(e.to_string()),
            other => CliError::Parse(other.to_string()),
        }
    }
}

impl From<DoverError> for CliError {
    fn from(e: DoverError) -> Self {
        match e {
            DoverError::Score(inner) => inner.into(),
            DoverError::NonDisjointLabels { .. } => CliError::Validation(e.to_string()),
            other => CliError::Usage(other.to_string()),
        }
    }
}

impl From<ScoreError> for CliError {
    fn from(e: ScoreError) -> Self {
        CliError::EmptyReference(e.to_string())
    }
}

impl From<SynthError> for CliError {
    fn from(e: SynthError) -> Self {
        match e {
            SynthError::BadParams(_) => CliError::Usage(e.to_string()),
            SynthError::Io(inner) => CliError::Io(inner.to_string()),
            SynthError::Dover(inner) => inner.into(),
            SynthError::Score(inner) => inner.into(),
            SynthError::Timeline(inner) => CliError::Validation(inner.to_string()),
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 4,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Combine(args) => cmd_combine(&args),
        Command::Score(args) => cmd_score(&args),
        Command::Rank(args) => cmd_rank(&args),
        Command::Experiment(args) => cmd_experiment(&args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}

fn read_input(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn write_output(path: Option<&Path>, content: &str) -> Result<(), CliError> {
    match path {
        Some(p) => {
            std::fs::write(p, content).map_err(|e| CliError::Io(format!("{}: {e}", p.display())))
        }
        None => {
            print!("{content}");
            Ok(())
        }
    }
}

/// Loads an RTTM file into a validated timeline, returning its file id.
fn load_rttm(
    path: &Path,
    file_id_filter: Option<&str>,
) -> Result<(Diarization, Option<String>), CliError> {
    let text = read_input(path)?;
    Ok(parse_rttm_to_diarization(
        &text,
        file_id_filter,
        &path.display().to_string(),
    )?)
}

/// All inputs must agree on one recording unless a filter selected it.
fn resolve_file_id(file_ids: &[Option<String>], filter: Option<&str>) -> Result<String, CliError> {
    if let Some(f) = filter {
        return Ok(f.to_string());
    }
    let mut found: Option<&str> = None;
    for id in file_ids.iter().flatten() {
        match found {
            None => found = Some(id),
            Some(prev) if prev != id => {
                return Err(CliError::Validation(format!(
                    "inputs mix file ids {prev:?} and {id:?}; pass --file-id to select one"
                )))
            }
            _ => {}
        }
    }
    Ok(found.unwrap_or("combined").to_string())
}

fn parse_collar(text: &str) -> Result<Tick, CliError> {
    let ticks = parse_seconds_to_ticks(text)
        .ok_or_else(|| CliError::Usage(format!("collar {text:?} is not a decimal number")))?;
    if ticks < 0 {
        return Err(CliError::Usage(format!("collar {text:?} is negative")));
    }
    Ok(ticks)
}

fn ticks_to_secs(ticks: Tick) -> f64 {
    ticks as f64 / 1000.0
}

fn tie_policy(tie: TieArg, seed: u64) -> TiePolicy {
    match tie {
        TieArg::First => TiePolicy::First,
        TieArg::Lex => TiePolicy::Lexicographic,
        TieArg::Random => TiePolicy::Random { seed },
    }
}

fn cmd_combine(args: &CombineArgs) -> Result<(), CliError> {
    let mut inputs = Vec::with_capacity(args.inputs.len());
    let mut file_ids = Vec::with_capacity(args.inputs.len());
    for path in &args.inputs {
        let (d, file_id) = load_rttm(path, args.file_id.as_deref())?;
        inputs.push(d);
        file_ids.push(file_id);
    }
    let out_file_id = resolve_file_id(&file_ids, args.file_id.as_deref())?;
    let disjoint = make_labels_disjoint(&inputs);
    let options = CombineOptions {
        external_weights: args.weights.clone(),
        anchor: args.anchor,
        tie_policy: tie_policy(args.tie, args.seed),
        ranking_collar: 0,
    };
    let outcome = dover_combine(&disjoint, &options)?;
    let consensus = canonical_speaker_names(&outcome.consensus);

    let weights: Vec<String> = outcome.weights.iter().map(|w| format!("{w:.6}")).collect();
    if args.anchor == Anchor::All {
        eprintln!(
            "combined {} inputs with every anchor ({} passes); final weights: {}",
            inputs.len(),
            inputs.len() + 1,
            weights.join(", "),
        );
    } else {
        let order: Vec<String> = outcome
            .order
            .iter()
            .map(|&i| args.inputs[i].display().to_string())
            .collect();
        eprintln!(
            "combined {} inputs; anchor order: {}; weights: {}",
            inputs.len(),
            order.join(", "),
            weights.join(", "),
        );
    }

    let payload = match args.format {
        DiarFormat::Rttm => emit_rttm(&consensus, &out_file_id, "1"),
        DiarFormat::Json => emit_json(&consensus, &out_file_id),
    };
    write_output(args.output.as_deref(), &payload)
}

fn score_report_json(report: &ScoreReport) -> String {
    let doc = serde_json::json!({
        "schema_version": SCHEMA_VERSION,
        "miss_s": ticks_to_secs(report.miss),
        "fa_s": ticks_to_secs(report.false_alarm),
        "spkerr_s": ticks_to_secs(report.speaker_error),
        "ref_speech_s": ticks_to_secs(report.ref_speech_total),
        "der": report.der,
        "spkerr_rate": report.spkerr_rate,
    });
    let mut text = serde_json::to_string_pretty(&doc).expect("serializable report");
    text.push('\n');
    text
}

fn mapping_json(report: &ScoreReport) -> String {
    let entries: Vec<serde_json::Value> = report
        .mapping
        .entries()
        .iter()
        .map(|e| {
            serde_json::json!({
                "source": e.source,
                "target": e.target,
                "shared_s": ticks_to_secs(e.shared),
            })
        })
        .collect();
    let doc = serde_json::json!({
        "schema_version": SCHEMA_VERSION,
        "entries": entries,
    });
    let mut text = serde_json::to_string_pretty(&doc).expect("serializable mapping");
    text.push('\n');
    text
}

fn cmd_score(args: &ScoreArgs) -> Result<(), CliError> {
    let collar = parse_collar(&args.collar)?;
    let (hyp, _) = load_rttm(&args.hyp, args.file_id.as_deref())?;
    let (reference, _) = load_rttm(&args.reference, args.file_id.as_deref())?;
    let report = score(&hyp, &reference, collar)?;
    if let Some(path) = &args.dump_mapping {
        std::fs::write(path, mapping_json(&report))
            .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    }
    write_output(args.output.as_deref(), &score_report_json(&report))
}

fn cmd_rank(args: &RankArgs) -> Result<(), CliError> {
    if args.inputs.len() < 2 {
        return Err(CliError::Usage("rank needs at least 2 inputs".into()));
    }
    let collar = parse_collar(&args.collar)?;
    let mut inputs = Vec::with_capacity(args.inputs.len());
    for path in &args.inputs {
        inputs.push(load_rttm(path, args.file_id.as_deref())?.0);
    }
    let averages = average_der_to_others(&inputs, collar)?;
    let order = rank_inputs(&inputs, collar)?;
    let weights = rank_weights(order.len(), None)?;
    let mut out = String::from("rank\tinput\tavg_der\tweight\n");
    for (position, &index) in order.iter().enumerate() {
        out.push_str(&format!(
            "{}\t{}\t{:.6}\t{:.6}\n",
            position + 1,
            args.inputs[index].display(),
            averages[index],
            weights[position],
        ));
    }
    write_output(None, &out)
}

fn cmd_experiment(args: &ExperimentArgs) -> Result<(), CliError> {
    let duration = parse_seconds_to_ticks(&args.duration)
        .ok_or_else(|| CliError::Usage(format!("bad duration {:?}", args.duration)))?;
    let mean_turn = parse_seconds_to_ticks(&args.mean_turn)
        .ok_or_else(|| CliError::Usage(format!("bad mean turn {:?}", args.mean_turn)))?;
    let jitter = parse_seconds_to_ticks(&args.jitter)
        .ok_or_else(|| CliError::Usage(format!("bad jitter {:?}", args.jitter)))?;
    let params = SynthParams {
        num_speakers: args.speakers,
        total_duration: duration,
        mean_turn,
        pause_prob: args.pause_prob,
        boundary_jitter_sigma: jitter,
        relabel_prob: args.relabel,
        split_merge_prob: args.splitmerge,
        seed: args.seed,
    };
    let report = run_experiment(
        &params,
        args.channels,
        args.trials,
        args.dump_rttm.as_deref(),
    )?;

    let at_or_below = report.trials_at_or_below_input_average();
    let total = report.rows.len();
    eprintln!(
        "claim (combined spkerr <= per-trial input average): {} ({at_or_below}/{total} trials)",
        if at_or_below * 100 >= total * 95 {
            "PASS"
        } else {
            "FAIL"
        },
    );
    let m = &report.macro_row;
    let threshold = m.input_spkerr.min + 0.3 * (m.input_spkerr.avg - m.input_spkerr.min);
    eprintln!(
        "claim (macro spkerr {:.6} <= min + 30% of (avg - min) = {:.6}): {}",
        m.dover_spkerr,
        threshold,
        if m.dover_spkerr <= threshold {
            "PASS"
        } else {
            "FAIL"
        },
    );

    let payload = match args.format {
        ReportFormat::Tsv => report.to_tsv(),
        ReportFormat::Json => report.to_json(),
    };
    write_output(args.output.as_deref(), &payload)
}
