//! Python bindings: expose the diarization timeline type plus the combine,
//! score, rank, and experiment operations as a `dover_py` module.
//!
//! Times cross the boundary as float seconds and are converted to the
//! millisecond tick grid with round-half-even.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::{PyDict, PyList};

use dover_core::dover::{
    canonical_speaker_names, dover_combine, make_labels_disjoint, rank_weights, Anchor,
    CombineOptions, TiePolicy,
};
use dover_core::rttm::{emit_rttm, parse_rttm_to_diarization};
use dover_core::scoring::ScoreReport;
use dover_core::synth::{run_experiment, SynthParams};
use dover_core::timeline::{Diarization as CoreDiarization, Turn};
use dover_core::Tick;

fn value_error(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn secs_to_ticks(secs: f64) -> PyResult<Tick> {
    if !secs.is_finite() {
        return Err(value_error(format!("time {secs:?} is not finite")));
    }
    Ok((secs * 1000.0).round_ties_even() as Tick)
}

fn ticks_to_secs(ticks: Tick) -> f64 {
    ticks as f64 / 1000.0
}

fn parse_tie(tie: &str, seed: u64) -> PyResult<TiePolicy> {
    match tie {
        "first" => Ok(TiePolicy::First),
        "lex" => Ok(TiePolicy::Lexicographic),
        "random" => Ok(TiePolicy::Random { seed }),
        other => Err(value_error(format!(
            "unknown tie policy {other:?}; use first, lex, or random"
        ))),
    }
}

/// A validated, time-sorted, non-overlapping speaker timeline.
#[pyclass]
#[derive(Clone)]
struct Diarization {
    inner: CoreDiarization,
}

#[pymethods]
impl Diarization {
    /// Build from (speaker, begin_seconds, end_seconds) tuples.
    #[new]
    #[pyo3(signature = (turns, source_id="python"))]
    fn new(turns: Vec<(String, f64, f64)>, source_id: &str) -> PyResult<Self> {
        let turns = turns
            .into_iter()
            .map(|(label, begin, end)| {
                Ok(Turn::new(label, secs_to_ticks(begin)?, secs_to_ticks(end)?))
            })
            .collect::<PyResult<Vec<_>>>()?;
        let inner = CoreDiarization::validate(turns, source_id).map_err(value_error)?;
        Ok(Self { inner })
    }

    /// Parse RTTM text, optionally filtered to one file id.
    #[staticmethod]
    #[pyo3(signature = (text, file_id=None))]
    fn from_rttm(text: &str, file_id: Option<&str>) -> PyResult<Self> {
        let (inner, _) = parse_rttm_to_diarization(text, file_id, "python").map_err(value_error)?;
        Ok(Self { inner })
    }

    /// Turns as (speaker, begin_seconds, end_seconds) tuples.
    fn turns(&self) -> Vec<(String, f64, f64)> {
        self.inner
            .turns()
            .iter()
            .map(|t| {
                (
                    t.label.clone(),
                    ticks_to_secs(t.begin),
                    ticks_to_secs(t.end),
                )
            })
            .collect()
    }

    fn labels(&self) -> Vec<String> {
        self.inner.labels().iter().map(|&l| l.to_string()).collect()
    }

    fn speech_total(&self) -> f64 {
        ticks_to_secs(self.inner.speech_total())
    }

    fn source_id(&self) -> String {
        self.inner.source_id().to_string()
    }

    #[pyo3(signature = (file_id="rec", channel="1"))]
    fn to_rttm(&self, file_id: &str, channel: &str) -> String {
        emit_rttm(&self.inner, file_id, channel)
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __repr__(&self) -> String {
        format!(
            "Diarization(source_id={:?}, turns={}, speakers={}, speech={:.3}s)",
            self.inner.source_id(),
            self.inner.len(),
            self.inner.labels().len(),
            ticks_to_secs(self.inner.speech_total()),
        )
    }
}

fn borrow_inputs(py: Python<'_>, inputs: &[Py<Diarization>]) -> Vec<CoreDiarization> {
    inputs.iter().map(|d| d.borrow(py).inner.clone()).collect()
}

/// Combine N hypotheses into a consensus with canonical speaker names.
/// Labels are made disjoint across inputs automatically.
#[pyfunction]
#[pyo3(signature = (inputs, weights=None, anchor="rank", tie="first", seed=0))]
fn combine(
    py: Python<'_>,
    inputs: Vec<Py<Diarization>>,
    weights: Option<Vec<f64>>,
    anchor: &str,
    tie: &str,
    seed: u64,
) -> PyResult<Diarization> {
    let inputs = make_labels_disjoint(&borrow_inputs(py, &inputs));
    let options = CombineOptions {
        external_weights: weights,
        anchor: anchor.parse::<Anchor>().map_err(value_error)?,
        tie_policy: parse_tie(tie, seed)?,
        ranking_collar: 0,
    };
    let outcome = dover_combine(&inputs, &options).map_err(value_error)?;
    Ok(Diarization {
        inner: canonical_speaker_names(&outcome.consensus),
    })
}

fn report_dict<'py>(py: Python<'py>, report: &ScoreReport) -> PyResult<Bound<'py, PyDict>> {
    let dict = PyDict::new(py);
    dict.set_item("miss_s", ticks_to_secs(report.miss))?;
    dict.set_item("fa_s", ticks_to_secs(report.false_alarm))?;
    dict.set_item("spkerr_s", ticks_to_secs(report.speaker_error))?;
    dict.set_item("ref_speech_s", ticks_to_secs(report.ref_speech_total))?;
    dict.set_item("der", report.der)?;
    dict.set_item("spkerr_rate", report.spkerr_rate)?;
    let mapping = PyList::empty(py);
    for entry in report.mapping.entries() {
        mapping.append((
            entry.source.clone(),
            entry.target.clone(),
            ticks_to_secs(entry.shared),
        ))?;
    }
    dict.set_item("mapping", mapping)?;
    Ok(dict)
}

/// DER of `hyp` against `reference` under the optimal speaker mapping.
#[pyfunction]
#[pyo3(signature = (hyp, reference, collar=0.0))]
fn score<'py>(
    py: Python<'py>,
    hyp: &Diarization,
    reference: &Diarization,
    collar: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let collar = secs_to_ticks(collar)?;
    if collar < 0 {
        return Err(value_error("collar must be nonnegative"));
    }
    let report =
        dover_core::scoring::score(&hyp.inner, &reference.inner, collar).map_err(value_error)?;
    report_dict(py, &report)
}

/// Input order after centroid ranking (indices into `inputs`).
#[pyfunction]
fn rank_inputs(py: Python<'_>, inputs: Vec<Py<Diarization>>) -> PyResult<Vec<usize>> {
    dover_core::dover::rank_inputs(&borrow_inputs(py, &inputs), 0).map_err(value_error)
}

/// Rank-decay weights, optionally multiplied with external weights.
#[pyfunction]
#[pyo3(name = "rank_weights", signature = (n, external=None))]
fn rank_weights_py(n: usize, external: Option<Vec<f64>>) -> PyResult<Vec<f64>> {
    rank_weights(n, external.as_deref()).map_err(value_error)
}

/// Run the synthetic multi-channel experiment; returns the report as a
/// JSON string (rows per trial plus a macro row).
#[pyfunction]
#[pyo3(signature = (
    channels=7, trials=10, seed=0, speakers=4, duration=600.0, mean_turn=5.0,
    pause_prob=0.2, jitter=0.25, relabel=0.1, splitmerge=0.05
))]
#[allow(clippy::too_many_arguments)]
fn experiment_json(
    channels: usize,
    trials: usize,
    seed: u64,
    speakers: usize,
    duration: f64,
    mean_turn: f64,
    pause_prob: f64,
    jitter: f64,
    relabel: f64,
    splitmerge: f64,
) -> PyResult<String> {
    let params = SynthParams {
        num_speakers: speakers,
        total_duration: secs_to_ticks(duration)?,
        mean_turn: secs_to_ticks(mean_turn)?,
        pause_prob,
        boundary_jitter_sigma: secs_to_ticks(jitter)?,
        relabel_prob: relabel,
        split_merge_prob: splitmerge,
        seed,
    };
    let report = run_experiment(&params, channels, trials, None).map_err(value_error)?;
    Ok(report.to_json())
}

#[pymodule]
fn dover_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_class::<Diarization>()?;
    m.add_function(wrap_pyfunction!(combine, m)?)?;
    m.add_function(wrap_pyfunction!(score, m)?)?;
    m.add_function(wrap_pyfunction!(rank_inputs, m)?)?;
    m.add_function(wrap_pyfunction!(rank_weights_py, m)?)?;
    m.add_function(wrap_pyfunction!(experiment_json, m)?)?;
    Ok(())
}
