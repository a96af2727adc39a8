//! NIST RTTM parsing and emission, plus a JSON equivalent.
//!
//! Line format:
//! `SPEAKER <file> <chan> <tbeg> <tdur> <ortho> <stype> <name> <conf> <slat>`.
//! Onset and duration are decimal seconds; they are converted to integer
//! millisecond ticks at parse time with round-half-even, so all downstream
//! arithmetic is exact.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::timeline::{Diarization, TimelineError, Turn};
use crate::Tick;

const NA: &str = "<NA>";

/// One RTTM SPEAKER line. Non-time fields are preserved opaquely.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RttmRecord {
    pub record_type: String,
    pub file_id: String,
    pub channel: String,
    pub onset: Tick,
    pub duration: Tick,
    pub speaker: String,
    pub ortho: String,
    pub stype: String,
    pub conf: String,
    pub slat: String,
}

#[derive(Debug, Error, PartialEq)]
pub enum RttmError {
    #[error("line {line}: SPEAKER record has {found} fields, expected at least 8")]
    FieldCount { line: usize, found: usize },
    #[error("line {line}: {field} {value:?} is not a decimal number of seconds")]
    BadNumber {
        line: usize,
        field: &'static str,
        value: String,
    },
    #[error("line {line}: onset {value:?} is negative")]
    NegativeOnset { line: usize, value: String },
    #[error("line {line}: duration {value:?} is not positive")]
    NonPositiveDuration { line: usize, value: String },
    #[error("input mixes file ids {first:?} and {second:?}; pass a file-id filter to select one")]
    MixedFileIds { first: String, second: String },
    #[error("invalid JSON diarization: {0}")]
    Json(String),
    #[error(transparent)]
    Timeline(#[from] TimelineError),
}

/// Parses decimal seconds into millisecond ticks using exact string
/// arithmetic with round-half-even on sub-millisecond digits.
pub fn parse_seconds_to_ticks(text: &str) -> Option<Tick> {
    let (negative, rest) = match text.strip_prefix('-') {
        Some(r) => (true, r),
        None => (false, text.strip_prefix('+').unwrap_or(text)),
    };
    let (int_part, frac_part) = match rest.split_once('.') {
        Some((i, f)) => (i, f),
        None => (rest, ""),
    };
    if int_part.is_empty() && frac_part.is_empty() {
        return None;
    }
    if !int_part.bytes().all(|b| b.is_ascii_digit())
        || !frac_part.bytes().all(|b| b.is_ascii_digit())
    {
        return None;
    }
    let mut ticks: Tick = if int_part.is_empty() {
        0
    } else {
        int_part.parse::<Tick>().ok()?
    };
    ticks = ticks.checked_mul(1000)?;
    let mut frac_ms = 0i64;
    for (i, b) in frac_part.bytes().take(3).enumerate() {
        frac_ms += i64::from(b - b'0') * 10i64.pow(2 - i as u32);
    }
    ticks = ticks.checked_add(frac_ms)?;
    let remainder = frac_part.get(3..).unwrap_or("");
    if let Some(first) = remainder.bytes().next() {
        let rest_nonzero = remainder.bytes().skip(1).any(|b| b != b'0');
        let round_up = match first {
            b'0'..=b'4' => false,
            b'6'..=b'9' => true,
            _ => rest_nonzero || ticks % 2 == 1, // exact half: to even
        };
        if round_up {
            ticks = ticks.checked_add(1)?;
        }
    }
    Some(if negative { -ticks } else { ticks })
}

/// Formats ticks as decimal seconds with exactly 3 decimal places.
pub fn format_ticks_as_seconds(ticks: Tick) -> String {
    let sign = if ticks < 0 { "-" } else { "" };
    let abs = ticks.unsigned_abs();
    format!("{sign}{}.{:03}", abs / 1000, abs % 1000)
}

/// Parses RTTM text, returning the SPEAKER records in order of appearance.
/// Lines of any other record type are silently skipped; a file-id filter,
/// when given, drops records for other recordings.
pub fn parse_rttm(text: &str, file_id_filter: Option<&str>) -> Result<Vec<RttmRecord>, RttmError> {
    let mut records = Vec::new();
    for (idx, raw_line) in text.lines().enumerate() {
        let line = idx + 1;
        let fields: Vec<&str> = raw_line.split_whitespace().collect();
        match fields.first() {
            Some(&"SPEAKER") => {}
            _ => continue,
        }
        if fields.len() < 8 {
            return Err(RttmError::FieldCount {
                line,
                found: fields.len(),
            });
        }
        let onset = parse_seconds_to_ticks(fields[3]).ok_or_else(|| RttmError::BadNumber {
            line,
            field: "onset",
            value: fields[3].to_string(),
        })?;
        if onset < 0 {
            return Err(RttmError::NegativeOnset {
                line,
                value: fields[3].to_string(),
            });
        }
        let duration = parse_seconds_to_ticks(fields[4]).ok_or_else(|| RttmError::BadNumber {
            line,
            field: "duration",
            value: fields[4].to_string(),
        })?;
        if duration <= 0 {
            return Err(RttmError::NonPositiveDuration {
                line,
                value: fields[4].to_string(),
            });
        }
        if file_id_filter.is_some_and(|want| want != fields[1]) {
            continue;
        }
        records.push(RttmRecord {
            record_type: fields[0].to_string(),
            file_id: fields[1].to_string(),
            channel: fields[2].to_string(),
            onset,
            duration,
            speaker: fields[7].to_string(),
            ortho: fields[5].to_string(),
            stype: fields[6].to_string(),
            conf: fields.get(8).unwrap_or(&NA).to_string(),
            slat: fields.get(9).unwrap_or(&NA).to_string(),
        });
    }
    Ok(records)
}

/// Converts parsed records into a validated timeline. All records must
/// carry the same file id; returns it alongside the diarization.
pub fn diarization_from_records(
    records: &[RttmRecord],
    source_id: &str,
) -> Result<(Diarization, Option<String>), RttmError> {
    let mut file_id: Option<&str> = None;
    for r in records {
        match file_id {
            None => file_id = Some(&r.file_id),
            Some(seen) if seen != r.file_id => {
                return Err(RttmError::MixedFileIds {
                    first: seen.to_string(),
                    second: r.file_id.clone(),
                })
            }
            _ => {}
        }
    }
    let turns = records
        .iter()
        .map(|r| Turn::new(r.speaker.clone(), r.onset, r.onset + r.duration))
        .collect();
    Ok((
        Diarization::validate(turns, source_id)?,
        file_id.map(str::to_string),
    ))
}

/// Parses RTTM text directly into a validated timeline.
pub fn parse_rttm_to_diarization(
    text: &str,
    file_id_filter: Option<&str>,
    source_id: &str,
) -> Result<(Diarization, Option<String>), RttmError> {
    let records = parse_rttm(text, file_id_filter)?;
    diarization_from_records(&records, source_id)
}

/// Emits one SPEAKER line per turn, millisecond-exact, sorted by onset.
/// Speaker labels must be whitespace-free tokens.
pub fn emit_rttm(d: &Diarization, file_id: &str, channel: &str) -> String {
    let mut out = String::new();
    for t in d.turns() {
        out.push_str(&format!(
            "SPEAKER {file_id} {channel} {} {} {NA} {NA} {} {NA} {NA}\n",
            format_ticks_as_seconds(t.begin),
            format_ticks_as_seconds(t.duration()),
            t.label,
        ));
    }
    out
}

#[derive(Debug, Serialize, Deserialize)]
struct JsonTurn {
    speaker: String,
    begin_ms: Tick,
    end_ms: Tick,
}

/// JSON equivalent of an RTTM hypothesis, tick-exact.
#[derive(Debug, Serialize, Deserialize)]
struct JsonDiarization {
    schema_version: u32,
    file_id: String,
    turns: Vec<JsonTurn>,
}

pub fn emit_json(d: &Diarization, file_id: &str) -> String {
    let doc = JsonDiarization {
        schema_version: 1,
        file_id: file_id.to_string(),
        turns: d
            .turns()
            .iter()
            .map(|t| JsonTurn {
                speaker: t.label.clone(),
                begin_ms: t.begin,
                end_ms: t.end,
            })
            .collect(),
    };
    let mut text = serde_json::to_string_pretty(&doc).expect("serializable report");
    text.push('\n');
    text
}

pub fn parse_json(text: &str, source_id: &str) -> Result<(Diarization, String), RttmError> {
    let doc: JsonDiarization =
        serde_json::from_str(text).map_err(|e| RttmError::Json(e.to_string()))?;
    let turns = doc
        .turns
        .into_iter()
        .map(|t| Turn::new(t.speaker, t.begin_ms, t.end_ms))
        .collect();
    Ok((Diarization::validate(turns, source_id)?, doc.file_id))
}
