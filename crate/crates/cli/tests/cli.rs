//! End-to-end tests of the `dover` binary: exit codes, stream discipline,
//! and output formats.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn dover() -> Command {
    Command::new(env!("CARGO_BIN_EXE_dover"))
}

fn write(dir: &Path, name: &str, content: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, content).unwrap();
    path
}

fn abc_files(dir: &Path) -> (PathBuf, PathBuf, PathBuf) {
    let a = write(
        dir,
        "a.rttm",
        "SPEAKER m1 1 0.000 5.000 <NA> <NA> A1 <NA> <NA>\n\
         SPEAKER m1 1 5.000 5.000 <NA> <NA> A2 <NA> <NA>\n",
    );
    let b = write(
        dir,
        "b.rttm",
        "SPEAKER m1 1 0.000 4.000 <NA> <NA> B1 <NA> <NA>\n\
         SPEAKER m1 1 4.000 6.000 <NA> <NA> B2 <NA> <NA>\n",
    );
    let c = write(
        dir,
        "c.rttm",
        "SPEAKER m1 1 0.000 6.000 <NA> <NA> C1 <NA> <NA>\n\
         SPEAKER m1 1 6.000 4.000 <NA> <NA> C2 <NA> <NA>\n",
    );
    (a, b, c)
}

fn exit_code(output: &Output) -> i32 {
    output.status.code().expect("process exited")
}

fn stdout_str(output: &Output) -> String {
    String::from_utf8(output.stdout.clone()).unwrap()
}

#[test]
fn combine_worked_example_writes_canonical_consensus() {
    let dir = TempDir::new().unwrap();
    let (a, b, c) = abc_files(dir.path());
    let out = dir.path().join("out.rttm");
    let output = dover()
        .arg("combine")
        .args([&a, &b, &c])
        .arg("-o")
        .arg(&out)
        .output()
        .unwrap();
    assert_eq!(exit_code(&output), 0, "stderr: {:?}", output.stderr);
    assert!(stdout_str(&output).is_empty(), "data must go to the file");
    assert_eq!(
        std::fs::read_to_string(&out).unwrap(),
        "SPEAKER m1 1 0.000 5.000 <NA> <NA> spk1 <NA> <NA>\n\
         SPEAKER m1 1 5.000 5.000 <NA> <NA> spk2 <NA> <NA>\n"
    );
    let diagnostics = String::from_utf8(output.stderr).unwrap();
    assert!(diagnostics.contains("anchor order"));
}

#[test]
fn combine_single_input_round_trips_renamed() {
    let dir = TempDir::new().unwrap();
    let (a, _, _) = abc_files(dir.path());
    let output = dover().arg("combine").arg(&a).output().unwrap();
    assert_eq!(exit_code(&output), 0);
    assert_eq!(
        stdout_str(&output),
        "SPEAKER m1 1 0.000 5.000 <NA> <NA> spk1 <NA> <NA>\n\
         SPEAKER m1 1 5.000 5.000 <NA> <NA> spk2 <NA> <NA>\n"
    );
}

#[test]
fn combine_weight_count_mismatch_exits_4() {
    let dir = TempDir::new().unwrap();
    let (a, b, _) = abc_files(dir.path());
    let output = dover()
        .arg("combine")
        .args([&a, &b])
        .args(["--weights", "1"])
        .output()
        .unwrap();
    assert_eq!(exit_code(&output), 4);
}

#[test]
fn combine_overlapping_input_exits_3() {
    let dir = TempDir::new().unwrap();
    let bad = write(
        dir.path(),
        "bad.rttm",
        "SPEAKER m1 1 0.000 6.000 <NA> <NA> A1 <NA> <NA>\n\
         SPEAKER m1 1 5.000 5.000 <NA> <NA> A2 <NA> <NA>\n",
    );
    let output = dover().arg("combine").arg(&bad).output().unwrap();
    assert_eq!(exit_code(&output), 3);
    let diagnostics = String::from_utf8(output.stderr).unwrap();
    assert!(diagnostics.contains("overlap"), "stderr: {diagnostics}");
}

#[test]
fn combine_malformed_line_exits_2() {
    let dir = TempDir::new().unwrap();
    let bad = write(
        dir.path(),
        "bad.rttm",
        "SPEAKER m1 1 0.000 -2.0 <NA> <NA> A1 <NA> <NA>\n",
    );
    let output = dover().arg("combine").arg(&bad).output().unwrap();
    assert_eq!(exit_code(&output), 2);
}

#[test]
fn combine_missing_file_exits_1() {
    let output = dover()
        .arg("combine")
        .arg("/nonexistent.rttm")
        .output()
        .unwrap();
    assert_eq!(exit_code(&output), 1);
}

#[test]
fn combine_unknown_flag_exits_4_and_help_exits_0() {
    let output = dover().arg("combine").arg("--bogus").output().unwrap();
    assert_eq!(exit_code(&output), 4);
    let output = dover().arg("--help").output().unwrap();
    assert_eq!(exit_code(&output), 0);
}

#[test]
fn combine_mixed_file_ids_exits_3_unless_filtered() {
    let dir = TempDir::new().unwrap();
    let mixed = write(
        dir.path(),
        "mixed.rttm",
        "SPEAKER m1 1 0.000 5.000 <NA> <NA> A1 <NA> <NA>\n\
         SPEAKER m2 1 5.000 5.000 <NA> <NA> A2 <NA> <NA>\n",
    );
    let output = dover().arg("combine").arg(&mixed).output().unwrap();
    assert_eq!(exit_code(&output), 3);
    let output = dover()
        .arg("combine")
        .arg(&mixed)
        .args(["--file-id", "m2"])
        .output()
        .unwrap();
    assert_eq!(exit_code(&output), 0);
    assert_eq!(
        stdout_str(&output),
        "SPEAKER m2 1 5.000 5.000 <NA> <NA> spk1 <NA> <NA>\n"
    );
}

#[test]
fn combine_json_format_emits_tick_exact_turns() {
    let dir = TempDir::new().unwrap();
    let (a, _, _) = abc_files(dir.path());
    let output = dover()
        .arg("combine")
        .arg(&a)
        .args(["--format", "json"])
        .output()
        .unwrap();
    assert_eq!(exit_code(&output), 0);
    let doc: serde_json::Value = serde_json::from_str(&stdout_str(&output)).unwrap();
    assert_eq!(doc["schema_version"], 1);
    assert_eq!(doc["file_id"], "m1");
    assert_eq!(doc["turns"][0]["begin_ms"], 0);
    assert_eq!(doc["turns"][1]["end_ms"], 10_000);
}

#[test]
fn combine_anchor_variants_agree_on_worked_example() {
    let dir = TempDir::new().unwrap();
    let (a, b, c) = abc_files(dir.path());
    let expected = "SPEAKER m1 1 0.000 5.000 <NA> <NA> spk1 <NA> <NA>\n\
                    SPEAKER m1 1 5.000 5.000 <NA> <NA> spk2 <NA> <NA>\n";
    for anchor in ["rank", "given-order", "index:0", "all"] {
        let output = dover()
            .arg("combine")
            .args([&a, &b, &c])
            .args(["--anchor", anchor])
            .output()
            .unwrap();
        assert_eq!(exit_code(&output), 0, "anchor {anchor}");
        assert_eq!(stdout_str(&output), expected, "anchor {anchor}");
    }
}

#[test]
fn score_self_is_zero_der() {
    let dir = TempDir::new().unwrap();
    let (a, _, _) = abc_files(dir.path());
    let output = dover()
        .arg("score")
        .arg("--hyp")
        .arg(&a)
        .arg("--ref")
        .arg(&a)
        .output()
        .unwrap();
    assert_eq!(exit_code(&output), 0);
    let doc: serde_json::Value = serde_json::from_str(&stdout_str(&output)).unwrap();
    assert_eq!(doc["der"], 0.0);
}

#[test]
fn score_miss_only_report_matches_hand_values() {
    let dir = TempDir::new().unwrap();
    let hyp = write(
        dir.path(),
        "hyp.rttm",
        "SPEAKER m1 1 0.000 8.000 <NA> <NA> P <NA> <NA>\n",
    );
    let reference = write(
        dir.path(),
        "ref.rttm",
        "SPEAKER m1 1 0.000 10.000 <NA> <NA> P <NA> <NA>\n",
    );
    let mapping_path = dir.path().join("mapping.json");
    let output = dover()
        .arg("score")
        .arg("--hyp")
        .arg(&hyp)
        .arg("--ref")
        .arg(&reference)
        .arg("--dump-mapping")
        .arg(&mapping_path)
        .output()
        .unwrap();
    assert_eq!(exit_code(&output), 0);
    let doc: serde_json::Value = serde_json::from_str(&stdout_str(&output)).unwrap();
    assert_eq!(doc["der"], 0.2);
    assert_eq!(doc["miss_s"], 2.0);
    assert_eq!(doc["fa_s"], 0.0);
    assert_eq!(doc["spkerr_s"], 0.0);
    assert_eq!(doc["ref_speech_s"], 10.0);

    let mapping: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&mapping_path).unwrap()).unwrap();
    assert_eq!(mapping["entries"][0]["source"], "P");
    assert_eq!(mapping["entries"][0]["target"], "P");
    assert_eq!(mapping["entries"][0]["shared_s"], 8.0);

    // A 250 ms collar removes boundary regions from scoring.
    let output = dover()
        .arg("score")
        .arg("--hyp")
        .arg(&hyp)
        .arg("--ref")
        .arg(&reference)
        .args(["--collar", "0.25"])
        .output()
        .unwrap();
    let doc: serde_json::Value = serde_json::from_str(&stdout_str(&output)).unwrap();
    let der = doc["der"].as_f64().unwrap();
    assert!(
        der < 0.2,
        "collar should shrink the miss-only DER, got {der}"
    );
}

#[test]
fn score_empty_reference_exits_5() {
    let dir = TempDir::new().unwrap();
    let (a, _, _) = abc_files(dir.path());
    let empty = write(dir.path(), "empty.rttm", "");
    let output = dover()
        .arg("score")
        .arg("--hyp")
        .arg(&a)
        .arg("--ref")
        .arg(&empty)
        .output()
        .unwrap();
    assert_eq!(exit_code(&output), 5);
}

#[test]
fn rank_requires_two_inputs() {
    let dir = TempDir::new().unwrap();
    let (a, _, _) = abc_files(dir.path());
    let output = dover().arg("rank").arg(&a).output().unwrap();
    assert_eq!(exit_code(&output), 4);
}

#[test]
fn rank_lists_outlier_last_with_decay_weights() {
    let dir = TempDir::new().unwrap();
    let twin1 = write(
        dir.path(),
        "t1.rttm",
        "SPEAKER m1 1 0.000 5.000 <NA> <NA> X1 <NA> <NA>\n\
         SPEAKER m1 1 5.000 5.000 <NA> <NA> X2 <NA> <NA>\n",
    );
    let twin2 = write(
        dir.path(),
        "t2.rttm",
        "SPEAKER m1 1 0.000 5.000 <NA> <NA> Y1 <NA> <NA>\n\
         SPEAKER m1 1 5.000 5.000 <NA> <NA> Y2 <NA> <NA>\n",
    );
    let outlier = write(
        dir.path(),
        "odd.rttm",
        "SPEAKER m1 1 2.000 6.000 <NA> <NA> Z1 <NA> <NA>\n",
    );
    let output = dover()
        .arg("rank")
        .args([&twin1, &outlier, &twin2])
        .output()
        .unwrap();
    assert_eq!(exit_code(&output), 0);
    let table = stdout_str(&output);
    let lines: Vec<&str> = table.lines().collect();
    assert_eq!(lines[0], "rank\tinput\tavg_der\tweight");
    assert!(
        lines[3].contains("odd.rttm"),
        "outlier must rank last: {table}"
    );
    assert!(lines[1].ends_with("1.000000"));
    assert!(lines[2].ends_with("0.933033"));
    assert!(lines[3].ends_with("0.895958"));
}

#[test]
fn experiment_is_byte_deterministic() {
    let dir = TempDir::new().unwrap();
    let out1 = dir.path().join("r1.tsv");
    let out2 = dir.path().join("r2.tsv");
    for out in [&out1, &out2] {
        let output = dover()
            .arg("experiment")
            .args(["--channels", "3", "--trials", "5", "--seed", "1"])
            .args(["--duration", "120"])
            .arg("-o")
            .arg(out)
            .output()
            .unwrap();
        assert_eq!(exit_code(&output), 0);
    }
    assert_eq!(std::fs::read(&out1).unwrap(), std::fs::read(&out2).unwrap());
}

#[test]
fn experiment_without_perturbation_has_zero_dover_der() {
    let output = dover()
        .arg("experiment")
        .args(["--channels", "3", "--trials", "3", "--duration", "60"])
        .args(["--jitter", "0", "--relabel", "0", "--splitmerge", "0"])
        .output()
        .unwrap();
    assert_eq!(exit_code(&output), 0);
    let table = stdout_str(&output);
    for line in table.lines().skip(1) {
        let dover_der = line.split('\t').next_back().unwrap();
        assert_eq!(dover_der, "0.000000", "row: {line}");
    }
    let diagnostics = String::from_utf8(output.stderr).unwrap();
    assert!(diagnostics.contains("PASS"), "stderr: {diagnostics}");
}

#[test]
fn experiment_rejects_bad_params() {
    let output = dover()
        .arg("experiment")
        .args(["--channels", "1"])
        .output()
        .unwrap();
    assert_eq!(exit_code(&output), 4);
    let output = dover()
        .arg("experiment")
        .args(["--relabel", "1.5"])
        .output()
        .unwrap();
    assert_eq!(exit_code(&output), 4);
}

#[test]
fn experiment_json_report_carries_schema_version() {
    let output = dover()
        .arg("experiment")
        .args(["--channels", "2", "--trials", "2", "--duration", "60"])
        .args(["--format", "json"])
        .output()
        .unwrap();
    assert_eq!(exit_code(&output), 0);
    let doc: serde_json::Value = serde_json::from_str(&stdout_str(&output)).unwrap();
    assert_eq!(doc["schema_version"], 1);
    assert_eq!(doc["rows"].as_array().unwrap().len(), 2);
    assert!(doc["macro"]["dover_der"].is_number());
}
