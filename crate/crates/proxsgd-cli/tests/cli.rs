//! End-to-end checks against the built binary: exit codes, CSV output and
//! the byte-identical determinism of the deterministic modes.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use proxsgd::data::{synthetic, write_libsvm_file, SyntheticProfile};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_proxsgd"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn small_dataset(dir: &Path) -> PathBuf {
    let path = dir.join("toy.libsvm");
    let data = synthetic(
        SyntheticProfile::Planted { n: 200, d: 20 },
        9,
    );
    write_libsvm_file(&data, &path).unwrap();
    path
}

#[test]
fn deterministic_modes_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let data = small_dataset(dir.path());
    let data_s = data.to_str().unwrap();

    for mode in ["simulate", "baseline"] {
        let out_a = dir.path().join(format!("{mode}_a.csv"));
        let out_b = dir.path().join(format!("{mode}_b.csv"));
        for out in [&out_a, &out_b] {
            let st = run(&[
                mode,
                "--data",
                data_s,
                "--batch",
                "8",
                "--updates",
                "50",
                "--seed",
                "7",
                "--eta-schedule",
                "tinv:1,1,100",
                "--metric-stride",
                "5",
                "--out",
                out.to_str().unwrap(),
            ]);
            assert!(
                st.status.success(),
                "{mode} failed: {}",
                String::from_utf8_lossy(&st.stderr)
            );
        }
        let a = std::fs::read(&out_a).unwrap();
        let b = std::fs::read(&out_b).unwrap();
        assert_eq!(a, b, "{mode} runs with identical argv must match byte-for-byte");
        assert!(a.starts_with(b"k,samples_seen,objective,"));
    }
}

#[test]
fn train_runs_and_emits_csv() {
    let dir = tempfile::tempdir().unwrap();
    let data = small_dataset(dir.path());
    let out = dir.path().join("train.csv");
    let st = run(&[
        "train",
        "--data",
        data.to_str().unwrap(),
        "--batch",
        "8",
        "--workers",
        "4",
        "--updates",
        "40",
        "--metric-stride",
        "10",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(st.status.success(), "{}", String::from_utf8_lossy(&st.stderr));
    let text = std::fs::read_to_string(&out).unwrap();
    assert_eq!(text.lines().count(), 1 + 4); // header + 4 stride rows
}

#[test]
fn usage_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let data = small_dataset(dir.path());
    // N not divisible by m
    let st = run(&[
        "simulate",
        "--data",
        data.to_str().unwrap(),
        "--batch",
        "10",
        "--workers",
        "4",
    ]);
    assert_eq!(st.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&st.stderr).contains("divisible"));

    // missing dataset
    let st = run(&["simulate", "--data", "/nonexistent/file"]);
    assert_eq!(st.status.code(), Some(1));

    // unknown flag
    let st = run(&["simulate", "--data", data.to_str().unwrap(), "--nope"]);
    assert_eq!(st.status.code(), Some(1));

    // unknown objective
    let st = run(&["simulate", "--data", data.to_str().unwrap(), "--objective", "svm"]);
    assert_eq!(st.status.code(), Some(1));
}

#[test]
fn malformed_dataset_is_a_runtime_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.libsvm");
    std::fs::write(&path, "1 3:a\n").unwrap();
    let st = run(&["baseline", "--data", path.to_str().unwrap(), "--updates", "5"]);
    assert_eq!(st.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&st.stderr).contains("line 1"));
}

#[test]
fn check_prints_both_conditions() {
    let st = run(&["check", "--eta-schedule", "const:0.0625", "--max-delay", "0"]);
    assert!(st.status.success());
    let text = String::from_utf8_lossy(&st.stdout);
    assert!(text.contains("condition 1"), "{text}");
    assert!(text.contains("condition 2"), "{text}");
    assert_eq!(text.matches("pass").count(), 2, "{text}");

    let st = run(&["check", "--eta-schedule", "const:1.0", "--max-delay", "2"]);
    assert!(st.status.success());
    let text = String::from_utf8_lossy(&st.stdout);
    assert!(text.contains("FAIL at k=1"), "{text}");
}

#[test]
fn selftest_passes() {
    let st = run(&["selftest", "--trials", "500"]);
    assert!(st.status.success(), "{}", String::from_utf8_lossy(&st.stderr));
    let text = String::from_utf8_lossy(&st.stdout);
    assert_eq!(text.matches("pass").count(), 4, "{text}");
}

#[test]
fn reference_then_speedup_reuses_the_file() {
    let dir = tempfile::tempdir().unwrap();
    let data = small_dataset(dir.path());
    let data_s = data.to_str().unwrap();

    let st = run(&[
        "reference",
        "--data",
        data_s,
        "--updates",
        "800",
        "--restarts",
        "3",
    ]);
    assert!(st.status.success(), "{}", String::from_utf8_lossy(&st.stderr));
    let ref_files: Vec<_> = std::fs::read_dir(dir.path())
        .unwrap()
        .filter_map(|e| e.ok())
        .filter(|e| e.file_name().to_string_lossy().starts_with("pxrf-"))
        .collect();
    assert_eq!(ref_files.len(), 1, "one reference file keyed by fingerprint");

    let out = dir.path().join("speedup.csv");
    let st = run(&[
        "speedup",
        "--data",
        data_s,
        "--batch",
        "8",
        "--updates",
        "400",
        "--eta-schedule",
        "tinv:1,1,100",
        "--target",
        "1e-2",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(st.status.success(), "{}", String::from_utf8_lossy(&st.stderr));
    // the sweep must not have recomputed the reference
    assert!(
        !String::from_utf8_lossy(&st.stderr).contains("no reference on disk"),
        "speedup should reuse the persisted reference"
    );
    let text = std::fs::read_to_string(&out).unwrap();
    assert!(text.starts_with("p,iteration_speedup,sim_time_speedup\n"));
    assert_eq!(text.lines().count(), 1 + 4); // p = 1, 2, 4, 8
}

#[test]
fn run_without_out_writes_csv_to_stdout() {
    let dir = tempfile::tempdir().unwrap();
    let data = small_dataset(dir.path());
    let st = run(&[
        "simulate",
        "--data",
        data.to_str().unwrap(),
        "--batch",
        "8",
        "--updates",
        "20",
        "--metric-stride",
        "10",
    ]);
    assert!(st.status.success());
    let text = String::from_utf8_lossy(&st.stdout);
    assert!(text.starts_with("k,samples_seen,objective,"));
    assert_eq!(text.lines().count(), 1 + 2);
}
