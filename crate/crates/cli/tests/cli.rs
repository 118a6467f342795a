//! End-to-end tests of the `cyclerank` binary: exit codes, file outputs,
//! and manifest replay.

use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_cyclerank"))
}

fn run(args: &[&str], dir: &Path) -> Output {
    bin().args(args).current_dir(dir).output().expect("binary runs")
}

fn assert_exit(out: &Output, code: i32) {
    assert_eq!(
        out.status.code(),
        Some(code),
        "stdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn gen_then_approx_cycle_recovers_planted_fixture() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run(
        &["gen", "--kind", "cycle", "--n", "10", "--k", "2", "--seed", "5", "--output", "a.coo"],
        tmp.path(),
    );
    assert_exit(&out, 0);
    let sidecar: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(tmp.path().join("a.coo.meta.json")).unwrap())
            .unwrap();
    assert_eq!(sidecar["planted_residual_sq"].as_f64().unwrap(), 0.0);

    let out = run(
        &[
            "approx-cycle",
            "--input",
            "a.coo",
            "--k",
            "2",
            "--eps",
            "0.5",
            "--seed",
            "1",
            "--restarts",
            "3",
            "--output-dir",
            "run",
        ],
        tmp.path(),
    );
    assert_exit(&out, 0);
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(tmp.path().join("run/report.json")).unwrap())
            .unwrap();
    let rel = report["relative_residual"].as_f64().unwrap();
    assert!(rel <= 1e-4, "relative residual {}", rel);
    for f in ["U.mat", "V.mat", "W.mat", "timings.json", "manifest.json"] {
        assert!(tmp.path().join("run").join(f).exists(), "{} missing", f);
    }
}

#[test]
fn approx_cp_on_planted_cp_fixture() {
    let tmp = tempfile::tempdir().unwrap();
    assert_exit(
        &run(
            &["gen", "--kind", "cp", "--n", "10", "--k", "2", "--seed", "8", "--output", "a.coo"],
            tmp.path(),
        ),
        0,
    );
    let out = run(
        &[
            "approx-cp",
            "--input",
            "a.coo",
            "--k",
            "2",
            "--eps",
            "0.5",
            "--seed",
            "2",
            "--restarts",
            "3",
            "--output-dir",
            "run",
        ],
        tmp.path(),
    );
    assert_exit(&out, 0);
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(tmp.path().join("run/report.json")).unwrap())
            .unwrap();
    assert!(report["relative_residual"].as_f64().unwrap() <= 1e-4);
}

#[test]
fn zero_tensor_gives_zero_factors_and_exit_0() {
    let tmp = tempfile::tempdir().unwrap();
    std::fs::write(tmp.path().join("zero.coo"), "4 0\n").unwrap();
    let out = run(
        &["approx-cycle", "--input", "zero.coo", "--k", "1", "--eps", "0.5", "--output-dir", "r"],
        tmp.path(),
    );
    assert_exit(&out, 0);
    let u = std::fs::read_to_string(tmp.path().join("r/U.mat")).unwrap();
    assert!(u.lines().skip(1).all(|l| l.split_whitespace().all(|t| t == "0")), "U: {}", u);
}

#[test]
fn missing_input_exits_3() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run(
        &["approx-cycle", "--input", "nope.coo", "--k", "2", "--eps", "0.5"],
        tmp.path(),
    );
    assert_exit(&out, 3);
}

#[test]
fn bad_eps_exits_2_and_names_range() {
    let tmp = tempfile::tempdir().unwrap();
    std::fs::write(tmp.path().join("z.coo"), "2 1\n0 0 0 1.0\n").unwrap();
    let out = run(
        &["approx-cycle", "--input", "z.coo", "--k", "2", "--eps", "1.5"],
        tmp.path(),
    );
    assert_exit(&out, 2);
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("(0, 1)"), "stderr: {}", err);
}

#[test]
fn zero_k_exits_2() {
    let tmp = tempfile::tempdir().unwrap();
    std::fs::write(tmp.path().join("z.coo"), "2 1\n0 0 0 1.0\n").unwrap();
    let out =
        run(&["approx-cp", "--input", "z.coo", "--k", "0", "--eps", "0.5"], tmp.path());
    assert_exit(&out, 2);
}

#[test]
fn malformed_tensor_reports_line_number_and_exits_3() {
    let tmp = tempfile::tempdir().unwrap();
    std::fs::write(tmp.path().join("bad.coo"), "2 2\n0 0 0 1.0\n0 1 x 2.0\n").unwrap();
    let out = run(
        &["approx-cycle", "--input", "bad.coo", "--k", "1", "--eps", "0.5"],
        tmp.path(),
    );
    assert_exit(&out, 3);
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 3"), "stderr: {}", err);
}

#[test]
fn gen_rejects_degenerate_shapes() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run(
        &["gen", "--kind", "cycle", "--n", "0", "--k", "1", "--output", "x.coo"],
        tmp.path(),
    );
    assert_exit(&out, 2);
}

#[test]
fn binary_format_round_trips_through_gen_and_approx() {
    let tmp = tempfile::tempdir().unwrap();
    assert_exit(
        &run(
            &["gen", "--kind", "cycle", "--n", "8", "--k", "1", "--seed", "2", "--output", "a.bin"],
            tmp.path(),
        ),
        0,
    );
    let out = run(
        &["approx-cycle", "--input", "a.bin", "--k", "1", "--eps", "0.5", "--output-dir", "r"],
        tmp.path(),
    );
    assert_exit(&out, 0);
}

#[test]
fn pcfg_prints_exact_single_rule_probability() {
    let tmp = tempfile::tempdir().unwrap();
    std::fs::write(
        tmp.path().join("g.txt"),
        "ROOT S\nBIN S A B 0.4\nLEX S x 0.6\nLEX A a 1.0\nLEX B b 1.0\n",
    )
    .unwrap();
    let out = run(&["pcfg", "--grammar", "g.txt", "--sentence", "a b"], tmp.path());
    assert_exit(&out, 0);
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("inside\t0\t1\tS\t0.4"), "stdout: {}", stdout);
    assert!(stdout.contains("marginal\t0\t1\tS\t0.4"), "stdout: {}", stdout);
    assert!(stdout.contains("outside\t0\t1\tS\t1"), "stdout: {}", stdout);
}

#[test]
fn pcfg_unnormalized_grammar_exits_2_and_names_symbol() {
    let tmp = tempfile::tempdir().unwrap();
    std::fs::write(tmp.path().join("g.txt"), "ROOT BROKEN\nBIN BROKEN BROKEN BROKEN 0.5\nLEX BROKEN x 0.3\n")
        .unwrap();
    let out = run(&["pcfg", "--grammar", "g.txt", "--sentence", "x"], tmp.path());
    assert_exit(&out, 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("BROKEN"));
}

#[test]
fn pcfg_reads_sentence_from_file() {
    let tmp = tempfile::tempdir().unwrap();
    std::fs::write(tmp.path().join("g.txt"), "ROOT S\nLEX S x 1.0\n").unwrap();
    std::fs::write(tmp.path().join("s.txt"), "x\n").unwrap();
    let out = run(
        &["pcfg", "--grammar", "g.txt", "--sentence-file", "s.txt"],
        tmp.path(),
    );
    assert_exit(&out, 0);
    assert!(String::from_utf8_lossy(&out.stdout).contains("inside\t0\t0\tS\t1"));
}

#[test]
fn sketch_bench_counts_double_exactly_with_nnz() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run(
        &["sketch-bench", "--n", "16", "--sizes", "400,800", "--seed", "3"],
        tmp.path(),
    );
    assert_exit(&out, 0);
    let stdout = String::from_utf8_lossy(&out.stdout);
    let mut visits = std::collections::HashMap::new();
    for line in stdout.lines().skip(1) {
        let cols: Vec<&str> = line.split(',').collect();
        let nnz: u64 = cols[1].parse().unwrap();
        let v: u64 = cols[2].parse().unwrap();
        assert_eq!(v, nnz, "visits must equal nnz exactly: {}", line);
        visits.insert((cols[0].to_string(), nnz), v);
    }
    assert_eq!(
        visits[&("sketch_columns".to_string(), 800u64)],
        2 * visits[&("sketch_columns".to_string(), 400u64)]
    );
    assert_eq!(
        visits[&("contract_all_modes".to_string(), 800u64)],
        2 * visits[&("contract_all_modes".to_string(), 400u64)]
    );
}

#[test]
fn sketch_bench_empty_sizes_exits_2() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run(&["sketch-bench", "--n", "16", "--sizes", ""], tmp.path());
    assert_exit(&out, 2);
}

#[test]
fn rerun_reproduces_byte_identical_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    assert_exit(
        &run(
            &["gen", "--kind", "cycle", "--n", "8", "--k", "2", "--seed", "7", "--output", "a.coo"],
            tmp.path(),
        ),
        0,
    );
    assert_exit(
        &run(
            &[
                "approx-cycle",
                "--input",
                "a.coo",
                "--k",
                "2",
                "--eps",
                "0.5",
                "--seed",
                "9",
                "--restarts",
                "2",
                "--starts",
                "4",
                "--output-dir",
                "r1",
            ],
            tmp.path(),
        ),
        0,
    );
    assert_exit(
        &run(
            &["rerun", "--manifest", "r1/manifest.json", "--output-dir", "r2"],
            tmp.path(),
        ),
        0,
    );
    let manifest: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(tmp.path().join("r1/manifest.json")).unwrap(),
    )
    .unwrap();
    for f in manifest["outputs"].as_array().unwrap() {
        let name = f.as_str().unwrap();
        let a = std::fs::read(tmp.path().join("r1").join(name)).unwrap();
        let b = std::fs::read(tmp.path().join("r2").join(name)).unwrap();
        assert_eq!(a, b, "{} differs between runs", name);
    }
}

#[test]
fn threads_flag_does_not_change_results() {
    let tmp = tempfile::tempdir().unwrap();
    assert_exit(
        &run(
            &["gen", "--kind", "cycle", "--n", "8", "--k", "2", "--seed", "3", "--output", "a.coo"],
            tmp.path(),
        ),
        0,
    );
    for (dir, threads) in [("t1", "1"), ("t4", "4")] {
        assert_exit(
            &run(
                &[
                    "approx-cycle",
                    "--threads",
                    threads,
                    "--input",
                    "a.coo",
                    "--k",
                    "2",
                    "--eps",
                    "0.5",
                    "--seed",
                    "11",
                    "--restarts",
                    "3",
                    "--starts",
                    "4",
                    "--output-dir",
                    dir,
                ],
                tmp.path(),
            ),
            0,
        );
    }
    for f in ["U.mat", "V.mat", "W.mat", "report.json"] {
        let a = std::fs::read(tmp.path().join("t1").join(f)).unwrap();
        let b = std::fs::read(tmp.path().join("t4").join(f)).unwrap();
        assert_eq!(a, b, "{} depends on thread count", f);
    }
}
