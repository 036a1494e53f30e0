//! Black-box contracts of the `lst` binary: flag handling, exit codes,
//! output formats, and determinism. Each test drives the compiled binary
//! as a child process, exactly as a user would.

use std::path::Path;
use std::process::{Command, Output};

use lst_cli::bench::{BenchReport, CSV_HEADER};
use lst_core::{MlpStack, Nonlin, OutputKind};

fn lst(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lst"))
        .args(args)
        .output()
        .expect("failed to spawn the lst binary")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("child terminated by signal")
}

fn stdout_str(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).expect("stdout was not UTF-8")
}

#[test]
fn zero_steps_reports_zero_deviations_and_exits_zero() {
    let out = lst(&[
        "equivalence", "--D", "30", "--d", "5", "--m", "3", "--K", "2", "--steps", "0", "--eta",
        "0.01",
    ]);
    let text = stdout_str(&out);
    assert_eq!(code(&out), 0, "stdout:\n{text}");
    assert!(
        text.lines().any(|l| l == "overall,0e0,0e0,0e0"),
        "expected an all-zero overall line, got:\n{text}"
    );
}

#[test]
fn zero_tolerance_on_a_nontrivial_run_exits_one() {
    let out = lst(&[
        "equivalence", "--D", "30", "--d", "5", "--m", "3", "--K", "2", "--steps", "5", "--eta",
        "0.01", "--tol", "0",
    ]);
    assert_eq!(code(&out), 1, "float round-off must breach a zero tolerance");
}

#[test]
fn usage_errors_exit_two() {
    for args in [
        &["equivalence", "--bogus", "3"][..],
        &["frobnicate"][..],
        &[][..],
        &["bench", "--impl", "naive"][..], // missing required --D-list
        &["bench", "--impl", "race-car", "--D-list", "10"][..],
        &["equivalence", "--D", "ten", "--d", "5", "--m", "3", "--K", "2", "--steps", "1", "--eta", "0.01"][..],
    ] {
        let out = lst(args);
        assert_eq!(code(&out), 2, "args {args:?} should be a usage error");
    }
}

#[test]
fn semantic_flag_conflicts_exit_two() {
    // K larger than the output dimension cannot describe a valid target.
    let out = lst(&[
        "equivalence", "--D", "10", "--d", "4", "--m", "2", "--K", "11", "--steps", "1", "--eta",
        "0.01",
    ]);
    assert_eq!(code(&out), 2);

    let out = lst(&["bench", "--impl", "factored", "--K", "10", "--D-list", "5"]);
    assert_eq!(code(&out), 2);

    let out = lst(&["train", "--layers", "8", "--ngram", "1"]);
    assert_eq!(code(&out), 2);
}

#[test]
fn help_and_version_exit_zero() {
    assert_eq!(code(&lst(&["--help"])), 0);
    assert_eq!(code(&lst(&["--version"])), 0);
    assert_eq!(code(&lst(&["bench", "--help"])), 0);
}

#[test]
fn bench_stdout_starts_with_the_exact_header_and_round_trips() {
    let out = lst(&[
        "bench", "--impl", "factored", "--d", "6", "--m", "4", "--K", "2", "--D-list", "500,1000",
        "--reps", "2",
    ]);
    let text = stdout_str(&out);
    assert_eq!(code(&out), 0, "stdout:\n{text}");
    assert_eq!(text.lines().next(), Some(CSV_HEADER), "header must be byte-exact");

    let report = BenchReport::parse_csv(&text).expect("bench stdout must parse as a report");
    assert_eq!(report.rows.len(), 4, "2 dims x 2 reps");
    assert_eq!(report.to_csv(), text, "serialize(parse(csv)) must reproduce the csv");
    assert!(report.rows.iter().all(|r| r.update_seconds > 0.0));

    // Summary lines go to stderr, one median per D.
    let err = String::from_utf8(out.stderr).unwrap();
    assert_eq!(err.lines().filter(|l| l.starts_with("median ")).count(), 2, "stderr:\n{err}");
}

#[test]
fn bench_out_flag_writes_the_csv_to_a_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("report.csv");
    let out = lst(&[
        "bench", "--impl", "naive", "--d", "5", "--m", "3", "--K", "1", "--D-list", "400",
        "--reps", "2", "--out", path.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0);
    assert!(stdout_str(&out).is_empty(), "CSV must go to the file, not stdout");
    let text = std::fs::read_to_string(&path).unwrap();
    let report = BenchReport::parse_csv(&text).expect("file must hold a parsable report");
    assert_eq!(report.rows.len(), 2);
    assert!(report.rows.iter().all(|r| r.impl_tag.as_str() == "naive" && r.dim_out == 400));
}

#[test]
fn train_zero_epochs_checkpoint_equals_initialization() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("init.ckpt");
    let out = lst(&[
        "train", "--layers", "8", "--vocab-cap", "40", "--examples", "64", "--epochs", "0",
        "--seed", "5", "--checkpoint", path.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0);
    assert_eq!(stdout_str(&out), "epoch,iteration,mean_loss\n", "no update lines at 0 epochs");

    let fresh = MlpStack::new(40, &[8], 40, Nonlin::Tanh, OutputKind::Factored, 5).unwrap();
    let mut expected = Vec::new();
    lst_cli::checkpoint::write_model(&mut expected, &fresh).unwrap();
    let written = std::fs::read(&path).unwrap();
    assert_eq!(written, expected, "checkpoint after 0 epochs must equal the initial model");
}

#[test]
fn train_text_corpus_runs_and_checkpoint_loads_back() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("corpus.txt");
    let line = "the cat sat on the mat while the dog ran\n";
    std::fs::write(&corpus, line.repeat(20)).unwrap();
    let ckpt = dir.path().join("model.ckpt");

    let out = lst(&[
        "train", "--data", corpus.to_str().unwrap(), "--ngram", "2", "--vocab-cap", "9",
        "--layers", "6", "--epochs", "1", "--batch", "10", "--seed", "2", "--checkpoint",
        ckpt.to_str().unwrap(),
    ]);
    let text = stdout_str(&out);
    assert_eq!(code(&out), 0, "stdout:\n{text}");

    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("epoch,iteration,mean_loss"));
    // 20 lines x (10 - 1) bigram examples = 180 examples = 18 batches of 10.
    assert_eq!(lines.count(), 18, "one log line per batch");
    for l in text.lines().skip(1) {
        let loss: f64 = l.split(',').nth(2).unwrap().parse().unwrap();
        assert!(loss.is_finite() && loss >= 0.0, "bad loss line: {l}");
    }

    let net = lst_cli::checkpoint::load_model(Path::new(&ckpt)).unwrap();
    assert_eq!(net.input().dim_in(), 9, "bigram context = one block of vocab-cap ids");
    assert_eq!(net.output().dim_out(), 9);
    assert_eq!(net.output().d(), 7, "hidden width 6 plus the constant-1 row");
}

#[test]
fn missing_corpus_file_is_a_runtime_error_not_a_crash() {
    let out = lst(&["train", "--data", "/nonexistent/corpus.txt", "--layers", "4"]);
    assert_eq!(code(&out), 1);
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.starts_with("error:"), "stderr:\n{err}");
}

#[test]
fn stabilize_demo_fresh_layer_prints_already_stable() {
    let out = lst(&["stabilize-demo", "--d", "6", "--steps", "0"]);
    let text = stdout_str(&out);
    assert_eq!(code(&out), 0, "stdout:\n{text}");
    assert!(text.contains("already stable"), "stdout:\n{text}");
}

#[test]
fn stabilize_demo_restores_under_both_strategies() {
    for strategy in ["full_svd", "power_scan"] {
        let out = lst(&[
            "stabilize-demo", "--d", "8", "--steps", "20", "--eta-large", "0.3", "--strategy",
            strategy,
        ]);
        let text = stdout_str(&out);
        assert_eq!(code(&out), 0, "strategy {strategy} stdout:\n{text}");

        let field = |name: &str| -> f64 {
            text.lines()
                .find_map(|l| l.strip_prefix(name))
                .unwrap_or_else(|| panic!("missing {name} line in:\n{text}"))
                .parse()
                .unwrap()
        };
        assert!(field("cond_before=") > 1e6, "drive must leave U ill-conditioned");
        assert!(field("cond_after=") <= 1e5, "restored condition must be in range");
        assert!(field("w_drift=") <= 1e-6, "stabilization must not move W");
    }
}

#[test]
fn equivalence_and_train_stdout_are_deterministic_for_a_fixed_seed() {
    let equiv = &[
        "equivalence", "--D", "40", "--d", "6", "--m", "3", "--K", "2", "--steps", "20", "--eta",
        "0.01", "--seed", "9",
    ][..];
    assert_eq!(stdout_str(&lst(equiv)), stdout_str(&lst(equiv)));

    let train = &[
        "train", "--layers", "8", "--vocab-cap", "30", "--examples", "80", "--batch", "8",
        "--epochs", "1", "--seed", "9",
    ][..];
    assert_eq!(stdout_str(&lst(train)), stdout_str(&lst(train)));
}
