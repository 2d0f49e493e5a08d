use std::path::Path;
use std::process::Command;

use gram_ctc::cli::run;
use gram_ctc::loss::{read_matrix, write_matrix, MatrixFormat};
use gram_ctc::Matrix;
use serde_json::Value;

fn call(args: &[&str]) -> (i32, String) {
    let mut out = Vec::new();
    let mut argv = vec!["gramctc"];
    argv.extend_from_slice(args);
    let code = run(argv, &mut out);
    (code, String::from_utf8(out).unwrap())
}

fn json(s: &str) -> Value {
    serde_json::from_str(s).unwrap()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn oracle_check_passes() {
    let (code, out) = call(&["oracle-check", "--seed", "7", "--max-T", "4"]);
    assert_eq!(code, 0);
    assert_eq!(json(&out)["summary"], "PASS, max rel err ≤ 1e-9");
}

#[test]
fn checks_fail_with_impossible_tolerance() {
    let (code, out) = call(&["grad-check", "--instances", "3", "--tolerance", "1e-30"]);
    assert_eq!(code, 1);
    assert!(json(&out)["summary"].as_str().unwrap().starts_with("FAIL"));
}

#[test]
fn normalize_and_grad_checks_pass() {
    assert_eq!(
        call(&["normalize-check", "--max-T", "4", "--instances", "20"]).0,
        0
    );
    let (code, _) = call(&[
        "grad-check",
        "--instances",
        "10",
        "--max-gram-len",
        "5",
        "--max-symbols",
        "6",
    ]);
    assert_eq!(code, 0);
}

#[test]
fn single_frame_loss_is_negative_log_posterior() {
    let dir = tempfile::tempdir().unwrap();
    let vocab = dir.path().join("v.txt");
    std::fs::write(&vocab, "#units: a\na\n").unwrap();
    let logits = dir.path().join("l.bin");
    let m = Matrix::from_rows(&[[0.5, 1.5]]).unwrap();
    write_matrix(
        &m,
        MatrixFormat::Binary,
        std::fs::File::create(&logits).unwrap(),
    )
    .unwrap();
    let grad = dir.path().join("g.csv");

    let (code, out) = call(&[
        "loss",
        path(&logits),
        "--label",
        "a",
        "--vocab",
        path(&vocab),
        "--grad",
        path(&grad),
        "--format",
        "csv",
    ]);
    assert_eq!(code, 0, "{out}");
    let y_a = 1.5f64.exp() / (0.5f64.exp() + 1.5f64.exp());
    let loss = json(&out)["results"][0]["result"]["loss"].as_f64().unwrap();
    assert!((loss + y_a.ln()).abs() < 1e-15);
    let g = read_matrix(std::fs::File::open(&grad).unwrap()).unwrap();
    assert!((g.get(0, 1) - (y_a - 1.0)).abs() < 1e-15);
}

#[test]
fn impossible_label_gives_error_record() {
    let dir = tempfile::tempdir().unwrap();
    let vocab = dir.path().join("v.txt");
    std::fs::write(&vocab, "a\n").unwrap();
    let logits = dir.path().join("l.json");
    std::fs::write(&logits, "[[0.0, 0.0]]").unwrap();
    let (code, out) = call(&[
        "loss",
        path(&logits),
        "--label",
        "aa",
        "--vocab",
        path(&vocab),
    ]);
    assert_eq!(code, 1);
    assert_eq!(
        json(&out)["results"][0]["error"]["kind"],
        "impossible_alignment"
    );

    let (code, out) = call(&[
        "loss",
        path(&logits),
        "--label",
        "b",
        "--vocab",
        path(&vocab),
    ]);
    assert_eq!(code, 1);
    assert!(json(&out)["error"]["kind"].is_string());

    let (code, out) = call(&["loss", path(&logits), "--label", "a"]);
    assert_eq!(code, 1);
    assert_eq!(json(&out)["error"]["kind"], "invalid_config");
}

#[test]
fn usage_errors_are_json() {
    let (code, out) = call(&["no-such-command"]);
    assert_eq!(code, 2);
    assert_eq!(json(&out)["error"]["kind"], "usage");
}

#[test]
fn framewise_dump_style() {
    let dir = tempfile::tempdir().unwrap();
    let vocab = dir.path().join("v.txt");
    std::fs::write(&vocab, "#units: eht\ne\nh\nt\nth\n").unwrap();
    // ids: blank 0, e 1, h 2, t 3, th 4
    let rows = [
        [5.0, 0.0, 0.0, 0.0, 0.0],
        [0.0, 0.0, 0.0, 0.0, 5.0],
        [0.0, 0.0, 0.0, 0.0, 5.0],
        [0.0, 5.0, 0.0, 0.0, 0.0],
    ];
    let logits = dir.path().join("l.csv");
    write_matrix(
        &Matrix::from_rows(&rows).unwrap(),
        MatrixFormat::Csv,
        std::fs::File::create(&logits).unwrap(),
    )
    .unwrap();
    let (code, out) = call(&[
        "decode",
        path(&logits),
        "--vocab",
        path(&vocab),
        "--dump-framewise",
    ]);
    assert_eq!(code, 0);
    assert_eq!(out, "_|th|th|e\n");
    let (_, out) = call(&[
        "decode",
        path(&logits),
        "--vocab",
        path(&vocab),
        "--mode",
        "beam",
    ]);
    assert_eq!(
        json(&out)["results"][0]["result"]["hypotheses"][0]["label"],
        "the"
    );
}

#[test]
fn jobs_do_not_change_output() {
    let dir = tempfile::tempdir().unwrap();
    let vocab = dir.path().join("v.txt");
    std::fs::write(&vocab, "#units: ab\na\nb\nab\n").unwrap();
    let mut files = Vec::new();
    for n in 0..6 {
        let p = dir.path().join(format!("l{n}.json"));
        let v = n as f64 * 0.3;
        std::fs::write(
            &p,
            format!("[[{v}, 1.0, 0.2, 0.5], [0.1, {v}, 0.9, 0.0], [0.3, 0.3, {v}, 1.0]]"),
        )
        .unwrap();
        files.push(p.to_str().unwrap().to_string());
    }
    let mut args = vec!["loss", "--label", "ab", "--vocab", path(&vocab)];
    args.extend(files.iter().map(String::as_str));
    let serial = call(&args);
    args.extend(["--jobs", "4"]);
    assert_eq!(call(&args), serial);
}

#[test]
fn gram_count_and_filter() {
    let dir = tempfile::tempdir().unwrap();
    let c1 = dir.path().join("c1.txt");
    let c2 = dir.path().join("c2.txt");
    std::fs::write(&c1, "aa ab\n").unwrap();
    std::fs::write(&c2, "ab\n").unwrap();
    let (code, stats) = call(&[
        "gram-count",
        path(&c1),
        path(&c2),
        "--max-len",
        "2",
        "--jobs",
        "2",
    ]);
    assert_eq!(code, 0);
    assert_eq!(stats, "4\ta\n2\tab\n2\tb\n1\taa\n");
    let sfile = dir.path().join("s.tsv");
    std::fs::write(&sfile, &stats).unwrap();
    let (code, vocab) = call(&["gram-filter", path(&sfile), "--min-count", "2"]);
    assert_eq!(code, 0);
    assert_eq!(vocab, "#units: ab\na\nb\nab\n");
    let (_, vocab) = call(&["gram-filter", path(&sfile), "--top-k", "2:2"]);
    assert_eq!(vocab, "#units: ab\na\nb\nab\naa\n");
}

#[test]
fn synth_train_eval_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let train = dir.path().join("train.jsonl");
    let test = dir.path().join("test.jsonl");
    let model = dir.path().join("m.json");
    let hist = dir.path().join("h.csv");
    assert_eq!(
        call(&[
            "synth",
            "--num-samples",
            "60",
            "--seed",
            "1",
            "--out",
            path(&train)
        ])
        .0,
        0
    );
    assert_eq!(
        call(&[
            "synth",
            "--num-samples",
            "20",
            "--seed",
            "2",
            "--out",
            path(&test)
        ])
        .0,
        0
    );
    let (code, out) = call(&[
        "train-toy",
        "--data",
        path(&train),
        "--loss",
        "ctc",
        "--epochs",
        "15",
        "--model-out",
        path(&model),
        "--history-out",
        path(&hist),
    ]);
    assert_eq!(code, 0, "{out}");
    let history = &json(&out)["history"];
    assert_eq!(history.as_array().unwrap().len(), 15);
    assert!(std::fs::read_to_string(&hist)
        .unwrap()
        .starts_with("epoch,loss\n1,"));
    let (code, out) = call(&["eval", "--model", path(&model), path(&test)]);
    assert_eq!(code, 0);
    let cer = json(&out)["results"][0]["result"]["cer"].as_f64().unwrap();
    assert!(cer < 0.1, "cer {cer}");
}

#[test]
fn identical_invocations_are_byte_identical() {
    let a = call(&["synth", "--num-samples", "3", "--seed", "9"]);
    assert_eq!(a, call(&["synth", "--num-samples", "3", "--seed", "9"]));
    assert_ne!(a, call(&["synth", "--num-samples", "3", "--seed", "10"]));
    let c = call(&["oracle-check", "--instances", "30"]);
    assert_eq!(c, call(&["oracle-check", "--instances", "30"]));
}

#[test]
fn binary_exit_codes() {
    let bin = env!("CARGO_BIN_EXE_gramctc");
    let ok = Command::new(bin)
        .args(["oracle-check", "--instances", "10"])
        .output()
        .unwrap();
    assert!(ok.status.success());
    let bad = Command::new(bin)
        .args(["loss", "missing.bin", "--label", "a"])
        .output()
        .unwrap();
    assert_eq!(bad.status.code(), Some(1));
    let record: Value = serde_json::from_slice(&bad.stdout).unwrap();
    assert!(record["error"]["message"].is_string());
}
