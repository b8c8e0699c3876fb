use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use bcrf_cli::data::{load_conll, TagPolicy};
use bcrf_cli::model::Model;
use bcrf_cli::tensor_io::read_tensors;
use tempfile::TempDir;

fn bcrf(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bcrf")).args(args).output().unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn write(dir: &TempDir, name: &str, text: &str) -> PathBuf {
    let p = dir.path().join(name);
    fs::write(&p, text).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

const BIES: &str = "the\tB-NP\ncat\tE-NP\nsat\tS-VP\n\na\tS-NP\ndog\tS-NP\nran\tS-VP\nfast\tS-ADV\n\n";

fn synth_file(dir: &TempDir, name: &str, count: &str) -> PathBuf {
    let p = dir.path().join(name);
    let out = bcrf(&["synth", "--seed", "3", "--count", count, "--synth-tags", "4", "--synth-vocab", "20", "--out", s(&p)]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    p
}

#[test]
fn format_errors_exit_2_and_name_the_line() {
    let dir = TempDir::new().unwrap();
    let bad = write(&dir, "bad.tsv", "a\tX\nb Y\n");
    let m = dir.path().join("m.json");
    let out = bcrf(&["train", "--data", s(&bad), "--model", s(&m)]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("bad.tsv:2:"), "{}", stderr(&out));

    let broken = write(&dir, "m.json", "not json");
    let data = write(&dir, "d.tsv", BIES);
    let out = bcrf(&["decode", "--model", s(&broken), "--data", s(&data)]);
    assert_eq!(code(&out), 2);
}

#[test]
fn unknown_tag_at_decode_time_is_a_format_error() {
    let dir = TempDir::new().unwrap();
    let data = write(&dir, "d.tsv", BIES);
    let m = dir.path().join("m.json");
    assert_eq!(code(&bcrf(&["train", "--data", s(&data), "--model", s(&m), "--epochs", "1"])), 0);
    let other = write(&dir, "o.tsv", "x\tB-NP\ny\tE-NP\nz\tS-PP\n");
    let out = bcrf(&["decode", "--model", s(&m), "--data", s(&other)]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("o.tsv:3:"), "{}", stderr(&out));
}

#[test]
fn gold_outside_the_mask_exits_3() {
    let dir = TempDir::new().unwrap();
    let data = write(&dir, "d.tsv", "a\tB-NP\nb\tS-VP\nc\tE-NP\n");
    let m = dir.path().join("m.json");
    let out = bcrf(&["train", "--data", s(&data), "--mask", "bies", "--model", s(&m)]);
    assert_eq!(code(&out), 3, "{}", stderr(&out));
}

#[test]
fn config_conflicts_exit_4() {
    let dir = TempDir::new().unwrap();
    let data = write(&dir, "d.tsv", BIES);
    let m = dir.path().join("m.json");
    let base = ["train", "--data", s(&data), "--model", s(&m), "--epochs", "1"];
    let run = |extra: &[&str]| code(&bcrf(&[&base[..], extra].concat()));
    assert_eq!(run(&["--mask", "bies", "--inference", "mf", "--dev", s(&data)]), 4);
    assert_eq!(run(&["--loss", "partial-nll"]), 4);
    assert_eq!(run(&["--loss", "hinge"]), 4);
    assert_eq!(run(&["--inference", "beam"]), 4);
    assert_eq!(run(&["--tau-inv", "0"]), 4);
    assert_eq!(run(&["--mask", "bies"]), 0);
    let out = bcrf(&["decode", "--model", s(&m), "--data", s(&data), "--inference", "mf"]);
    assert_eq!(code(&out), 4);
    assert!(stderr(&out).contains("mean field"));
}

#[test]
fn partial_labels_need_a_partial_loss() {
    let dir = TempDir::new().unwrap();
    let data = write(&dir, "p.tsv", "a\tX|Y\nb\t*\nc\tX\n\nd\tY\ne\tX\nf\tY\n");
    let m = dir.path().join("m.json");
    let out = bcrf(&["train", "--data", s(&data), "--model", s(&m), "--loss", "fy"]);
    assert_eq!(code(&out), 4);
    for loss in ["partial-nll", "partial-fy"] {
        let out = bcrf(&["train", "--data", s(&data), "--model", s(&m), "--loss", loss, "--epochs", "2"]);
        assert_eq!(code(&out), 0, "{}", stderr(&out));
    }
}

#[test]
fn training_is_deterministic_and_logs_every_epoch() {
    let dir = TempDir::new().unwrap();
    let data = synth_file(&dir, "train.tsv", "60");
    let run = |tag: &str| {
        let m = dir.path().join(format!("m{tag}.json"));
        let log = dir.path().join(format!("log{tag}.jsonl"));
        let out = bcrf(&[
            "train", "--data", s(&data), "--dev", s(&data), "--loss", "fy", "--inference", "bcrf", "--seed", "9",
            "--epochs", "3", "--model", s(&m), "--metrics", s(&log),
        ]);
        assert_eq!(code(&out), 0, "{}", stderr(&out));
        let lines: Vec<serde_json::Value> = fs::read_to_string(&log)
            .unwrap()
            .lines()
            .map(|l| serde_json::from_str(l).unwrap())
            .collect();
        (fs::read(&m).unwrap(), lines)
    };
    let (m1, log1) = run("a");
    let (m2, log2) = run("b");
    assert_eq!(m1, m2);
    assert_eq!(log1.len(), 3);
    for (a, b) in log1.iter().zip(&log2) {
        for key in ["epoch", "loss", "dev_acc"] {
            assert_eq!(a[key], b[key]);
        }
        assert!(a["wall_ms"].is_u64());
    }
}

#[test]
fn zero_learning_rate_writes_a_zero_model() {
    let dir = TempDir::new().unwrap();
    let data = synth_file(&dir, "train.tsv", "20");
    let m = dir.path().join("m.json");
    let out = bcrf(&["train", "--data", s(&data), "--lr", "0", "--epochs", "2", "--model", s(&m)]);
    assert_eq!(code(&out), 0);
    let model = Model::load(&m).unwrap();
    assert!(model.scorer.emissions.iter().chain(&model.scorer.transitions).all(|&x| x == 0.0));
}

#[test]
fn decode_and_marginals_round_trip() {
    let dir = TempDir::new().unwrap();
    let data = synth_file(&dir, "train.tsv", "40");
    let m = dir.path().join("m.json");
    assert_eq!(code(&bcrf(&["train", "--data", s(&data), "--epochs", "2", "--model", s(&m)])), 0);
    let parsed = load_conll(&data, TagPolicy::Grow).unwrap();

    for inference in ["crf", "bcrf", "mf", "unstructured"] {
        let out1 = bcrf(&["decode", "--model", s(&m), "--data", s(&data), "--inference", inference]);
        let out2 = bcrf(&["decode", "--model", s(&m), "--data", s(&data), "--inference", inference]);
        assert_eq!(code(&out1), 0, "{}", stderr(&out1));
        assert_eq!(out1.stdout, out2.stdout);
        let text = String::from_utf8(out1.stdout).unwrap();
        let sentences: Vec<&str> = text.split("\n\n").filter(|b| !b.trim().is_empty()).collect();
        assert_eq!(sentences.len(), parsed.len());
        assert!(sentences.iter().flat_map(|b| b.lines()).all(|l| l.split('\t').count() == 3));

        let q = dir.path().join(format!("{inference}.wt"));
        let out = bcrf(&["marginals", "--model", s(&m), "--data", s(&data), "--inference", inference, "--out", s(&q)]);
        assert_eq!(code(&out), 0, "{}", stderr(&out));
        let tensors = read_tensors(&fs::read_to_string(&q).unwrap(), "q").unwrap();
        assert_eq!(tensors.len(), parsed.len());
        for ((shape, values), rec) in tensors.iter().zip(&parsed.records) {
            assert_eq!(shape.len(), rec.len());
            let t = shape.num_tags();
            for slice in values.chunks(t * t) {
                assert!((slice.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            }
        }
    }
}

#[test]
fn short_sentences_are_padded_through_the_pipeline() {
    let dir = TempDir::new().unwrap();
    let data = write(&dir, "d.tsv", "the\tDET\ncat\tNOUN\n\nrun\tVERB\n\nthe\tDET\ndog\tNOUN\nran\tVERB\n");
    let m = dir.path().join("m.json");
    let out = bcrf(&["train", "--data", s(&data), "--model", s(&m), "--epochs", "30", "--lr", "1"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    for inference in ["crf", "bcrf"] {
        let out = bcrf(&["decode", "--model", s(&m), "--data", s(&data), "--inference", inference]);
        let text = String::from_utf8(out.stdout).unwrap();
        assert!(!text.contains("<s>") && !text.contains("<BOS>"), "{text}");
        assert!(text.lines().filter(|l| !l.is_empty()).all(|l| {
            let f: Vec<&str> = l.split('\t').collect();
            f[1] == f[2]
        }), "{text}");
    }
    // the boundary tag cannot be represented by mean field
    assert_eq!(code(&bcrf(&["decode", "--model", s(&m), "--data", s(&data), "--inference", "mf"])), 4);
}

#[test]
fn synth_format_matches_the_written_corpus() {
    let dir = TempDir::new().unwrap();
    let data = synth_file(&dir, "all.tsv", "30");
    let m = dir.path().join("m.json");
    let out = bcrf(&[
        "train", "--format", "synth", "--seed", "3", "--synth-tags", "4", "--synth-vocab", "20", "--synth-count", "20",
        "--synth-dev", "10", "--epochs", "1", "--model", s(&m),
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let from_file = bcrf(&["decode", "--model", s(&m), "--data", s(&data)]);
    let from_synth = bcrf(&[
        "decode", "--model", s(&m), "--format", "synth", "--seed", "3", "--synth-tags", "4", "--synth-vocab", "20",
        "--synth-count", "30",
    ]);
    assert_eq!(code(&from_synth), 0, "{}", stderr(&from_synth));
    assert_eq!(from_file.stdout, from_synth.stdout);
}

#[test]
fn oracle_check_and_tiny_bench() {
    let out = bcrf(&["oracle-check", "--count", "20", "--seed", "4"]);
    assert_eq!(code(&out), 0);
    assert!(String::from_utf8_lossy(&out.stdout).ends_with("PASS\n"));

    let dir = TempDir::new().unwrap();
    let json = dir.path().join("b.json");
    let out = bcrf(&[
        "bench", "--lengths", "8,16", "--tags", "3", "--batches", "2", "--ibp-iters", "1,2", "--mf-iters", "1",
        "--reps", "5", "--threads", "1", "--json", s(&json),
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(&json).unwrap()).unwrap();
    assert_eq!(report["threads"], 1);
    assert_eq!(report["rows"].as_array().unwrap().len(), 8);
    assert!(String::from_utf8_lossy(&out.stdout).contains("speedup"));
}
