use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use seminmt::corpus::{oov_ratio, read_corpus};
use seminmt::Vocabulary;
use tempfile::TempDir;

fn seminmt(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_seminmt")).current_dir(dir).args(args).output().unwrap()
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = seminmt(dir, args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

/// Runs a failing command and returns its exit code after checking the
/// single-line error format.
fn fails(dir: &Path, args: &[&str]) -> (i32, String) {
    let out = seminmt(dir, args);
    let code = out.status.code().unwrap();
    assert_ne!(code, 0, "{args:?} unexpectedly succeeded");
    let stderr = String::from_utf8(out.stderr).unwrap();
    assert_eq!(stderr.lines().count(), 1, "{stderr}");
    assert!(stderr.starts_with(&format!("error code={code} kind=")), "{stderr}");
    (code, stderr)
}

/// Generates a tiny task with vocabularies in a fresh directory.
fn workspace() -> TempDir {
    let tmp = TempDir::new().unwrap();
    fs::write(
        tmp.path().join("gen.toml"),
        "vocab_size = 20\nparallel = 40\ntarget_mono = 30\nvalidation = 8\ntest = 8\noov_rate = 0.2\n",
    )
    .unwrap();
    ok(tmp.path(), &["gen-data", "--config", "gen.toml", "--out", "data"]);
    ok(tmp.path(), &["build-vocab", "--input", "data/train.src", "--out", "src.vocab"]);
    ok(tmp.path(), &["build-vocab", "--input", "data/train.tgt", "--out", "tgt.vocab"]);
    tmp
}

const DATA: [&str; 12] = [
    "--train-src",
    "data/train.src",
    "--train-tgt",
    "data/train.tgt",
    "--src-vocab",
    "src.vocab",
    "--tgt-vocab",
    "tgt.vocab",
    "--valid-src",
    "data/valid.src",
    "--valid-tgt",
    "data/valid.tgt",
];

const SMALL: [&str; 8] = ["--set", "embed_dim=4", "--set", "hidden_dim=6", "--set", "max_iterations=6", "--set", "eval_interval=3"];

fn with(base: &[&str], extra: &[&str]) -> Vec<String> {
    base.iter().chain(extra).map(|s| s.to_string()).collect()
}

fn run(dir: &Path, args: &[String]) -> String {
    ok(dir, &args.iter().map(String::as_str).collect::<Vec<_>>())
}

fn read_json(path: PathBuf) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn filter_oov_at_zero_keeps_only_covered_sentences() {
    let tmp = workspace();
    let d = tmp.path();
    ok(d, &["filter-oov", "--input", "data/mono.tgt", "--vocab", "tgt.vocab", "--threshold", "0.0", "--out", "clean.tgt"]);
    let vocab = Vocabulary::load(&d.join("tgt.vocab")).unwrap();
    let input = read_corpus(&d.join("data/mono.tgt")).unwrap();
    let kept = read_corpus(&d.join("clean.tgt")).unwrap();
    assert!(!kept.is_empty() && kept.len() < input.len());
    assert!(kept.iter().all(|s| input.contains(s)));
    assert!(kept.iter().all(|s| oov_ratio(s, &vocab).unwrap() == 0.0));
    assert!(d.join("clean.tgt.manifest.json").exists());

    ok(d, &["filter-oov", "--input", "data/mono.tgt", "--vocab", "tgt.vocab", "--threshold", "1", "--sample", "5", "--out", "s1"]);
    ok(d, &["filter-oov", "--input", "data/mono.tgt", "--vocab", "tgt.vocab", "--threshold", "1", "--sample", "5", "--out", "s2"]);
    let s1 = read_corpus(&d.join("s1")).unwrap();
    assert_eq!(s1.len(), 5);
    assert_eq!(s1, read_corpus(&d.join("s2")).unwrap());
}

#[test]
fn eval_bleu_of_identical_files_prints_100() {
    let tmp = workspace();
    let out = ok(tmp.path(), &["eval-bleu", "--candidates", "data/test.tgt", "--reference", "data/test.tgt"]);
    assert_eq!(out.trim(), "100.00");
}

#[test]
fn train_semi_defaults_are_the_reported_settings() {
    let tmp = workspace();
    let d = tmp.path();
    let args = with(&["train-semi"], &DATA);
    run(d, &with(&args.iter().map(String::as_str).collect::<Vec<_>>(), &["--cold-start", "--mono-tgt", "data/mono.tgt", "--set", "max_iterations=0", "--out", "semi"]));
    let m = read_json(d.join("semi/manifest.json"));
    let c = &m["config"];
    assert_eq!(c["k"], 10);
    assert_eq!(c["lambda1"], 0.1);
    assert_eq!(c["lambda2"], 0.0);
    assert_eq!(c["clip"], 0.05);
    assert_eq!(m["command"], "train-semi");
    assert_eq!(m["inputs"].as_object().unwrap().len(), 7);
}

#[test]
fn full_pipeline_and_replay_are_reproducible() {
    let tmp = workspace();
    let d = tmp.path();
    run(d, &[&["pretrain"][..], &DATA, &SMALL, &["--out", "pre"]].concat().iter().map(|s| s.to_string()).collect::<Vec<_>>());
    let semi: Vec<String> = [
        &["train-semi"][..],
        &DATA,
        &SMALL,
        &["--set", "k=2", "--mono-tgt", "data/mono.tgt", "--init-s2t", "pre/final_s2t.json", "--init-t2s", "pre/final_t2s.json"],
        &["--recon-sample", "3", "--out", "semi"],
    ]
    .concat()
    .iter()
    .map(|s| s.to_string())
    .collect();
    run(d, &semi);
    let log = fs::read_to_string(d.join("semi/runlog.jsonl")).unwrap();
    assert_eq!(log.lines().count(), 3);
    assert!(log.contains("\"heldout_reconstruction\":-"));

    ok(d, &["translate", "--model", "semi/final_s2t.json", "--src-vocab", "src.vocab", "--tgt-vocab", "tgt.vocab", "--input", "data/test.src", "--out", "hyp"]);
    assert_eq!(fs::read_to_string(d.join("hyp")).unwrap().lines().count(), 8);
    let bleu = ok(d, &["eval-bleu", "--candidates", "hyp", "--reference", "data/test.tgt", "--report", "bleu.json"]);
    let value: f64 = bleu.trim().parse().unwrap();
    assert!((0.0..=100.0).contains(&value));
    assert!(read_json(d.join("bleu.json"))["bleu"].is_number());

    let rec = ok(d, &[
        "reconstruct", "--s2t", "semi/final_s2t.json", "--t2s", "semi/final_t2s.json", "--src-vocab", "src.vocab",
        "--tgt-vocab", "tgt.vocab", "--input", "data/valid.tgt", "--k", "2", "--out", "rec.jsonl",
    ]);
    assert!(rec.starts_with("mean_log_marginal -"));
    let lines = fs::read_to_string(d.join("rec.jsonl")).unwrap();
    assert_eq!(lines.lines().count(), 8);
    let first: serde_json::Value = serde_json::from_str(lines.lines().next().unwrap()).unwrap();
    assert!(first["log_marginal"].as_f64().unwrap() >= first["joint_log_score"].as_f64().unwrap());

    let bt: Vec<String> = [&["back-translate"][..], &DATA, &SMALL, &["--mono-tgt", "data/mono.tgt", "--t2s", "pre/final_t2s.json", "--out", "bt"]]
        .concat()
        .iter()
        .map(|s| s.to_string())
        .collect();
    run(d, &bt);
    assert!(d.join("bt/final_s2t.json").exists() && d.join("bt/pseudo.src").exists());

    // Replaying the recorded command reproduces every output byte.
    let before: Vec<(String, Vec<u8>)> = snapshot(&d.join("semi"));
    ok(d, &["replay", "semi/manifest.json"]);
    assert_eq!(snapshot(&d.join("semi")), before);
}

fn snapshot(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect();
    files.sort();
    files
}

#[test]
fn replay_refuses_changed_inputs() {
    let tmp = workspace();
    let d = tmp.path();
    ok(d, &["filter-oov", "--input", "data/mono.tgt", "--vocab", "tgt.vocab", "--threshold", "0.5", "--out", "f"]);
    fs::write(d.join("data/mono.tgt"), "t1 t2\n").unwrap();
    let (code, msg) = fails(d, &["replay", "f.manifest.json"]);
    assert_eq!(code, 3);
    assert!(msg.contains("changed since the recorded run"));
}

#[test]
fn report_joins_runs_by_iteration() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    let rec = |it: usize, bleu: f64| {
        format!("{{\"iteration\":{it},\"supervised_s2t\":1.0,\"supervised_t2s\":null,\"reconstruction_target\":null,\"reconstruction_source\":null,\"valid_bleu_s2t\":{bleu},\"valid_bleu_t2s\":null,\"heldout_reconstruction\":null,\"clipped_steps\":0}}\n")
    };
    fs::write(d.join("k1.jsonl"), [rec(0, 1.0), rec(10, 2.0), rec(20, 3.0)].concat()).unwrap();
    fs::write(d.join("k5.jsonl"), [rec(0, 1.5), rec(20, 4.0)].concat()).unwrap();
    fs::write(d.join("empty.jsonl"), "").unwrap();

    let one = ok(d, &["report", "k1=k1.jsonl"]);
    assert_eq!(one.lines().count(), 4);
    assert!(one.lines().next().unwrap().starts_with("iteration,k1.supervised_s2t"));

    let two = ok(d, &["report", "k1=k1.jsonl", "k5=k5.jsonl", "--out", "joined.csv"]);
    assert!(two.is_empty());
    let csv = fs::read_to_string(d.join("joined.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().collect();
    assert_eq!(rows.len(), 4);
    assert!(rows[2].starts_with("10,") && rows[2].ends_with(",,,,,,,,,"));

    let empty = ok(d, &["report", "empty=empty.jsonl"]);
    assert_eq!(empty.lines().count(), 1);

    fs::write(d.join("bad.jsonl"), rec(0, 1.0) + "{not json\n").unwrap();
    let (code, msg) = fails(d, &["report", "bad.jsonl"]);
    assert_eq!(code, 3);
    assert!(msg.contains("line 2"), "{msg}");
}

#[test]
fn failures_have_distinct_exit_codes() {
    let tmp = workspace();
    let d = tmp.path();
    let (code, msg) = fails(d, &["eval-bleu", "--candidates", "missing.txt", "--reference", "data/test.tgt"]);
    assert_eq!(code, 3);
    assert!(msg.contains("kind=missing_file"));

    fs::write(d.join("bad.toml"), "k = [1, 2]\n").unwrap();
    let args = with(&["pretrain"], &DATA);
    let (code, _) = fails(d, &[args.iter().map(String::as_str).collect::<Vec<_>>(), vec!["--config", "bad.toml", "--out", "o"]].concat());
    assert_eq!(code, 2);
    let (code, msg) = fails(d, &[args.iter().map(String::as_str).collect::<Vec<_>>(), vec!["--set", "bogus=1", "--out", "o"]].concat());
    assert_eq!(code, 2);
    assert!(msg.contains("bogus"));

    let (code, _) = fails(d, &["frobnicate"]);
    assert_eq!(code, 2);

    let diverge = ["--set", "learning_rate=1e300", "--set", "clip=1e300", "--set", "max_iterations=5", "--out", "div"];
    let (code, msg) = fails(d, &[args.iter().map(String::as_str).collect::<Vec<_>>(), SMALL[..4].to_vec(), diverge.to_vec()].concat());
    assert_eq!(code, 4, "{msg}");

    let pre = [args.iter().map(String::as_str).collect::<Vec<_>>(), SMALL.to_vec(), vec!["--out", "pre"]].concat();
    ok(d, &pre);
    ok(d, &["build-vocab", "--input", "data/train.tgt", "--max-size", "8", "--out", "small.vocab"]);
    let (code, msg) = fails(d, &[
        "translate", "--model", "pre/final_s2t.json", "--src-vocab", "src.vocab", "--tgt-vocab", "small.vocab", "--input",
        "data/test.src", "--out", "hyp",
    ]);
    assert_eq!(code, 5);
    assert!(msg.contains("kind=vocab_mismatch"));
}

#[test]
fn help_exits_zero() {
    let tmp = TempDir::new().unwrap();
    let out = ok(tmp.path(), &["--help"]);
    for sub in ["gen-data", "build-vocab", "filter-oov", "pretrain", "train-semi", "back-translate", "translate", "reconstruct", "eval-bleu", "report"] {
        assert!(out.contains(sub), "{sub} missing from help");
    }
}
