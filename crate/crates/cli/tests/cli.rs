use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use dwe_core::synthetic::{SyntheticConfig, SyntheticData};
use tempfile::TempDir;

fn dwe(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dwe"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

struct Fixture {
    dir: TempDir,
    data: SyntheticData,
}

impl Fixture {
    fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        let data = SyntheticData::generate(&SyntheticConfig::default(), 3);
        data.write_to(dir.path()).unwrap();
        Fixture { dir, data }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn p(&self, name: &str) -> String {
        self.path(name).to_string_lossy().into_owned()
    }

    fn train(&self, out: &str, extra: &[&str]) -> Output {
        let (c, s, g, o) = (
            self.p("corpus.txt"),
            self.p("strokes.tsv"),
            self.p("glyphs.bin"),
            self.p(out),
        );
        let mut args = vec![
            "train",
            "--corpus",
            &c,
            "--strokes",
            &s,
            "--glyphs",
            &g,
            "--out",
            &o,
            "--dim",
            "8",
            "--batch",
            "128",
        ];
        if !extra.contains(&"--min-count") {
            args.extend(["--min-count", "1"]);
        }
        args.extend_from_slice(extra);
        dwe(&args)
    }
}

fn write(path: &Path, body: &str) {
    fs::write(path, body).unwrap();
}

#[test]
fn train_writes_checkpoint_and_reports_epochs() {
    let f = Fixture::new();
    let out = f.train("m.dwe", &["--epochs", "2", "--json"]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(f.path("m.dwe").exists());
    let err = stderr(&out);
    assert!(err
        .lines()
        .any(|l| l.starts_with("epoch=1 loss=") && l.contains(" pairs=") && l.contains(" elapsed=")));
    assert!(err.contains("epoch=2 loss="));
    let stats: serde_json::Value = serde_json::from_str(stdout(&out).trim()).unwrap();
    assert_eq!(stats.as_array().unwrap().len(), 2);
}

#[test]
fn nn_on_untrained_model_is_deterministic() {
    let f = Fixture::new();
    assert!(f.train("m.dwe", &["--epochs", "0"]).status.success());
    let word = f.data.topic_words[0][4].clone();
    let m = f.p("m.dwe");
    let run = || dwe(&["nn", "--model", &m, "--word", &word, "--k", "5"]);
    let (a, b) = (run(), run());
    assert!(a.status.success(), "{}", stderr(&a));
    assert_eq!(stdout(&a), stdout(&b));
    let text = stdout(&a);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 5);
    assert!(lines.iter().all(|l| !l.starts_with(&format!("{word}\t"))));

    let again = f.train("m2.dwe", &["--epochs", "0"]);
    assert!(again.status.success());
    assert_eq!(fs::read(f.path("m.dwe")).unwrap(), fs::read(f.path("m2.dwe")).unwrap());
}

#[test]
fn eval_sim_prints_tsv_row() {
    let f = Fixture::new();
    assert!(f.train("m.dwe", &["--epochs", "1"]).status.success());
    let w = &f.data.topic_words;
    let rows = format!(
        "{}\t{}\t9\n{}\t{}\t1\n{}\t{}\t8\n{}\t{}\t2\nnotaword\t{}\t5\n",
        w[0][4], w[0][5], w[0][4], w[1][4], w[1][4], w[1][5], w[2][4], w[3][4], w[0][4]
    );
    write(&f.path("ws.tsv"), &rows);
    let out = dwe(&["eval-sim", "--model", &f.p("m.dwe"), "--data", &f.p("ws.tsv")]);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = stdout(&out);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "metric\tgroup\tvalue\tcoverage");
    let cols: Vec<&str> = lines[1].split('\t').collect();
    assert_eq!(&cols[..2], ["spearman", "all"]);
    let rho: f64 = cols[2].parse().unwrap();
    assert!((-1.0..=1.0).contains(&rho));
    assert_eq!(cols[3], "0.8000");

    let json = dwe(&["eval-sim", "--model", &f.p("m.dwe"), "--data", &f.p("ws.tsv"), "--json"]);
    let v: serde_json::Value = serde_json::from_str(stdout(&json).trim()).unwrap();
    assert_eq!(v["scored"], 4);
}

#[test]
fn export_then_evaluate_text_vectors() {
    let f = Fixture::new();
    assert!(f.train("m.dwe", &["--epochs", "1"]).status.success());
    let out = dwe(&[
        "export",
        "--model",
        &f.p("m.dwe"),
        "--out",
        &f.p("v.txt"),
        "--which",
        "word_id",
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = fs::read_to_string(f.path("v.txt")).unwrap();
    let header: Vec<usize> = text
        .lines()
        .next()
        .unwrap()
        .split(' ')
        .map(|x| x.parse().unwrap())
        .collect();
    assert_eq!(header[1], 8);
    assert_eq!(text.lines().count(), header[0] + 1);

    let w = &f.data.topic_words;
    write(
        &f.path("an.txt"),
        &format!(": g\n{} {} {} {}\n", w[0][4], w[0][5], w[1][4], w[1][5]),
    );
    let out = dwe(&["eval-analogy", "--vectors", &f.p("v.txt"), "--data", &f.p("an.txt")]);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = stdout(&out);
    assert!(text.lines().any(|l| l.starts_with("3cosadd\tg\t")));
    assert!(text.lines().any(|l| l.starts_with("3cosmul\ttotal\t")));
}

#[test]
fn resume_continues_and_rejects_mismatched_config() {
    let f = Fixture::new();
    assert!(f.train("m.dwe", &["--epochs", "1"]).status.success());
    let (c, m, o) = (f.p("corpus.txt"), f.p("m.dwe"), f.p("m2.dwe"));
    let ok = dwe(&[
        "train",
        "--corpus",
        &c,
        "--resume",
        &m,
        "--out",
        &o,
        "--dim",
        "8",
        "--batch",
        "128",
        "--min-count",
        "1",
        "--epochs",
        "1",
    ]);
    assert!(ok.status.success(), "{}", stderr(&ok));
    assert!(stderr(&ok).contains("epoch=2 loss="));
    let bad = dwe(&[
        "train", "--corpus", &c, "--resume", &m, "--out", &o, "--dim", "300", "--epochs", "1",
    ]);
    assert_eq!(bad.status.code(), Some(2));
    assert!(stderr(&bad).contains("dim"));
}

#[test]
fn inspect_prints_strokes_ngrams_and_glyph() {
    let f = Fixture::new();
    let c = f.data.twins.0.to_string();
    let out = dwe(&[
        "inspect",
        "--char",
        &c,
        "--strokes",
        &f.p("strokes.tsv"),
        "--glyphs",
        &f.p("glyphs.bin"),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("strokes\t"));
    let count: usize = text
        .lines()
        .find_map(|l| l.strip_prefix("ngrams\t"))
        .unwrap()
        .parse()
        .unwrap();
    assert!(count >= 1);
    assert_eq!(text.lines().filter(|l| l.starts_with("  ")).count(), count);
    assert_eq!(
        text.lines()
            .filter(|l| l.len() == 56 && !l.contains(char::is_whitespace))
            .count(),
        28
    );
}

#[test]
fn exit_codes_follow_contract() {
    let help = dwe(&["train", "--help"]);
    assert_eq!(help.status.code(), Some(0));
    assert!(stdout(&help).contains("[default: 4096]"));

    assert_eq!(dwe(&[]).status.code(), Some(1));
    assert_eq!(dwe(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(dwe(&["nn", "--word", "x"]).status.code(), Some(1));
    let f = Fixture::new();
    assert_eq!(
        f.train("m.dwe", &["--threads", "2", "--deterministic"]).status.code(),
        Some(1)
    );
    assert_eq!(f.train("m.dwe", &["--lr", "-1"]).status.code(), Some(1));
    let zero = f.train("m.dwe", &["--min-count", "0"]);
    assert_eq!(zero.status.code(), Some(1));
    assert!(stderr(&zero).contains("min_count"), "{}", stderr(&zero));

    let missing = dwe(&["nn", "--model", &f.p("nope.dwe"), "--word", "x"]);
    assert_eq!(missing.status.code(), Some(2));
    assert_eq!(stderr(&missing).lines().count(), 1);
    write(&f.path("garbage.dwe"), "not a checkpoint");
    assert_eq!(
        dwe(&["export", "--model", &f.p("garbage.dwe"), "--out", &f.p("v.txt")])
            .status
            .code(),
        Some(2)
    );

    assert!(f.train("m.dwe", &["--epochs", "0"]).status.success());
    let oov = dwe(&["nn", "--model", &f.p("m.dwe"), "--word", "latin"]);
    assert_eq!(oov.status.code(), Some(2));
    assert_eq!(
        dwe(&["nn", "--model", &f.p("m.dwe"), "--word", "x", "--k", "0"])
            .status
            .code(),
        Some(2)
    );
    let big_vocab = f.train("big.dwe", &["--min-count", "100000"]);
    assert_eq!(big_vocab.status.code(), Some(2), "{}", stderr(&big_vocab));
}

#[test]
fn hogwild_training_runs() {
    let f = Fixture::new();
    let out = f.train(
        "m.dwe",
        &[
            "--epochs",
            "1",
            "--threads",
            "3",
            "--channels",
            "glyph",
            "--neg-scaling",
            "mean",
        ],
    );
    assert!(out.status.success(), "{}", stderr(&out));
}
