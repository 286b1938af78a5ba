use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::{Command, Output, Stdio};

fn data_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data")
}

/// Shipped templates and lexicon with fixture counts and small models.
fn write_config(dir: &Path, lexicon: &Path) -> PathBuf {
    let config = format!(
        "templates_dir = {}\nlexicon = {}\nsources = d1 d2 d3 d4\ncounts = 65 86 76 89\n\
         test_source = d5\ntest_count = 10\noutput_dir = out\nseed = 3\n\
         embedding_dim = 24\nblstm.hidden = 8\nblstm.learning_rate = 0.1\nblstm.epochs = 5\n\
         crf.epochs = 10\n",
        data_dir().join("templates").display(),
        lexicon.display()
    );
    let path = dir.join("fixture.conf");
    fs::write(&path, config).unwrap();
    path
}

fn offerner(args: &[&str], stdin: Option<&str>) -> Output {
    let mut child = Command::new(env!("CARGO_BIN_EXE_offerner"))
        .args(args)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    let mut pipe = child.stdin.take().unwrap();
    pipe.write_all(stdin.unwrap_or("").as_bytes()).unwrap();
    drop(pipe);
    child.wait_with_output().unwrap()
}

fn run_ok(args: &[&str]) -> String {
    let out = offerner(args, None);
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn sentence_count(path: &Path) -> usize {
    offerner::Dataset::load_tsv(path).unwrap().len()
}

#[test]
fn generate_writes_configured_counts_deterministically() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), &data_dir().join("lexicon.tsv"));
    let c = config.to_str().unwrap();
    let table = run_ok(&["generate", "--config", c]);
    assert!(table.contains("D5"));
    let data = dir.path().join("out/data");
    let counts: Vec<usize> = (1..=5)
        .map(|i| sentence_count(&data.join(format!("D{i}.tsv"))))
        .collect();
    assert_eq!(counts, [65, 86, 76, 89, 10]);
    let before = fs::read(data.join("D3.tsv")).unwrap();
    run_ok(&["generate", "--config", c]);
    assert_eq!(fs::read(data.join("D3.tsv")).unwrap(), before);
    run_ok(&["generate", "--config", c, "--seed", "4"]);
    assert_ne!(fs::read(data.join("D3.tsv")).unwrap(), before);
}

#[test]
fn config_and_lexicon_errors_have_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let lexicon: String = fs::read_to_string(data_dir().join("lexicon.tsv"))
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with("MERCH"))
        .map(|l| format!("{l}\n"))
        .collect();
    let lex_path = dir.path().join("no_merch.tsv");
    fs::write(&lex_path, lexicon).unwrap();
    let config = write_config(dir.path(), &lex_path);
    let out = offerner(&["generate", "--config", config.to_str().unwrap()], None);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("MERCH"));

    let bad = dir.path().join("bad.conf");
    fs::write(&bad, "seed = many\n").unwrap();
    let out = offerner(&["generate", "--config", bad.to_str().unwrap()], None);
    assert_eq!(out.status.code(), Some(2));
    let out = offerner(&["generate", "--config", "/nonexistent.conf"], None);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn train_tag_and_eval_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), &data_dir().join("lexicon.tsv"));
    let c = config.to_str().unwrap();

    let out = offerner(&["train", "crf", "--config", c], None);
    assert_eq!(out.status.code(), Some(6), "datasets not generated yet");

    run_ok(&["generate", "--config", c]);
    let listed = run_ok(&["train", "all", "--config", c]);
    let models = dir.path().join("out/models");
    for f in [
        "crf.model",
        "blstm.model",
        "embeddings.txt",
        "greedy.model",
        "svm.model",
        "hybrid.manifest",
        "crf_D1.model",
        "crf_D4.model",
    ] {
        assert!(models.join(f).exists(), "{f} missing; listed:\n{listed}");
    }
    assert!(!models.join(".staging").exists());
    let manifest = models.join("hybrid.manifest");
    let first = fs::read(&manifest).unwrap();
    run_ok(&["train", "all", "--config", c]);
    assert_eq!(fs::read(&manifest).unwrap(), first);

    run_ok(&["train", "crf", "--individual", "2", "--config", c]);
    let out = offerner(
        &["train", "blstm", "--individual", "2", "--config", c],
        None,
    );
    assert_eq!(out.status.code(), Some(2));

    let m = manifest.to_str().unwrap();
    let out = offerner(
        &["tag", "--model", m],
        Some("Get 20% off on pizzas at Dominos\n\n"),
    );
    assert!(out.status.success());
    assert_eq!(
        String::from_utf8(out.stdout).unwrap(),
        "Get\tO\n20\tOAMT\n%\tOAMT\noff\tOTYPE\non\tO\npizzas\tPRD\nat\tO\nDominos\tMERCH\n\n"
    );
    let out = offerner(&["tag", "--model", m], Some(""));
    assert!(out.status.success());
    assert!(out.stdout.is_empty());
    for f in ["crf.model", "blstm.model", "greedy.model"] {
        let p = models.join(f);
        let out = offerner(
            &["tag", "--model", p.to_str().unwrap()],
            Some("10% cashback at Amazon\n"),
        );
        assert!(out.status.success(), "{f}");
        assert_eq!(String::from_utf8(out.stdout).unwrap().lines().count(), 6);
    }

    let corrupt = dir.path().join("corrupt.model");
    fs::write(&corrupt, "OFFERNER-MODEL v1 CRF\ngarbage\n").unwrap();
    let out = offerner(&["tag", "--model", corrupt.to_str().unwrap()], Some("x\n"));
    assert_eq!(out.status.code(), Some(5));

    let test = dir.path().join("out/data/D5.tsv");
    let prefix = dir.path().join("reports/hybrid");
    let table = run_ok(&[
        "eval",
        "--model",
        m,
        "--dataset",
        test.to_str().unwrap(),
        "--out",
        prefix.to_str().unwrap(),
    ]);
    assert!(table.contains("overall"));
    let lines = fs::read_to_string(dir.path().join("reports/hybrid.tsv")).unwrap();
    let f1 = lines
        .lines()
        .find(|l| l.starts_with("f1\toverall\t"))
        .unwrap();
    let value = f1.rsplit('\t').next().unwrap();
    assert_eq!(value.len(), 6, "{value}");
    assert!(dir.path().join("reports/hybrid.txt").exists());

    let out = offerner(
        &["eval", "--model", m, "--dataset", "/nonexistent.tsv"],
        None,
    );
    assert_eq!(out.status.code(), Some(6));
    let out = offerner(
        &[
            "eval",
            "--model",
            corrupt.to_str().unwrap(),
            "--dataset",
            test.to_str().unwrap(),
        ],
        None,
    );
    assert_eq!(out.status.code(), Some(5));
}

#[test]
fn failed_training_leaves_no_partial_output() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), &data_dir().join("lexicon.tsv"));
    let c = config.to_str().unwrap();
    run_ok(&["generate", "--config", c]);
    fs::write(dir.path().join("out/data/D1.tsv"), "").unwrap();
    let out = offerner(&["train", "crf", "--individual", "1", "--config", c], None);
    assert_eq!(out.status.code(), Some(4));
    let models = dir.path().join("out/models");
    assert!(!models.join("crf_D1.model").exists());
    assert!(!models.join(".staging").exists());
}
