//! End-to-end tests against the compiled `atlas` binary.

use std::path::Path;
use std::process::{Command, Output};

fn atlas(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_atlas"))
        .args(args)
        .current_dir(cwd)
        .env("ATLAS_LOG", "error")
        .output()
        .expect("failed to spawn atlas")
}

fn stdout(out: &Output) -> String {
    assert!(
        out.status.success(),
        "atlas failed: {}\n{}",
        String::from_utf8_lossy(&out.stderr),
        String::from_utf8_lossy(&out.stdout)
    );
    String::from_utf8(out.stdout.clone()).unwrap()
}

#[test]
fn help_exits_zero_and_unknown_subcommand_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let help = atlas(&["--help"], dir.path());
    assert!(help.status.success());
    assert!(String::from_utf8_lossy(&help.stdout).contains("Usage: atlas"));

    let unknown = atlas(&["frobnicate"], dir.path());
    assert_eq!(unknown.status.code(), Some(2));

    let bad_flag = atlas(&["gen-corpus", "--nope"], dir.path());
    assert_eq!(bad_flag.status.code(), Some(2));
}

#[test]
fn runtime_errors_exit_one_with_an_error_line() {
    let dir = tempfile::tempdir().unwrap();
    let out = atlas(
        &["featurize", "--manifest", "missing.tsv", "--out", "f"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&out.stderr);
    let error_lines: Vec<&str> = stderr
        .lines()
        .filter(|l| l.starts_with("error: "))
        .collect();
    assert_eq!(error_lines.len(), 1, "stderr: {stderr}");
}

#[test]
fn full_chain_through_the_binary() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();

    stdout(&atlas(
        &[
            "gen-corpus",
            "--langs",
            "6",
            "--utts",
            "6",
            "--seed",
            "3",
            "--out",
            "corpus",
            "--family-size",
            "3",
        ],
        root,
    ));
    assert!(root.join("corpus/manifest.tsv").is_file());
    assert!(root.join("corpus/phonemes.tsv").is_file());

    // Re-splitting to stdout emits a parseable manifest and leaves the
    // input untouched.
    let before = std::fs::read(root.join("corpus/manifest.tsv")).unwrap();
    let resplit = stdout(&atlas(
        &[
            "split",
            "--manifest",
            "corpus/manifest.tsv",
            "--train-frac",
            "0.5",
            "--seed",
            "9",
        ],
        root,
    ));
    assert!(resplit.starts_with("lingua-atlas-manifest v1"));
    assert_eq!(
        std::fs::read(root.join("corpus/manifest.tsv")).unwrap(),
        before
    );

    let feat = stdout(&atlas(
        &[
            "featurize",
            "--manifest",
            "corpus/manifest.tsv",
            "--out",
            "features",
            "--threads",
            "2",
        ],
        root,
    ));
    assert!(feat.contains("utterances\t36"));
    assert!(root.join("features/audio/L00000/utt000.mel").is_file());

    let train = stdout(&atlas(
        &[
            "train",
            "--manifest",
            "corpus/manifest.tsv",
            "--features",
            "features",
            "--out",
            "model.ckpt",
            "--hidden",
            "16",
            "--embed",
            "8",
            "--seed",
            "3",
            "--batch-size",
            "8",
            "--max-epochs",
            "5",
            "--plateau",
            "5",
        ],
        root,
    ));
    assert_eq!(train.lines().count(), 5);
    for line in train.lines() {
        assert_eq!(line.split('\t').count(), 3);
    }

    let eval = stdout(&atlas(
        &[
            "eval",
            "--ckpt",
            "model.ckpt",
            "--manifest",
            "corpus/manifest.tsv",
            "--features",
            "features",
        ],
        root,
    ));
    assert!(eval.starts_with("accuracy\t"));

    stdout(&atlas(
        &[
            "embed",
            "--ckpt",
            "model.ckpt",
            "--manifest",
            "corpus/manifest.tsv",
            "--features",
            "features",
            "--out",
            "e.emb",
        ],
        root,
    ));
    let emb_text = std::fs::read_to_string(root.join("e.emb")).unwrap();
    assert!(emb_text.starts_with("lingua-atlas-emb v1\n8\n"));
    assert_eq!(emb_text.lines().count(), 2 + 6);

    let knn = stdout(&atlas(
        &["knn", "--emb", "e.emb", "--lang", "L00000", "--k", "3"],
        root,
    ));
    assert_eq!(knn.lines().count(), 3);
    assert!(knn.lines().all(|l| l.split('\t').count() == 3));

    let geo = stdout(&atlas(
        &[
            "metric",
            "geo",
            "--emb",
            "e.emb",
            "--manifest",
            "corpus/manifest.tsv",
        ],
        root,
    ));
    // Six per-language lines plus the mu/sigma/n_excluded summary.
    assert_eq!(geo.lines().count(), 7);
    assert_eq!(geo.lines().last().unwrap().split('\t').count(), 3);

    let tree = stdout(&atlas(
        &[
            "metric",
            "tree",
            "--emb",
            "e.emb",
            "--manifest",
            "corpus/manifest.tsv",
            "--source",
            "ethnologue",
            "--k",
            "1,2,4",
        ],
        root,
    ));
    assert!(tree.lines().any(|l| l.starts_with("n_eligible\t")));

    let outliers = stdout(&atlas(
        &[
            "outliers",
            "--emb",
            "e.emb",
            "--manifest",
            "corpus/manifest.tsv",
            "--radius-km",
            "1100",
            "--top",
            "3",
        ],
        root,
    ));
    assert!(outliers.starts_with("summary\t"));
    assert_eq!(outliers.lines().count(), 4);

    for (method, extra_flag, extra_value) in [
        ("emb", "--emb", "e.emb"),
        ("geo", "--manifest", "corpus/manifest.tsv"),
        ("ph", "--phonemes", "corpus/phonemes.tsv"),
    ] {
        let out = stdout(&atlas(
            &[
                "neighbor",
                "--method",
                method,
                "--lang",
                "L00000",
                "--k",
                "1",
                extra_flag,
                extra_value,
            ],
            root,
        ));
        assert_eq!(out.lines().count(), 1, "method {method}");
        assert_eq!(out.trim().split('\t').count(), 2);
    }

    std::fs::write(
        root.join("pairs.tsv"),
        "emb\t1\tL00000\tL00001\tcorpus/audio/L00000\tcorpus/audio/L00001\n\
         geo\t1\tL00000\tL00001\tcorpus/audio/L00000\tcorpus/audio/L00001\n",
    )
    .unwrap();
    let mcd = stdout(&atlas(
        &[
            "mcd-report",
            "--pairs",
            "pairs.tsv",
            "--order",
            "24",
            "--threads",
            "2",
        ],
        root,
    ));
    assert!(mcd.starts_with("method\tk=1\n"));
    assert_eq!(mcd.lines().count(), 3);

    // Identical audio directories score a zero-valued cell.
    std::fs::write(
        root.join("self_pairs.tsv"),
        "emb\t1\tL00000\tL00000\tcorpus/audio/L00000\tcorpus/audio/L00000\n",
    )
    .unwrap();
    let self_mcd = stdout(&atlas(
        &["mcd-report", "--pairs", "self_pairs.tsv", "--order", "24"],
        root,
    ));
    assert!(self_mcd.contains("embedding\t0\n"), "{self_mcd}");
}

#[test]
fn reports_are_deterministic_and_inputs_untouched() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    stdout(&atlas(
        &[
            "gen-corpus",
            "--langs",
            "4",
            "--utts",
            "4",
            "--seed",
            "11",
            "--out",
            "corpus",
        ],
        root,
    ));
    let manifest_bytes = std::fs::read(root.join("corpus/manifest.tsv")).unwrap();
    stdout(&atlas(
        &[
            "featurize",
            "--manifest",
            "corpus/manifest.tsv",
            "--out",
            "features",
        ],
        root,
    ));
    let run = || {
        stdout(&atlas(
            &[
                "train",
                "--manifest",
                "corpus/manifest.tsv",
                "--features",
                "features",
                "--out",
                "m.ckpt",
                "--hidden",
                "8",
                "--embed",
                "4",
                "--seed",
                "2",
                "--max-epochs",
                "3",
                "--plateau",
                "3",
                "--batch-size",
                "4",
            ],
            root,
        ))
    };
    let a = run();
    let ckpt_a = std::fs::read(root.join("m.ckpt")).unwrap();
    let b = run();
    let ckpt_b = std::fs::read(root.join("m.ckpt")).unwrap();
    assert_eq!(a, b);
    assert_eq!(ckpt_a, ckpt_b);
    assert_eq!(
        std::fs::read(root.join("corpus/manifest.tsv")).unwrap(),
        manifest_bytes
    );
}
