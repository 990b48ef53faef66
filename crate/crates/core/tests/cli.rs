use std::path::Path;

use dualsketch::cli::{dispatch, CONFIG_ENV};

fn run(args: &[&str]) -> (i32, String, String) {
    let argv: Vec<String> = std::iter::once("dualsketch").chain(args.iter().copied()).map(String::from).collect();
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let code = dispatch(&argv, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

fn p(dir: &Path, name: &str) -> String {
    dir.join(name).to_string_lossy().into_owned()
}

#[test]
fn usage_errors_exit_1() {
    let (code, _, err) = run(&[]);
    assert_eq!(code, 1);
    assert!(err.contains("Usage"));
    assert_eq!(run(&["frobnicate"]).0, 1);
    assert_eq!(run(&["gradcheck", "--bogus"]).0, 1);
    let (code, out, _) = run(&["--help"]);
    assert_eq!(code, 0);
    for verb in [
        "import",
        "synth",
        "augment",
        "split",
        "codebook",
        "pretrain-cnn",
        "featurize",
        "train",
        "eval",
        "predict",
        "gradcheck",
        "plot",
        "run",
    ] {
        assert!(out.contains(verb), "help lacks {verb}");
    }
}

#[test]
fn data_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let (code, _, err) = run(&["augment", &p(dir.path(), "missing.json"), "--out", &p(dir.path(), "o")]);
    assert_eq!(code, 2, "{err}");
    std::fs::write(dir.path().join("bad.json"), "{\"strokes\": [").unwrap();
    let (code, _, err) = run(&["import", &p(dir.path(), "bad.json"), "--out", &p(dir.path(), "o")]);
    assert_eq!(code, 2);
    assert!(err.starts_with("error:"));
    assert_eq!(run(&["gradcheck", "--config", "huge"]).0, 2);
}

#[test]
fn gradcheck_tiny_passes() {
    let (code, out, _) = run(&["gradcheck", "--config", "tiny"]);
    assert_eq!(code, 0);
    assert!(out.starts_with("max relative error"));
    let (code, out, _) = run(&["--format", "tabular", "gradcheck"]);
    assert_eq!(code, 0);
    let row: Vec<&str> = out.lines().nth(1).unwrap().split('\t').collect();
    assert!(row[2].parse::<f64>().unwrap() <= 1e-4);
}

#[test]
fn import_svg_to_canonical() {
    let dir = tempfile::tempdir().unwrap();
    let svg = dir.path().join("cup.svg");
    std::fs::write(&svg, r#"<svg xmlns="http://www.w3.org/2000/svg" width="100" height="80"><path d="M10 10 L10 70 L60 70 L60 10"/><path d="M60 25 Q80 40 60 55"/></svg>"#).unwrap();
    let out_dir = dir.path().join("canon");
    let (code, out, err) =
        run(&["import", &svg.to_string_lossy(), "--out", &out_dir.to_string_lossy(), "--label", "cup", "--normalize", "256"]);
    assert_eq!(code, 0, "{err}");
    assert_eq!(out.trim(), out_dir.join("cup.json").to_string_lossy());
    let doc: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out_dir.join("cup.json")).unwrap()).unwrap();
    assert_eq!(doc["label"], "cup");
    assert_eq!(doc["canvas"], serde_json::json!([256, 256]));
    assert_eq!(doc["strokes"].as_array().unwrap().len(), 2);
}

#[test]
fn stage_verbs_chain_and_are_idempotent() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let data = p(d, "data");
    assert_eq!(run(&["--seed", "2", "synth", "--classes", "3", "--per-class", "8", "--out", &data]).0, 0);
    assert_eq!(run(&["augment", &p(d, "data/star/star-000.json"), "--out", &p(d, "aug")]).0, 0);
    assert_eq!(std::fs::read_dir(d.join("aug")).unwrap().count(), 18);

    let (code, out, _) = run(&["--seed", "2", "--format", "tabular", "split", &data, "--out", &p(d, "split.tsv")]);
    assert_eq!(code, 0);
    assert_eq!(out, "split\tsketches\ntrain\t15\nvalidation\t3\ntest\t6\n");
    let split = std::fs::read_to_string(d.join("split.tsv")).unwrap();
    assert!(split.starts_with("path\tlabel\tsplit\n"));
    assert_eq!(split.lines().count(), 25);

    for name in ["cb1.bin", "cb2.bin"] {
        assert_eq!(
            run(&["--seed", "2", "codebook", "--split", &p(d, "split.tsv"), "--size", "12", "--iterations", "10", "--out", &p(d, name)]).0,
            0
        );
    }
    assert_eq!(std::fs::read(d.join("cb1.bin")).unwrap(), std::fs::read(d.join("cb2.bin")).unwrap());

    let (code, out, _) = run(&[
        "--format",
        "tabular",
        "pretrain-cnn",
        "--split",
        &p(d, "split.tsv"),
        "--arch",
        "tiny",
        "--epochs",
        "2",
        "--out",
        &p(d, "cnn.ckpt"),
    ]);
    assert_eq!(code, 0);
    assert_eq!(out.lines().count(), 3);

    let feat = p(d, "feat");
    assert_eq!(
        run(&[
            "--threads",
            "2",
            "featurize",
            "--split",
            &p(d, "split.tsv"),
            "--codebook",
            &p(d, "cb1.bin"),
            "--cnn",
            &p(d, "cnn.ckpt"),
            "--out",
            &feat
        ])
        .0,
        0
    );
    for part in ["train", "validation", "test"] {
        assert!(d.join("feat").join(format!("{part}.texture.feat")).exists());
    }

    let model = p(d, "model.ckpt");
    let (code, _, err) =
        run(&["train", "--features", &feat, "--hidden", "6", "--lr", "0.2", "--batch", "5", "--epochs", "4", "--out", &model]);
    assert_eq!(code, 0, "{err}");
    let (code, out, _) = run(&["--format", "tabular", "eval", "--model", &model, "--features", &feat, "--part", "validation"]);
    assert_eq!(code, 0);
    assert!(out.starts_with("split\tcorrect\ttotal\taccuracy\tloss\nvalidation\t"));

    let ablated = p(d, "ablated.ckpt");
    assert_eq!(
        run(&["train", "--features", &feat, "--hidden", "6", "--epochs", "2", "--no-shape", "--time-weights", "--out", &ablated]).0,
        0
    );
    assert_eq!(run(&["eval", "--model", &ablated, "--features", &feat]).0, 0);

    let (code, out, err) = run(&[
        "predict",
        &p(d, "data/spiral/spiral-001.json"),
        "--model",
        &model,
        "--codebook",
        &p(d, "cb1.bin"),
        "--cnn",
        &p(d, "cnn.ckpt"),
    ]);
    assert_eq!(code, 0, "{err}");
    assert_eq!(out.lines().count(), 1);
    assert!(["polygon", "spiral", "star"].contains(&out.trim()));

    // a codebook other than the one used for featurization is rejected
    assert_eq!(run(&["--seed", "9", "codebook", "--split", &p(d, "split.tsv"), "--size", "12", "--out", &p(d, "other.bin")]).0, 0);
    let (code, _, _) = run(&[
        "predict",
        &p(d, "data/spiral/spiral-001.json"),
        "--model",
        &model,
        "--codebook",
        &p(d, "other.bin"),
        "--cnn",
        &p(d, "cnn.ckpt"),
    ]);
    assert_eq!(code, 2);
}

const SMALL_RUN: &str = r#"
seed = 4

[data]
source = "synthetic"
classes = 3
per_class = 8

[augment]
enabled = false

[shape]
codebook_size = 12
kmeans_iterations = 10

[texture]
arch = "tiny"
epochs = 2

[model]
hidden = 6

[train]
lr = 0.2
batch = 5
epochs = 5
"#;

#[test]
fn run_writes_report_and_predict_uses_it() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(d.join("small.toml"), SMALL_RUN).unwrap();
    std::env::set_var(CONFIG_ENV, d.join("small.toml"));
    let (code, out, err) = run(&["--format", "tabular", "run", "--out", &p(d, "report")]);
    std::env::remove_var(CONFIG_ENV);
    assert_eq!(code, 0, "{err}");
    assert!(out.starts_with("split\tcorrect\ttotal\taccuracy\tloss\n"));
    for f in [
        "report.txt",
        "trace.tsv",
        "accuracy.tsv",
        "confusion.tsv",
        "config.toml",
        "loss.svg",
        "accuracy.svg",
        "confusion.svg",
        "codebook.bin",
        "cnn.ckpt",
        "model.ckpt",
    ] {
        assert!(d.join("report").join(f).exists(), "missing {f}");
    }

    std::fs::remove_file(d.join("report/loss.svg")).unwrap();
    assert_eq!(run(&["plot", &p(d, "report")]).0, 0);
    assert!(d.join("report/loss.svg").exists());

    assert_eq!(run(&["synth", "--families", "star,grid", "--per-class", "1", "--out", &p(d, "probe")]).0, 0);
    let (code, out, err) = run(&["predict", &p(d, "probe/star/star-000.json"), "--run", &p(d, "report")]);
    assert_eq!(code, 0, "{err}");
    assert_eq!(out.lines().count(), 1);
}

#[test]
fn run_without_config_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let (code, _, err) = run(&["run", &p(dir.path(), "absent.toml"), "--out", &p(dir.path(), "r")]);
    assert_eq!(code, 2, "{err}");
}
