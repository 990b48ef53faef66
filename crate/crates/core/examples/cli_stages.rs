//! Drives the command-line verbs stage by stage on a small synthetic set:
//! synth, split, codebook, pretrain-cnn, featurize, train, eval and predict.
//!
//! cargo run --release --example cli_stages -- out/stages

use std::path::PathBuf;

use dualsketch::cli::dispatch;

fn run(args: &[&str]) -> Result<(), Box<dyn std::error::Error>> {
    println!("$ dualsketch {}", args.join(" "));
    let argv: Vec<String> = std::iter::once("dualsketch").chain(args.iter().copied()).map(String::from).collect();
    let code = dispatch(&argv, &mut std::io::stdout(), &mut std::io::stderr());
    if code != 0 {
        return Err(format!("exit status {code}").into());
    }
    Ok(())
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "out/stages".into()));
    let p = |name: &str| out.join(name).to_string_lossy().into_owned();
    let (data, split, cb, cnn, feat, model) = (p("data"), p("split.tsv"), p("codebook.bin"), p("cnn.ckpt"), p("features"), p("model.ckpt"));

    run(&["--seed", "5", "synth", "--classes", "3", "--per-class", "15", "--out", &data])?;
    run(&["--seed", "5", "split", &data, "--out", &split])?;
    run(&["--seed", "5", "codebook", "--split", &split, "--size", "32", "--iterations", "20", "--out", &cb])?;
    run(&["--seed", "5", "pretrain-cnn", "--split", &split, "--arch", "tiny", "--epochs", "10", "--out", &cnn])?;
    run(&["--threads", "2", "featurize", "--split", &split, "--codebook", &cb, "--cnn", &cnn, "--out", &feat])?;
    run(&[
        "--seed",
        "5",
        "train",
        "--features",
        &feat,
        "--hidden",
        "16",
        "--lr",
        "0.2",
        "--batch",
        "10",
        "--epochs",
        "60",
        "--out",
        &model,
    ])?;
    run(&["--format", "tabular", "eval", "--model", &model, "--features", &feat])?;
    let probe = out.join("data/star/star-000.json");
    run(&["predict", &probe.to_string_lossy(), "--model", &model, "--codebook", &cb, "--cnn", &cnn])?;
    Ok(())
}
