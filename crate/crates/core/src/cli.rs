//! The `dualsketch` command line: one verb per pipeline stage plus `run` for
//! a whole experiment. Exit status 0 on success, 1 for usage errors, 2 for
//! data errors and 3 for numeric failures.

use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::cnn::{
    pretrain_texture, read_cnn_checkpoint, read_feature_file, write_cnn_checkpoint, write_feature_file, CnnArch, CnnParams, CnnTrainConfig,
    FeatureFile,
};
use crate::error::{Error, Result};
use crate::fusion::{
    build_feature_sequence, fusion_grad_check, predict, read_fusion_checkpoint, sequences_from_files, train, write_fusion_checkpoint,
    FeatureSequence, FusionConfig, FusionTrainConfig, SequenceConfig,
};
use crate::harness::{
    class_names, codebook_descriptors, confusion_tsv, evaluate, featurize, read_sketch_file, render_plots, run_experiment, sketch_files,
    split_dataset, texture_training_set, ExperimentConfig,
};
use crate::nn::{worker_pool, CheckCoords};
use crate::shape::{build_codebook, read_codebook, write_codebook, Codebook, ShapeContextConfig};
use crate::sketch::{augment_with, normalize_sketch, to_canonical, AugmentConfig, Canvas, Sketch};
use crate::synth::{default_classes, synth_generate_classes, Family, SynthClass};

/// Environment variable naming the default experiment config for `run`.
pub const CONFIG_ENV: &str = "DUALSKETCH_CONFIG";

/// Gradient-check tolerance for `gradcheck`.
pub const GRADCHECK_TOLERANCE: f64 = 1e-4;

#[derive(Parser, Debug)]
#[command(name = "dualsketch", version, about = "Sketch recognition with dual GRUs over shape and texture features")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Seed for every stochastic step (default 0; `run` defaults to the config's seed).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for featurization, training and evaluation (default 1).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output style for metrics.
    #[arg(long, global = true, value_enum, default_value_t = OutputFormat::Human)]
    format: OutputFormat,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum OutputFormat {
    Human,
    Tabular,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Convert SVG or canonical sketch files to canonical JSON.
    Import(ImportArgs),
    /// Generate a synthetic labeled sketch set.
    Synth(SynthArgs),
    /// Write the augmented variants of one sketch.
    Augment(AugmentArgs),
    /// Stratified train/validation/test split of sketch files.
    Split(SplitArgs),
    /// Build the k-means codebook from training sketches.
    Codebook(CodebookArgs),
    /// Pretrain the texture CNN on stroke-group bitmaps.
    PretrainCnn(PretrainArgs),
    /// Compute texture and shape feature sequences for every split.
    Featurize(FeaturizeArgs),
    /// Train the recurrent classifier on featurized splits.
    Train(TrainArgs),
    /// Evaluate a trained model on a featurized split.
    Eval(EvalArgs),
    /// Classify one sketch file.
    Predict(PredictArgs),
    /// Finite-difference check of the model gradients.
    Gradcheck(GradcheckArgs),
    /// Redraw the SVG plots of a report directory.
    Plot(PlotArgs),
    /// Run a whole experiment from a config file.
    Run(RunArgs),
}

#[derive(Args, Debug)]
struct ImportArgs {
    inputs: Vec<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    /// Label for sketches that carry none.
    #[arg(long)]
    label: Option<String>,
    /// Scale and center onto a square canvas of this side.
    #[arg(long)]
    normalize: Option<u32>,
}

#[derive(Args, Debug)]
struct SynthArgs {
    #[arg(long, default_value_t = 5)]
    classes: usize,
    #[arg(long, default_value_t = 20)]
    per_class: usize,
    /// Comma-separated family names; overrides --classes.
    #[arg(long, value_delimiter = ',')]
    families: Vec<String>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct AugmentArgs {
    sketch: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct SplitArgs {
    /// Sketch files or directories.
    inputs: Vec<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug, Clone)]
struct DataArgs {
    /// Split table written by `split`.
    #[arg(long)]
    split: PathBuf,
    /// Canvas side sketches are normalized onto.
    #[arg(long, default_value_t = 256)]
    canvas: u32,
    /// Add augmented variants of the training sketches.
    #[arg(long)]
    augment: bool,
}

#[derive(Args, Debug)]
struct CodebookArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, default_value_t = 500)]
    size: usize,
    #[arg(long, default_value_t = 50)]
    iterations: usize,
    #[arg(long, default_value_t = 5)]
    samples_per_stroke: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug, Clone)]
struct RasterArgs {
    #[arg(long, default_value = "desk")]
    arch: String,
    #[arg(long)]
    raster_size: Option<usize>,
    #[arg(long)]
    line_width: Option<f64>,
}

#[derive(Args, Debug)]
struct PretrainArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    raster: RasterArgs,
    #[arg(long, default_value_t = 30)]
    epochs: usize,
    #[arg(long, default_value_t = 0.05)]
    lr: f64,
    #[arg(long, default_value_t = 16)]
    batch: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct FeaturizeArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long)]
    codebook: PathBuf,
    #[arg(long)]
    cnn: PathBuf,
    #[arg(long)]
    raster_size: Option<usize>,
    #[arg(long)]
    line_width: Option<f64>,
    #[arg(long, default_value_t = 5)]
    llc_k: usize,
    #[arg(long, default_value_t = 5)]
    samples_per_stroke: usize,
    /// Output directory for the feature files.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct TrainArgs {
    /// Directory written by `featurize`.
    #[arg(long)]
    features: PathBuf,
    #[arg(long, default_value_t = 32)]
    hidden: usize,
    #[arg(long, default_value_t = 0.002)]
    lr: f64,
    #[arg(long, default_value_t = 100)]
    batch: usize,
    #[arg(long, default_value_t = 200)]
    epochs: usize,
    #[arg(long, default_value_t = 10)]
    patience: usize,
    #[arg(long)]
    early_stop: Option<usize>,
    /// Zero the shape stream (ablation).
    #[arg(long)]
    no_shape: bool,
    /// Zero the texture stream (ablation).
    #[arg(long)]
    no_texture: bool,
    #[arg(long)]
    normalized_sum: bool,
    #[arg(long)]
    time_weights: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct EvalArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    features: PathBuf,
    /// Split to evaluate: train, validation or test.
    #[arg(long, default_value = "test")]
    part: String,
}

#[derive(Args, Debug)]
struct PredictArgs {
    sketch: PathBuf,
    /// Directory holding model.ckpt, codebook.bin and cnn.ckpt (as written by `run`).
    #[arg(long)]
    run: Option<PathBuf>,
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long)]
    codebook: Option<PathBuf>,
    #[arg(long)]
    cnn: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct GradcheckArgs {
    /// Model size: `tiny` checks every coordinate, `desk` a sample of them.
    #[arg(long, default_value = "tiny")]
    config: String,
    #[arg(long, default_value_t = 1e-5)]
    eps: f64,
}

#[derive(Args, Debug)]
struct PlotArgs {
    report: PathBuf,
}

#[derive(Args, Debug)]
struct RunArgs {
    /// Experiment config; defaults to the path in $DUALSKETCH_CONFIG.
    config: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

struct Ctx<'a> {
    seed: u64,
    threads: usize,
    seed_given: Option<u64>,
    threads_given: Option<usize>,
    tabular: bool,
    out: &'a mut dyn Write,
}

/// Parses `argv` (program name first) and runs the verb.
pub fn dispatch(argv: &[String], out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let text = e.render().to_string();
            let _ = if code == 0 { write!(out, "{text}") } else { write!(err, "{text}") };
            return code;
        }
    };
    let mut ctx = Ctx {
        seed: cli.seed.unwrap_or(0),
        threads: cli.threads.unwrap_or(1).max(1),
        seed_given: cli.seed,
        threads_given: cli.threads,
        tabular: cli.format == OutputFormat::Tabular,
        out,
    };
    match execute(cli.command, &mut ctx) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            if e.is_data_error() {
                2
            } else {
                3
            }
        }
    }
}

fn execute(cmd: Command, ctx: &mut Ctx) -> Result<i32> {
    match cmd {
        Command::Import(a) => import(a, ctx),
        Command::Synth(a) => synth(a, ctx),
        Command::Augment(a) => augment(a, ctx),
        Command::Split(a) => split(a, ctx),
        Command::Codebook(a) => codebook(a, ctx),
        Command::PretrainCnn(a) => pretrain(a, ctx),
        Command::Featurize(a) => featurize_cmd(a, ctx),
        Command::Train(a) => train_cmd(a, ctx),
        Command::Eval(a) => eval(a, ctx),
        Command::Predict(a) => predict_cmd(a, ctx),
        Command::Gradcheck(a) => gradcheck(a, ctx),
        Command::Plot(a) => {
            render_plots(&a.report)?;
            writeln!(ctx.out, "plots written to {}", a.report.display())?;
            Ok(0)
        }
        Command::Run(a) => run(a, ctx),
    }
}

fn write_with(path: &Path, f: impl FnOnce(&mut BufWriter<File>) -> Result<()>) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    let mut w = BufWriter::new(File::create(path)?);
    f(&mut w)?;
    w.flush()?;
    Ok(())
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path).map(BufReader::new).map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
}

fn stem(path: &Path) -> String {
    path.file_stem().and_then(|s| s.to_str()).unwrap_or("sketch").to_string()
}

fn import(a: ImportArgs, ctx: &mut Ctx) -> Result<i32> {
    if a.inputs.is_empty() {
        return Err(Error::Empty("input list"));
    }
    std::fs::create_dir_all(&a.out)?;
    for input in &a.inputs {
        let mut s = read_sketch_file(input)?;
        if let Some(l) = &a.label {
            s.label = Some(l.clone());
        }
        if let Some(side) = a.normalize {
            s = normalize_sketch(&s, Canvas::square(side));
        }
        let target = a.out.join(format!("{}.json", stem(input)));
        std::fs::write(&target, to_canonical(&s))?;
        writeln!(ctx.out, "{}", target.display())?;
    }
    Ok(0)
}

fn synth(a: SynthArgs, ctx: &mut Ctx) -> Result<i32> {
    let classes: Vec<SynthClass> = if a.families.is_empty() {
        if a.classes < 2 {
            return Err(Error::Config("--classes must be at least 2".into()));
        }
        default_classes(a.classes)
    } else {
        a.families.iter().map(|f| Ok(SynthClass { family: Family::from_name(f)?, variant: 0 })).collect::<Result<_>>()?
    };
    let sketches = synth_generate_classes(&classes, a.per_class, ctx.seed)?;
    for (i, s) in sketches.iter().enumerate() {
        let label = s.label.clone().unwrap_or_default();
        let dir = a.out.join(&label);
        std::fs::create_dir_all(&dir)?;
        std::fs::write(dir.join(format!("{label}-{:03}.json", i % a.per_class.max(1))), to_canonical(s))?;
    }
    writeln!(ctx.out, "{} sketches in {} classes written to {}", sketches.len(), classes.len(), a.out.display())?;
    Ok(0)
}

fn augment(a: AugmentArgs, ctx: &mut Ctx) -> Result<i32> {
    let s = read_sketch_file(&a.sketch)?;
    let variants = augment_with(&s, &AugmentConfig::for_canvas(s.canvas.width));
    std::fs::create_dir_all(&a.out)?;
    let base = stem(&a.sketch);
    for (i, v) in variants.iter().enumerate() {
        std::fs::write(a.out.join(format!("{base}-aug{i:02}.json")), to_canonical(v))?;
    }
    writeln!(ctx.out, "{} variants written to {}", variants.len(), a.out.display())?;
    Ok(0)
}

const PARTS: [&str; 3] = ["train", "validation", "test"];

fn split(a: SplitArgs, ctx: &mut Ctx) -> Result<i32> {
    let files = sketch_files(&a.inputs)?;
    let sketches = files.iter().map(|f| read_sketch_file(f)).collect::<Result<Vec<_>>>()?;
    let labels: Vec<Option<String>> = sketches.iter().map(|s| s.label.clone()).collect();
    let split = split_dataset(&labels, ctx.seed)?;
    let mut table = String::from("path\tlabel\tsplit\n");
    for (part, idx) in PARTS.iter().zip([&split.train, &split.validation, &split.test]) {
        for &i in idx {
            let _ = writeln!(table, "{}\t{}\t{part}", files[i].display(), labels[i].as_deref().unwrap_or_default());
        }
    }
    write_with(&a.out, |w| Ok(w.write_all(table.as_bytes())?))?;
    if ctx.tabular {
        writeln!(ctx.out, "split\tsketches")?;
        for (part, n) in PARTS.iter().zip([split.train.len(), split.validation.len(), split.test.len()]) {
            writeln!(ctx.out, "{part}\t{n}")?;
        }
    } else {
        writeln!(
            ctx.out,
            "train {} validation {} test {} written to {}",
            split.train.len(),
            split.validation.len(),
            split.test.len(),
            a.out.display()
        )?;
    }
    Ok(0)
}

/// Sketches of one split part, normalized, with class indices.
struct SplitData {
    classes: Vec<String>,
    parts: Vec<(String, Vec<(Sketch, usize)>)>,
}

fn load_split(data: &DataArgs) -> Result<SplitData> {
    let text = std::fs::read_to_string(&data.split)?;
    let mut rows = Vec::new();
    for (n, line) in text.lines().enumerate().skip(1).filter(|(_, l)| !l.trim().is_empty()) {
        let f: Vec<&str> = line.split('\t').collect();
        let [path, label, part] = f[..] else {
            return Err(Error::format(format!("{}: malformed line {}", data.split.display(), n + 1)));
        };
        if !PARTS.contains(&part) {
            return Err(Error::format(format!("{}: unknown split {part:?}", data.split.display())));
        }
        rows.push((PathBuf::from(path), label.to_string(), part.to_string()));
    }
    let classes = class_names(rows.iter().map(|(_, l, _)| l.as_str()));
    let canvas = Canvas::square(data.canvas);
    let mut parts: Vec<(String, Vec<(Sketch, usize)>)> = PARTS.iter().map(|p| (p.to_string(), Vec::new())).collect();
    for (path, label, part) in rows {
        let s = normalize_sketch(&read_sketch_file(&path)?, canvas);
        let y = classes.iter().position(|c| *c == label).unwrap_or(0);
        let slot = parts.iter_mut().find(|(p, _)| *p == part).map(|(_, v)| v);
        if let Some(v) = slot {
            v.push((s, y));
        }
    }
    if data.augment {
        let cfg = AugmentConfig::for_canvas(data.canvas);
        let train = std::mem::take(&mut parts[0].1);
        parts[0].1 = train.iter().flat_map(|(s, y)| augment_with(s, &cfg).into_iter().map(move |a| (a, *y))).collect();
    }
    Ok(SplitData { classes, parts })
}

fn codebook(a: CodebookArgs, ctx: &mut Ctx) -> Result<i32> {
    let mut data = a.data.clone();
    data.augment = false;
    let split = load_split(&data)?;
    let pool = worker_pool(ctx.threads)?;
    let originals: Vec<Sketch> = split.parts[0].1.iter().map(|(s, _)| s.clone()).collect();
    let cfg = ShapeContextConfig { samples_per_stroke: a.samples_per_stroke };
    let desc = codebook_descriptors(&originals, &cfg, pool.as_ref())?;
    if desc.len() < a.size {
        return Err(Error::Insufficient { what: "stroke descriptors for the codebook", needed: a.size, got: desc.len() });
    }
    let cb = build_codebook(&desc, a.size, a.iterations, ctx.seed)?;
    write_with(&a.out, |w| write_codebook(w, &cb, ctx.seed))?;
    writeln!(ctx.out, "codebook {} x {} from {} descriptors, sha256 {}", cb.len(), cb.dim(), desc.len(), cb.fingerprint())?;
    Ok(0)
}

fn sequence_config(crop: usize, raster_size: Option<usize>, line_width: Option<f64>) -> SequenceConfig {
    let mut s = SequenceConfig::for_crop(crop);
    if let Some(r) = raster_size {
        s.raster_size = r;
    }
    if let Some(w) = line_width {
        s.line_width = w;
    }
    s
}

fn pretrain(a: PretrainArgs, ctx: &mut Ctx) -> Result<i32> {
    let split = load_split(&a.data)?;
    let arch = CnnArch::by_name(&a.raster.arch, split.classes.len())?;
    let seq = sequence_config(arch.input_size, a.raster.raster_size, a.raster.line_width);
    let pool = worker_pool(ctx.threads)?;
    let data = texture_training_set(&split.parts[0].1, &seq, arch.input_size, pool.as_ref())?;
    let cfg = CnnTrainConfig { lr: a.lr, batch: a.batch, epochs: a.epochs, seed: ctx.seed };
    let (params, trace) = pretrain_texture(&data, &arch, &cfg, pool.as_ref())?;
    write_with(&a.out, |w| write_cnn_checkpoint(w, &params, ctx.seed, trace.len()))?;
    if ctx.tabular {
        writeln!(ctx.out, "epoch\tloss\taccuracy")?;
        for e in &trace {
            writeln!(ctx.out, "{}\t{:.6}\t{:.6}", e.epoch, e.loss, e.accuracy)?;
        }
    } else if let Some(last) = trace.last() {
        writeln!(ctx.out, "trained on {} bitmaps: loss {:.6} accuracy {:.6}", data.len(), last.loss, last.accuracy)?;
    }
    Ok(0)
}

fn load_codebook(path: &Path) -> Result<Codebook> {
    Ok(read_codebook(&mut open(path)?)?.0)
}

fn load_cnn(path: &Path) -> Result<CnnParams> {
    read_cnn_checkpoint(&mut open(path)?)
}

/// Settings `featurize` records next to the feature files.
fn features_manifest(seq: &SequenceConfig, cb: &Codebook, classes: &[String]) -> String {
    format!(
        "class_names {}\nraster_size {}\nline_width {}\nllc_k {}\nsamples_per_stroke {}\ncodebook {}\n",
        classes.join(" "),
        seq.raster_size,
        seq.line_width,
        seq.llc_k,
        seq.shape.samples_per_stroke,
        cb.fingerprint()
    )
}

fn read_manifest(dir: &Path) -> Result<Vec<(String, String)>> {
    let text = std::fs::read_to_string(dir.join("features.txt"))?;
    Ok(text.lines().filter_map(|l| l.split_once(' ')).map(|(k, v)| (k.to_string(), v.to_string())).collect())
}

fn manifest_get<'a>(m: &'a [(String, String)], key: &str) -> Result<&'a str> {
    m.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str()).ok_or_else(|| Error::format(format!("feature manifest lacks `{key}`")))
}

fn featurize_cmd(a: FeaturizeArgs, ctx: &mut Ctx) -> Result<i32> {
    let split = load_split(&a.data)?;
    let cb = load_codebook(&a.codebook)?;
    let cnn = load_cnn(&a.cnn)?;
    let mut seq = sequence_config(cnn.arch.input_size, a.raster_size, a.line_width);
    seq.llc_k = a.llc_k;
    seq.shape.samples_per_stroke = a.samples_per_stroke;
    let pool = worker_pool(ctx.threads)?;
    std::fs::create_dir_all(&a.out)?;
    for (part, items) in &split.parts {
        let seqs = featurize(items, &cb, &cnn, &seq, pool.as_ref())?;
        let labels: Vec<Option<String>> = seqs.iter().map(|s| s.label.map(|y| split.classes[y].clone())).collect();
        let texture = FeatureFile {
            dim: cnn.feature_dim(),
            rows_per_item: crate::fusion::SEQUENCE_LEN,
            rows: seqs.iter().flat_map(|s| s.texture.iter().cloned()).collect(),
            labels: labels.clone(),
        };
        let shape = FeatureFile {
            dim: cb.len(),
            rows_per_item: crate::fusion::SEQUENCE_LEN,
            rows: seqs.iter().flat_map(|s| s.shape.iter().cloned()).collect(),
            labels,
        };
        write_with(&a.out.join(format!("{part}.texture.feat")), |w| write_feature_file(w, &texture))?;
        write_with(&a.out.join(format!("{part}.shape.feat")), |w| write_feature_file(w, &shape))?;
        writeln!(ctx.out, "{part}: {} sequences", seqs.len())?;
    }
    std::fs::write(a.out.join("features.txt"), features_manifest(&seq, &cb, &split.classes))?;
    Ok(0)
}

fn load_part(dir: &Path, part: &str, classes: &[String]) -> Result<Vec<FeatureSequence>> {
    let t = read_feature_file(&mut open(&dir.join(format!("{part}.texture.feat")))?)?;
    let s = read_feature_file(&mut open(&dir.join(format!("{part}.shape.feat")))?)?;
    sequences_from_files(&t, &s, classes)
}

fn manifest_classes(m: &[(String, String)]) -> Result<Vec<String>> {
    Ok(manifest_get(m, "class_names")?.split(' ').map(str::to_string).collect())
}

fn train_cmd(a: TrainArgs, ctx: &mut Ctx) -> Result<i32> {
    let manifest = read_manifest(&a.features)?;
    let classes = manifest_classes(&manifest)?;
    let train_set = load_part(&a.features, "train", &classes)?;
    let validation = load_part(&a.features, "validation", &classes)?;
    let first = train_set.first().ok_or(Error::Empty("training split"))?;
    let model = FusionConfig {
        shape_input: !a.no_shape,
        texture_input: !a.no_texture,
        normalized_sum: a.normalized_sum,
        time_weights: a.time_weights,
        steps: first.len(),
        ..FusionConfig::new(first.texture_dim(), first.shape_dim(), a.hidden, classes.len())
    };
    let cfg =
        FusionTrainConfig { lr: a.lr, batch: a.batch, epochs: a.epochs, seed: ctx.seed, patience: a.patience, early_stop: a.early_stop };
    let pool = worker_pool(ctx.threads)?;
    let outcome = train(&train_set, &validation, &model, &cfg, pool.as_ref())?;
    let meta: Vec<(String, String)> = manifest.iter().filter(|(k, _)| k != "codebook").cloned().collect();
    write_with(&a.out, |w| {
        write_fusion_checkpoint(w, &outcome.params, ctx.seed, outcome.best_epoch, manifest_get(&manifest, "codebook")?, &meta)
    })?;
    if ctx.tabular {
        writeln!(ctx.out, "epoch\tlr\ttrain_loss\ttrain_accuracy\tvalidation_loss\tvalidation_accuracy")?;
        for r in &outcome.trace {
            writeln!(
                ctx.out,
                "{}\t{}\t{:.6}\t{:.6}\t{:.6}\t{:.6}",
                r.epoch, r.lr, r.train.loss, r.train.accuracy, r.validation.loss, r.validation.accuracy
            )?;
        }
    } else {
        let best = &outcome.trace[outcome.best_epoch];
        writeln!(
            ctx.out,
            "best epoch {}: train accuracy {:.6}, validation accuracy {:.6} (validation loss {:.6})",
            outcome.best_epoch, best.train.accuracy, best.validation.accuracy, best.validation.loss
        )?;
    }
    Ok(0)
}

fn eval(a: EvalArgs, ctx: &mut Ctx) -> Result<i32> {
    if !PARTS.contains(&a.part.as_str()) {
        return Err(Error::Config(format!("unknown split {:?}", a.part)));
    }
    let (params, ck) = read_fusion_checkpoint(&mut open(&a.model)?)?;
    let manifest = read_manifest(&a.features)?;
    if ck.meta("codebook") != Some(manifest_get(&manifest, "codebook")?) {
        return Err(Error::format("features were computed with a different codebook than the model"));
    }
    let classes = manifest_classes(&manifest)?;
    let seqs = load_part(&a.features, &a.part, &classes)?;
    let pool = worker_pool(ctx.threads)?;
    let e = evaluate(&params, &seqs, pool.as_ref())?;
    if ctx.tabular {
        writeln!(ctx.out, "split\tcorrect\ttotal\taccuracy\tloss")?;
        writeln!(ctx.out, "{}\t{}\t{}\t{:.6}\t{:.6}", a.part, e.correct(), e.total(), e.accuracy, e.loss)?;
    } else {
        writeln!(ctx.out, "{} accuracy {}/{} = {:.6}", a.part, e.correct(), e.total(), e.accuracy)?;
    }
    write!(ctx.out, "{}", confusion_tsv(&classes, &e.confusion))?;
    Ok(0)
}

fn predict_cmd(a: PredictArgs, ctx: &mut Ctx) -> Result<i32> {
    let pick = |explicit: Option<PathBuf>, name: &str| -> Result<PathBuf> {
        explicit.or_else(|| a.run.as_ref().map(|d| d.join(name))).ok_or_else(|| Error::Config(format!("give --run or the path to {name}")))
    };
    let model_path = pick(a.model.clone(), "model.ckpt")?;
    let cb_path = pick(a.codebook.clone(), "codebook.bin")?;
    let cnn_path = pick(a.cnn.clone(), "cnn.ckpt")?;
    let (params, ck) = read_fusion_checkpoint(&mut open(&model_path)?)?;
    let cb = load_codebook(&cb_path)?;
    if ck.meta("codebook") != Some(cb.fingerprint().as_str()) {
        return Err(Error::format("codebook does not match the one the model was trained with"));
    }
    let cnn = load_cnn(&cnn_path)?;
    let meta = |k: &str| ck.meta(k).ok_or_else(|| Error::format(format!("model checkpoint lacks `{k}`")));
    let parse = |k: &str| -> Result<f64> { meta(k)?.parse().map_err(|_| Error::format(format!("bad `{k}` in model checkpoint"))) };
    let seq = SequenceConfig {
        raster_size: parse("raster_size")? as usize,
        line_width: parse("line_width")?,
        shape: ShapeContextConfig { samples_per_stroke: parse("samples_per_stroke")? as usize },
        llc_k: parse("llc_k")? as usize,
    };
    let canvas = ck.meta("canvas").and_then(|c| c.parse().ok()).unwrap_or(256);
    let classes: Vec<&str> = meta("class_names")?.split(' ').collect();
    let sketch = normalize_sketch(&read_sketch_file(&a.sketch)?, Canvas::square(canvas));
    let features = build_feature_sequence(&sketch, &cb, &cnn, &seq)?;
    let class = predict(&features, &params)?;
    writeln!(ctx.out, "{}", classes.get(class).copied().unwrap_or("?"))?;
    Ok(0)
}

fn gradcheck(a: GradcheckArgs, ctx: &mut Ctx) -> Result<i32> {
    let (cfg, coords) = match a.config.as_str() {
        "tiny" => (FusionConfig { steps: 10, ..FusionConfig::new(8, 12, 4, 3) }, CheckCoords::All),
        "desk" => (FusionConfig::new(32, 64, 16, 5), CheckCoords::Sample { count: 500, seed: ctx.seed }),
        other => return Err(Error::Config(format!("unknown gradcheck config {other:?} (tiny, desk)"))),
    };
    let r = fusion_grad_check(&cfg, ctx.seed, a.eps, coords)?;
    if ctx.tabular {
        writeln!(ctx.out, "config\tchecked\tmax_relative_error\ttolerance")?;
        writeln!(ctx.out, "{}\t{}\t{:e}\t{:e}", a.config, r.checked, r.max_rel_error, GRADCHECK_TOLERANCE)?;
    } else {
        writeln!(
            ctx.out,
            "max relative error {:e} over {} coordinates (worst index {}: analytic {:e}, numeric {:e})",
            r.max_rel_error, r.checked, r.worst_index, r.analytic, r.numeric
        )?;
    }
    if r.max_rel_error <= GRADCHECK_TOLERANCE {
        Ok(0)
    } else {
        Err(Error::Numeric(format!("gradient error {:e} exceeds {:e}", r.max_rel_error, GRADCHECK_TOLERANCE)))
    }
}

fn run(a: RunArgs, ctx: &mut Ctx) -> Result<i32> {
    let path = match a.config.or_else(|| std::env::var_os(CONFIG_ENV).map(PathBuf::from)) {
        Some(p) => p,
        None => return Err(Error::Config(format!("no config given and ${CONFIG_ENV} is unset"))),
    };
    let mut cfg = ExperimentConfig::load(&path)?;
    if let Some(seed) = ctx.seed_given {
        cfg.seed = seed;
    }
    if let Some(threads) = ctx.threads_given {
        cfg.threads = threads.max(1);
    }
    let report = run_experiment(&cfg, Some(&a.out))?;
    if ctx.tabular {
        write!(ctx.out, "{}", report.accuracy_tsv())?;
    } else {
        write!(ctx.out, "{}", report.body())?;
    }
    Ok(0)
}
