use std::path::{Path, PathBuf};

use rayon::ThreadPool;

use super::config::{seeds, DataSource, ExperimentConfig};
use super::report::{write_report_dir, ExperimentReport};
use super::{class_names, evaluate, split_dataset, DatasetSplit};
use crate::cnn::{pretrain_texture, CnnEpoch, CnnParams};
use crate::error::{Error, Result};
use crate::fusion::{build_feature_sequence, group_bitmaps, train, FeatureSequence, SequenceConfig};
use crate::nn::{ordered_map, worker_pool};
use crate::shape::{build_codebook, sketch_descriptors, Codebook, ShapeContextConfig};
use crate::sketch::{
    augment_with, normalize_sketch, parse_sketch, split_stroke_groups, AugmentConfig, Bitmap, Canvas, CropPosition, Sketch, SketchFormat,
};
use crate::synth::{synth_generate, synth_generate_classes, Family, SynthClass};

/// Everything computed before the recurrent model is trained.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub classes: Vec<String>,
    pub sketches: Vec<Sketch>,
    pub split: DatasetSplit,
    pub codebook: Codebook,
    pub cnn: CnnParams,
    pub cnn_trace: Vec<CnnEpoch>,
    pub sequence: SequenceConfig,
    /// Training sequences, augmented variants included.
    pub train: Vec<FeatureSequence>,
    pub validation: Vec<FeatureSequence>,
    pub test: Vec<FeatureSequence>,
}

/// Every `.json` and `.svg` file under `paths`, directories walked in
/// file-name order.
pub fn sketch_files(paths: &[PathBuf]) -> Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    for root in paths {
        for entry in walkdir::WalkDir::new(root).sort_by_file_name() {
            let entry = entry.map_err(|e| {
                let kind = e.io_error().map_or(std::io::ErrorKind::Other, |io| io.kind());
                Error::Io(std::io::Error::new(kind, format!("{}: {e}", root.display())))
            })?;
            let path = entry.path();
            if entry.file_type().is_file() && matches!(path.extension().and_then(|e| e.to_str()), Some("json" | "svg")) {
                files.push(path.to_path_buf());
            }
        }
    }
    Ok(files)
}

/// Reads one sketch file; unlabeled sketches take their parent directory's name.
pub fn read_sketch_file(path: &Path) -> Result<Sketch> {
    let bytes = std::fs::read(path)?;
    let mut s = parse_sketch(&bytes, SketchFormat::from_path(path))?;
    if s.label.is_none() {
        s.label = path.parent().and_then(|p| p.file_name()).and_then(|n| n.to_str()).map(str::to_string);
    }
    Ok(s)
}

/// The configured dataset, normalized onto the configured canvas.
pub fn load_sketches(cfg: &ExperimentConfig) -> Result<Vec<Sketch>> {
    let seed = cfg.data.seed.unwrap_or(cfg.seed);
    let canvas = Canvas::square(cfg.data.canvas);
    let raw = match cfg.data.source {
        DataSource::Synthetic if cfg.data.families.is_empty() => synth_generate(cfg.data.classes, cfg.data.per_class, seed)?,
        DataSource::Synthetic => {
            let classes = cfg
                .data
                .families
                .iter()
                .map(|f| Ok(SynthClass { family: Family::from_name(f)?, variant: 0 }))
                .collect::<Result<Vec<_>>>()?;
            synth_generate_classes(&classes, cfg.data.per_class, seed)?
        }
        DataSource::Files => sketch_files(&cfg.data.paths)?
            .iter()
            .map(|f| {
                read_sketch_file(f).map_err(|e| match e {
                    Error::Parse { offset, message } => Error::Parse { offset, message: format!("{}: {message}", f.display()) },
                    other => other,
                })
            })
            .collect::<Result<Vec<_>>>()?,
    };
    if raw.is_empty() {
        return Err(Error::Empty("dataset"));
    }
    Ok(raw.iter().map(|s| normalize_sketch(s, canvas)).collect())
}

/// Stroke descriptors of every stroke group of `sketches`. Groups whose points
/// all coincide are skipped.
pub fn codebook_descriptors(sketches: &[Sketch], cfg: &ShapeContextConfig, pool: Option<&ThreadPool>) -> Result<Vec<Vec<f64>>> {
    let per_sketch = ordered_map(sketches, pool, |s| -> Result<Vec<Vec<f64>>> {
        let mut out = Vec::new();
        for g in split_stroke_groups(s)? {
            match sketch_descriptors(&g, cfg) {
                Ok(d) => out.extend(d.into_iter().map(|d| d.0)),
                Err(Error::ZeroScale | Error::Insufficient { .. }) => {}
                Err(e) => return Err(e),
            }
        }
        Ok(out)
    });
    let mut all = Vec::new();
    for d in per_sketch {
        all.extend(d?);
    }
    Ok(all)
}

/// Center crops of every stroke-group bitmap, labeled with the sketch class.
pub fn texture_training_set(
    sketches: &[(Sketch, usize)],
    seq: &SequenceConfig,
    crop: usize,
    pool: Option<&ThreadPool>,
) -> Result<Vec<(Bitmap, usize)>> {
    let per_sketch = ordered_map(sketches, pool, |(s, y)| -> Result<Vec<(Bitmap, usize)>> {
        group_bitmaps(s, seq.raster_size, seq.line_width)?
            .into_iter()
            .map(|b| {
                let (x, y0) = CropPosition::Center.offset(b.width, b.height, crop);
                Ok((b.crop(x, y0, crop, crop)?, *y))
            })
            .collect()
    });
    let mut all = Vec::new();
    for d in per_sketch {
        all.extend(d?);
    }
    Ok(all)
}

pub fn featurize(
    sketches: &[(Sketch, usize)],
    codebook: &Codebook,
    cnn: &CnnParams,
    seq: &SequenceConfig,
    pool: Option<&ThreadPool>,
) -> Result<Vec<FeatureSequence>> {
    ordered_map(sketches, pool, |(s, y)| {
        let mut f = build_feature_sequence(s, codebook, cnn, seq)?;
        f.label = Some(*y);
        Ok(f)
    })
    .into_iter()
    .collect()
}

fn labeled(sketches: &[Sketch], idx: &[usize], classes: &[String]) -> Vec<(Sketch, usize)> {
    idx.iter()
        .map(|&i| {
            let s = &sketches[i];
            let y = classes.iter().position(|c| Some(c) == s.label.as_ref()).unwrap_or(0);
            (s.clone(), y)
        })
        .collect()
}

fn augmented(items: &[(Sketch, usize)], cfg: &AugmentConfig) -> Vec<(Sketch, usize)> {
    items.iter().flat_map(|(s, y)| augment_with(s, cfg).into_iter().map(move |a| (a, *y))).collect()
}

/// Loads and splits the data, builds the codebook, pretrains the CNN and
/// featurizes every split.
pub fn prepare(cfg: &ExperimentConfig, pool: Option<&ThreadPool>) -> Result<Prepared> {
    cfg.validate()?;
    let sketches = load_sketches(cfg).map_err(|e| e.in_stage("import"))?;
    let classes = class_names(sketches.iter().filter_map(|s| s.label.as_deref()));
    let labels: Vec<Option<String>> = sketches.iter().map(|s| s.label.clone()).collect();
    let split = split_dataset(&labels, cfg.seed.wrapping_add(seeds::SPLIT)).map_err(|e| e.in_stage("split"))?;

    let train_orig = labeled(&sketches, &split.train, &classes);
    let train_items = if cfg.augment.enabled { augmented(&train_orig, &cfg.augment_config()) } else { train_orig.clone() };

    let arch = cfg.arch(classes.len())?;
    let sequence = cfg.sequence_config(arch.input_size);

    let codebook = (|| {
        let originals: Vec<Sketch> = train_orig.iter().map(|(s, _)| s.clone()).collect();
        let desc = codebook_descriptors(&originals, &sequence.shape, pool)?;
        if desc.len() < cfg.shape.codebook_size {
            return Err(Error::Insufficient {
                what: "stroke descriptors for the codebook",
                needed: cfg.shape.codebook_size,
                got: desc.len(),
            });
        }
        build_codebook(&desc, cfg.shape.codebook_size, cfg.shape.kmeans_iterations, cfg.seed.wrapping_add(seeds::CODEBOOK))
    })()
    .map_err(|e| e.in_stage("codebook"))?;

    let (cnn, cnn_trace) = texture_training_set(&train_items, &sequence, arch.input_size, pool)
        .and_then(|data| pretrain_texture(&data, &arch, &cfg.cnn_train_config(), pool))
        .map_err(|e| e.in_stage("pretrain-cnn"))?;

    let feat = |items: &[(Sketch, usize)]| featurize(items, &codebook, &cnn, &sequence, pool).map_err(|e| e.in_stage("featurize"));
    let train_seqs = feat(&train_items)?;
    let validation = feat(&labeled(&sketches, &split.validation, &classes))?;
    let test = feat(&labeled(&sketches, &split.test, &classes))?;

    Ok(Prepared { classes, sketches, split, codebook, cnn, cnn_trace, sequence, train: train_seqs, validation, test })
}

/// Trains the recurrent model on prepared features and evaluates every split
/// with the best-validation parameters.
pub fn fit(prepared: &Prepared, cfg: &ExperimentConfig, pool: Option<&ThreadPool>) -> Result<ExperimentReport> {
    let texture_dim = prepared.cnn.feature_dim();
    let model = cfg.fusion_config(texture_dim, prepared.codebook.len(), prepared.classes.len());
    let outcome =
        train(&prepared.train, &prepared.validation, &model, &cfg.fusion_train_config(), pool).map_err(|e| e.in_stage("train"))?;
    let eval = |s: &[FeatureSequence]| evaluate(&outcome.params, s, pool).map_err(|e| e.in_stage("eval"));
    let train_eval = eval(&prepared.train)?;
    let validation = eval(&prepared.validation)?;
    let test = eval(&prepared.test)?;
    Ok(ExperimentReport {
        config: cfg.clone(),
        tags: model.ablation_tags().into_iter().map(str::to_string).collect(),
        classes: prepared.classes.clone(),
        split_sizes: [prepared.split.train.len(), prepared.split.validation.len(), prepared.split.test.len()],
        train_sequences: prepared.train.len(),
        codebook_hash: prepared.codebook.fingerprint(),
        codebook_shape: (prepared.codebook.len(), prepared.codebook.dim()),
        cnn_arch: prepared.cnn.arch.describe(),
        cnn_trace: prepared.cnn_trace.clone(),
        trace: outcome.trace,
        best_epoch: outcome.best_epoch,
        train: train_eval,
        validation,
        test,
        params: outcome.params,
    })
}

/// Runs every stage from a config; with `out_dir` the report, tables, plots
/// and model files are written there.
pub fn run_experiment(cfg: &ExperimentConfig, out_dir: Option<&Path>) -> Result<ExperimentReport> {
    let pool = worker_pool(cfg.threads())?;
    let prepared = prepare(cfg, pool.as_ref())?;
    let report = fit(&prepared, cfg, pool.as_ref())?;
    if let Some(dir) = out_dir {
        write_report_dir(dir, &report, &prepared).map_err(|e| e.in_stage("report"))?;
    }
    Ok(report)
}
