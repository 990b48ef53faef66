use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use super::config::ExperimentConfig;
use super::pipeline::Prepared;
use super::Evaluation;
use crate::cnn::{write_cnn_checkpoint, CnnEpoch};
use crate::error::{Error, Result};
use crate::fusion::{write_fusion_checkpoint, EpochRecord, FusionParams, SplitMetrics};
use crate::plot::{confusion_grid, line_chart, Series};
use crate::shape::write_codebook;

#[derive(Debug, Clone)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub tags: Vec<String>,
    pub classes: Vec<String>,
    /// Sketch counts of the train, validation and test splits.
    pub split_sizes: [usize; 3],
    /// Training sequences after augmentation.
    pub train_sequences: usize,
    pub codebook_hash: String,
    /// Atoms and descriptor length.
    pub codebook_shape: (usize, usize),
    pub cnn_arch: String,
    pub cnn_trace: Vec<CnnEpoch>,
    pub trace: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub train: Evaluation,
    pub validation: Evaluation,
    pub test: Evaluation,
    pub params: FusionParams,
}

fn fmt_f(v: f64) -> String {
    format!("{v:.6}")
}

impl ExperimentReport {
    /// The text of `report.txt`. Contains no timestamps or paths, so equal
    /// inputs give equal bytes.
    pub fn body(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "dualsketch experiment report");
        let tags = if self.tags.is_empty() { "none".to_string() } else { self.tags.join(" ") };
        let _ = writeln!(s, "ablation: {tags}");
        let _ = writeln!(s, "classes: {}", self.classes.join(" "));
        let [tr, va, te] = self.split_sizes;
        let _ = writeln!(s, "split: train {tr} validation {va} test {te} (training sequences {})", self.train_sequences);
        let (m, d) = self.codebook_shape;
        let _ = writeln!(s, "codebook: {m} atoms x {d} dims, sha256 {}", self.codebook_hash);
        let _ = writeln!(s, "texture network: {}", self.cnn_arch);
        if let Some(last) = self.cnn_trace.last() {
            let _ = writeln!(
                s,
                "texture pretraining: {} epochs, final loss {} accuracy {}",
                last.epoch,
                fmt_f(last.loss),
                fmt_f(last.accuracy)
            );
        }
        let _ = writeln!(s, "epochs run: {}, best validation epoch: {}", self.trace.len().saturating_sub(1), self.best_epoch);
        for (name, e) in [("train", &self.train), ("validation", &self.validation), ("test", &self.test)] {
            let _ = writeln!(s, "accuracy {name}: {}/{} = {} (loss {})", e.correct(), e.total(), fmt_f(e.accuracy), fmt_f(e.loss));
        }
        let _ = writeln!(s, "\ntest confusion (rows true, columns predicted):");
        s.push_str(&confusion_tsv(&self.classes, &self.test.confusion));
        let _ = writeln!(s, "\n[config]");
        s.push_str(&self.config.to_toml());
        s
    }

    pub fn trace_tsv(&self) -> String {
        let mut s = String::from("epoch\tlr\ttrain_loss\ttrain_accuracy\tvalidation_loss\tvalidation_accuracy\n");
        for r in &self.trace {
            let _ = writeln!(
                s,
                "{}\t{}\t{}\t{}\t{}\t{}",
                r.epoch,
                r.lr,
                fmt_f(r.train.loss),
                fmt_f(r.train.accuracy),
                fmt_f(r.validation.loss),
                fmt_f(r.validation.accuracy)
            );
        }
        s
    }

    pub fn accuracy_tsv(&self) -> String {
        let mut s = String::from("split\tcorrect\ttotal\taccuracy\tloss\n");
        for (name, e) in [("train", &self.train), ("validation", &self.validation), ("test", &self.test)] {
            let _ = writeln!(s, "{name}\t{}\t{}\t{}\t{}", e.correct(), e.total(), fmt_f(e.accuracy), fmt_f(e.loss));
        }
        s
    }
}

pub fn confusion_tsv(classes: &[String], m: &[Vec<usize>]) -> String {
    let mut s = String::from("true\\predicted");
    for c in classes {
        s.push('\t');
        s.push_str(c);
    }
    s.push('\n');
    for (c, row) in classes.iter().zip(m) {
        s.push_str(c);
        for v in row {
            let _ = write!(s, "\t{v}");
        }
        s.push('\n');
    }
    s
}

fn bad_table(what: &str, line: usize) -> Error {
    Error::format(format!("{what}: malformed line {line}"))
}

pub fn read_trace_tsv(text: &str) -> Result<Vec<EpochRecord>> {
    text.lines()
        .enumerate()
        .skip(1)
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            let f: Vec<&str> = l.split('\t').collect();
            let num = |k: usize| f.get(k).and_then(|v| v.parse::<f64>().ok()).ok_or_else(|| bad_table("trace", i + 1));
            if f.len() != 6 {
                return Err(bad_table("trace", i + 1));
            }
            Ok(EpochRecord {
                epoch: f[0].parse().map_err(|_| bad_table("trace", i + 1))?,
                lr: num(1)?,
                train: SplitMetrics { loss: num(2)?, accuracy: num(3)? },
                validation: SplitMetrics { loss: num(4)?, accuracy: num(5)? },
            })
        })
        .collect()
}

pub fn read_confusion_tsv(text: &str) -> Result<(Vec<String>, Vec<Vec<usize>>)> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines.next().ok_or_else(|| bad_table("confusion", 1))?;
    let classes: Vec<String> = header.split('\t').skip(1).map(str::to_string).collect();
    let mut rows = Vec::new();
    for (i, l) in lines.enumerate() {
        let row: Vec<usize> = l.split('\t').skip(1).map(|v| v.parse().map_err(|_| bad_table("confusion", i + 2))).collect::<Result<_>>()?;
        if row.len() != classes.len() {
            return Err(bad_table("confusion", i + 2));
        }
        rows.push(row);
    }
    if rows.len() != classes.len() {
        return Err(Error::format("confusion matrix is not square"));
    }
    Ok((classes, rows))
}

/// Loss and accuracy charts from a training trace.
pub fn trace_plots(trace: &[EpochRecord]) -> (String, String) {
    let pts = |f: &dyn Fn(&EpochRecord) -> f64| trace.iter().map(|r| (r.epoch as f64, f(r))).collect::<Vec<_>>();
    let loss = line_chart(
        "loss per epoch",
        "epoch",
        "mean cross-entropy",
        &[Series { name: "train", points: pts(&|r| r.train.loss) }, Series { name: "validation", points: pts(&|r| r.validation.loss) }],
    );
    let acc = line_chart(
        "accuracy per epoch",
        "epoch",
        "accuracy",
        &[
            Series { name: "train", points: pts(&|r| r.train.accuracy) },
            Series { name: "validation", points: pts(&|r| r.validation.accuracy) },
        ],
    );
    (loss, acc)
}

/// Regenerates the SVG plots of a report directory from its tables.
pub fn render_plots(dir: &Path) -> Result<()> {
    let trace = read_trace_tsv(&std::fs::read_to_string(dir.join("trace.tsv"))?)?;
    let (classes, confusion) = read_confusion_tsv(&std::fs::read_to_string(dir.join("confusion.tsv"))?)?;
    let (loss, acc) = trace_plots(&trace);
    std::fs::write(dir.join("loss.svg"), loss)?;
    std::fs::write(dir.join("accuracy.svg"), acc)?;
    std::fs::write(dir.join("confusion.svg"), confusion_grid(&classes, &confusion))?;
    Ok(())
}

/// Model metadata needed to featurize new sketches at prediction time.
pub fn model_meta(prepared: &Prepared, report: &ExperimentReport) -> Vec<(String, String)> {
    let s = &prepared.sequence;
    vec![
        ("class_names".into(), report.classes.join(" ")),
        ("raster_size".into(), s.raster_size.to_string()),
        ("line_width".into(), s.line_width.to_string()),
        ("llc_k".into(), s.llc_k.to_string()),
        ("samples_per_stroke".into(), s.shape.samples_per_stroke.to_string()),
        ("canvas".into(), report.config.data.canvas.to_string()),
    ]
}

fn write_file(path: &Path, f: impl FnOnce(&mut BufWriter<File>) -> Result<()>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    f(&mut w)?;
    w.flush()?;
    Ok(())
}

/// Writes `report.txt`, the tables, the plots and the three model files.
pub fn write_report_dir(dir: &Path, report: &ExperimentReport, prepared: &Prepared) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("report.txt"), report.body())?;
    std::fs::write(dir.join("trace.tsv"), report.trace_tsv())?;
    std::fs::write(dir.join("accuracy.tsv"), report.accuracy_tsv())?;
    std::fs::write(dir.join("confusion.tsv"), confusion_tsv(&report.classes, &report.test.confusion))?;
    std::fs::write(dir.join("config.toml"), report.config.to_toml())?;
    render_plots(dir)?;
    let seed = report.config.seed;
    write_file(&dir.join("codebook.bin"), |w| write_codebook(w, &prepared.codebook, seed))?;
    write_file(&dir.join("cnn.ckpt"), |w| write_cnn_checkpoint(w, &prepared.cnn, seed, prepared.cnn_trace.len()))?;
    write_file(&dir.join("model.ckpt"), |w| {
        write_fusion_checkpoint(w, &report.params, seed, report.best_epoch, &report.codebook_hash, &model_meta(prepared, report))
    })?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn confusion_table_roundtrip() {
        let classes = vec!["a".to_string(), "b".to_string()];
        let m = vec![vec![3, 1], vec![0, 4]];
        assert_eq!(read_confusion_tsv(&confusion_tsv(&classes, &m)).unwrap(), (classes, m));
        assert!(read_confusion_tsv("x\ta\tb\na\t1\n").is_err());
    }

    #[test]
    fn trace_table_parses() {
        let t = "epoch\tlr\ttrain_loss\ttrain_accuracy\tvalidation_loss\tvalidation_accuracy\n0\t0.002\t1.6\t0.2\t1.61\t0.2\n";
        let r = read_trace_tsv(t).unwrap();
        assert_eq!(r.len(), 1);
        assert_eq!(r[0].validation.loss, 1.61);
        assert!(read_trace_tsv("h\n1\t2\n").is_err());
    }
}
