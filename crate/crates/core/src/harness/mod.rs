//! Dataset splitting, evaluation and end-to-end experiment runs.

mod config;
mod pipeline;
mod report;

pub use config::{AugmentSection, DataSection, DataSource, ExperimentConfig, ModelSection, ShapeSection, TextureSection, TrainSection};
pub use pipeline::{
    codebook_descriptors, featurize, fit, load_sketches, prepare, read_sketch_file, run_experiment, sketch_files, texture_training_set,
    Prepared,
};
pub use report::{
    confusion_tsv, model_meta, read_confusion_tsv, read_trace_tsv, render_plots, trace_plots, write_report_dir, ExperimentReport,
};

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::ThreadPool;

use crate::error::{Error, Result};
use crate::fusion::{evaluate_sequences, FeatureSequence, FusionParams};

/// Fewest sketches a class may have and still be split.
pub const MIN_PER_CLASS: usize = 5;

/// Disjoint index lists into the dataset.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetSplit {
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
    pub test: Vec<usize>,
    pub seed: u64,
}

/// Sorted distinct labels.
pub fn class_names<'a>(labels: impl IntoIterator<Item = &'a str>) -> Vec<String> {
    let mut v: Vec<String> = labels.into_iter().map(str::to_string).collect();
    v.sort();
    v.dedup();
    v
}

/// Stratified split: each class is shuffled on its own and cut into
/// `floor(67n/100)` training, `floor(13n/100)` validation and the remaining
/// test items. Classes are visited in sorted label order.
pub fn split_dataset(labels: &[Option<String>], seed: u64) -> Result<DatasetSplit> {
    let mut by_class: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, l) in labels.iter().enumerate() {
        let l = l.as_deref().ok_or_else(|| Error::Config(format!("sketch {i} has no label and cannot be split")))?;
        by_class.entry(l).or_default().push(i);
    }
    if by_class.is_empty() {
        return Err(Error::Empty("dataset"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut split = DatasetSplit { train: Vec::new(), validation: Vec::new(), test: Vec::new(), seed };
    for (class, mut items) in by_class {
        let n = items.len();
        if n < MIN_PER_CLASS {
            return Err(Error::ClassTooSmall { class: class.to_string(), count: n, min: MIN_PER_CLASS });
        }
        items.shuffle(&mut rng);
        let n_train = n * 67 / 100;
        let n_val = n * 13 / 100;
        split.train.extend(&items[..n_train]);
        split.validation.extend(&items[n_train..n_train + n_val]);
        split.test.extend(&items[n_train + n_val..]);
    }
    Ok(split)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub accuracy: f64,
    pub loss: f64,
    /// `confusion[true][predicted]`.
    pub confusion: Vec<Vec<usize>>,
}

impl Evaluation {
    pub fn total(&self) -> usize {
        self.confusion.iter().flatten().sum()
    }

    pub fn correct(&self) -> usize {
        (0..self.confusion.len()).map(|i| self.confusion[i][i]).sum()
    }
}

/// Top-1 accuracy and confusion matrix of `params` on labeled sequences.
pub fn evaluate(params: &FusionParams, seqs: &[FeatureSequence], pool: Option<&ThreadPool>) -> Result<Evaluation> {
    let (metrics, preds) = evaluate_sequences(seqs, params, pool)?;
    let c = params.config.classes;
    let mut confusion = vec![vec![0; c]; c];
    for (s, p) in seqs.iter().zip(preds) {
        // labels were checked by evaluate_sequences
        confusion[s.label.unwrap_or_default()][p] += 1;
    }
    Ok(Evaluation { accuracy: metrics.accuracy, loss: metrics.loss, confusion })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn labels(counts: &[usize]) -> Vec<Option<String>> {
        counts.iter().enumerate().flat_map(|(c, &n)| std::iter::repeat_n(Some(format!("c{c}")), n)).collect()
    }

    #[test]
    fn eighty_per_class_gives_53_10_17() {
        let s = split_dataset(&labels(&[80, 80]), 1).unwrap();
        assert_eq!((s.train.len(), s.validation.len(), s.test.len()), (106, 20, 34));
    }

    #[test]
    fn small_class_rejected() {
        let e = split_dataset(&labels(&[10, 4]), 1).unwrap_err();
        assert!(matches!(e, Error::ClassTooSmall { count: 4, .. }));
    }

    proptest! {
        #[test]
        fn split_is_a_stratified_partition(counts in proptest::collection::vec(5usize..60, 2..5), seed in any::<u64>()) {
            let l = labels(&counts);
            let s = split_dataset(&l, seed).unwrap();
            prop_assert_eq!(&s, &split_dataset(&l, seed).unwrap());
            let mut all: Vec<usize> = s.train.iter().chain(&s.validation).chain(&s.test).copied().collect();
            all.sort_unstable();
            prop_assert_eq!(all, (0..l.len()).collect::<Vec<_>>());
            for (c, &n) in counts.iter().enumerate() {
                let name = Some(format!("c{c}"));
                let count = |v: &[usize]| v.iter().filter(|&&i| l[i] == name).count();
                prop_assert_eq!(count(&s.train), n * 67 / 100);
                prop_assert_eq!(count(&s.validation), n * 13 / 100);
                let share = count(&s.test) as f64 / n as f64;
                prop_assert!((share * n as f64 - 0.2 * n as f64).abs() <= 2.0);
            }
        }
    }
}
