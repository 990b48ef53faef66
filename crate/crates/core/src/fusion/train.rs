use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::ThreadPool;

use super::{sequence_loss_grad, FeatureSequence, FusionConfig, FusionParams};
use crate::error::{Error, Result};
use crate::nn::{clip_global_norm, ordered_batch_grad, ordered_map, sgd_step, Parameters, PlateauSchedule, SampleGrad, CLIP_NORM};

#[derive(Debug, Clone, PartialEq)]
pub struct FusionTrainConfig {
    pub lr: f64,
    pub batch: usize,
    pub epochs: usize,
    pub seed: u64,
    /// Epochs without validation improvement before the rate is halved.
    pub patience: usize,
    /// Stop after this many epochs without validation improvement.
    pub early_stop: Option<usize>,
}

impl Default for FusionTrainConfig {
    fn default() -> Self {
        FusionTrainConfig { lr: 0.002, batch: 100, epochs: 200, seed: 0, patience: 10, early_stop: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitMetrics {
    pub loss: f64,
    pub accuracy: f64,
}

/// One row of the training trace. Epoch 0 is the untrained model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub lr: f64,
    pub train: SplitMetrics,
    pub validation: SplitMetrics,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Parameters from the epoch with the lowest validation loss.
    pub params: FusionParams,
    pub best_epoch: usize,
    pub trace: Vec<EpochRecord>,
}

fn label_of(s: &FeatureSequence) -> Result<usize> {
    s.label.ok_or_else(|| Error::Config("training sequence without a label".into()))
}

/// Mean loss and accuracy of `p` over labeled sequences, plus each prediction.
pub fn evaluate_sequences(seqs: &[FeatureSequence], p: &FusionParams, pool: Option<&ThreadPool>) -> Result<(SplitMetrics, Vec<usize>)> {
    if seqs.is_empty() {
        return Err(Error::Empty("evaluation split"));
    }
    let results = ordered_map(seqs, pool, |s| -> Result<(f64, usize, usize)> {
        let y = label_of(s)?;
        let (loss, _, pred) = sequence_loss_grad(s, p, y)?;
        Ok((loss, pred.class, y))
    });
    let mut loss = 0.0;
    let mut correct = 0;
    let mut preds = Vec::with_capacity(seqs.len());
    for r in results {
        let (l, pred, y) = r?;
        loss += l;
        correct += usize::from(pred == y);
        preds.push(pred);
    }
    let n = seqs.len() as f64;
    Ok((SplitMetrics { loss: loss / n, accuracy: correct as f64 / n }, preds))
}

/// Mini-batch SGD on the mean batch gradient with global-norm clipping and a
/// plateau-halving learning rate. Training metrics per epoch are measured on
/// the full training split after the epoch's updates.
pub fn train(
    train_set: &[FeatureSequence],
    validation: &[FeatureSequence],
    model: &FusionConfig,
    cfg: &FusionTrainConfig,
    pool: Option<&ThreadPool>,
) -> Result<TrainOutcome> {
    if train_set.is_empty() {
        return Err(Error::Empty("training split"));
    }
    if validation.is_empty() {
        return Err(Error::Empty("validation split"));
    }
    if cfg.batch == 0 {
        return Err(Error::Config("batch size must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut params = FusionParams::init(model, &mut rng);
    let zero = params.zeros_like();
    let mut schedule = PlateauSchedule::new(cfg.lr, cfg.patience);

    let record = |epoch: usize, lr: f64, p: &FusionParams| -> Result<EpochRecord> {
        Ok(EpochRecord {
            epoch,
            lr,
            train: evaluate_sequences(train_set, p, pool)?.0,
            validation: evaluate_sequences(validation, p, pool)?.0,
        })
    };
    let first = record(0, cfg.lr, &params)?;
    schedule.observe(first.validation.loss);
    let mut best = (params.clone(), 0);
    let mut trace = vec![first];
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut stale = 0;

    for epoch in 1..=cfg.epochs {
        let lr = schedule.lr;
        order.shuffle(&mut rng);
        for chunk in order.chunks(cfg.batch) {
            let snapshot = &params;
            let batch = ordered_batch_grad(chunk, &zero, pool, |&i| {
                let s = &train_set[i];
                let (loss, grad, pred) = sequence_loss_grad(s, snapshot, label_of(s)?)?;
                Ok(SampleGrad { loss, grad, predicted: pred.class })
            })?;
            let mut g = batch.grad_sum;
            g.scale(1.0 / chunk.len() as f64);
            clip_global_norm(&mut g, CLIP_NORM);
            sgd_step(&mut params, &g, lr)?;
        }
        if !params.is_finite() {
            return Err(Error::Numeric(format!("parameters became non-finite at epoch {epoch}")));
        }
        let rec = record(epoch, lr, &params)?;
        if !rec.train.loss.is_finite() {
            return Err(Error::Numeric(format!("training loss became non-finite at epoch {epoch}")));
        }
        if schedule.observe(rec.validation.loss) {
            best = (params.clone(), epoch);
            stale = 0;
        } else {
            stale += 1;
        }
        trace.push(rec);
        if cfg.early_stop.is_some_and(|n| stale >= n) {
            break;
        }
    }
    Ok(TrainOutcome { params: best.0, best_epoch: best.1, trace })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    /// Class k has a bump at feature k of the texture stream.
    fn toy(n: usize, classes: usize, seed: u64) -> Vec<FeatureSequence> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|i| {
                let y = i % classes;
                let tex =
                    (0..8).map(|_| (0..classes).map(|k| if k == y { 1.0 } else { 0.0 } + rng.gen_range(-0.3..0.3)).collect()).collect();
                let shp = (0..8).map(|_| vec![rng.gen_range(0.0..1.0); 2]).collect();
                FeatureSequence::new(tex, shp, Some(y)).unwrap()
            })
            .collect()
    }

    #[test]
    fn learns_and_is_deterministic() {
        let train_set = toy(30, 3, 1);
        let val = toy(9, 3, 2);
        let model = FusionConfig { steps: 8, ..FusionConfig::new(3, 2, 6, 3) };
        let cfg = FusionTrainConfig { lr: 0.5, batch: 5, epochs: 40, ..Default::default() };
        let a = train(&train_set, &val, &model, &cfg, None).unwrap();
        let b = train(&train_set, &val, &model, &cfg, None).unwrap();
        assert_eq!(a.trace, b.trace);
        assert_eq!(a.params, b.params);
        let l0 = a.trace[0].train.loss;
        assert!((l0 - 3f64.ln()).abs() < 0.1 * 3f64.ln(), "initial loss {l0}");
        let (m, _) = evaluate_sequences(&train_set, &a.params, None).unwrap();
        assert!(m.accuracy >= 0.95, "{m:?}");
    }

    #[test]
    fn empty_splits_rejected() {
        let model = FusionConfig::new(3, 2, 2, 3);
        let cfg = FusionTrainConfig::default();
        assert!(train(&[], &toy(3, 3, 0), &model, &cfg, None).is_err());
        assert!(train(&toy(3, 3, 0), &[], &model, &cfg, None).is_err());
    }
}
