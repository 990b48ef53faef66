use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::ThreadPool;

use super::{cnn_backward, cnn_forward_cached, CnnArch, CnnParams};
use crate::error::{Error, Result};
use crate::nn::{argmax, clip_global_norm, ordered_batch_grad, sgd_step, softmax_xent, Parameters, SampleGrad, CLIP_NORM};
use crate::sketch::Bitmap;

#[derive(Debug, Clone, PartialEq)]
pub struct CnnTrainConfig {
    pub lr: f64,
    pub batch: usize,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for CnnTrainConfig {
    fn default() -> Self {
        CnnTrainConfig { lr: 0.05, batch: 16, epochs: 30, seed: 0 }
    }
}

/// Mean training loss and accuracy over one pass.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CnnEpoch {
    pub epoch: usize,
    pub loss: f64,
    pub accuracy: f64,
}

/// Trains the classifier with plain mini-batch SGD on mean cross-entropy.
/// The returned parameters are frozen by convention; extraction only reads them.
pub fn pretrain_texture(
    data: &[(Bitmap, usize)],
    arch: &CnnArch,
    cfg: &CnnTrainConfig,
    pool: Option<&ThreadPool>,
) -> Result<(CnnParams, Vec<CnnEpoch>)> {
    if data.is_empty() {
        return Err(Error::Empty("texture training set"));
    }
    if cfg.batch == 0 {
        return Err(Error::Config("batch size must be positive".into()));
    }
    if let Some((_, bad)) = data.iter().find(|(_, y)| *y >= arch.classes) {
        return Err(Error::Config(format!("label {bad} outside {} classes", arch.classes)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut params = CnnParams::init(arch, &mut rng)?;
    let zero = params.zeros_like();
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut trace = Vec::with_capacity(cfg.epochs);

    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        let mut correct = 0;
        for chunk in order.chunks(cfg.batch) {
            let snapshot = &params;
            let batch = ordered_batch_grad(chunk, &zero, pool, |&i| {
                let (b, y) = &data[i];
                let cache = cnn_forward_cached(b, snapshot)?;
                let (loss, d) = softmax_xent(&cache.logits, *y)?;
                let grad = cnn_backward(&d, &cache, snapshot)?;
                Ok(SampleGrad { loss, grad, predicted: argmax(&cache.logits) })
            })?;
            loss_sum += batch.loss_sum;
            correct += chunk.iter().zip(&batch.predicted).filter(|(&i, &p)| data[i].1 == p).count();
            let mut g = batch.grad_sum;
            g.scale(1.0 / chunk.len() as f64);
            clip_global_norm(&mut g, CLIP_NORM);
            sgd_step(&mut params, &g, cfg.lr)?;
        }
        let loss = loss_sum / data.len() as f64;
        if !loss.is_finite() || !params.is_finite() {
            return Err(Error::Numeric(format!("texture training diverged at epoch {epoch}")));
        }
        trace.push(CnnEpoch { epoch, loss, accuracy: correct as f64 / data.len() as f64 });
    }
    Ok((params, trace))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cnn::ConvSpec;

    fn toy_set() -> Vec<(Bitmap, usize)> {
        // class 0: a vertical bar, class 1: a horizontal bar, at varying offsets
        let mut out = Vec::new();
        for off in 1..7 {
            for class in 0..2 {
                let mut b = Bitmap::zeros(8, 8);
                for t in 0..8 {
                    if class == 0 {
                        b.set(off, t, 1.0);
                    } else {
                        b.set(t, off, 1.0);
                    }
                }
                out.push((b, class));
            }
        }
        out
    }

    fn toy_arch() -> CnnArch {
        CnnArch { input_size: 8, convs: vec![ConvSpec::new(4, 3, 1).pooled(2, 2), ConvSpec::new(4, 3, 1)], fc: vec![8], classes: 2 }
    }

    #[test]
    fn empty_dataset_is_an_error() {
        let r = pretrain_texture(&[], &toy_arch(), &CnnTrainConfig::default(), None);
        assert!(matches!(r, Err(Error::Empty(_))));
    }

    #[test]
    fn separable_toy_set_is_learned_deterministically() {
        let data = toy_set();
        let cfg = CnnTrainConfig { lr: 0.1, batch: 4, epochs: 100, seed: 3 };
        let (_, a) = pretrain_texture(&data, &toy_arch(), &cfg, None).unwrap();
        let (_, b) = pretrain_texture(&data, &toy_arch(), &cfg, None).unwrap();
        assert_eq!(a, b);
        assert!(a.last().unwrap().accuracy >= 0.99, "{:?}", a.last());
    }
}
