use rayon::prelude::*;
use rayon::ThreadPool;

use super::tensor::Parameters;
use crate::error::{Error, Result};

/// Samples summed sequentially inside one work unit.
const GROUP: usize = 4;
/// Work units evaluated concurrently before being folded into the total.
const WAVE: usize = 16;

/// Per-sample result of a forward/backward pass.
pub struct SampleGrad<P> {
    pub loss: f64,
    pub grad: P,
    pub predicted: usize,
}

pub struct BatchGrad<P> {
    pub grad_sum: P,
    pub loss_sum: f64,
    pub predicted: Vec<usize>,
}

/// Builds a worker pool, or `None` for single-threaded execution.
pub fn worker_pool(threads: usize) -> Result<Option<ThreadPool>> {
    if threads <= 1 {
        return Ok(None);
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map(Some)
        .map_err(|e| Error::Config(format!("cannot start {threads} worker threads: {e}")))
}

/// Runs `f` on every item and sums the gradients in a fixed order: items are
/// cut into groups of four summed left to right, and group sums are folded
/// into the total in item order. The result is bit-identical for any thread
/// count.
pub fn ordered_batch_grad<T, P, F>(items: &[T], zero: &P, pool: Option<&ThreadPool>, f: F) -> Result<BatchGrad<P>>
where
    T: Sync,
    P: Parameters + Send + Sync,
    F: Fn(&T) -> Result<SampleGrad<P>> + Sync,
{
    let group_sum = |chunk: &[T]| -> Result<(P, f64, Vec<usize>)> {
        let mut acc: Option<P> = None;
        let mut loss = 0.0;
        let mut preds = Vec::with_capacity(chunk.len());
        for item in chunk {
            let s = f(item)?;
            loss += s.loss;
            preds.push(s.predicted);
            match acc.as_mut() {
                Some(a) => a.add_scaled(&s.grad, 1.0),
                None => acc = Some(s.grad),
            }
        }
        Ok((acc.unwrap_or_else(|| zero.zeros_like()), loss, preds))
    };

    let mut out = BatchGrad { grad_sum: zero.zeros_like(), loss_sum: 0.0, predicted: Vec::with_capacity(items.len()) };
    for wave in items.chunks(GROUP * WAVE) {
        let parts: Vec<Result<(P, f64, Vec<usize>)>> = match pool {
            Some(pool) => pool.install(|| wave.par_chunks(GROUP).map(group_sum).collect()),
            None => wave.chunks(GROUP).map(group_sum).collect(),
        };
        for part in parts {
            let (g, l, p) = part?;
            out.grad_sum.add_scaled(&g, 1.0);
            out.loss_sum += l;
            out.predicted.extend(p);
        }
    }
    Ok(out)
}

/// Order-preserving parallel map.
pub fn ordered_map<T, U, F>(items: &[T], pool: Option<&ThreadPool>, f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> U + Sync,
{
    match pool {
        Some(pool) => pool.install(|| items.par_iter().map(&f).collect()),
        None => items.iter().map(f).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{GruLayerParams, Tensor2};

    #[test]
    fn thread_count_does_not_change_the_sum() {
        let items: Vec<f64> = (0..103).map(|i| (i as f64 * 0.37).sin() * 1e3 + 1e-7 * i as f64).collect();
        let zero = GruLayerParams::zeros(1, 1, 1);
        let f = |&x: &f64| {
            let mut g = zero.zeros_like();
            g.output = Tensor2::from_vec(1, 1, vec![x]).unwrap();
            Ok(SampleGrad { loss: x * x, grad: g, predicted: (x > 0.0) as usize })
        };
        let serial = ordered_batch_grad(&items, &zero, None, f).unwrap();
        let pool = worker_pool(4).unwrap();
        let parallel = ordered_batch_grad(&items, &zero, pool.as_ref(), f).unwrap();
        assert_eq!(serial.grad_sum, parallel.grad_sum);
        assert_eq!(serial.loss_sum.to_bits(), parallel.loss_sum.to_bits());
        assert_eq!(serial.predicted, parallel.predicted);
        assert_eq!(serial.predicted.len(), 103);
    }
}
