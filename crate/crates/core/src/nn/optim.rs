use super::tensor::Parameters;
use crate::error::{Error, Result};

/// Plain gradient descent: `p <- p - lr * g`.
pub fn sgd_step<P: Parameters>(params: &mut P, grads: &P, lr: f64) -> Result<()> {
    if !params.same_shape(grads) {
        return Err(Error::shape("gradient layout differs from parameters"));
    }
    params.add_scaled(grads, -lr);
    Ok(())
}

/// Rescales `grads` so their global L2 norm is at most `max_norm`; returns the
/// norm before clipping.
pub fn clip_global_norm<P: Parameters>(grads: &mut P, max_norm: f64) -> f64 {
    let norm = grads.global_norm();
    if norm > max_norm && norm > 0.0 {
        grads.scale(max_norm / norm);
    }
    norm
}

/// Halves the learning rate when validation loss has not improved for
/// `patience` consecutive epochs.
#[derive(Debug, Clone)]
pub struct PlateauSchedule {
    pub lr: f64,
    pub patience: usize,
    pub factor: f64,
    best: f64,
    stale: usize,
}

impl PlateauSchedule {
    pub fn new(lr: f64, patience: usize) -> Self {
        PlateauSchedule { lr, patience, factor: 0.5, best: f64::INFINITY, stale: 0 }
    }

    /// Records an epoch's validation loss; returns true if it is a new best.
    pub fn observe(&mut self, val_loss: f64) -> bool {
        if val_loss < self.best {
            self.best = val_loss;
            self.stale = 0;
            return true;
        }
        self.stale += 1;
        if self.patience > 0 && self.stale >= self.patience {
            self.lr *= self.factor;
            self.stale = 0;
        }
        false
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{GruLayerParams, Tensor2};

    #[derive(Clone)]
    struct Scalar(Tensor2);

    impl Parameters for Scalar {
        fn tensors(&self) -> Vec<(String, &Tensor2)> {
            vec![("w".into(), &self.0)]
        }
        fn tensors_mut(&mut self) -> Vec<&mut Tensor2> {
            vec![&mut self.0]
        }
    }

    #[test]
    fn scalar_update() {
        let mut p = Scalar(Tensor2::from_vec(1, 1, vec![1.0]).unwrap());
        let g = Scalar(Tensor2::from_vec(1, 1, vec![2.0]).unwrap());
        sgd_step(&mut p, &g, 0.002).unwrap();
        assert_eq!(p.0.data[0], 0.996);
    }

    #[test]
    fn zero_grad_or_zero_lr_is_a_no_op() {
        let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(0);
        let p0 = GruLayerParams::init(2, 3, 1, &mut rng);
        let mut p = p0.clone();
        sgd_step(&mut p, &p0.zeros_like(), 0.5).unwrap();
        assert_eq!(p, p0);
        sgd_step(&mut p, &p0, 0.0).unwrap();
        assert_eq!(p, p0);
    }

    #[test]
    fn mismatched_shapes_rejected() {
        let mut p = GruLayerParams::zeros(2, 3, 1);
        assert!(sgd_step(&mut p, &GruLayerParams::zeros(3, 3, 1), 0.1).is_err());
    }

    #[test]
    fn clipping_caps_the_norm() {
        let mut g = Scalar(Tensor2::from_vec(1, 1, vec![-12.0]).unwrap());
        assert_eq!(clip_global_norm(&mut g, 5.0), 12.0);
        assert_eq!(g.0.data[0], -5.0);
        let mut small = Scalar(Tensor2::from_vec(1, 1, vec![3.0]).unwrap());
        clip_global_norm(&mut small, 5.0);
        assert_eq!(small.0.data[0], 3.0);
    }

    #[test]
    fn plateau_halves_after_patience() {
        let mut s = PlateauSchedule::new(0.1, 2);
        assert!(s.observe(1.0));
        assert!(!s.observe(1.0));
        assert_eq!(s.lr, 0.1);
        assert!(!s.observe(1.5));
        assert_eq!(s.lr, 0.05);
        assert!(s.observe(0.9));
    }
}
