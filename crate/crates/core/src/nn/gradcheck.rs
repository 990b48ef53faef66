use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Which coordinates to perturb.
#[derive(Debug, Clone, Copy)]
pub enum CheckCoords {
    All,
    /// A seeded random subset of at least `count.max(500)` coordinates
    /// (or all of them, for smaller models).
    Sample {
        count: usize,
        seed: u64,
    },
}

#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub worst_index: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub checked: usize,
}

/// Compares the analytic gradient returned by `f` with central differences of
/// its loss. Relative error per coordinate is
/// `|a - n| / max(1e-12, |a| + |n|)`; the maximum is reported.
pub fn grad_check<F>(params: &[f64], mut f: F, eps: f64, coords: CheckCoords) -> GradCheckReport
where
    F: FnMut(&[f64]) -> (f64, Vec<f64>),
{
    let (_, analytic) = f(params);
    assert_eq!(analytic.len(), params.len(), "gradient length differs from parameter count");
    let indices: Vec<usize> = match coords {
        CheckCoords::All => (0..params.len()).collect(),
        CheckCoords::Sample { count, seed } => {
            let count = count.max(500);
            if count >= params.len() {
                (0..params.len()).collect()
            } else {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let mut v = sample(&mut rng, params.len(), count).into_vec();
                v.sort_unstable();
                v
            }
        }
    };
    let mut report = GradCheckReport { max_rel_error: 0.0, worst_index: 0, analytic: 0.0, numeric: 0.0, checked: indices.len() };
    let mut probe = params.to_vec();
    for &i in &indices {
        let orig = probe[i];
        probe[i] = orig + eps;
        let up = f(&probe).0;
        probe[i] = orig - eps;
        let down = f(&probe).0;
        probe[i] = orig;
        let numeric = (up - down) / (2.0 * eps);
        let a = analytic[i];
        let rel = (a - numeric).abs() / (a.abs() + numeric.abs()).max(1e-12);
        if rel > report.max_rel_error {
            report = GradCheckReport { max_rel_error: rel, worst_index: i, analytic: a, numeric, checked: indices.len() };
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_model_is_exact() {
        let x = [0.5, -2.0, 3.25, 1.0];
        let r = grad_check(&[0.1, 0.2, -0.3, 0.4], |w| (w.iter().zip(&x).map(|(a, b)| a * b).sum(), x.to_vec()), 1e-5, CheckCoords::All);
        assert!(r.max_rel_error <= 1e-10, "{r:?}");
        assert_eq!(r.checked, 4);
    }

    #[test]
    fn corrupted_gradient_is_detected() {
        let loss = |w: &[f64]| w.iter().map(|v| v.sin() * v).sum::<f64>();
        let grad = |w: &[f64]| w.iter().map(|v| v.sin() + v * v.cos()).collect::<Vec<_>>();
        let w = [0.3, -1.1, 2.0];
        let ok = grad_check(&w, |p| (loss(p), grad(p)), 1e-5, CheckCoords::All);
        assert!(ok.max_rel_error < 1e-8);
        let bad = grad_check(&w, |p| (loss(p), grad(p).into_iter().map(|g| g * 1.01).collect()), 1e-5, CheckCoords::All);
        assert!(bad.max_rel_error >= 1e-3);
    }

    #[test]
    fn sampled_coordinates_cover_small_models() {
        let r = grad_check(&[1.0; 10], |w| (w.iter().sum(), vec![1.0; 10]), 1e-5, CheckCoords::Sample { count: 3, seed: 1 });
        assert_eq!(r.checked, 10);
    }
}
