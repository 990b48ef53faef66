//! Coded shape features: per-stroke shape-context descriptors, a k-means
//! codebook over them, locality-constrained linear coding against that
//! codebook, and max-pooling of the stroke codes into one sketch vector.

mod codebook;
mod context;
mod llc;

pub use codebook::{build_codebook, build_codebook_traced, kmeans_pp_seeds, read_codebook, write_codebook, Codebook, KMeansTrace};
pub use context::{
    mean_pairwise_distance, sample_stroke_points, shape_context, sketch_descriptors, stroke_descriptor, ShapeContextConfig,
    StrokeDescriptor, ANGULAR_BINS, HISTOGRAM_BINS, RADIAL_BINS, RADIUS_INNER, RADIUS_OUTER,
};
pub use llc::{llc_encode, reconstruction_residual, SparseCode, LLC_EPSILON};

use crate::error::{Error, Result};
use crate::sketch::Sketch;

/// Pooled sketch-level shape vector, one entry per codebook atom.
#[derive(Debug, Clone, PartialEq)]
pub struct ShapeFeature(pub Vec<f64>);

/// Dense length-`m` vector whose entry `i` is the largest weight any code
/// assigns to atom `i`, or 0 when no code selects it. Weights may be negative.
pub fn pool_shape_feature(codes: &[SparseCode], m: usize) -> Result<ShapeFeature> {
    if codes.is_empty() {
        return Err(Error::Empty("code list"));
    }
    let mut best: Vec<Option<f64>> = vec![None; m];
    for code in codes {
        for (&i, &w) in code.indices.iter().zip(&code.weights) {
            if i >= m {
                return Err(Error::shape(format!("code index {i} outside codebook of {m}")));
            }
            best[i] = Some(best[i].map_or(w, |b: f64| b.max(w)));
        }
    }
    Ok(ShapeFeature(best.into_iter().map(|b| b.unwrap_or(0.0)).collect()))
}

/// Shape feature of a whole (sub)sketch: describe, code and pool its strokes.
pub fn sketch_shape_feature(sketch: &Sketch, codebook: &Codebook, cfg: &ShapeContextConfig, k: usize) -> Result<ShapeFeature> {
    let codes = sketch_descriptors(sketch, cfg)?.iter().map(|d| llc_encode(d, codebook, k)).collect::<Result<Vec<_>>>()?;
    pool_shape_feature(&codes, codebook.len())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn code(indices: &[usize], weights: &[f64]) -> SparseCode {
        SparseCode { indices: indices.to_vec(), weights: weights.to_vec() }
    }

    #[test]
    fn single_code_scatters() {
        let f = pool_shape_feature(&[code(&[4, 1], &[0.75, 0.25])], 6).unwrap();
        assert_eq!(f.0, vec![0.0, 0.25, 0.0, 0.0, 0.75, 0.0]);
    }

    #[test]
    fn max_of_shared_atom() {
        let f = pool_shape_feature(&[code(&[3, 0], &[0.2, 0.8]), code(&[3, 1], &[0.6, 0.4])], 5).unwrap();
        assert_eq!(f.0[3], 0.6);
    }

    #[test]
    fn negative_weights_pool_to_their_max() {
        let f = pool_shape_feature(&[code(&[2, 0], &[-0.3, 1.3]), code(&[2, 1], &[-0.1, 1.1])], 3).unwrap();
        assert_eq!(f.0, vec![1.3, 1.1, -0.1]);
    }

    #[test]
    fn empty_code_list_fails() {
        assert!(matches!(pool_shape_feature(&[], 4), Err(Error::Empty(_))));
    }

    proptest! {
        #[test]
        fn pooling_ignores_stroke_order(
            codes in prop::collection::vec(
                (prop::collection::vec(0usize..12, 3), prop::collection::vec(-1.0f64..1.0, 3)), 1..8),
            seed in 0u64..1000,
        ) {
            let codes: Vec<SparseCode> = codes.into_iter().map(|(i, w)| SparseCode { indices: i, weights: w }).collect();
            let mut shuffled = codes.clone();
            use rand::{seq::SliceRandom, SeedableRng};
            shuffled.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
            let a = pool_shape_feature(&codes, 12).unwrap();
            let b = pool_shape_feature(&shuffled, 12).unwrap();
            prop_assert_eq!(&a, &b);
            prop_assert_eq!(a.0.len(), 12);
            // componentwise max computed directly
            for m in 0..12 {
                let picks: Vec<f64> = codes.iter().flat_map(|c| c.indices.iter().zip(&c.weights))
                    .filter(|(&i, _)| i == m).map(|(_, &w)| w).collect();
                let want = picks.iter().copied().fold(None, |acc: Option<f64>, w| Some(acc.map_or(w, |a| a.max(w)))).unwrap_or(0.0);
                prop_assert_eq!(a.0[m], want);
            }
        }
    }
}
