use super::{FeatureSequence, SEQUENCE_LEN};
use crate::cnn::{cnn_forward, CnnMode, CnnParams, FeatureFile};
use crate::error::{Error, Result};
use crate::shape::{sketch_shape_feature, Codebook, ShapeContextConfig};
use crate::sketch::{rasterize, split_stroke_groups, ten_crop_sequence, Bitmap, Sketch};

#[derive(Debug, Clone, PartialEq)]
pub struct SequenceConfig {
    /// Side of the square bitmap each stroke group is drawn on before cropping.
    pub raster_size: usize,
    pub line_width: f64,
    pub shape: ShapeContextConfig,
    /// Codebook atoms per stroke code.
    pub llc_k: usize,
}

impl SequenceConfig {
    /// Raster one eighth larger than the crop, line width scaled to the raster.
    pub fn for_crop(crop: usize) -> Self {
        let raster_size = crop + crop / 8;
        SequenceConfig { raster_size, line_width: (raster_size as f64 / 32.0).max(1.5), shape: ShapeContextConfig::default(), llc_k: 5 }
    }
}

/// The five cumulative stroke-group bitmaps of a sketch.
pub fn group_bitmaps(sketch: &Sketch, raster_size: usize, line_width: f64) -> Result<Vec<Bitmap>> {
    Ok(split_stroke_groups(sketch)?.iter().map(|g| rasterize(g, raster_size, line_width)).collect())
}

/// Builds the 50-step sequence of a sketch: for each stroke group in order,
/// ten crop features from the CNN and the group's shape feature repeated at
/// each of its ten positions. A group whose sampled points all coincide has
/// no scale and gets an all-zero shape feature.
pub fn build_feature_sequence(sketch: &Sketch, codebook: &Codebook, cnn: &CnnParams, cfg: &SequenceConfig) -> Result<FeatureSequence> {
    let groups = split_stroke_groups(sketch)?;
    let mut texture = Vec::with_capacity(SEQUENCE_LEN);
    let mut shape = Vec::with_capacity(SEQUENCE_LEN);
    for g in &groups {
        let bitmap = rasterize(g, cfg.raster_size, cfg.line_width);
        let crops = ten_crop_sequence(&bitmap, cnn.arch.input_size)?;
        for c in &crops {
            texture.push(cnn_forward(c, cnn, CnnMode::Features)?);
        }
        let feature = match sketch_shape_feature(g, codebook, &cfg.shape, cfg.llc_k) {
            Ok(f) => f.0,
            Err(Error::ZeroScale | Error::Insufficient { .. }) => vec![0.0; codebook.len()],
            Err(e) => return Err(e),
        };
        shape.extend(std::iter::repeat_n(feature, crops.len()));
    }
    FeatureSequence::new(texture, shape, None)
}

/// Pairs a texture and a shape feature file into sequences. Labels are taken
/// from the texture file and mapped through `classes`.
pub fn sequences_from_files(texture: &FeatureFile, shape: &FeatureFile, classes: &[String]) -> Result<Vec<FeatureSequence>> {
    if texture.rows_per_item != shape.rows_per_item || texture.items() != shape.items() {
        return Err(Error::format(format!(
            "texture file holds {} items of {} rows, shape file {} of {}",
            texture.items(),
            texture.rows_per_item,
            shape.items(),
            shape.rows_per_item
        )));
    }
    (0..texture.items())
        .map(|i| {
            let label = match texture.labels.get(i).cloned().flatten() {
                Some(name) => {
                    Some(classes.iter().position(|c| *c == name).ok_or_else(|| Error::format(format!("unknown class {name:?}")))?)
                }
                None => None,
            };
            FeatureSequence::new(texture.item(i).to_vec(), shape.item(i).to_vec(), label)
        })
        .collect()
}
