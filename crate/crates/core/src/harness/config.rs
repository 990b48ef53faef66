//! Experiment configuration, read from TOML.
//!
//! ```toml
//! seed = 7
//! threads = 1
//!
//! [data]
//! source = "synthetic"        # or "files"
//! classes = 5
//! per_class = 20
//! # families = ["polygon", "segmented-polygon", "star"]
//! # paths = ["sketches/"]     # for source = "files"
//!
//! [augment]
//! enabled = false
//!
//! [shape]
//! codebook_size = 500
//!
//! [texture]
//! arch = "desk"
//!
//! [model]
//! hidden = 32
//! shape = true
//!
//! [train]
//! lr = 0.002
//! batch = 100
//! epochs = 200
//! ```

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::cnn::{CnnArch, CnnTrainConfig};
use crate::error::{Error, Result};
use crate::fusion::{FusionConfig, FusionTrainConfig, SequenceConfig};
use crate::shape::ShapeContextConfig;
use crate::sketch::AugmentConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    /// Master seed; every stage derives its own seed from it.
    pub seed: u64,
    pub threads: usize,
    pub data: DataSection,
    pub augment: AugmentSection,
    pub shape: ShapeSection,
    pub texture: TextureSection,
    pub model: ModelSection,
    pub train: TrainSection,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DataSource {
    Synthetic,
    Files,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DataSection {
    pub source: DataSource,
    pub classes: usize,
    pub per_class: usize,
    /// Explicit generator families, one class each; overrides `classes`.
    pub families: Vec<String>,
    /// Seed for the generator; the master seed when absent.
    pub seed: Option<u64>,
    /// Sketch files or directories (searched recursively) for `source = "files"`.
    pub paths: Vec<PathBuf>,
    /// Imported sketches are normalized onto a square canvas of this side.
    pub canvas: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AugmentSection {
    pub enabled: bool,
    pub rotations: Vec<f64>,
    /// Shift in pixels of a 256 px canvas; rescaled to the data canvas.
    pub shift: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ShapeSection {
    pub samples_per_stroke: usize,
    pub codebook_size: usize,
    pub kmeans_iterations: usize,
    pub llc_k: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TextureSection {
    /// `tiny`, `desk` or `full`.
    pub arch: String,
    pub raster_size: Option<usize>,
    pub line_width: Option<f64>,
    pub epochs: usize,
    pub lr: f64,
    pub batch: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelSection {
    pub hidden: usize,
    pub texture_hidden: Option<usize>,
    pub shape_hidden: Option<usize>,
    pub fusion_hidden: Option<usize>,
    pub shape: bool,
    pub texture: bool,
    pub normalized_sum: bool,
    pub time_weights: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainSection {
    pub lr: f64,
    pub batch: usize,
    pub epochs: usize,
    pub patience: usize,
    pub early_stop: Option<usize>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            seed: 0,
            threads: 1,
            data: DataSection::default(),
            augment: AugmentSection::default(),
            shape: ShapeSection::default(),
            texture: TextureSection::default(),
            model: ModelSection::default(),
            train: TrainSection::default(),
        }
    }
}

impl Default for DataSection {
    fn default() -> Self {
        DataSection {
            source: DataSource::Synthetic,
            classes: 5,
            per_class: 20,
            families: Vec::new(),
            seed: None,
            paths: Vec::new(),
            canvas: 256,
        }
    }
}

impl Default for AugmentSection {
    fn default() -> Self {
        let a = AugmentConfig::default();
        AugmentSection { enabled: true, rotations: a.rotations, shift: a.shift }
    }
}

impl Default for ShapeSection {
    fn default() -> Self {
        ShapeSection {
            samples_per_stroke: ShapeContextConfig::default().samples_per_stroke,
            codebook_size: 500,
            kmeans_iterations: 50,
            llc_k: 5,
        }
    }
}

impl Default for TextureSection {
    fn default() -> Self {
        let t = CnnTrainConfig::default();
        TextureSection { arch: "desk".into(), raster_size: None, line_width: None, epochs: t.epochs, lr: t.lr, batch: t.batch }
    }
}

impl Default for ModelSection {
    fn default() -> Self {
        ModelSection {
            hidden: 32,
            texture_hidden: None,
            shape_hidden: None,
            fusion_hidden: None,
            shape: true,
            texture: true,
            normalized_sum: false,
            time_weights: false,
        }
    }
}

impl Default for TrainSection {
    fn default() -> Self {
        let t = FusionTrainConfig::default();
        TrainSection { lr: t.lr, batch: t.batch, epochs: t.epochs, patience: t.patience, early_stop: t.early_stop }
    }
}

/// Offsets added to the master seed for each stochastic stage.
pub(super) mod seeds {
    pub const SPLIT: u64 = 1;
    pub const CODEBOOK: u64 = 2;
    pub const TEXTURE: u64 = 3;
    pub const FUSION: u64 = 4;
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    /// Full config with defaults filled in, as TOML.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).unwrap_or_default()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.data.source == DataSource::Synthetic && self.data.families.is_empty() && self.data.classes < 2 {
            return bad("data.classes must be at least 2");
        }
        if self.data.source == DataSource::Files && self.data.paths.is_empty() {
            return bad("data.paths is required for file sources");
        }
        if self.shape.codebook_size == 0 || self.shape.llc_k == 0 || self.shape.samples_per_stroke == 0 {
            return bad("shape sizes must be positive");
        }
        if self.train.batch == 0 || self.texture.batch == 0 {
            return bad("batch sizes must be positive");
        }
        if !(self.train.lr > 0.0 && self.texture.lr > 0.0) {
            return bad("learning rates must be positive");
        }
        if self.model.hidden == 0 {
            return bad("model.hidden must be positive");
        }
        CnnArch::by_name(&self.texture.arch, 2)?;
        Ok(())
    }

    pub fn threads(&self) -> usize {
        self.threads.max(1)
    }

    pub fn arch(&self, classes: usize) -> Result<CnnArch> {
        CnnArch::by_name(&self.texture.arch, classes)
    }

    pub fn augment_config(&self) -> AugmentConfig {
        AugmentConfig { rotations: self.augment.rotations.clone(), shift: self.augment.shift * self.data.canvas as f64 / 256.0 }
    }

    pub fn sequence_config(&self, crop: usize) -> SequenceConfig {
        let mut s = SequenceConfig::for_crop(crop);
        if self.texture.arch == "full" {
            s.raster_size = 256;
            s.line_width = 8.0;
        }
        if let Some(r) = self.texture.raster_size {
            s.raster_size = r;
        }
        if let Some(w) = self.texture.line_width {
            s.line_width = w;
        }
        s.shape = ShapeContextConfig { samples_per_stroke: self.shape.samples_per_stroke };
        s.llc_k = self.shape.llc_k;
        s
    }

    pub fn cnn_train_config(&self) -> CnnTrainConfig {
        CnnTrainConfig {
            lr: self.texture.lr,
            batch: self.texture.batch,
            epochs: self.texture.epochs,
            seed: self.seed.wrapping_add(seeds::TEXTURE),
        }
    }

    pub fn fusion_config(&self, texture_dim: usize, shape_dim: usize, classes: usize) -> FusionConfig {
        let m = &self.model;
        FusionConfig {
            texture_hidden: m.texture_hidden.unwrap_or(m.hidden),
            shape_hidden: m.shape_hidden.unwrap_or(m.hidden),
            fusion_hidden: m.fusion_hidden.unwrap_or(m.hidden),
            shape_input: m.shape,
            texture_input: m.texture,
            normalized_sum: m.normalized_sum,
            time_weights: m.time_weights,
            ..FusionConfig::new(texture_dim, shape_dim, m.hidden, classes)
        }
    }

    pub fn fusion_train_config(&self) -> FusionTrainConfig {
        FusionTrainConfig {
            lr: self.train.lr,
            batch: self.train.batch,
            epochs: self.train.epochs,
            seed: self.seed.wrapping_add(seeds::FUSION),
            patience: self.train.patience,
            early_stop: self.train.early_stop,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_text_gives_defaults() {
        assert_eq!(ExperimentConfig::from_toml("").unwrap(), ExperimentConfig::default());
    }

    #[test]
    fn snapshot_roundtrips() {
        let mut c = ExperimentConfig::default();
        c.model.shape = false;
        c.train.early_stop = Some(12);
        c.data.families = vec!["polygon".into(), "star".into()];
        assert_eq!(ExperimentConfig::from_toml(&c.to_toml()).unwrap(), c);
    }

    #[test]
    fn unknown_keys_and_bad_values_rejected() {
        assert!(ExperimentConfig::from_toml("colour = 3").is_err());
        assert!(ExperimentConfig::from_toml("[train]\nbatch = 0").is_err());
        assert!(ExperimentConfig::from_toml("[texture]\narch = \"huge\"").is_err());
    }
}
