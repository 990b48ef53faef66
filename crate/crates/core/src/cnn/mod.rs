//! Convolutional texture feature extractor: five conv+ReLU layers with max
//! pooling after the first, second and fifth, then fully connected ReLU
//! layers whose last activation is the texture feature, then a class layer.

mod features;
mod layers;
mod train;

pub use features::{read_feature_file, write_feature_file, FeatureFile};
pub use layers::Volume;
pub use train::{pretrain_texture, CnnEpoch, CnnTrainConfig};

use rand::Rng;

use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::nn::{Checkpoint, Parameters, Tensor2};
use crate::sketch::Bitmap;
use layers::{conv_backward, conv_forward, pool_backward, pool_forward, relu_backward};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PoolSpec {
    pub size: usize,
    pub stride: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvSpec {
    pub out_channels: usize,
    pub kernel: usize,
    pub stride: usize,
    pub pad: usize,
    pub pool: Option<PoolSpec>,
}

impl ConvSpec {
    pub const fn new(out_channels: usize, kernel: usize, pad: usize) -> Self {
        ConvSpec { out_channels, kernel, stride: 1, pad, pool: None }
    }

    pub const fn pooled(mut self, size: usize, stride: usize) -> Self {
        self.pool = Some(PoolSpec { size, stride });
        self
    }

    pub const fn strided(mut self, stride: usize) -> Self {
        self.stride = stride;
        self
    }
}

/// Layer list of the network. Input is a single-channel square bitmap.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CnnArch {
    pub input_size: usize,
    pub convs: Vec<ConvSpec>,
    /// Hidden fully connected widths; the last one is the feature dimension.
    pub fc: Vec<usize>,
    pub classes: usize,
}

impl CnnArch {
    /// 64x64 input, channels 16/32/32/64/64, 256-wide hidden layer, 64-dim features.
    pub fn desk(classes: usize) -> Self {
        CnnArch {
            input_size: 64,
            convs: vec![
                ConvSpec::new(16, 5, 2).pooled(2, 2),
                ConvSpec::new(32, 3, 1).pooled(2, 2),
                ConvSpec::new(32, 3, 1),
                ConvSpec::new(64, 3, 1),
                ConvSpec::new(64, 3, 1).pooled(2, 2),
            ],
            fc: vec![256, 64],
            classes,
        }
    }

    /// 225x225 input with the large strided first kernel and 512-dim features.
    pub fn full(classes: usize) -> Self {
        CnnArch {
            input_size: 225,
            convs: vec![
                ConvSpec::new(64, 15, 0).strided(3).pooled(3, 2),
                ConvSpec::new(128, 5, 0).pooled(3, 2),
                ConvSpec::new(256, 3, 1),
                ConvSpec::new(256, 3, 1),
                ConvSpec::new(256, 3, 1).pooled(3, 2),
            ],
            fc: vec![512, 512],
            classes,
        }
    }

    /// 32x32 input, narrow channels; small enough for quick end-to-end runs.
    pub fn tiny(classes: usize) -> Self {
        CnnArch {
            input_size: 32,
            convs: vec![
                ConvSpec::new(8, 5, 2).pooled(2, 2),
                ConvSpec::new(16, 3, 1).pooled(2, 2),
                ConvSpec::new(16, 3, 1),
                ConvSpec::new(16, 3, 1),
                ConvSpec::new(16, 3, 1).pooled(2, 2),
            ],
            fc: vec![64, 32],
            classes,
        }
    }

    pub fn by_name(name: &str, classes: usize) -> Result<Self> {
        match name {
            "desk" => Ok(CnnArch::desk(classes)),
            "full" => Ok(CnnArch::full(classes)),
            "tiny" => Ok(CnnArch::tiny(classes)),
            other => Err(Error::Config(format!("unknown CNN architecture {other:?} (desk, full, tiny)"))),
        }
    }

    /// `(channels, height, width)` after each conv block (post-pool).
    pub fn conv_shapes(&self) -> Result<Vec<(usize, usize, usize)>> {
        let mut shape = (1, self.input_size, self.input_size);
        let mut out = Vec::with_capacity(self.convs.len());
        for (i, c) in self.convs.iter().enumerate() {
            let span = shape.1 + 2 * c.pad;
            if c.kernel == 0 || c.stride == 0 || span < c.kernel {
                return Err(Error::shape(format!("conv layer {} does not fit a {}px input", i + 1, shape.1)));
            }
            let mut side = (span - c.kernel) / c.stride + 1;
            if let Some(p) = c.pool {
                if p.size == 0 || p.stride == 0 || side < p.size {
                    return Err(Error::shape(format!("pool after conv {} does not fit {side}px", i + 1)));
                }
                side = (side - p.size) / p.stride + 1;
            }
            shape = (c.out_channels, side, side);
            out.push(shape);
        }
        Ok(out)
    }

    pub fn flat_conv_dim(&self) -> Result<usize> {
        let (c, h, w) = self.conv_shapes()?.last().copied().unwrap_or((1, self.input_size, self.input_size));
        Ok(c * h * w)
    }

    pub fn feature_dim(&self) -> Result<usize> {
        match self.fc.last() {
            Some(&d) => Ok(d),
            None => self.flat_conv_dim(),
        }
    }

    /// One-line description stored in checkpoints.
    pub fn describe(&self) -> String {
        let convs: Vec<String> = self
            .convs
            .iter()
            .map(|c| {
                let pool = c.pool.map(|p| format!("p{}s{}", p.size, p.stride)).unwrap_or_default();
                format!(
                    "{}k{}s{}p{}{}",
                    c.out_channels,
                    c.kernel,
                    c.stride,
                    c.pad,
                    if pool.is_empty() { String::new() } else { format!(":{pool}") }
                )
            })
            .collect();
        let fc: Vec<String> = self.fc.iter().map(usize::to_string).collect();
        format!("in={} conv={} fc={} classes={}", self.input_size, convs.join(","), fc.join(","), self.classes)
    }

    pub fn parse_description(s: &str) -> Result<Self> {
        let bad = || Error::format(format!("bad architecture description {s:?}"));
        let mut input_size = None;
        let mut convs = Vec::new();
        let mut fc = Vec::new();
        let mut classes = None;
        for part in s.split(' ') {
            let (k, v) = part.split_once('=').ok_or_else(bad)?;
            match k {
                "in" => input_size = Some(v.parse().map_err(|_| bad())?),
                "classes" => classes = Some(v.parse().map_err(|_| bad())?),
                "fc" => {
                    for d in v.split(',').filter(|d| !d.is_empty()) {
                        fc.push(d.parse().map_err(|_| bad())?);
                    }
                }
                "conv" => {
                    for c in v.split(',').filter(|c| !c.is_empty()) {
                        let (body, pool) = match c.split_once(':') {
                            Some((b, p)) => (b, Some(p)),
                            None => (c, None),
                        };
                        let nums: Vec<usize> = body
                            .split(|ch: char| !ch.is_ascii_digit())
                            .filter(|n| !n.is_empty())
                            .map(|n| n.parse().map_err(|_| bad()))
                            .collect::<Result<_>>()?;
                        let [out_channels, kernel, stride, pad] = nums[..] else { return Err(bad()) };
                        let pool = match pool {
                            Some(p) => {
                                let pn: Vec<usize> = p
                                    .split(|ch: char| !ch.is_ascii_digit())
                                    .filter(|n| !n.is_empty())
                                    .map(|n| n.parse().map_err(|_| bad()))
                                    .collect::<Result<_>>()?;
                                let [size, stride] = pn[..] else { return Err(bad()) };
                                Some(PoolSpec { size, stride })
                            }
                            None => None,
                        };
                        convs.push(ConvSpec { out_channels, kernel, stride, pad, pool });
                    }
                }
                _ => return Err(bad()),
            }
        }
        let arch = CnnArch { input_size: input_size.ok_or_else(bad)?, convs, fc, classes: classes.ok_or_else(bad)? };
        arch.conv_shapes()?;
        Ok(arch)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CnnParams {
    pub arch: CnnArch,
    /// `out x (in * k * k)` per conv layer.
    pub conv_weights: Vec<Tensor2>,
    pub conv_biases: Vec<Tensor2>,
    pub fc_weights: Vec<Tensor2>,
    pub fc_biases: Vec<Tensor2>,
    pub class_weights: Tensor2,
    pub class_bias: Tensor2,
}

impl CnnParams {
    pub fn zeros(arch: &CnnArch) -> Result<Self> {
        let shapes = arch.conv_shapes()?;
        let mut in_c = 1;
        let mut conv_weights = Vec::new();
        let mut conv_biases = Vec::new();
        for (c, _) in arch.convs.iter().zip(&shapes) {
            conv_weights.push(Tensor2::zeros(c.out_channels, in_c * c.kernel * c.kernel));
            conv_biases.push(Tensor2::zeros(c.out_channels, 1));
            in_c = c.out_channels;
        }
        let mut width = arch.flat_conv_dim()?;
        let mut fc_weights = Vec::new();
        let mut fc_biases = Vec::new();
        for &d in &arch.fc {
            fc_weights.push(Tensor2::zeros(d, width));
            fc_biases.push(Tensor2::zeros(d, 1));
            width = d;
        }
        Ok(CnnParams {
            arch: arch.clone(),
            conv_weights,
            conv_biases,
            fc_weights,
            fc_biases,
            class_weights: Tensor2::zeros(arch.classes, width),
            class_bias: Tensor2::zeros(arch.classes, 1),
        })
    }

    /// Glorot-uniform weights (fan counts include the kernel area), zero biases.
    pub fn init(arch: &CnnArch, rng: &mut impl Rng) -> Result<Self> {
        let mut p = CnnParams::zeros(arch)?;
        let mut in_c = 1;
        for (w, c) in p.conv_weights.iter_mut().zip(&arch.convs) {
            let area = c.kernel * c.kernel;
            *w = Tensor2::glorot(w.rows, w.cols, in_c * area, c.out_channels * area, rng);
            in_c = c.out_channels;
        }
        for w in &mut p.fc_weights {
            *w = Tensor2::glorot(w.rows, w.cols, w.cols, w.rows, rng);
        }
        let cw = &p.class_weights;
        p.class_weights = Tensor2::glorot(cw.rows, cw.cols, cw.cols, cw.rows, rng);
        Ok(p)
    }

    pub fn feature_dim(&self) -> usize {
        self.class_weights.cols
    }
}

impl Parameters for CnnParams {
    fn tensors(&self) -> Vec<(String, &Tensor2)> {
        let mut v = Vec::new();
        for (i, (w, b)) in self.conv_weights.iter().zip(&self.conv_biases).enumerate() {
            v.push((format!("conv{}_weight", i + 1), w));
            v.push((format!("conv{}_bias", i + 1), b));
        }
        for (i, (w, b)) in self.fc_weights.iter().zip(&self.fc_biases).enumerate() {
            v.push((format!("fc{}_weight", i + 1), w));
            v.push((format!("fc{}_bias", i + 1), b));
        }
        v.push(("class_weight".into(), &self.class_weights));
        v.push(("class_bias".into(), &self.class_bias));
        v
    }

    fn tensors_mut(&mut self) -> Vec<&mut Tensor2> {
        let mut v = Vec::new();
        for (w, b) in self.conv_weights.iter_mut().zip(self.conv_biases.iter_mut()) {
            v.push(w);
            v.push(b);
        }
        for (w, b) in self.fc_weights.iter_mut().zip(self.fc_biases.iter_mut()) {
            v.push(w);
            v.push(b);
        }
        v.push(&mut self.class_weights);
        v.push(&mut self.class_bias);
        v
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CnnMode {
    /// Activation of the last hidden fully connected layer.
    Features,
    Logits,
}

#[derive(Debug, Clone)]
struct ConvCache {
    input: Volume,
    pre: Volume,
    act: Volume,
    pool_argmax: Option<Vec<usize>>,
}

/// Activations kept from a forward pass for `cnn_backward`.
#[derive(Debug, Clone)]
pub struct CnnCache {
    convs: Vec<ConvCache>,
    fc_inputs: Vec<Vec<f64>>,
    fc_pre: Vec<Vec<f64>>,
    pub features: Vec<f64>,
    pub logits: Vec<f64>,
}

fn check_input(b: &Bitmap, p: &CnnParams) -> Result<()> {
    let n = p.arch.input_size;
    if b.width != n || b.height != n {
        return Err(Error::shape(format!("network expects {n}x{n} input, got {}x{}", b.width, b.height)));
    }
    Ok(())
}

/// Full forward pass keeping every activation.
pub fn cnn_forward_cached(b: &Bitmap, p: &CnnParams) -> Result<CnnCache> {
    check_input(b, p)?;
    let mut vol = Volume { channels: 1, height: b.height, width: b.width, data: b.data.clone() };
    let mut convs = Vec::with_capacity(p.arch.convs.len());
    for (i, spec) in p.arch.convs.iter().enumerate() {
        let pre = conv_forward(&vol, &p.conv_weights[i], &p.conv_biases[i], spec);
        let mut act = pre.clone();
        act.data.iter_mut().for_each(|v| *v = v.max(0.0));
        let (next, pool_argmax) = match spec.pool {
            Some(ps) => {
                let (pooled, idx) = pool_forward(&act, ps);
                (pooled, Some(idx))
            }
            None => (act.clone(), None),
        };
        convs.push(ConvCache { input: vol, pre, act, pool_argmax });
        vol = next;
    }
    let mut x = vol.data;
    let mut fc_inputs = Vec::with_capacity(p.fc_weights.len());
    let mut fc_pre = Vec::with_capacity(p.fc_weights.len());
    for (w, bias) in p.fc_weights.iter().zip(&p.fc_biases) {
        let mut z = bias.data.clone();
        w.matvec_acc(&x, &mut z);
        let a: Vec<f64> = z.iter().map(|v| v.max(0.0)).collect();
        fc_inputs.push(std::mem::replace(&mut x, a));
        fc_pre.push(z);
    }
    let mut logits = p.class_bias.data.clone();
    p.class_weights.matvec_acc(&x, &mut logits);
    Ok(CnnCache { convs, fc_inputs, fc_pre, features: x, logits })
}

pub fn cnn_forward(b: &Bitmap, p: &CnnParams, mode: CnnMode) -> Result<Vec<f64>> {
    let cache = cnn_forward_cached(b, p)?;
    Ok(match mode {
        CnnMode::Features => cache.features,
        CnnMode::Logits => cache.logits,
    })
}

/// Gradients of every parameter given the loss gradient at the logits.
pub fn cnn_backward(d_logits: &[f64], cache: &CnnCache, p: &CnnParams) -> Result<CnnParams> {
    if d_logits.len() != p.arch.classes {
        return Err(Error::shape(format!("{} logit gradients for {} classes", d_logits.len(), p.arch.classes)));
    }
    let mut g = p.zeros_like();
    g.class_weights.add_outer(d_logits, &cache.features);
    g.class_bias.add_column(d_logits);
    let mut dx = vec![0.0; cache.features.len()];
    p.class_weights.matvec_t_acc(d_logits, &mut dx);

    for l in (0..p.fc_weights.len()).rev() {
        let d_pre: Vec<f64> = dx.iter().zip(&cache.fc_pre[l]).map(|(d, z)| if *z > 0.0 { *d } else { 0.0 }).collect();
        g.fc_weights[l].add_outer(&d_pre, &cache.fc_inputs[l]);
        g.fc_biases[l].add_column(&d_pre);
        dx = vec![0.0; cache.fc_inputs[l].len()];
        p.fc_weights[l].matvec_t_acc(&d_pre, &mut dx);
    }

    for l in (0..p.arch.convs.len()).rev() {
        let c = &cache.convs[l];
        let spec = &p.arch.convs[l];
        let d_act = match (&spec.pool, &c.pool_argmax) {
            (Some(_), Some(idx)) => pool_backward(&dx, idx, &c.act),
            _ => dx,
        };
        let d_pre = relu_backward(&d_act, &c.pre);
        let need_input = l > 0;
        dx = conv_backward(&d_pre, &c.input, &p.conv_weights[l], spec, &mut g.conv_weights[l], &mut g.conv_biases[l], need_input);
    }
    Ok(g)
}

/// Stores the network with its architecture description in the metadata.
pub fn write_cnn_checkpoint<W: Write>(w: &mut W, p: &CnnParams, seed: u64, epoch: usize) -> Result<()> {
    let mut ck = Checkpoint::new(seed, epoch);
    ck.set_meta("arch", p.arch.describe());
    ck.add_group("cnn", p);
    ck.write_to(w)
}

pub fn read_cnn_checkpoint<R: BufRead>(r: &mut R) -> Result<CnnParams> {
    let ck = Checkpoint::read_from(r)?;
    let arch = CnnArch::parse_description(ck.meta("arch").ok_or_else(|| Error::format("checkpoint has no architecture"))?)?;
    let mut p = CnnParams::zeros(&arch)?;
    ck.load_group("cnn", &mut p)?;
    Ok(p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn preset_shapes() {
        assert_eq!(CnnArch::desk(5).conv_shapes().unwrap().last(), Some(&(64, 8, 8)));
        assert_eq!(CnnArch::desk(5).feature_dim().unwrap(), 64);
        assert_eq!(CnnArch::full(250).conv_shapes().unwrap().last(), Some(&(256, 7, 7)));
        assert_eq!(CnnArch::full(250).feature_dim().unwrap(), 512);
        assert_eq!(CnnArch::tiny(5).conv_shapes().unwrap().last(), Some(&(16, 4, 4)));
    }

    #[test]
    fn description_roundtrip() {
        for arch in [CnnArch::desk(5), CnnArch::full(250), CnnArch::tiny(3)] {
            assert_eq!(CnnArch::parse_description(&arch.describe()).unwrap(), arch);
        }
    }

    #[test]
    fn checkpoint_roundtrip() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let p = CnnParams::init(&CnnArch::tiny(3), &mut rng).unwrap();
        let mut buf = Vec::new();
        write_cnn_checkpoint(&mut buf, &p, 8, 2).unwrap();
        let q = read_cnn_checkpoint(&mut std::io::Cursor::new(buf)).unwrap();
        assert_eq!(q.arch, p.arch);
        for (a, b) in p.flatten().iter().zip(q.flatten()) {
            assert_eq!(*a as f32 as f64, b);
        }
    }

    #[test]
    fn zero_bitmap_gives_zero_features() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let p = CnnParams::init(&CnnArch::tiny(4), &mut rng).unwrap();
        let f = cnn_forward(&Bitmap::zeros(32, 32), &p, CnnMode::Features).unwrap();
        assert_eq!(f, vec![0.0; 32]);
    }

    #[test]
    fn wrong_input_size() {
        let p = CnnParams::zeros(&CnnArch::tiny(2)).unwrap();
        assert!(matches!(cnn_forward(&Bitmap::zeros(31, 32), &p, CnnMode::Logits), Err(Error::Shape(_))));
    }

    #[test]
    fn zero_upstream_gives_zero_gradients() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let p = CnnParams::init(&CnnArch::tiny(3), &mut rng).unwrap();
        let b = Bitmap::from_vec(32, 32, (0..1024).map(|i| ((i * 37) % 11) as f64 / 10.0).collect()).unwrap();
        let cache = cnn_forward_cached(&b, &p).unwrap();
        let g = cnn_backward(&[0.0; 3], &cache, &p).unwrap();
        assert_eq!(g.global_norm(), 0.0);
    }

    #[test]
    fn one_by_one_kernel_is_linear() {
        // single 1x1 conv, no hidden fc: logits = Wc (w * x) + bc for positive w, x
        let arch = CnnArch { input_size: 3, convs: vec![ConvSpec::new(1, 1, 0)], fc: vec![], classes: 2 };
        let mut p = CnnParams::zeros(&arch).unwrap();
        p.conv_weights[0].data = vec![0.7];
        p.class_weights = Tensor2::from_vec(2, 9, (0..18).map(|i| 0.1 * i as f64 - 0.4).collect()).unwrap();
        p.class_bias.data = vec![0.3, -0.2];
        let x: Vec<f64> = (0..9).map(|i| 0.1 + 0.1 * i as f64).collect();
        let b = Bitmap::from_vec(3, 3, x.clone()).unwrap();
        let cache = cnn_forward_cached(&b, &p).unwrap();
        // squared-error upstream: d = logits - target
        let target = [1.0, -1.0];
        let d: Vec<f64> = cache.logits.iter().zip(target).map(|(l, t)| l - t).collect();
        let g = cnn_backward(&d, &cache, &p).unwrap();
        for c in 0..2 {
            for j in 0..9 {
                assert!((g.class_weights.get(c, j) - d[c] * 0.7 * x[j]).abs() < 1e-14);
            }
            assert!((g.class_bias.data[c] - d[c]).abs() < 1e-14);
        }
        let dw: f64 = (0..9).map(|j| (0..2).map(|c| d[c] * p.class_weights.get(c, j)).sum::<f64>() * x[j]).sum();
        assert!((g.conv_weights[0].data[0] - dw).abs() < 1e-14);
    }
}
