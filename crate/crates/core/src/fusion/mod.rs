//! Dual recurrent classifier: a texture GRU and a shape GRU read their feature
//! sequences in lockstep, their hidden states are concatenated per step and
//! fed to a fusion GRU whose per-step outputs are summed into class scores.

mod sequence;
mod train;

pub use sequence::{build_feature_sequence, group_bitmaps, sequences_from_files, SequenceConfig};
pub use train::{evaluate_sequences, train, EpochRecord, FusionTrainConfig, SplitMetrics, TrainOutcome};

use std::io::{BufRead, Write};

use rand::{Rng, SeedableRng};

use crate::error::{Error, Result};
use crate::nn::{
    argmax, bptt, grad_check, gru_forward, softmax, softmax_xent, CheckCoords, Checkpoint, GradCheckReport, GruForward, GruLayerParams,
    Parameters, Tensor2,
};

/// Sequence positions per sketch: five stroke groups of ten crops each.
pub const SEQUENCE_LEN: usize = 50;

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSequence {
    pub texture: Vec<Vec<f64>>,
    pub shape: Vec<Vec<f64>>,
    pub label: Option<usize>,
}

impl FeatureSequence {
    /// Both streams must have the same positive length and constant row widths.
    pub fn new(texture: Vec<Vec<f64>>, shape: Vec<Vec<f64>>, label: Option<usize>) -> Result<Self> {
        if texture.is_empty() || texture.len() != shape.len() {
            return Err(Error::shape(format!("texture and shape streams have {} and {} steps", texture.len(), shape.len())));
        }
        for (name, rows) in [("texture", &texture), ("shape", &shape)] {
            if rows.iter().any(|r| r.len() != rows[0].len()) {
                return Err(Error::shape(format!("{name} rows differ in width")));
            }
        }
        Ok(FeatureSequence { texture, shape, label })
    }

    pub fn len(&self) -> usize {
        self.texture.len()
    }

    pub fn is_empty(&self) -> bool {
        self.texture.is_empty()
    }

    pub fn texture_dim(&self) -> usize {
        self.texture.first().map_or(0, Vec::len)
    }

    pub fn shape_dim(&self) -> usize {
        self.shape.first().map_or(0, Vec::len)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FusionConfig {
    pub texture_dim: usize,
    pub shape_dim: usize,
    pub texture_hidden: usize,
    pub shape_hidden: usize,
    pub fusion_hidden: usize,
    pub classes: usize,
    pub steps: usize,
    /// When false the shape stream is replaced by zeros (ablation).
    pub shape_input: bool,
    /// When false the texture stream is replaced by zeros (ablation).
    pub texture_input: bool,
    /// Sum softmax probabilities instead of raw outputs.
    pub normalized_sum: bool,
    /// Learn one scalar weight per step applied before summation.
    pub time_weights: bool,
}

impl FusionConfig {
    pub fn new(texture_dim: usize, shape_dim: usize, hidden: usize, classes: usize) -> Self {
        FusionConfig {
            texture_dim,
            shape_dim,
            texture_hidden: hidden,
            shape_hidden: hidden,
            fusion_hidden: hidden,
            classes,
            steps: SEQUENCE_LEN,
            shape_input: true,
            texture_input: true,
            normalized_sum: false,
            time_weights: false,
        }
    }

    /// Short tags naming the non-default switches, for reports.
    pub fn ablation_tags(&self) -> Vec<&'static str> {
        let mut tags = Vec::new();
        if !self.shape_input {
            tags.push("shape=off");
        }
        if !self.texture_input {
            tags.push("texture=off");
        }
        if self.normalized_sum {
            tags.push("sum=normalized");
        }
        if self.time_weights {
            tags.push("time-weights=on");
        }
        tags
    }

    fn entries(&self) -> Vec<(&'static str, String)> {
        vec![
            ("texture_dim", self.texture_dim.to_string()),
            ("shape_dim", self.shape_dim.to_string()),
            ("texture_hidden", self.texture_hidden.to_string()),
            ("shape_hidden", self.shape_hidden.to_string()),
            ("fusion_hidden", self.fusion_hidden.to_string()),
            ("classes", self.classes.to_string()),
            ("steps", self.steps.to_string()),
            ("shape_input", self.shape_input.to_string()),
            ("texture_input", self.texture_input.to_string()),
            ("normalized_sum", self.normalized_sum.to_string()),
            ("time_weights", self.time_weights.to_string()),
        ]
    }

    fn from_checkpoint(ck: &Checkpoint) -> Result<Self> {
        fn get<T: std::str::FromStr>(ck: &Checkpoint, key: &str) -> Result<T> {
            ck.meta(key).and_then(|v| v.parse().ok()).ok_or_else(|| Error::format(format!("checkpoint lacks a valid `{key}`")))
        }
        Ok(FusionConfig {
            texture_dim: get(ck, "texture_dim")?,
            shape_dim: get(ck, "shape_dim")?,
            texture_hidden: get(ck, "texture_hidden")?,
            shape_hidden: get(ck, "shape_hidden")?,
            fusion_hidden: get(ck, "fusion_hidden")?,
            classes: get(ck, "classes")?,
            steps: get(ck, "steps")?,
            shape_input: get(ck, "shape_input")?,
            texture_input: get(ck, "texture_input")?,
            normalized_sum: get(ck, "normalized_sum")?,
            time_weights: get(ck, "time_weights")?,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FusionParams {
    pub config: FusionConfig,
    pub texture_gru: GruLayerParams,
    pub shape_gru: GruLayerParams,
    pub fusion_gru: GruLayerParams,
    /// `steps x 1` when time weighting is on, otherwise `0 x 1`.
    pub step_weights: Tensor2,
}

impl FusionParams {
    pub fn zeros(config: &FusionConfig) -> Self {
        let c = config;
        FusionParams {
            config: c.clone(),
            texture_gru: GruLayerParams::zeros(c.texture_dim, c.texture_hidden, 0),
            shape_gru: GruLayerParams::zeros(c.shape_dim, c.shape_hidden, 0),
            fusion_gru: GruLayerParams::zeros(c.texture_hidden + c.shape_hidden, c.fusion_hidden, c.classes),
            step_weights: Tensor2::zeros(if c.time_weights { c.steps } else { 0 }, 1),
        }
    }

    /// Glorot-initialized GRUs; step weights start at `1 / steps` so the
    /// weighted sum begins as the mean output.
    pub fn init(config: &FusionConfig, rng: &mut impl Rng) -> Self {
        let c = config;
        let texture_gru = GruLayerParams::init(c.texture_dim, c.texture_hidden, 0, rng);
        let shape_gru = GruLayerParams::init(c.shape_dim, c.shape_hidden, 0, rng);
        let fusion_gru = GruLayerParams::init(c.texture_hidden + c.shape_hidden, c.fusion_hidden, c.classes, rng);
        let mut step_weights = Tensor2::zeros(if c.time_weights { c.steps } else { 0 }, 1);
        step_weights.data.iter_mut().for_each(|w| *w = 1.0 / c.steps as f64);
        FusionParams { config: c.clone(), texture_gru, shape_gru, fusion_gru, step_weights }
    }

    fn check(&self, seq: &FeatureSequence) -> Result<()> {
        let c = &self.config;
        if seq.texture_dim() != c.texture_dim || seq.shape_dim() != c.shape_dim {
            return Err(Error::shape(format!(
                "sequence has texture/shape widths {}/{}, model expects {}/{}",
                seq.texture_dim(),
                seq.shape_dim(),
                c.texture_dim,
                c.shape_dim
            )));
        }
        if c.time_weights && seq.len() != c.steps {
            return Err(Error::shape(format!("{} steps but {} step weights", seq.len(), c.steps)));
        }
        if seq.is_empty() {
            return Err(Error::Empty("feature sequence"));
        }
        Ok(())
    }
}

impl Parameters for FusionParams {
    fn tensors(&self) -> Vec<(String, &Tensor2)> {
        let mut v = Vec::new();
        for (prefix, g) in [("texture_gru", &self.texture_gru), ("shape_gru", &self.shape_gru), ("fusion_gru", &self.fusion_gru)] {
            v.extend(g.tensors().into_iter().map(|(n, t)| (format!("{prefix}.{n}"), t)));
        }
        v.push(("step_weights".into(), &self.step_weights));
        v
    }

    fn tensors_mut(&mut self) -> Vec<&mut Tensor2> {
        let mut v = self.texture_gru.tensors_mut();
        v.extend(self.shape_gru.tensors_mut());
        v.extend(self.fusion_gru.tensors_mut());
        v.push(&mut self.step_weights);
        v
    }
}

/// Per-step class scores, their sum and the winning class (lowest index on ties).
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub per_step: Vec<Vec<f64>>,
    pub summed: Vec<f64>,
    pub class: usize,
}

impl Prediction {
    fn from_steps(per_step: Vec<Vec<f64>>, classes: usize) -> Self {
        let mut summed = vec![0.0; classes];
        for y in &per_step {
            for (s, v) in summed.iter_mut().zip(y) {
                *s += v;
            }
        }
        let class = argmax(&summed);
        Prediction { per_step, summed, class }
    }
}

struct Pass {
    texture: GruForward,
    shape: GruForward,
    fusion: GruForward,
}

fn run(seq: &FeatureSequence, p: &FusionParams) -> Result<Pass> {
    p.check(seq)?;
    let c = &p.config;
    let zeroed = |rows: &[Vec<f64>], on: bool| -> Vec<Vec<f64>> {
        if on {
            rows.to_vec()
        } else {
            vec![vec![0.0; rows[0].len()]; rows.len()]
        }
    };
    let texture = gru_forward(&zeroed(&seq.texture, c.texture_input), &p.texture_gru)?;
    let shape = gru_forward(&zeroed(&seq.shape, c.shape_input), &p.shape_gru)?;
    let joined: Vec<Vec<f64>> = texture
        .state
        .outputs_hidden()
        .iter()
        .zip(shape.state.outputs_hidden())
        .map(|(a, b)| a.iter().chain(b).copied().collect())
        .collect();
    let fusion = gru_forward(&joined, &p.fusion_gru)?;
    Ok(Pass { texture, shape, fusion })
}

fn step_contributions(outputs: &[Vec<f64>], p: &FusionParams) -> Vec<Vec<f64>> {
    outputs
        .iter()
        .enumerate()
        .map(|(t, y)| {
            let y = if p.config.normalized_sum { softmax(y) } else { y.clone() };
            if p.config.time_weights {
                let w = p.step_weights.data[t];
                y.into_iter().map(|v| v * w).collect()
            } else {
                y
            }
        })
        .collect()
}

pub fn fusion_forward(seq: &FeatureSequence, p: &FusionParams) -> Result<Prediction> {
    let pass = run(seq, p)?;
    Ok(Prediction::from_steps(step_contributions(&pass.fusion.outputs, p), p.config.classes))
}

pub fn predict(seq: &FeatureSequence, p: &FusionParams) -> Result<usize> {
    Ok(fusion_forward(seq, p)?.class)
}

/// Training loss for one labeled sequence, its parameter gradient and the
/// prediction. Without step weights the loss is the per-step cross-entropy
/// averaged over steps; with them it is the cross-entropy of the weighted sum.
pub fn sequence_loss_grad(seq: &FeatureSequence, p: &FusionParams, target: usize) -> Result<(f64, FusionParams, Prediction)> {
    let c = &p.config;
    if target >= c.classes {
        return Err(Error::Config(format!("label {target} outside {} classes", c.classes)));
    }
    let pass = run(seq, p)?;
    let outputs = &pass.fusion.outputs;
    let steps = outputs.len();
    let prediction = Prediction::from_steps(step_contributions(outputs, p), c.classes);
    let mut grads = p.zeros_like();

    let (loss, d_outputs) = if c.time_weights {
        let weighted: Vec<f64> =
            (0..c.classes).map(|k| outputs.iter().enumerate().map(|(t, y)| p.step_weights.data[t] * y[k]).sum()).collect();
        let (loss, d_sum) = softmax_xent(&weighted, target)?;
        let d: Vec<Vec<f64>> = (0..steps)
            .map(|t| {
                grads.step_weights.data[t] = d_sum.iter().zip(&outputs[t]).map(|(a, b)| a * b).sum();
                d_sum.iter().map(|g| g * p.step_weights.data[t]).collect()
            })
            .collect();
        (loss, d)
    } else {
        let mut loss = 0.0;
        let mut d = Vec::with_capacity(steps);
        for y in outputs {
            let (l, g) = softmax_xent(y, target)?;
            loss += l;
            d.push(g.into_iter().map(|v| v / steps as f64).collect::<Vec<f64>>());
        }
        (loss / steps as f64, d)
    };

    let (g_fusion, d_joined) = bptt(&p.fusion_gru, &pass.fusion.state, Some(&d_outputs), None)?;
    let th = c.texture_hidden;
    let d_tex: Vec<Vec<f64>> = d_joined.iter().map(|d| d[..th].to_vec()).collect();
    let d_shape: Vec<Vec<f64>> = d_joined.iter().map(|d| d[th..].to_vec()).collect();
    let (g_tex, _) = bptt(&p.texture_gru, &pass.texture.state, None, Some(&d_tex))?;
    let (g_shape, _) = bptt(&p.shape_gru, &pass.shape.state, None, Some(&d_shape))?;
    grads.fusion_gru = g_fusion;
    grads.texture_gru = g_tex;
    grads.shape_gru = g_shape;
    Ok((loss, grads, prediction))
}

/// Finite-difference check of `sequence_loss_grad` on a random model and a
/// random labeled sequence of `config.steps` steps.
pub fn fusion_grad_check(config: &FusionConfig, seed: u64, eps: f64, coords: CheckCoords) -> Result<GradCheckReport> {
    if config.classes == 0 || config.steps == 0 {
        return Err(Error::Config("gradient check needs at least one class and one step".into()));
    }
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut p = FusionParams::init(config, &mut rng);
    // perturb the step weights away from their uniform start
    for w in &mut p.step_weights.data {
        *w += rng.gen_range(-0.5..0.5) / config.steps as f64;
    }
    let rows = |rng: &mut rand_chacha::ChaCha8Rng, d: usize| -> Vec<Vec<f64>> {
        (0..config.steps).map(|_| (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect()
    };
    let texture = rows(&mut rng, config.texture_dim);
    let shape = rows(&mut rng, config.shape_dim);
    let target = rng.gen_range(0..config.classes);
    let seq = FeatureSequence::new(texture, shape, Some(target))?;
    let flat = p.flatten();
    let mut failure = None;
    let mut probe = p.clone();
    let report = grad_check(
        &flat,
        |x| {
            let r = probe.assign_flat(x).and_then(|_| sequence_loss_grad(&seq, &probe, target));
            match r {
                Ok((loss, g, _)) => (loss, g.flatten()),
                Err(e) => {
                    failure.get_or_insert(e);
                    (f64::NAN, vec![f64::NAN; x.len()])
                }
            }
        },
        eps,
        coords,
    );
    match failure {
        Some(e) => Err(e),
        None => Ok(report),
    }
}

/// Writes the three recurrent groups (plus step weights when enabled) with
/// the model config and the codebook fingerprint in the metadata.
pub fn write_fusion_checkpoint<W: Write>(
    w: &mut W,
    p: &FusionParams,
    seed: u64,
    epoch: usize,
    codebook_hash: &str,
    extra: &[(String, String)],
) -> Result<()> {
    let mut ck = Checkpoint::new(seed, epoch);
    for (k, v) in p.config.entries() {
        ck.set_meta(k, v);
    }
    ck.set_meta("codebook", codebook_hash);
    for (k, v) in extra {
        ck.set_meta(k, v);
    }
    ck.add_group("texture_gru", &p.texture_gru);
    ck.add_group("shape_gru", &p.shape_gru);
    ck.add_group("fusion_gru", &p.fusion_gru);
    if p.config.time_weights {
        ck.groups.push(("step_weights".into(), vec![("weights".into(), p.step_weights.clone())]));
    }
    ck.write_to(w)
}

pub fn read_fusion_checkpoint<R: BufRead>(r: &mut R) -> Result<(FusionParams, Checkpoint)> {
    let ck = Checkpoint::read_from(r)?;
    let config = FusionConfig::from_checkpoint(&ck)?;
    let mut p = FusionParams::zeros(&config);
    ck.load_group("texture_gru", &mut p.texture_gru)?;
    ck.load_group("shape_gru", &mut p.shape_gru)?;
    ck.load_group("fusion_gru", &mut p.fusion_gru)?;
    if config.time_weights {
        let t = ck
            .groups
            .iter()
            .find(|(g, _)| g == "step_weights")
            .and_then(|(_, ts)| ts.first())
            .map(|(_, t)| t)
            .ok_or_else(|| Error::format("checkpoint lacks step weights"))?;
        if t.shape() != p.step_weights.shape() {
            return Err(Error::format("step weight shape does not match the config"));
        }
        p.step_weights = t.clone();
    }
    Ok((p, ck))
}
