//! Gated recurrent unit with a linear readout, and its exact reverse-mode
//! gradient through time.
//!
//! ```text
//! r_t  = sigm(W_xr x_t + W_hr h_{t-1} + b_r)
//! z_t  = sigm(W_xz x_t + W_hz h_{t-1} + b_z)
//! h~_t = tanh(W_xh x_t + U (r_t * h_{t-1}) + b_h)
//! h_t  = (1 - z_t) * h_{t-1} + z_t * h~_t
//! y_t  = W_hy h_t
//! ```

use rand::Rng;

use super::tensor::{Parameters, Tensor2};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct GruLayerParams {
    /// `W_xr`, hidden x input.
    pub reset_input: Tensor2,
    /// `W_xz`, hidden x input.
    pub update_input: Tensor2,
    /// `W_xh`, hidden x input.
    pub candidate_input: Tensor2,
    /// `W_hr`, hidden x hidden.
    pub reset_hidden: Tensor2,
    /// `W_hz`, hidden x hidden.
    pub update_hidden: Tensor2,
    /// `U`, hidden x hidden.
    pub candidate_hidden: Tensor2,
    pub reset_bias: Tensor2,
    pub update_bias: Tensor2,
    pub candidate_bias: Tensor2,
    /// `W_hy`, output x hidden. Zero rows when the layer only exposes `h_t`.
    pub output: Tensor2,
}

impl GruLayerParams {
    pub fn zeros(input: usize, hidden: usize, output: usize) -> Self {
        GruLayerParams {
            reset_input: Tensor2::zeros(hidden, input),
            update_input: Tensor2::zeros(hidden, input),
            candidate_input: Tensor2::zeros(hidden, input),
            reset_hidden: Tensor2::zeros(hidden, hidden),
            update_hidden: Tensor2::zeros(hidden, hidden),
            candidate_hidden: Tensor2::zeros(hidden, hidden),
            reset_bias: Tensor2::zeros(hidden, 1),
            update_bias: Tensor2::zeros(hidden, 1),
            candidate_bias: Tensor2::zeros(hidden, 1),
            output: Tensor2::zeros(output, hidden),
        }
    }

    /// Glorot-uniform matrices, zero biases.
    pub fn init(input: usize, hidden: usize, output: usize, rng: &mut impl Rng) -> Self {
        let mut p = GruLayerParams::zeros(input, hidden, output);
        p.reset_input = Tensor2::glorot(hidden, input, input, hidden, rng);
        p.update_input = Tensor2::glorot(hidden, input, input, hidden, rng);
        p.candidate_input = Tensor2::glorot(hidden, input, input, hidden, rng);
        p.reset_hidden = Tensor2::glorot(hidden, hidden, hidden, hidden, rng);
        p.update_hidden = Tensor2::glorot(hidden, hidden, hidden, hidden, rng);
        p.candidate_hidden = Tensor2::glorot(hidden, hidden, hidden, hidden, rng);
        p.output = Tensor2::glorot(output, hidden, hidden, output, rng);
        p
    }

    pub fn input_dim(&self) -> usize {
        self.reset_input.cols
    }

    pub fn hidden_dim(&self) -> usize {
        self.reset_input.rows
    }

    pub fn output_dim(&self) -> usize {
        self.output.rows
    }

    pub fn validate(&self) -> Result<()> {
        let (h, i) = (self.hidden_dim(), self.input_dim());
        let checks = [
            ("update_input", &self.update_input, (h, i)),
            ("candidate_input", &self.candidate_input, (h, i)),
            ("reset_hidden", &self.reset_hidden, (h, h)),
            ("update_hidden", &self.update_hidden, (h, h)),
            ("candidate_hidden", &self.candidate_hidden, (h, h)),
            ("reset_bias", &self.reset_bias, (h, 1)),
            ("update_bias", &self.update_bias, (h, 1)),
            ("candidate_bias", &self.candidate_bias, (h, 1)),
        ];
        for (name, t, want) in checks {
            if t.shape() != want {
                return Err(Error::shape(format!("{name} is {:?}, expected {want:?}", t.shape())));
            }
        }
        if self.output.cols != h {
            return Err(Error::shape(format!("output map has {} columns, expected {h}", self.output.cols)));
        }
        Ok(())
    }
}

impl Parameters for GruLayerParams {
    fn tensors(&self) -> Vec<(String, &Tensor2)> {
        vec![
            ("reset_input".into(), &self.reset_input),
            ("update_input".into(), &self.update_input),
            ("candidate_input".into(), &self.candidate_input),
            ("reset_hidden".into(), &self.reset_hidden),
            ("update_hidden".into(), &self.update_hidden),
            ("candidate_hidden".into(), &self.candidate_hidden),
            ("reset_bias".into(), &self.reset_bias),
            ("update_bias".into(), &self.update_bias),
            ("candidate_bias".into(), &self.candidate_bias),
            ("output".into(), &self.output),
        ]
    }

    fn tensors_mut(&mut self) -> Vec<&mut Tensor2> {
        vec![
            &mut self.reset_input,
            &mut self.update_input,
            &mut self.candidate_input,
            &mut self.reset_hidden,
            &mut self.update_hidden,
            &mut self.candidate_hidden,
            &mut self.reset_bias,
            &mut self.update_bias,
            &mut self.candidate_bias,
            &mut self.output,
        ]
    }
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Gate activations of one step, kept for the backward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct GruStep {
    pub h: Vec<f64>,
    pub reset: Vec<f64>,
    pub update: Vec<f64>,
    pub candidate: Vec<f64>,
}

pub fn gru_step(x: &[f64], h_prev: &[f64], p: &GruLayerParams) -> Result<GruStep> {
    let hd = p.hidden_dim();
    if x.len() != p.input_dim() || h_prev.len() != hd {
        return Err(Error::shape(format!(
            "gru step got input {} / hidden {}, layer expects {} / {hd}",
            x.len(),
            h_prev.len(),
            p.input_dim()
        )));
    }
    let mut reset = p.reset_bias.data.clone();
    p.reset_input.matvec_acc(x, &mut reset);
    p.reset_hidden.matvec_acc(h_prev, &mut reset);
    reset.iter_mut().for_each(|v| *v = sigmoid(*v));

    let mut update = p.update_bias.data.clone();
    p.update_input.matvec_acc(x, &mut update);
    p.update_hidden.matvec_acc(h_prev, &mut update);
    update.iter_mut().for_each(|v| *v = sigmoid(*v));

    let gated: Vec<f64> = reset.iter().zip(h_prev).map(|(r, h)| r * h).collect();
    let mut candidate = p.candidate_bias.data.clone();
    p.candidate_input.matvec_acc(x, &mut candidate);
    p.candidate_hidden.matvec_acc(&gated, &mut candidate);
    candidate.iter_mut().for_each(|v| *v = v.tanh());

    let h = (0..hd).map(|i| (1.0 - update[i]) * h_prev[i] + update[i] * candidate[i]).collect();
    Ok(GruStep { h, reset, update, candidate })
}

/// Everything the backward pass needs from a forward run.
#[derive(Debug, Clone, PartialEq)]
pub struct GruState {
    pub inputs: Vec<Vec<f64>>,
    /// `h_0 .. h_T`; `h_0` is the zero vector.
    pub hidden: Vec<Vec<f64>>,
    pub steps: Vec<GruStep>,
}

impl GruState {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// `h_1 .. h_T`.
    pub fn outputs_hidden(&self) -> &[Vec<f64>] {
        &self.hidden[1..]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GruForward {
    /// Per-step readouts `y_t`; empty vectors when the layer has no output map.
    pub outputs: Vec<Vec<f64>>,
    pub state: GruState,
}

pub fn gru_forward(xs: &[Vec<f64>], p: &GruLayerParams) -> Result<GruForward> {
    if xs.is_empty() {
        return Err(Error::Empty("input sequence"));
    }
    p.validate()?;
    let mut hidden = Vec::with_capacity(xs.len() + 1);
    hidden.push(vec![0.0; p.hidden_dim()]);
    let mut steps = Vec::with_capacity(xs.len());
    let mut outputs = Vec::with_capacity(xs.len());
    for x in xs {
        let step = gru_step(x, hidden.last().unwrap(), p)?;
        outputs.push(p.output.matvec(&step.h));
        hidden.push(step.h.clone());
        steps.push(step);
    }
    Ok(GruForward { outputs, state: GruState { inputs: xs.to_vec(), hidden, steps } })
}

/// Backpropagation through time. `d_outputs[t]` is the loss gradient at
/// `y_t`; `d_hidden[t]`, if given, is extra gradient arriving directly at
/// `h_t` (for layers that feed another layer). Returns parameter gradients
/// and the gradient with respect to each input `x_t`.
pub fn bptt(
    p: &GruLayerParams,
    state: &GruState,
    d_outputs: Option<&[Vec<f64>]>,
    d_hidden: Option<&[Vec<f64>]>,
) -> Result<(GruLayerParams, Vec<Vec<f64>>)> {
    let t_len = state.len();
    let hd = p.hidden_dim();
    for (name, g) in [("output", d_outputs), ("hidden", d_hidden)] {
        if let Some(g) = g {
            if g.len() != t_len {
                return Err(Error::shape(format!("{name} gradients cover {} of {t_len} steps", g.len())));
            }
        }
    }
    let mut grads = p.zeros_like();
    let mut d_inputs = vec![vec![0.0; p.input_dim()]; t_len];
    let mut carry = vec![0.0; hd];

    for t in (0..t_len).rev() {
        let step = &state.steps[t];
        let x = &state.inputs[t];
        let h_prev = &state.hidden[t];
        let h = &state.hidden[t + 1];

        let mut dh = carry.clone();
        if let Some(dy) = d_outputs {
            if !dy[t].is_empty() {
                grads.output.add_outer(&dy[t], h);
                p.output.matvec_t_acc(&dy[t], &mut dh);
            }
        }
        if let Some(extra) = d_hidden {
            for (a, b) in dh.iter_mut().zip(&extra[t]) {
                *a += b;
            }
        }

        let mut d_prev: Vec<f64> = (0..hd).map(|i| dh[i] * (1.0 - step.update[i])).collect();

        // candidate branch
        let d_cand_pre: Vec<f64> = (0..hd).map(|i| dh[i] * step.update[i] * (1.0 - step.candidate[i] * step.candidate[i])).collect();
        let gated: Vec<f64> = step.reset.iter().zip(h_prev).map(|(r, hp)| r * hp).collect();
        grads.candidate_input.add_outer(&d_cand_pre, x);
        grads.candidate_hidden.add_outer(&d_cand_pre, &gated);
        grads.candidate_bias.add_column(&d_cand_pre);
        p.candidate_input.matvec_t_acc(&d_cand_pre, &mut d_inputs[t]);
        let mut d_gated = vec![0.0; hd];
        p.candidate_hidden.matvec_t_acc(&d_cand_pre, &mut d_gated);
        for i in 0..hd {
            d_prev[i] += d_gated[i] * step.reset[i];
        }

        // update gate
        let d_update_pre: Vec<f64> =
            (0..hd).map(|i| dh[i] * (step.candidate[i] - h_prev[i]) * step.update[i] * (1.0 - step.update[i])).collect();
        grads.update_input.add_outer(&d_update_pre, x);
        grads.update_hidden.add_outer(&d_update_pre, h_prev);
        grads.update_bias.add_column(&d_update_pre);
        p.update_input.matvec_t_acc(&d_update_pre, &mut d_inputs[t]);
        p.update_hidden.matvec_t_acc(&d_update_pre, &mut d_prev);

        // reset gate
        let d_reset_pre: Vec<f64> = (0..hd).map(|i| d_gated[i] * h_prev[i] * step.reset[i] * (1.0 - step.reset[i])).collect();
        grads.reset_input.add_outer(&d_reset_pre, x);
        grads.reset_hidden.add_outer(&d_reset_pre, h_prev);
        grads.reset_bias.add_column(&d_reset_pre);
        p.reset_input.matvec_t_acc(&d_reset_pre, &mut d_inputs[t]);
        p.reset_hidden.matvec_t_acc(&d_reset_pre, &mut d_prev);

        carry = d_prev;
    }
    Ok((grads, d_inputs))
}
