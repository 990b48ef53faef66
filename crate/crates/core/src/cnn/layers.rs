use super::{ConvSpec, PoolSpec};
use crate::nn::Tensor2;

/// Channel-major activation volume, `data[(c * height + y) * width + x]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Volume {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    pub data: Vec<f64>,
}

impl Volume {
    pub fn zeros(channels: usize, height: usize, width: usize) -> Self {
        Volume { channels, height, width, data: vec![0.0; channels * height * width] }
    }

    #[inline]
    pub fn at(&self, c: usize, y: usize, x: usize) -> f64 {
        self.data[(c * self.height + y) * self.width + x]
    }
}

fn out_side(side: usize, spec: &ConvSpec) -> usize {
    (side + 2 * spec.pad - spec.kernel) / spec.stride + 1
}

/// Output rows `o` whose receptive tap `o * stride + k - pad` lands inside `0..side`.
#[inline]
fn valid_range(k: usize, pad: usize, stride: usize, side: usize, out: usize) -> (usize, usize) {
    // o * stride + k >= pad  and  o * stride + k - pad < side
    let lo = if k >= pad { 0 } else { (pad - k).div_ceil(stride) };
    let hi = if side + pad > k { ((side + pad - k - 1) / stride + 1).min(out) } else { 0 };
    (lo, hi.max(lo))
}

pub(super) fn conv_forward(input: &Volume, w: &Tensor2, b: &Tensor2, spec: &ConvSpec) -> Volume {
    let (oh, ow) = (out_side(input.height, spec), out_side(input.width, spec));
    let k = spec.kernel;
    let mut out = Volume::zeros(spec.out_channels, oh, ow);
    for oc in 0..spec.out_channels {
        let plane = &mut out.data[oc * oh * ow..(oc + 1) * oh * ow];
        plane.iter_mut().for_each(|v| *v = b.data[oc]);
        let wrow = w.row(oc);
        for ic in 0..input.channels {
            let src = &input.data[ic * input.height * input.width..(ic + 1) * input.height * input.width];
            for ky in 0..k {
                let (y0, y1) = valid_range(ky, spec.pad, spec.stride, input.height, oh);
                for kx in 0..k {
                    let wv = wrow[(ic * k + ky) * k + kx];
                    let (x0, x1) = valid_range(kx, spec.pad, spec.stride, input.width, ow);
                    for oy in y0..y1 {
                        let iy = oy * spec.stride + ky - spec.pad;
                        let srow = &src[iy * input.width..(iy + 1) * input.width];
                        let drow = &mut plane[oy * ow..(oy + 1) * ow];
                        if spec.stride == 1 {
                            let off = kx as isize - spec.pad as isize;
                            for ox in x0..x1 {
                                drow[ox] += wv * srow[(ox as isize + off) as usize];
                            }
                        } else {
                            for ox in x0..x1 {
                                drow[ox] += wv * srow[ox * spec.stride + kx - spec.pad];
                            }
                        }
                    }
                }
            }
        }
    }
    out
}

/// Accumulates weight and bias gradients; returns the input gradient when asked.
pub(super) fn conv_backward(
    d_out: &[f64],
    input: &Volume,
    w: &Tensor2,
    spec: &ConvSpec,
    gw: &mut Tensor2,
    gb: &mut Tensor2,
    need_input: bool,
) -> Vec<f64> {
    let (oh, ow) = (out_side(input.height, spec), out_side(input.width, spec));
    let k = spec.kernel;
    let cols = w.cols;
    let mut d_in = if need_input { vec![0.0; input.data.len()] } else { Vec::new() };
    let plane_in = input.height * input.width;
    for oc in 0..spec.out_channels {
        let dplane = &d_out[oc * oh * ow..(oc + 1) * oh * ow];
        gb.data[oc] += dplane.iter().sum::<f64>();
        for ic in 0..input.channels {
            let src = &input.data[ic * plane_in..(ic + 1) * plane_in];
            for ky in 0..k {
                let (y0, y1) = valid_range(ky, spec.pad, spec.stride, input.height, oh);
                for kx in 0..k {
                    let wi = (ic * k + ky) * k + kx;
                    let wv = w.data[oc * cols + wi];
                    let (x0, x1) = valid_range(kx, spec.pad, spec.stride, input.width, ow);
                    let mut acc = 0.0;
                    for oy in y0..y1 {
                        let iy = oy * spec.stride + ky - spec.pad;
                        let drow = &dplane[oy * ow..(oy + 1) * ow];
                        let srow = &src[iy * input.width..(iy + 1) * input.width];
                        for ox in x0..x1 {
                            let ix = ox * spec.stride + kx - spec.pad;
                            acc += drow[ox] * srow[ix];
                        }
                        if need_input {
                            let dst = &mut d_in[ic * plane_in + iy * input.width..ic * plane_in + (iy + 1) * input.width];
                            for ox in x0..x1 {
                                dst[ox * spec.stride + kx - spec.pad] += wv * drow[ox];
                            }
                        }
                    }
                    gw.data[oc * cols + wi] += acc;
                }
            }
        }
    }
    d_in
}

/// Max pooling; the argmax index per output cell points into `input.data`.
/// Ties keep the first maximum in scan order.
pub(super) fn pool_forward(input: &Volume, spec: PoolSpec) -> (Volume, Vec<usize>) {
    let oh = (input.height - spec.size) / spec.stride + 1;
    let ow = (input.width - spec.size) / spec.stride + 1;
    let mut out = Volume::zeros(input.channels, oh, ow);
    let mut idx = vec![0; out.data.len()];
    for c in 0..input.channels {
        for oy in 0..oh {
            for ox in 0..ow {
                let mut best = f64::NEG_INFINITY;
                let mut best_i = 0;
                for dy in 0..spec.size {
                    for dx in 0..spec.size {
                        let i = (c * input.height + oy * spec.stride + dy) * input.width + ox * spec.stride + dx;
                        if input.data[i] > best {
                            best = input.data[i];
                            best_i = i;
                        }
                    }
                }
                let o = (c * oh + oy) * ow + ox;
                out.data[o] = best;
                idx[o] = best_i;
            }
        }
    }
    (out, idx)
}

pub(super) fn pool_backward(d_out: &[f64], argmax: &[usize], input: &Volume) -> Vec<f64> {
    let mut d = vec![0.0; input.data.len()];
    for (g, &i) in d_out.iter().zip(argmax) {
        d[i] += g;
    }
    d
}

pub(super) fn relu_backward(d: &[f64], pre: &Volume) -> Vec<f64> {
    d.iter().zip(&pre.data).map(|(g, z)| if *z > 0.0 { *g } else { 0.0 }).collect()
}
