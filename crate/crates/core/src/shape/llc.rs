use super::codebook::{squared_distance, Codebook};
use super::context::StrokeDescriptor;
use crate::error::{Error, Result};

/// Relative ridge added to a singular local Gram matrix: `eps * trace(C)`.
pub const LLC_EPSILON: f64 = 1e-4;

/// Smallest squared Cholesky pivot, relative to `trace(C)`, for which the
/// Gram matrix counts as nonsingular.
const SINGULAR_PIVOT: f64 = 1e-12;

/// Reconstruction of a descriptor from `k` codebook atoms; weights sum to 1.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseCode {
    pub indices: Vec<usize>,
    pub weights: Vec<f64>,
}

/// Locality-constrained linear code of `st`: its `k` nearest centers (ties to
/// the lower index) and the weights minimizing `|st - N w|^2` subject to
/// `1^T w = 1`, computed by solving `C w = 1` and rescaling to unit sum, where
/// `C` is the Gram matrix of `(neighbor - st)`. When `C` is singular (more
/// neighbors than dimensions, repeated atoms, `st` on an atom) the system is
/// shifted to `(C + eps tr(C) I) w = 1`.
pub fn llc_encode(st: &StrokeDescriptor, codebook: &Codebook, k: usize) -> Result<SparseCode> {
    let x = &st.0;
    if x.len() != codebook.dim() {
        return Err(Error::shape(format!("descriptor has {} dims, codebook {}", x.len(), codebook.dim())));
    }
    if k == 0 || k > codebook.len() {
        return Err(Error::Insufficient { what: "codebook atoms for the neighborhood", needed: k.max(1), got: codebook.len() });
    }
    let mut order: Vec<(f64, usize)> = (0..codebook.len()).map(|i| (squared_distance(x, codebook.center(i)), i)).collect();
    order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let indices: Vec<usize> = order[..k].iter().map(|&(_, i)| i).collect();

    let diffs: Vec<Vec<f64>> = indices.iter().map(|&i| codebook.center(i).iter().zip(x).map(|(b, s)| b - s).collect()).collect();
    let mut gram = vec![0.0; k * k];
    for i in 0..k {
        for j in i..k {
            let v: f64 = diffs[i].iter().zip(&diffs[j]).map(|(a, b)| a * b).sum();
            gram[i * k + j] = v;
            gram[j * k + i] = v;
        }
    }
    let trace: f64 = (0..k).map(|i| gram[i * k + i]).sum();
    let ones = vec![1.0; k];
    let raw = match cholesky_solve(&mut gram.clone(), k, &ones, SINGULAR_PIVOT * trace) {
        Some(w) if trace > 0.0 => w,
        _ => {
            // trace 0 means every neighbor coincides with st: any feasible w is exact
            let ridge = if trace > 0.0 { LLC_EPSILON * trace } else { 1.0 };
            for i in 0..k {
                gram[i * k + i] += ridge;
            }
            cholesky_solve(&mut gram, k, &ones, 0.0).ok_or_else(|| Error::Numeric("LLC Gram system is not positive definite".into()))?
        }
    };
    let sum: f64 = raw.iter().sum();
    let weights = raw.iter().map(|w| w / sum).collect();
    Ok(SparseCode { indices, weights })
}

/// `|st - sum_i w_i b_{ind_i}|^2`.
pub fn reconstruction_residual(st: &StrokeDescriptor, codebook: &Codebook, code: &SparseCode) -> f64 {
    let mut recon = vec![0.0; codebook.dim()];
    for (&i, &w) in code.indices.iter().zip(&code.weights) {
        for (r, b) in recon.iter_mut().zip(codebook.center(i)) {
            *r += w * b;
        }
    }
    squared_distance(&st.0, &recon)
}

/// Solves `A x = b` for symmetric positive definite `A` (row-major, n x n),
/// overwriting `A` with its Cholesky factor. Fails when a squared pivot is not
/// above `min_pivot`.
fn cholesky_solve(a: &mut [f64], n: usize, b: &[f64], min_pivot: f64) -> Option<Vec<f64>> {
    for j in 0..n {
        let mut d = a[j * n + j];
        for k in 0..j {
            d -= a[j * n + k] * a[j * n + k];
        }
        if d <= min_pivot || !d.is_finite() {
            return None;
        }
        let d = d.sqrt();
        a[j * n + j] = d;
        for i in j + 1..n {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= a[i * n + k] * a[j * n + k];
            }
            a[i * n + j] = s / d;
        }
    }
    let mut y = b.to_vec();
    for i in 0..n {
        for k in 0..i {
            y[i] -= a[i * n + k] * y[k];
        }
        y[i] /= a[i * n + i];
    }
    for i in (0..n).rev() {
        for k in i + 1..n {
            y[i] -= a[k * n + i] * y[k];
        }
        y[i] /= a[i * n + i];
    }
    Some(y)
}
