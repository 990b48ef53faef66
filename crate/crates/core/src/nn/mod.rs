//! Small dense-math toolkit: tensors, the GRU layer with BPTT, softmax
//! cross-entropy, SGD, gradient checking and checkpoint files.

mod checkpoint;
mod gradcheck;
mod gru;
mod loss;
mod optim;
mod reduce;
mod tensor;

pub use checkpoint::Checkpoint;
pub use gradcheck::{grad_check, CheckCoords, GradCheckReport};
pub use gru::{bptt, gru_forward, gru_step, sigmoid, GruForward, GruLayerParams, GruState, GruStep};
pub use loss::{argmax, softmax, softmax_xent};
pub use optim::{clip_global_norm, sgd_step, PlateauSchedule};
pub use reduce::{ordered_batch_grad, ordered_map, worker_pool, BatchGrad, SampleGrad};
pub use tensor::{dot, Parameters, Tensor2};

/// Global gradient-norm ceiling used by the trainers.
pub const CLIP_NORM: f64 = 5.0;
