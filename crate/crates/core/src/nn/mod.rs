//! Fixed-topology feedforward classifiers trained on weighted data.
//!
//! Models are ReLU MLPs with a single sigmoid output. Gradients are exact
//! reverse-mode derivatives of the batched forward pass; optimization is
//! mini-batch Adam with validation-based early stopping.

mod adam;
mod gemm;
mod mlp;
pub(crate) mod train;

pub use adam::{adam_step, AdamState, ADAM_BETA1, ADAM_BETA2, ADAM_EPS};
pub use mlp::{grad, Batch, MlpModel, Workspace};
pub use train::{mean_loss, train, EarlyStopping, LossCurve, StopVerdict, TrainConfig};
pub(crate) use gemm::gemm;
