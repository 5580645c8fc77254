//! Mixed-Scale Dense convolutional networks, trained from scratch.
//!
//! Everything needed for training lives here: the dilated convolution,
//! the dense forward pass with an activation tape, exact reverse-mode
//! gradients, the batch MSE loss, ADAM, and the `.msd` checkpoint format.

mod adam;
mod checkpoint;
mod conv;
mod msd;
mod train;

use std::fmt::Debug;
use std::ops::{AddAssign, MulAssign, SubAssign};

use num_traits::Float;

pub use adam::{AdamConfig, AdamState};
pub use checkpoint::{read_checkpoint, write_checkpoint, CheckpointHeader, TrainingMeta};
pub use conv::{conv2d_dilated, ConvKernel};
pub use msd::{parameter_count, MsdNetwork, Tape};
pub use train::{batch_gradient, evaluate_loss, mse_loss, train_epoch, Batch, Sample};

/// Floating-point type the network can be evaluated in.
pub trait Real: Float + AddAssign + SubAssign + MulAssign + Send + Sync + Debug + 'static {}

impl Real for f32 {}
impl Real for f64 {}
