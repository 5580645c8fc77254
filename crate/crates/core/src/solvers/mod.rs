//! Classical reconstructors: SIRT, CGLS and filtered back projection.

mod cgls;
mod fbp;
mod sirt;

pub use cgls::{cgls, cgls_with_history};
pub use fbp::{fbp, ramp_filter, ramp_kernel};
pub use sirt::{sirt_run, sirt_step, weighted_residual, SirtState, SirtWeights};
