//! Parallel-beam CT reconstruction with learned SIRT regularization.
//!
//! The crate is organised bottom-up:
//!
//! * [`geometry`]: acquisition geometry and the matrix-free projector `W`/`Wᵀ`.
//! * [`solvers`]: SIRT, CGLS and filtered back projection.
//! * [`network`]: Mixed-Scale Dense networks with exact gradients and ADAM.
//! * [`pipeline`]: residual targets, interleaved SIRT+DNN inference and
//!   stage-wise training.
//! * [`dataio`]: phantoms, low-dose and Poisson-noise simulation, datasets
//!   and file formats.
//! * [`metrics`]: PSNR/MSE/SSIM in image and sinogram space, aggregate reports.
//!
//! The guide in `book/` walks through each piece; its code samples are
//! compiled and run as doc-tests of this crate.

pub mod dataio;
pub mod error;
pub mod geometry;
pub mod metrics;
pub mod network;
pub mod pipeline;
pub mod solvers;

pub use error::{Error, Result};
pub use geometry::{Image, ProjectionGeometry, Sinogram};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/geometry.md")]
    mod geometry {}
    #[doc = include_str!("../../../book/src/solvers.md")]
    mod solvers {}
    #[doc = include_str!("../../../book/src/networks.md")]
    mod networks {}
    #[doc = include_str!("../../../book/src/pipeline.md")]
    mod pipeline {}
    #[doc = include_str!("../../../book/src/data.md")]
    mod data {}
    #[doc = include_str!("../../../book/src/metrics.md")]
    mod metrics {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
