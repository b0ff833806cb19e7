//! Three-stage reconstruction for ill-posed imaging problems.
//!
//! The pipeline is: a direct reconstruction from the measured data, a
//! patch-wise learned prior applied to that initial image, and a
//! Tikhonov data-consistency solve anchored at the prior. Two
//! application paths are provided — low-dose parallel-beam CT with a
//! Kullback-Leibler data term, and undersampled golden-angle radial
//! cine MRI with a least-squares data term — together with TV and
//! dictionary-learning baselines and the usual image-quality metrics.
//!
//! Modules map onto the stages:
//!
//! * [`array`] / [`ndf`] — dense nd-arrays and the binary interchange format
//! * [`patchwork`] — patch decomposition/reassembly and slice-stack priors
//! * [`operators`] — ray transform + FBP, low-dose model, radial Fourier encoder
//! * [`priors`] — identity/Gaussian/convnet/dictionary patch denoisers
//! * [`solvers`] — PCG, preconditioned Landweber, TV splitting, dense oracles
//! * [`metrics`] — PSNR, NRMSE, SSIM, HaarPSI
//! * [`phantoms`] — synthetic ground truths and coil maps

pub mod array;
pub mod error;
pub mod metrics;
pub mod ndf;
pub mod operators;
pub mod patchwork;
pub mod phantoms;
pub mod priors;
pub mod rng;
pub mod solvers;

pub use array::{inner_product, norm2, NdArray, NdArrayC, NdArrayF, Scalar};
pub use error::{CoreError, Result};
pub use operators::ImagingOperator;
pub use patchwork::{Boundary, PatchDenoiser, PatchScheme, WeightMap};
pub use priors::PriorModel;
pub use solvers::SolveReport;

/// Complex double, the element type of [`NdArrayC`].
pub type Complex64 = num_complex::Complex64;
