//! Compact pixel-wise semantic segmentation.
//!
//! The pipeline has three stages, of which only the last is trained:
//!
//! 1. [`features`]: a tree of undecimated separable Haar wavelet transforms
//!    ([`haar_swt`]) with modulus non-linearity and sub-sampling, whose
//!    low-pass outputs are interpolated back to image resolution and stacked
//!    into one feature vector per pixel.
//! 2. [`rff`]: random Fourier features approximating an RBF kernel. The random
//!    matrix and phases are regenerated from a seed and never stored.
//! 3. [`linear_svm`]: a one-vs-rest linear SVM trained with SGD on the hinge
//!    loss.
//!
//! [`dataset`] and [`metrics`] handle I/O and evaluation, [`model`] holds the
//! binary model format and [`pipeline`] wires everything together for the
//! command-line front end.

pub mod dataset;
mod error;
pub mod features;
pub mod haar_swt;
pub mod linear_svm;
pub mod metrics;
pub mod model;
pub mod pipeline;
mod plane;
pub mod rff;
mod par;

pub use error::{Error, Result};
pub use plane::Plane;
