//! Wavelength-aware convolutions for hyperspectral images.
//!
//! The first layer of a hyperspectral CNN normally ties each kernel to a
//! channel index, which breaks as soon as a camera with a different
//! channel → wavelength assignment is used. [`wroi::HyveConvLayer`] instead
//! learns `G` Gaussian wavelength ranges and `G` kernel prototypes, and
//! synthesizes per-channel kernels from the wavelengths of whatever camera
//! produced the input.
//!
//! Modules:
//! - [`autodiff`]: a small tape-based reverse-mode engine over [`tensor::Tensor`].
//! - [`wroi`]: Gaussians, range-impact matrix, kernel synthesis, the layer itself.
//! - [`nets`]: a shallow classifier with a swappable first layer.
//! - [`camera`]: camera descriptors, synthetic scenes, cube files, preprocessing.
//! - [`train`]: Adam, metrics, training loop and experiment runners.
//! - [`checkpoint`]: model files.

pub mod autodiff;
pub mod camera;
pub mod checkpoint;
pub mod error;
pub mod nets;
pub mod params;
pub mod tensor;
pub mod train;
pub mod wroi;

pub use error::{HyveError, Result};
pub use tensor::Tensor;
