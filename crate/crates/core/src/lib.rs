//! Volumetric image-processing toolkit: binary morphology accelerated by
//! 3D FFTs with unsupervised CT lung/bone labelers, a pipelined 3D data
//! augmentation engine, and the IOU family of segmentation losses with
//! analytic gradients and property verifiers.
//!
//! Modules:
//! * [`volgrid`] — volumes, masks, label maps, file I/O, thresholding,
//!   connected components, anti-aliased resampling, inference tiling;
//! * [`fftmorph`] — dilation/erosion/opening/closing by FFT convolution,
//!   plus the brute-force spatial oracle they are verified against;
//! * [`autolabel`] — lung and skeleton labelers and synthetic phantoms;
//! * [`augment3d`] — affine/occlusion/noise/window augmentation with a
//!   bounded FIFO batch pipeline and counter-based reproducible noise;
//! * [`segloss`] — IOU/Dice/power-family losses, weighted cross-entropy,
//!   gradients, and metric/penalty/restriction verifiers.

pub mod augment3d;
pub mod autolabel;
pub mod error;
pub mod fftmorph;
pub mod segloss;
pub mod volgrid;

pub use error::{Error, Result};
pub use volgrid::{Dtype, Geometry, LabelMap, Mask, Volume};
