//! Ultrafast diverging-wave echocardiography on a desk.
//!
//! The crate covers the whole chain from a scatterer medium to motion
//! metrics:
//!
//! * [`sim`] builds scatterer media (grayscale templates, a spinning disk
//!   phantom), moves them, and synthesizes per-element echoes for steered
//!   diverging-wave transmits. Paired acquisitions combine a motion-affected
//!   3-transmit input with a frozen-time 31-transmit reference.
//! * [`beamform`] demodulated delay-and-sum on a polar sector grid, plus
//!   coherent compounding and B-mode display.
//! * [`net`] a complex-valued convolutional network with amplitude maxout
//!   units, hand-written backpropagation, Adam and a plateau schedule.
//! * [`track`] coarse-to-fine block matching with FFT normalized
//!   cross-correlation and parabolic subpixel refinement.
//! * [`eval`] image quality (PSNR, SSIM, CNR, gCNR) and motion metrics
//!   (EPE, MEPE, RAVE, MEPD).
//!
//! Geometry convention everywhere: the array lies along `x` at `z = 0` and
//! `z` grows with depth.

pub mod beamform;
pub mod error;
pub mod eval;
pub mod field;
pub mod geom;
pub mod io;
pub mod iq;
pub mod net;
pub mod sim;
pub mod track;

pub use error::{Error, Result};
pub use field::MotionField;
pub use geom::{make_evenly_spaced_angles, ProbeConfig, ScanGrid, TimingMode, TransmitScheme};
pub use iq::{IQImage, RealImage};
