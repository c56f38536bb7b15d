//! Speckle tracking by coarse-to-fine block matching.

pub mod block;
pub mod ncc;

pub use block::{estimates_to_field, track_images, track_pair, track_sequence, TrackConfig, WindowEstimates, WindowLattice};
pub use ncc::{ncc_map, ncc_map_with, subpixel_peak, Fft2, NccSurface};
