//! Image-quality and motion metrics.

pub mod image;
pub mod motion;
pub mod regions;
pub mod report;

pub use image::{
    cnr, cnr_samples, gcnr, gcnr_samples, psnr, ssim, ssim_constants, ssim_windowed, ssim_with, GCNR_BINS,
};
pub use motion::{epe, mean_angular_velocity, mepd, mepe, moco_nyquist_velocity, rave, RaveRoi};
pub use regions::{RegionMasks, RegionShape, RegionSpec};
pub use report::{FrameMetrics, MetricReport, Summary, METRIC_NAMES};
