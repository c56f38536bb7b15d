//! Scatterer media, motion and pulse-echo synthesis.

pub mod acquisition;
pub mod demod;
pub mod medium;
pub mod motion;
pub mod transmit;

pub use acquisition::{
    acquire_schemes, default_input_scheme, default_reference_scheme, generate_paired_acquisition,
    AcquisitionOptions, AcquisitionStack, PairedAcquisition,
};
pub use demod::{demodulate, DemodFilter};
pub use medium::{
    make_disk_phantom, make_medium_from_template, rim_speed, synthetic_template, Cyst, DiskPhantom,
    MediumParams, ScattererMedium, SectorRegion, Template,
};
pub use motion::{advance_medium, motion_field_from_model, MotionModel};
pub use transmit::{
    default_padding, simulate_transmit, simulate_transmits, virtual_source_distance, ChannelSamples,
    DivergingWave, Pulse, RawChannelData, SimOptions, TimeWindow, DEFAULT_SECTOR_WIDTH,
};
