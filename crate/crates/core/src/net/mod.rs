//! Complex-valued fully convolutional network with amplitude maxout units.

pub mod checkpoint;
pub mod layers;
pub mod network;
pub mod tensor;
pub mod train;

pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, CheckpointHeader};
pub use layers::{amu, amu_with_index, complex_conv2d, complex_conv2d_backward, ConvWeights};
pub use network::{loss, sample_loss, sample_loss_grad, ArchSpec, ComplexNetwork, ForwardCache, Gradients, LayerSpec, Stage};
pub use tensor::ComplexTensor;
pub use train::{
    evaluate_loss, reconstruct, split_cases, start_training, train, train_epoch, Adam, AdamConfig, EpochRecord,
    PlateauSchedule, ScheduleEvent, TrainConfig, TrainHistory, TrainState, TrainingPair,
};
