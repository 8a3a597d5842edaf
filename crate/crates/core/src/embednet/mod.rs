//! Convolutional embedding network and triplet-loss training.

mod checkpoint;
pub mod layers;
mod layout;
mod loss;
mod network;
mod train;

pub use checkpoint::CHECKPOINT_FORMAT_VERSION;
pub use layout::{ConvSpec, NetworkLayout, DEFAULT_DROPOUT, DEFAULT_EMBEDDING_DIM, INPUT_CHANNELS};
pub use loss::{grad, triplet_loss, TripletBatch};
pub use network::{dropout_seeds, NetworkParams, Representation};
pub use train::{train, train_groups, EpochRecord, Optimizer, StepDecay, TrainConfig, TrainLog};
