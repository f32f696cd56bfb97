//! The learnable stack: GCN layers with exact gradients, pair readout,
//! attention fusion, the joint loss, Adam, and the training loop.

pub mod fusion;
pub mod gradcheck;
pub mod layers;
pub mod matrix;
pub mod model;
pub mod optim;
pub mod train;

pub use fusion::{attention_fuse, joint_loss, FusionParams, PairEmbedding};
pub use layers::{GcnLayer, Gnn, Linear, NormAdj, Parameter, Readout};
pub use matrix::Matrix;
pub use model::{BsalModel, ChannelLogits, Example, ModelConfig};
pub use train::{train, Dataset, EpochRecord, TrainConfig, TrainedModel, TrainingLog};
