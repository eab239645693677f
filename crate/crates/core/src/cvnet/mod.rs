//! Small complex-valued UNet with an optional LCB stage.

pub mod checkpoint;
pub mod layers;
pub mod loss;
pub mod model;
pub mod tensor;
pub mod train;

pub use checkpoint::{read_checkpoint, write_checkpoint};
pub use loss::{weighted_bce, weighted_bce_grad_logit, PosWeight};
pub use model::{ForwardCache, LcbPlacement, NetConfig, Network, NetworkParams, ParamSlice};
pub use tensor::Tensor;
pub use train::{sample_crop, train, train_from, EpochLog, Sample, TrainConfig, TrainOutcome};
