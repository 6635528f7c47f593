//! Feed-forward network engine: layers, reverse-mode gradients, softmax
//! cross-entropy, Adam and the learning-rate schedule.

mod arch;
mod layers;
mod loss;
mod network;
mod optim;
mod tensor;

pub use arch::Architecture;
pub use layers::{relu, LayerSpec, Padding};
pub use loss::softmax_cross_entropy;
pub use network::{ForwardCache, Network, ParamStore, WeightMode};
pub use optim::{lr_schedule, Adam, AdamConfig, AdamState};
pub use tensor::Tensor;
