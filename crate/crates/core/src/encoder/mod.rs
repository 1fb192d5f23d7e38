//! Transformer encoder classifier: tokenization, input layout, forward and
//! backward passes, AdamW, training and the model file format.

pub mod input;
pub mod io;
mod linalg;
pub mod model;
pub mod optim;
pub mod params;
pub mod train;
pub mod vocab;

pub use input::{render_history, serialize_input, ModelInput};
pub use model::{batch_loss, bce, forward, head_probability, loss_and_grad, max_pool, ForwardOutput};
pub use optim::{adamw_scalar, adamw_step, AdamState, TrainConfig};
pub use params::{EncoderConfig, ModelParams, Tensor};
pub use train::{accuracy, encode_examples, predict, train, train_encoded, train_monitored, Encoded, TrainOutcome};
pub use vocab::{fit_vocab, tokenize, Vocab};
