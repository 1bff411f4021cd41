//! From-scratch recurrent network core: LSTM cells, bidirectional layers,
//! attention pooling, dense heads, losses, backpropagation through time and
//! the Adam optimiser.

pub mod adam;
pub mod attention;
pub mod lstm;
pub mod model;
pub mod tensor;

pub use adam::{clip_global_norm, AdamConfig, AdamState};
pub use attention::{attention_forward, AttentionParams};
pub use lstm::{lstm_cell_forward, LstmParams, LstmState};
pub use model::{bilstm_forward, dropout_mask, loss, Mode, ModelConfig, ModelParams, RecurrentLayer, Target, Task};
pub use tensor::Matrix;
