//! Attention seq2seq intent generator trained from scratch.

mod checkpoint;
mod gradcheck;
mod lstm;
mod model;
mod network;
mod train;

pub use checkpoint::{
    decode_checkpoint, encode_checkpoint, load_checkpoint, save_checkpoint, sidecar_path, CheckpointMeta, CHECKPOINT_MAGIC,
    CHECKPOINT_VERSION,
};
pub use gradcheck::{grad_check, GradCheckConfig, GradCheckReport, ROUNDOFF_FLOOR};
pub use model::{init_model, ModelDims, Seq2SeqModel, TensorSpec, INIT_SCALE};
pub use network::{toy_corpus, ForwardOutput, LossSum, SeqPair};
pub use train::{clip_gradients, train, EarlyStopping, EpochRecord, RmsProp, TrainConfig, TrainHistory};
