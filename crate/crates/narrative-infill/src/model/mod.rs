//! The infilling model: configuration, parameters, masking, the
//! differentiable forward pass, training, and a tape-free evaluator.

pub mod config;
pub mod eval;
pub mod forward;
pub mod mask;
pub mod params;
pub mod train;

pub use config::{ModelConfig, Variant};
pub use eval::EvalModel;
pub use forward::{
    decode_step_teacher_forced, decoder_init, encode_narrative_context, encode_rows,
    narrative_loss, narrative_loss_graph, NarrativeEncoding,
};
pub use mask::{apply_mask, mask_count_for_epoch, sample_mask_indices, MaskPlan};
pub use params::{BoundParams, ModelParams};
pub use train::{train, validation_loss, EpochLog, TrainOutcome};
