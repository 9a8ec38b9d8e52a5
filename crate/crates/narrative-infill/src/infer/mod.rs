//! Decoding: the beam-search engine and narrative-level generation
//! with inference-time infilling.

pub mod beam;
pub mod generate;

pub use beam::{beam_search, BeamHypothesis, BeamResult, StepDecoder};
pub use generate::{
    beam_search_step, generate_narrative, infill_sweep, read_generations, write_generations,
    GeneratedNarrative, GruStepDecoder,
};
