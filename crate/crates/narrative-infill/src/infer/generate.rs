//! Narrative-level generation: mask the requested step, encode the
//! context once, then beam-decode every step independently.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::{decode_tokens, Vocabulary};
use crate::model::{apply_mask, EvalModel, MaskPlan, ModelConfig, ModelParams};
use crate::nn::Tensor;
use crate::{Error, Result};

use super::beam::{beam_search, BeamResult, StepDecoder};

/// Binds one step's decoder (a global feature already folded into the
/// start state) to the beam engine.
pub struct GruStepDecoder<'a> {
    model: &'a EvalModel<'a>,
    init: Vec<f64>,
}

impl<'a> GruStepDecoder<'a> {
    pub fn new(model: &'a EvalModel<'a>, g_k: &[f64]) -> Self {
        GruStepDecoder { model, init: model.decoder_init(g_k) }
    }
}

impl StepDecoder for GruStepDecoder<'_> {
    type State = Vec<f64>;

    fn initial_state(&self) -> Vec<f64> {
        self.init.clone()
    }

    fn advance(&self, state: &Vec<f64>, token: u32) -> (Vec<f64>, Vec<f64>) {
        let h = self.model.decoder_step(token, state);
        let log_probs = self.model.log_probs(&h);
        (h, log_probs)
    }
}

/// Beam-search one step of the model from its global feature.
pub fn beam_search_step(
    g_k: &[f64],
    params: &ModelParams,
    beam: usize,
    max_len: usize,
) -> Result<BeamResult> {
    let model = EvalModel::new(params);
    let decoder = GruStepDecoder::new(&model, g_k);
    beam_search(&decoder, beam, max_len)
}

/// One generated narrative, ready for the JSON-lines report. The
/// surface strings never contain PAD or BOS; EOS ends decoding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratedNarrative {
    pub narrative_id: String,
    /// The step whose features were withheld, if any.
    pub infill_index: Option<usize>,
    pub steps: Vec<String>,
    /// Total beam log-probability per step.
    pub log_probs: Vec<f64>,
    /// Per-step: ran out of length budget before EOS. In-process only.
    #[serde(skip)]
    pub truncated: Vec<bool>,
}

/// Generate every step of a narrative from its feature matrix,
/// optionally withholding (zero-masking) the features of one step.
pub fn generate_narrative(
    params: &ModelParams,
    vocab: &Vocabulary,
    narrative_id: &str,
    features: &Tensor,
    config: &ModelConfig,
    infill_index: Option<usize>,
) -> Result<GeneratedNarrative> {
    let plan = match infill_index {
        Some(i) => MaskPlan::single(i),
        None => MaskPlan::empty(),
    };
    let masked = apply_mask(features, &plan)?;
    let model = EvalModel::new(params);
    let globals = model.globals(&masked)?;

    let max_len = config.max_words + 2;
    let mut steps = Vec::with_capacity(globals.len());
    let mut log_probs = Vec::with_capacity(globals.len());
    let mut truncated = Vec::with_capacity(globals.len());
    for g_k in &globals {
        let decoder = GruStepDecoder::new(&model, g_k);
        let result = beam_search(&decoder, config.beam, max_len)?;
        let best = result.best();
        steps.push(decode_tokens(&best.tokens, vocab).join(" "));
        log_probs.push(best.log_prob);
        truncated.push(result.truncated);
    }
    Ok(GeneratedNarrative {
        narrative_id: narrative_id.to_string(),
        infill_index,
        steps,
        log_probs,
        truncated,
    })
}

/// The unmasked generation followed by one generation per withheld
/// step index `0..n`.
pub fn infill_sweep(
    params: &ModelParams,
    vocab: &Vocabulary,
    narrative_id: &str,
    features: &Tensor,
    config: &ModelConfig,
) -> Result<Vec<GeneratedNarrative>> {
    let n = match features.shape() {
        [n, _] => *n,
        other => {
            return Err(Error::ShapeMismatch {
                op: "infill_sweep",
                details: format!("expected rank-2 features, got {other:?}"),
            })
        }
    };
    let mut out = Vec::with_capacity(n + 1);
    out.push(generate_narrative(params, vocab, narrative_id, features, config, None)?);
    for i in 0..n {
        out.push(generate_narrative(params, vocab, narrative_id, features, config, Some(i))?);
    }
    Ok(out)
}

/// Write generations as JSON lines:
/// `{narrative_id, infill_index|null, steps, log_probs}`.
pub fn write_generations(path: &Path, generations: &[GeneratedNarrative]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for g in generations {
        serde_json::to_writer(&mut w, g)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_generations(path: &Path) -> Result<Vec<GeneratedNarrative>> {
    let reader = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let g: GeneratedNarrative = serde_json::from_str(&line).map_err(|e| {
            Error::MalformedRecord { line: i + 1, message: e.to_string() }
        })?;
        out.push(g);
    }
    Ok(out)
}
