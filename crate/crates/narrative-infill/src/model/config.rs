//! Model/training configuration and the flat key=value config file.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Training variant: how many steps get their features zero-masked per
/// narrative per epoch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Variant {
    /// Plain cross-entropy sequence-to-sequence; no masking.
    Xe,
    /// One masked step per narrative, every epoch.
    VInfill,
    /// Scheduled mask count: 0 for the first quarter of epochs, 1 until
    /// the half, 2 afterwards.
    VInfillR,
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "xe" => Ok(Variant::Xe),
            "v-infill" | "vinfill" => Ok(Variant::VInfill),
            "v-infillr" | "vinfillr" => Ok(Variant::VInfillR),
            other => Err(Error::invalid(format!(
                "unknown variant {other:?}; expected XE, V-Infill or V-InfillR"
            ))),
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Variant::Xe => "XE",
            Variant::VInfill => "V-Infill",
            Variant::VInfillR => "V-InfillR",
        })
    }
}

/// Every knob of the architecture and the training loop. The config
/// file mirrors these fields one `key = value` line each.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    /// Input image-feature dimensionality.
    pub d_img: usize,
    pub encoder_hidden: usize,
    pub decoder_hidden: usize,
    pub embed_dim: usize,
    /// Vocabulary size cap (including the 4 specials); the built
    /// vocabulary may be smaller.
    pub vocab_size: usize,
    pub max_steps: usize,
    pub max_words: usize,
    pub dropout: f64,
    pub lr: f64,
    pub clip: f64,
    pub beam: usize,
    pub variant: Variant,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    /// Minimum token frequency for vocabulary membership.
    pub min_freq: usize,
    /// Fixed per-narrative mask count overriding the variant schedule.
    /// Mainly for experiments and equivalence tests.
    pub mask_count: Option<usize>,
    pub train_ratio: f64,
    pub val_ratio: f64,
    pub test_ratio: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            d_img: 2048,
            encoder_hidden: 256,
            decoder_hidden: 512,
            embed_dim: 512,
            vocab_size: 20_000,
            max_steps: 5,
            max_words: 20,
            dropout: 0.2,
            lr: 4e-4,
            clip: 10.0,
            beam: 3,
            variant: Variant::Xe,
            epochs: 10,
            batch_size: 1,
            seed: 0,
            min_freq: 1,
            mask_count: None,
            train_ratio: 0.8,
            val_ratio: 0.1,
            test_ratio: 0.1,
        }
    }
}

impl ModelConfig {
    /// Check hard invariants; returns human-readable warnings for legal
    /// but inadvisable settings.
    pub fn validate(&self) -> Result<Vec<String>> {
        for (name, v) in [
            ("d_img", self.d_img),
            ("encoder_hidden", self.encoder_hidden),
            ("decoder_hidden", self.decoder_hidden),
            ("embed_dim", self.embed_dim),
            ("max_steps", self.max_steps),
            ("max_words", self.max_words),
            ("beam", self.beam),
            ("batch_size", self.batch_size),
            ("min_freq", self.min_freq),
        ] {
            if v == 0 {
                return Err(Error::invalid(format!("{name} must be positive")));
            }
        }
        if self.vocab_size < 5 {
            return Err(Error::invalid(
                "vocab_size must be at least 5 (4 specials plus one token)",
            ));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::invalid(format!("dropout {} not in [0, 1)", self.dropout)));
        }
        if self.lr <= 0.0 || !self.lr.is_finite() {
            return Err(Error::invalid(format!("lr {} must be positive", self.lr)));
        }
        if self.clip <= 0.0 || !self.clip.is_finite() {
            return Err(Error::invalid(format!("clip {} must be positive", self.clip)));
        }
        let ratio_sum = self.train_ratio + self.val_ratio + self.test_ratio;
        if self.train_ratio < 0.0
            || self.val_ratio < 0.0
            || self.test_ratio < 0.0
            || (ratio_sum - 1.0).abs() > 1e-9
        {
            return Err(Error::invalid(format!(
                "split ratios ({}, {}, {}) must be non-negative and sum to 1",
                self.train_ratio, self.val_ratio, self.test_ratio
            )));
        }
        let mut warnings = Vec::new();
        if let Some(c) = self.mask_count {
            if c > 2 {
                warnings.push(format!(
                    "mask_count {c} is above 2; masking more than two steps per \
                     narrative sharply degrades generation quality"
                ));
            }
        }
        Ok(warnings)
    }

    /// Parse a flat `key = value` file. Lines starting with `#` and
    /// blank lines are skipped; keys are the `ModelConfig` field names;
    /// unknown or duplicate keys are errors.
    pub fn from_file(path: &Path) -> Result<ModelConfig> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::invalid(format!("cannot read config {}: {e}", path.display())))?;
        ModelConfig::from_str_flat(&text)
    }

    pub fn from_str_flat(text: &str) -> Result<ModelConfig> {
        let mut config = ModelConfig::default();
        let mut seen = std::collections::HashSet::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::invalid(format!("config line {}: expected key = value", idx + 1))
            })?;
            let (key, value) = (key.trim(), value.trim());
            if !seen.insert(key.to_string()) {
                return Err(Error::invalid(format!("config line {}: duplicate key {key}", idx + 1)));
            }
            config.set(key, value).map_err(|e| {
                Error::invalid(format!("config line {}: {e}", idx + 1))
            })?;
        }
        Ok(config)
    }

    fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn parse<T: FromStr>(key: &str, value: &str) -> Result<T>
        where
            T::Err: fmt::Display,
        {
            value
                .parse()
                .map_err(|e| Error::invalid(format!("bad value {value:?} for {key}: {e}")))
        }
        match key {
            "d_img" => self.d_img = parse(key, value)?,
            "encoder_hidden" => self.encoder_hidden = parse(key, value)?,
            "decoder_hidden" => self.decoder_hidden = parse(key, value)?,
            "embed_dim" => self.embed_dim = parse(key, value)?,
            "vocab_size" => self.vocab_size = parse(key, value)?,
            "max_steps" => self.max_steps = parse(key, value)?,
            "max_words" => self.max_words = parse(key, value)?,
            "dropout" => self.dropout = parse(key, value)?,
            "lr" => self.lr = parse(key, value)?,
            "clip" => self.clip = parse(key, value)?,
            "beam" => self.beam = parse(key, value)?,
            "variant" => self.variant = value.parse()?,
            "epochs" => self.epochs = parse(key, value)?,
            "batch_size" => self.batch_size = parse(key, value)?,
            "seed" => self.seed = parse(key, value)?,
            "min_freq" => self.min_freq = parse(key, value)?,
            "mask_count" => self.mask_count = Some(parse(key, value)?),
            "train_ratio" => self.train_ratio = parse(key, value)?,
            "val_ratio" => self.val_ratio = parse(key, value)?,
            "test_ratio" => self.test_ratio = parse(key, value)?,
            other => return Err(Error::invalid(format!("unknown config key {other:?}"))),
        }
        Ok(())
    }
}
