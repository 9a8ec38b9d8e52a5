//! Synthetic narrative generator for experiments and tests.
//!
//! Narratives are built from a slot template: each step consists of a
//! block of words inherited from the previous step, a block it will
//! hand to the next step, and a private remainder. Blocks chain
//! cyclically (the last step hands its block back to the first), so
//! every step shares words with exactly two partners and the measured
//! [`unique_word_fraction`](crate::corpus::unique_word_fraction) is
//! flat across steps: with `T` words per step and block size `b`,
//! every step scores `(T - 2b) / T` exactly, for any narrative length.
//!
//! Word identities are drawn without replacement from a closed
//! vocabulary `w0 .. w{vocab_size-1}`, per narrative, so there are no
//! accidental repetitions. Each vocabulary word owns one fixed random
//! vector; a step's feature is the mean of its words' vectors plus
//! bounded noise ([`FEATURE_NOISE`]). Features are therefore a
//! deterministic function of step content (up to that noise) and the
//! same function across all narratives of a corpus: they genuinely
//! predict the text.

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{FeatureSource, Narrative, Step};
use crate::{Error, Result};

/// Half-width of the uniform noise added to every feature coordinate.
pub const FEATURE_NOISE: f64 = 0.02;

/// Parameters of the generator. `overlap` is the target fraction of a
/// step's words shared with its neighbours; the realized block size is
/// `round(overlap * words_per_step / 2)`, so the fraction is quantized
/// to multiples of `2 / words_per_step` (the default 10 words per step
/// hits any multiple of 0.2 exactly).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SynthConfig {
    pub n_narratives: usize,
    pub n_steps: usize,
    pub words_per_step: usize,
    pub vocab_size: usize,
    pub d_img: usize,
    pub overlap: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_narratives: 200,
            n_steps: 5,
            words_per_step: 10,
            vocab_size: 1000,
            d_img: 64,
            overlap: 0.6,
            seed: 0,
        }
    }
}

impl SynthConfig {
    /// Words shared with each chain neighbour.
    pub fn block_size(&self) -> usize {
        let b = (self.overlap * self.words_per_step as f64 / 2.0).round() as usize;
        b.min(self.words_per_step / 2)
    }

    /// Distinct vocabulary words one narrative consumes.
    fn words_per_narrative(&self) -> usize {
        if self.n_steps == 1 {
            // A lone step has no neighbour to share with; everything is
            // private.
            self.words_per_step
        } else {
            self.n_steps * (self.words_per_step - self.block_size())
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_narratives == 0 {
            return Err(Error::invalid("synth: n_narratives must be at least 1"));
        }
        if self.n_steps == 0 {
            return Err(Error::invalid("synth: n_steps must be at least 1"));
        }
        if self.words_per_step == 0 {
            return Err(Error::invalid("synth: words_per_step must be at least 1"));
        }
        if self.d_img == 0 {
            return Err(Error::invalid("synth: d_img must be at least 1"));
        }
        if !self.overlap.is_finite() || !(0.0..=1.0).contains(&self.overlap) {
            return Err(Error::invalid(format!(
                "synth: overlap must lie in [0, 1], got {}",
                self.overlap
            )));
        }
        let needed = self.words_per_narrative();
        if self.vocab_size < needed {
            return Err(Error::invalid(format!(
                "synth: vocab_size {} is too small; one narrative needs {} distinct words",
                self.vocab_size, needed
            )));
        }
        Ok(())
    }
}

/// Generate a corpus. One seeded stream drives everything — the word
/// vector table first, then per narrative the word draw and the
/// feature noise — so a fixed config reproduces the corpus bitwise.
pub fn generate(config: &SynthConfig) -> Result<Vec<Narrative>> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let word_vecs: Vec<Vec<f64>> = (0..config.vocab_size)
        .map(|_| (0..config.d_img).map(|_| rng.gen_range(-1.0..1.0)).collect())
        .collect();

    let t = config.words_per_step;
    let b = config.block_size();
    let n = config.n_steps;
    let mut narratives = Vec::with_capacity(config.n_narratives);
    for i in 0..config.n_narratives {
        let picked: Vec<usize> = index::sample(&mut rng, config.vocab_size, config.words_per_narrative()).into_iter().collect();
        let mut steps = Vec::with_capacity(n);
        for k in 0..n {
            let words = step_words(&picked, n, t, b, k);
            let text = words.iter().map(|w| format!("w{w}")).collect::<Vec<_>>().join(" ");
            let feature = step_feature(&words, &word_vecs, config.d_img, &mut rng);
            steps.push(Step::new(text, feature, FeatureSource::Synthetic));
        }
        narratives.push(Narrative { id: format!("synth-{i:04}"), category: "recipes".into(), steps });
    }
    Ok(narratives)
}

/// Word ids of step `k`: inherited block, own block, private slice.
fn step_words(picked: &[usize], n: usize, t: usize, b: usize, k: usize) -> Vec<usize> {
    if n == 1 {
        return picked.to_vec();
    }
    let block = |j: usize| &picked[j * b..(j + 1) * b];
    let private_base = n * b;
    let p = t - 2 * b;
    let private = &picked[private_base + k * p..private_base + (k + 1) * p];
    let mut words = Vec::with_capacity(t);
    words.extend_from_slice(block((k + n - 1) % n));
    words.extend_from_slice(block(k));
    words.extend_from_slice(private);
    words
}

fn step_feature(
    words: &[usize],
    word_vecs: &[Vec<f64>],
    d_img: usize,
    rng: &mut ChaCha8Rng,
) -> Vec<f64> {
    let mut feature = vec![0.0; d_img];
    for &w in words {
        for (f, v) in feature.iter_mut().zip(&word_vecs[w]) {
            *f += v;
        }
    }
    let inv = 1.0 / words.len() as f64;
    for f in &mut feature {
        *f = *f * inv + rng.gen_range(-FEATURE_NOISE..FEATURE_NOISE);
    }
    feature
}
