//! Token/id vocabulary with fixed special ids.

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

use super::Narrative;

pub const PAD_ID: u32 = 0;
pub const BOS_ID: u32 = 1;
pub const EOS_ID: u32 = 2;
pub const UNK_ID: u32 = 3;

const SPECIALS: [&str; 4] = ["<pad>", "<bos>", "<eos>", "<unk>"];

/// Bijection between tokens and dense ids; ids 0-3 are reserved for
/// PAD/BOS/EOS/UNK in that order.
#[derive(Debug, Clone)]
pub struct Vocabulary {
    token_to_id: HashMap<String, u32>,
    id_to_token: Vec<String>,
}

#[derive(Serialize, Deserialize)]
struct VocabFile {
    tokens: Vec<String>,
}

impl Vocabulary {
    /// Count token frequencies over every step of every narrative, keep
    /// tokens with frequency >= `min_freq` ranked by (frequency desc,
    /// token asc), truncate to `max_size - 4` entries, and prepend the
    /// four specials.
    pub fn build(corpus: &[Narrative], min_freq: usize, max_size: usize) -> Vocabulary {
        let mut freq: HashMap<&str, usize> = HashMap::new();
        for n in corpus {
            for step in &n.steps {
                for tok in &step.tokens {
                    *freq.entry(tok).or_insert(0) += 1;
                }
            }
        }
        let mut ranked: Vec<(&str, usize)> =
            freq.into_iter().filter(|&(_, c)| c >= min_freq.max(1)).collect();
        ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
        ranked.truncate(max_size.saturating_sub(SPECIALS.len()));

        let mut id_to_token: Vec<String> = SPECIALS.iter().map(|s| s.to_string()).collect();
        id_to_token.extend(ranked.into_iter().map(|(t, _)| t.to_string()));
        Vocabulary::from_tokens(id_to_token).expect("frequency map cannot produce duplicates")
    }

    fn from_tokens(id_to_token: Vec<String>) -> Result<Vocabulary> {
        if id_to_token.len() < SPECIALS.len()
            || id_to_token[..SPECIALS.len()] != SPECIALS.map(String::from)
        {
            return Err(Error::invalid(format!(
                "vocabulary must start with the specials {:?}",
                SPECIALS
            )));
        }
        let mut token_to_id = HashMap::with_capacity(id_to_token.len());
        for (i, tok) in id_to_token.iter().enumerate() {
            if token_to_id.insert(tok.clone(), i as u32).is_some() {
                return Err(Error::invalid(format!("duplicate vocabulary token {tok:?}")));
            }
        }
        Ok(Vocabulary { token_to_id, id_to_token })
    }

    pub fn len(&self) -> usize {
        self.id_to_token.len()
    }

    pub fn is_empty(&self) -> bool {
        false // the specials are always present
    }

    /// Map a token to its id, or UNK when out of vocabulary.
    pub fn id(&self, token: &str) -> u32 {
        self.token_to_id.get(token).copied().unwrap_or(UNK_ID)
    }

    pub fn contains(&self, token: &str) -> bool {
        self.token_to_id.contains_key(token)
    }

    /// The token for an id; panics on out-of-range ids, which cannot be
    /// produced by a model sized to this vocabulary.
    pub fn token(&self, id: u32) -> &str {
        &self.id_to_token[id as usize]
    }

    pub fn tokens(&self) -> &[String] {
        &self.id_to_token
    }

    pub fn save_json(&self, path: &Path) -> Result<()> {
        let file = VocabFile { tokens: self.id_to_token.clone() };
        std::fs::write(path, serde_json::to_string_pretty(&file)?)?;
        Ok(())
    }

    pub fn load_json(path: &Path) -> Result<Vocabulary> {
        let data = std::fs::read_to_string(path)
            .map_err(|e| Error::invalid(format!("cannot read vocabulary {}: {e}", path.display())))?;
        let file: VocabFile = serde_json::from_str(&data)?;
        Vocabulary::from_tokens(file.tokens)
    }
}
