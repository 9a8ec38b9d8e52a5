//! Generation quality metrics and the per-run evaluation report.

pub mod bleu;
pub mod meteor;
pub mod rouge;

pub use bleu::bleu_n;
pub use meteor::meteor_lite;
pub use rouge::rouge_l;

use std::collections::HashMap;
use std::path::Path;

use serde::Serialize;

use crate::corpus::{tokenize, Narrative};
use crate::infer::GeneratedNarrative;
use crate::{Error, Result};

pub(crate) fn check_paired(hypotheses: &[Vec<String>], references: &[Vec<String>]) -> Result<()> {
    if hypotheses.len() != references.len() {
        return Err(Error::invalid(format!(
            "{} hypotheses paired with {} references",
            hypotheses.len(),
            references.len()
        )));
    }
    if hypotheses.is_empty() {
        return Err(Error::invalid("cannot score an empty corpus"));
    }
    Ok(())
}

/// The six scores, each in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MetricScores {
    pub bleu1: f64,
    pub bleu2: f64,
    pub bleu3: f64,
    pub bleu4: f64,
    pub rouge_l: f64,
    pub meteor_lite: f64,
}

impl MetricScores {
    pub fn compute(hypotheses: &[Vec<String>], references: &[Vec<String>]) -> Result<Self> {
        Ok(MetricScores {
            bleu1: bleu_n(hypotheses, references, 1)?,
            bleu2: bleu_n(hypotheses, references, 2)?,
            bleu3: bleu_n(hypotheses, references, 3)?,
            bleu4: bleu_n(hypotheses, references, 4)?,
            rouge_l: rouge_l(hypotheses, references)?,
            meteor_lite: meteor_lite(hypotheses, references)?,
        })
    }

    /// Scores as they appear in result tables: ×100, two decimals.
    pub fn table(&self) -> MetricScores {
        let scale = |v: f64| (v * 10_000.0).round() / 100.0;
        MetricScores {
            bleu1: scale(self.bleu1),
            bleu2: scale(self.bleu2),
            bleu3: scale(self.bleu3),
            bleu4: scale(self.bleu4),
            rouge_l: scale(self.rouge_l),
            meteor_lite: scale(self.meteor_lite),
        }
    }
}

/// Scores for one infill stratum.
#[derive(Debug, Clone, Serialize)]
pub struct InfillSlice {
    /// `None` is the unmasked stratum.
    pub infill_index: Option<usize>,
    pub n_pairs: usize,
    pub raw: MetricScores,
    pub table: MetricScores,
}

/// The full evaluation report for one generation run.
#[derive(Debug, Clone, Serialize)]
pub struct MetricReport {
    /// `"narrative"` (steps concatenated per narrative) or `"step"`.
    pub pairing: String,
    pub n_pairs: usize,
    /// Mean generated token count per narrative.
    pub avg_generated_length: f64,
    /// Raw scores in `[0, 1]` at full precision.
    pub raw: MetricScores,
    /// The same scores ×100 rounded to two decimals.
    pub table: MetricScores,
    /// Per-infill-index strata; empty when no generation was an infill.
    pub per_infill_index: Vec<InfillSlice>,
}

impl MetricReport {
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut json = serde_json::to_string_pretty(self)?;
        json.push('\n');
        std::fs::write(path, json)?;
        Ok(())
    }
}

/// Tokenized hypothesis/reference pair lists for a set of generations.
/// With `per_step` false, each narrative's steps concatenate into one
/// pair; otherwise every step is its own pair. References are clipped
/// to the generated step count (generation may have truncated steps).
fn assemble_pairs(
    generations: &[GeneratedNarrative],
    by_id: &HashMap<&str, &Narrative>,
    per_step: bool,
) -> Result<(Vec<Vec<String>>, Vec<Vec<String>>)> {
    let mut hyps = Vec::new();
    let mut refs = Vec::new();
    for gen in generations {
        let narrative = by_id[gen.narrative_id.as_str()];
        let steps = gen.steps.len().min(narrative.steps.len());
        if per_step {
            for k in 0..steps {
                hyps.push(tokenize(&gen.steps[k]));
                refs.push(narrative.steps[k].tokens.clone());
            }
        } else {
            let mut hyp = Vec::new();
            let mut rf = Vec::new();
            for k in 0..steps {
                hyp.extend(tokenize(&gen.steps[k]));
                rf.extend(narrative.steps[k].tokens.iter().cloned());
            }
            hyps.push(hyp);
            refs.push(rf);
        }
    }
    Ok((hyps, refs))
}

/// Score a generation run against its reference corpus. Generations
/// carrying `infill_index` values additionally get per-index strata.
pub fn evaluate_run(
    generations: &[GeneratedNarrative],
    references: &[Narrative],
    per_step: bool,
) -> Result<MetricReport> {
    if generations.is_empty() {
        return Err(Error::invalid("no generations to evaluate"));
    }
    let by_id: HashMap<&str, &Narrative> =
        references.iter().map(|n| (n.id.as_str(), n)).collect();
    let missing: Vec<&str> = generations
        .iter()
        .map(|g| g.narrative_id.as_str())
        .filter(|id| !by_id.contains_key(id))
        .collect();
    if !missing.is_empty() {
        return Err(Error::invalid(format!(
            "generations reference unknown narrative ids: {}",
            missing.join(", ")
        )));
    }

    let (hyps, refs) = assemble_pairs(generations, &by_id, per_step)?;
    let raw = MetricScores::compute(&hyps, &refs)?;

    let total_tokens: usize =
        generations.iter().map(|g| g.steps.iter().map(|s| tokenize(s).len()).sum::<usize>()).sum();
    let avg_generated_length = total_tokens as f64 / generations.len() as f64;

    let mut per_infill_index = Vec::new();
    if generations.iter().any(|g| g.infill_index.is_some()) {
        let mut strata: Vec<Option<usize>> =
            generations.iter().map(|g| g.infill_index).collect();
        strata.sort();
        strata.dedup();
        for stratum in strata {
            let subset: Vec<GeneratedNarrative> = generations
                .iter()
                .filter(|g| g.infill_index == stratum)
                .cloned()
                .collect();
            let (h, r) = assemble_pairs(&subset, &by_id, per_step)?;
            let raw = MetricScores::compute(&h, &r)?;
            per_infill_index.push(InfillSlice {
                infill_index: stratum,
                n_pairs: h.len(),
                raw,
                table: raw.table(),
            });
        }
    }

    Ok(MetricReport {
        pairing: if per_step { "step" } else { "narrative" }.to_string(),
        n_pairs: hyps.len(),
        avg_generated_length,
        table: raw.table(),
        raw,
        per_infill_index,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{FeatureSource, Step};

    fn narrative(id: &str, steps: &[&str]) -> Narrative {
        Narrative {
            id: id.into(),
            category: "recipes".into(),
            steps: steps
                .iter()
                .map(|t| Step::new(*t, vec![0.1, 0.2], FeatureSource::Synthetic))
                .collect(),
        }
    }

    fn generation(id: &str, infill: Option<usize>, steps: &[&str]) -> GeneratedNarrative {
        GeneratedNarrative {
            narrative_id: id.into(),
            infill_index: infill,
            steps: steps.iter().map(|s| s.to_string()).collect(),
            log_probs: vec![-1.0; steps.len()],
            truncated: vec![false; steps.len()],
        }
    }

    #[test]
    fn perfect_generations_score_one_everywhere() {
        let refs = vec![narrative("a", &["heat the oil", "add onion"])];
        let gens = vec![generation("a", None, &["heat the oil", "add onion"])];
        let report = evaluate_run(&gens, &refs, false).unwrap();
        assert_eq!(report.raw.bleu1, 1.0);
        assert_eq!(report.raw.bleu4, 1.0);
        assert_eq!(report.raw.rouge_l, 1.0);
        assert_eq!(report.table.bleu1, 100.0);
        assert_eq!(report.n_pairs, 1);
        assert_eq!(report.avg_generated_length, 5.0);
        assert!(report.per_infill_index.is_empty());
    }

    #[test]
    fn corpus_bleu1_matches_a_hand_computation() {
        let refs = vec![
            narrative("a", &["the cat sat"]),
            narrative("b", &["a dog runs"]),
            narrative("c", &["mix it"]),
        ];
        let gens = vec![
            generation("a", None, &["the cat"]),
            generation("b", None, &["a dog runs"]),
            generation("c", None, &["mix mix mix"]),
        ];
        // Clipped unigrams 2 + 3 + 1 over 2 + 3 + 3; c = r = 8 so BP = 1.
        let report = evaluate_run(&gens, &refs, false).unwrap();
        assert!((report.raw.bleu1 - 0.75).abs() < 1e-9, "{}", report.raw.bleu1);
    }

    #[test]
    fn unknown_ids_are_reported_by_name() {
        let refs = vec![narrative("a", &["x"])];
        let gens = vec![generation("ghost", None, &["x"])];
        let err = evaluate_run(&gens, &refs, false).unwrap_err();
        assert!(err.to_string().contains("ghost"), "{err}");
    }

    #[test]
    fn infill_runs_get_per_index_strata() {
        let refs = vec![narrative("a", &["heat the oil", "add onion"])];
        let gens = vec![
            generation("a", None, &["heat the oil", "add onion"]),
            generation("a", Some(0), &["warm the oil", "add onion"]),
            generation("a", Some(1), &["heat the oil", "put onion"]),
        ];
        let report = evaluate_run(&gens, &refs, false).unwrap();
        assert_eq!(report.n_pairs, 3);
        let indices: Vec<Option<usize>> =
            report.per_infill_index.iter().map(|s| s.infill_index).collect();
        assert_eq!(indices, vec![None, Some(0), Some(1)]);
        assert_eq!(report.per_infill_index[0].raw.bleu1, 1.0);
        assert!(report.per_infill_index[1].raw.bleu1 < 1.0);
    }

    #[test]
    fn per_step_pairing_scores_each_step_separately() {
        let refs = vec![narrative("a", &["heat the oil", "add onion"])];
        let gens = vec![generation("a", None, &["heat the oil", "add onion"])];
        let report = evaluate_run(&gens, &refs, true).unwrap();
        assert_eq!(report.pairing, "step");
        assert_eq!(report.n_pairs, 2);
        assert_eq!(report.raw.rouge_l, 1.0);
    }

    #[test]
    fn references_clip_to_the_generated_step_count() {
        // The reference has a third step the generator never saw
        // (max_steps truncation); scoring only covers the shared ones.
        let refs = vec![narrative("a", &["heat the oil", "add onion", "serve warm"])];
        let gens = vec![generation("a", None, &["heat the oil", "add onion"])];
        let report = evaluate_run(&gens, &refs, false).unwrap();
        assert_eq!(report.raw.bleu1, 1.0);
        assert_eq!(report.raw.meteor_lite, 1.0 - 0.5 / 125.0);
    }

    #[test]
    fn table_scores_are_rounded_to_two_decimals() {
        let refs = vec![narrative("a", &["the cat sat down"])];
        let gens = vec![generation("a", None, &["the cat"])];
        let report = evaluate_run(&gens, &refs, false).unwrap();
        // BLEU-1 = exp(1 - 4/2) = e^-1 = 0.36787944... -> 36.79.
        assert_eq!(report.table.bleu1, 36.79);
    }
}
