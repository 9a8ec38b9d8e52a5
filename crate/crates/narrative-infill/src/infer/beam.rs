//! Length-capped beam search over any per-token decoder.
//!
//! The engine is generic so tests can drive it from hand-built
//! probability tables; the model binds in through [`StepDecoder`].

use crate::corpus::{BOS_ID, EOS_ID};
use crate::{Error, Result};

/// Anything that can score next tokens one step at a time.
pub trait StepDecoder {
    type State: Clone;

    fn initial_state(&self) -> Self::State;

    /// Feed the last emitted token (BOS on the first call) and return
    /// the successor state with log-probabilities over the next token.
    fn advance(&self, state: &Self::State, token: u32) -> (Self::State, Vec<f64>);
}

/// One beam slot: the token prefix (starting with BOS), its cumulative
/// log-probability, and whether EOS has been emitted.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamHypothesis {
    pub tokens: Vec<u32>,
    pub log_prob: f64,
    pub finished: bool,
}

/// Final beam, best hypothesis first.
#[derive(Debug, Clone)]
pub struct BeamResult {
    pub hypotheses: Vec<BeamHypothesis>,
    /// The best hypothesis ran out of length budget before emitting EOS.
    pub truncated: bool,
}

impl BeamResult {
    pub fn best(&self) -> &BeamHypothesis {
        &self.hypotheses[0]
    }
}

struct Slot<S> {
    hyp: BeamHypothesis,
    state: S,
}

/// A candidate extension before materialization: `token` is `None` for
/// a finished parent carried over unchanged.
struct Candidate {
    log_prob: f64,
    parent: usize,
    token: Option<u32>,
}

/// Higher log-probability first; exact ties go to the lexicographically
/// smaller token sequence.
fn rank<S>(a: &Candidate, b: &Candidate, frontier: &[Slot<S>]) -> std::cmp::Ordering {
    match b.log_prob.total_cmp(&a.log_prob) {
        std::cmp::Ordering::Equal => {
            let sa =
                frontier[a.parent].hyp.tokens.iter().copied().chain(a.token.iter().copied());
            let sb =
                frontier[b.parent].hyp.tokens.iter().copied().chain(b.token.iter().copied());
            sa.cmp(sb)
        }
        unequal => unequal,
    }
}

/// Beam search emitting at most `max_len` tokens after BOS. Hypotheses
/// that emit EOS are frozen but keep competing (and occupying slots) by
/// total log-probability; scores are never length-normalized.
pub fn beam_search<D: StepDecoder>(decoder: &D, beam: usize, max_len: usize) -> Result<BeamResult> {
    if beam == 0 {
        return Err(Error::invalid("beam size must be at least 1"));
    }
    if max_len == 0 {
        return Err(Error::invalid("max_len must be at least 1"));
    }

    let mut frontier = vec![Slot {
        hyp: BeamHypothesis { tokens: vec![BOS_ID], log_prob: 0.0, finished: false },
        state: decoder.initial_state(),
    }];

    for _ in 0..max_len {
        if frontier.iter().all(|s| s.hyp.finished) {
            break;
        }
        let mut advanced: Vec<Option<(D::State, Vec<f64>)>> = Vec::with_capacity(frontier.len());
        let mut candidates = Vec::new();
        for (parent, slot) in frontier.iter().enumerate() {
            if slot.hyp.finished {
                advanced.push(None);
                candidates.push(Candidate { log_prob: slot.hyp.log_prob, parent, token: None });
                continue;
            }
            let last = *slot.hyp.tokens.last().expect("prefix always starts with BOS");
            let (state, log_probs) = decoder.advance(&slot.state, last);
            for (v, &lp) in log_probs.iter().enumerate() {
                candidates.push(Candidate {
                    log_prob: slot.hyp.log_prob + lp,
                    parent,
                    token: Some(v as u32),
                });
            }
            advanced.push(Some((state, log_probs)));
        }
        candidates.sort_by(|a, b| rank(a, b, &frontier));
        candidates.truncate(beam);

        let next: Vec<Slot<D::State>> = candidates
            .into_iter()
            .map(|c| match c.token {
                None => Slot {
                    hyp: frontier[c.parent].hyp.clone(),
                    state: frontier[c.parent].state.clone(),
                },
                Some(token) => {
                    let mut tokens = frontier[c.parent].hyp.tokens.clone();
                    tokens.push(token);
                    let (state, _) = advanced[c.parent].as_ref().expect("unfinished parent");
                    Slot {
                        hyp: BeamHypothesis {
                            tokens,
                            log_prob: c.log_prob,
                            finished: token == EOS_ID,
                        },
                        state: state.clone(),
                    }
                }
            })
            .collect();
        frontier = next;
    }

    let mut hypotheses: Vec<BeamHypothesis> = frontier.into_iter().map(|s| s.hyp).collect();
    hypotheses.sort_by(|a, b| {
        b.log_prob.total_cmp(&a.log_prob).then_with(|| a.tokens.cmp(&b.tokens))
    });
    let truncated = !hypotheses[0].finished;
    Ok(BeamResult { hypotheses, truncated })
}
