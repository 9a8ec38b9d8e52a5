//! ROUGE-L: longest-common-subsequence F-measure, averaged per pair.

use crate::Result;

use super::check_paired;

/// Classic two-row LCS dynamic program.
pub(crate) fn lcs_len(a: &[String], b: &[String]) -> usize {
    if a.is_empty() || b.is_empty() {
        return 0;
    }
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    for ai in a {
        for (j, bj) in b.iter().enumerate() {
            cur[j + 1] = if ai == bj { prev[j] + 1 } else { prev[j + 1].max(cur[j]) };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

fn pair_score(hyp: &[String], rf: &[String]) -> f64 {
    if hyp.is_empty() || rf.is_empty() {
        return 0.0;
    }
    let l = lcs_len(hyp, rf) as f64;
    let p = l / hyp.len() as f64;
    let r = l / rf.len() as f64;
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

/// Mean per-pair LCS F1 (β = 1) over the corpus.
pub fn rouge_l(hypotheses: &[Vec<String>], references: &[Vec<String>]) -> Result<f64> {
    check_paired(hypotheses, references)?;
    let total: f64 = hypotheses.iter().zip(references).map(|(h, r)| pair_score(h, r)).sum();
    Ok(total / hypotheses.len() as f64)
}
