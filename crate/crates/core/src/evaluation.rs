//! Case-insensitive corpus BLEU and reconstruction reporting.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{Sentence, TokenId};
use crate::error::{Error, Result};
use crate::model::TranslationModel;
use crate::semisup::{reconstruction_marginal, viterbi_from, LatentSearch};

pub const MAX_ORDER: usize = 4;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    /// Score on the 0–100 scale.
    pub bleu: f64,
    pub precisions: [f64; MAX_ORDER],
    pub matches: [usize; MAX_ORDER],
    pub totals: [usize; MAX_ORDER],
    pub brevity_penalty: f64,
    pub candidate_length: usize,
    pub reference_length: usize,
    pub smoothed: bool,
}

fn ngram_counts(tokens: &[String], n: usize) -> HashMap<&[String], usize> {
    let mut counts = HashMap::new();
    if tokens.len() >= n {
        for w in tokens.windows(n) {
            *counts.entry(w).or_insert(0) += 1;
        }
    }
    counts
}

fn fold(tokens: &[String]) -> Vec<String> {
    tokens.iter().map(|t| t.to_lowercase()).collect()
}

/// Corpus-level BLEU over up to 4-grams. Each candidate may have several
/// references; clipped counts use the per-n-gram maximum over references and
/// the effective reference length is the closest one (shorter on ties).
/// Unsmoothed mode returns 0 when any precision is 0; smoothed mode adds one
/// to the numerator and denominator of the 2- to 4-gram precisions.
pub fn corpus_bleu(candidates: &[Vec<String>], references: &[Vec<Vec<String>>], smoothed: bool) -> Result<EvalReport> {
    if candidates.len() != references.len() {
        return Err(Error::InvalidArgument(format!(
            "{} candidates but {} reference sets",
            candidates.len(),
            references.len()
        )));
    }
    let mut matches = [0usize; MAX_ORDER];
    let mut totals = [0usize; MAX_ORDER];
    let mut cand_len = 0usize;
    let mut ref_len = 0usize;

    for (cand, refs) in candidates.iter().zip(references) {
        if refs.is_empty() {
            return Err(Error::InvalidArgument("candidate without a reference".into()));
        }
        let cand = fold(cand);
        let refs: Vec<Vec<String>> = refs.iter().map(|r| fold(r)).collect();
        cand_len += cand.len();
        let c = cand.len() as isize;
        let closest = refs
            .iter()
            .map(|r| r.len())
            .min_by_key(|&l| ((l as isize - c).abs(), l))
            .unwrap_or(0);
        ref_len += closest;

        for n in 1..=MAX_ORDER {
            let counts = ngram_counts(&cand, n);
            let mut max_ref: HashMap<&[String], usize> = HashMap::new();
            for r in &refs {
                for (gram, cnt) in ngram_counts(r, n) {
                    let e = max_ref.entry(gram).or_insert(0);
                    *e = (*e).max(cnt);
                }
            }
            for (gram, cnt) in &counts {
                matches[n - 1] += (*cnt).min(max_ref.get(gram).copied().unwrap_or(0));
            }
            totals[n - 1] += cand.len().saturating_sub(n - 1);
        }
    }

    let mut precisions = [0.0; MAX_ORDER];
    for n in 0..MAX_ORDER {
        let (m, t) = if smoothed && n > 0 {
            (matches[n] as f64 + 1.0, totals[n] as f64 + 1.0)
        } else {
            (matches[n] as f64, totals[n] as f64)
        };
        precisions[n] = if t > 0.0 { m / t } else { 0.0 };
    }
    let brevity_penalty = if cand_len == 0 {
        0.0
    } else if cand_len < ref_len {
        (1.0 - ref_len as f64 / cand_len as f64).exp()
    } else {
        1.0
    };
    let bleu = if precisions.iter().any(|&p| p <= 0.0) {
        0.0
    } else {
        let mean_log = precisions.iter().map(|p| p.ln()).sum::<f64>() / MAX_ORDER as f64;
        100.0 * brevity_penalty * mean_log.exp()
    };
    Ok(EvalReport {
        bleu,
        precisions,
        matches,
        totals,
        brevity_penalty,
        candidate_length: cand_len,
        reference_length: ref_len,
        smoothed,
    })
}

/// Seeded bootstrap resampling of corpus BLEU over sentence indices.
pub fn bootstrap_bleu(
    candidates: &[Vec<String>],
    references: &[Vec<Vec<String>>],
    samples: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    if candidates.is_empty() {
        return Err(Error::Empty("bootstrap corpus"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = candidates.len();
    (0..samples)
        .map(|_| {
            let idx: Vec<usize> = (0..n).map(|_| rng.gen_range(0..n)).collect();
            let c: Vec<_> = idx.iter().map(|&i| candidates[i].clone()).collect();
            let r: Vec<_> = idx.iter().map(|&i| references[i].clone()).collect();
            corpus_bleu(&c, &r, false).map(|rep| rep.bleu)
        })
        .collect()
}

/// One monolingual sentence with its best latent translation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ViterbiExample {
    pub observed: Vec<TokenId>,
    pub latent: Vec<TokenId>,
    pub joint_log_score: f64,
    pub log_marginal: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReconstructionReport {
    pub mean_log_marginal: f64,
    pub sentences: usize,
    pub examples: Vec<ViterbiExample>,
}

/// Averages the restricted reconstruction log-probability of `sample` where
/// `encoder` maps the observed language into the latent one and `decoder`
/// maps back. Keeps the Viterbi latent of the first `max_examples` sentences.
pub fn reconstruction_report(
    encoder: &TranslationModel,
    decoder: &TranslationModel,
    sample: &[Sentence],
    search: LatentSearch,
    max_examples: usize,
) -> Result<ReconstructionReport> {
    if sample.is_empty() {
        return Err(Error::Empty("reconstruction sample"));
    }
    let mut total = 0.0;
    let mut examples = Vec::new();
    for (i, s) in sample.iter().enumerate() {
        let (lm, set) = reconstruction_marginal(encoder, decoder, s.ids(), search)?;
        total += lm;
        if i < max_examples {
            let v = viterbi_from(&set, lm)?;
            examples.push(ViterbiExample {
                observed: s.ids().to_vec(),
                latent: v.hypothesis.tokens,
                joint_log_score: v.joint_log_score,
                log_marginal: lm,
            });
        }
    }
    Ok(ReconstructionReport { mean_log_marginal: total / sample.len() as f64, sentences: sample.len(), examples })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::tokenize;

    fn t(s: &str) -> Vec<String> {
        tokenize(s)
    }

    #[test]
    fn identity_scores_100() {
        let c = vec![t("the cat sat on the mat")];
        let r = vec![vec![t("the cat sat on the mat")]];
        let rep = corpus_bleu(&c, &r, false).unwrap();
        assert!((rep.bleu - 100.0).abs() < 1e-9);
        assert_eq!(rep.brevity_penalty, 1.0);
    }

    #[test]
    fn disjoint_scores_zero() {
        let rep = corpus_bleu(&[t("a b c d")], &[vec![t("w x y z")]], false).unwrap();
        assert_eq!(rep.bleu, 0.0);
    }

    #[test]
    fn hand_derived_short_candidate() {
        let rep = corpus_bleu(&[t("the cat sat on")], &[vec![t("the cat sat on the mat")]], false).unwrap();
        assert_eq!(rep.precisions, [1.0; 4]);
        assert!((rep.brevity_penalty - (-0.5f64).exp()).abs() < 1e-15);
        assert!((rep.bleu - 60.653066).abs() < 1e-5);
    }

    #[test]
    fn case_insensitive() {
        let rep = corpus_bleu(&[t("The Cat SAT on")], &[vec![t("the cat sat ON")]], false).unwrap();
        assert!((rep.bleu - 100.0).abs() < 1e-9);
    }

    #[test]
    fn closest_reference_length_prefers_shorter_on_tie() {
        // Candidate length 4, references of length 3 and 5: effective length 3.
        let rep = corpus_bleu(&[t("a b c d")], &[vec![t("a b c"), t("a b c d e")]], false).unwrap();
        assert_eq!(rep.reference_length, 3);
        assert_eq!(rep.brevity_penalty, 1.0);
    }

    #[test]
    fn clipped_counts() {
        let rep = corpus_bleu(&[t("the the the the")], &[vec![t("the cat"), t("the the dog")]], false).unwrap();
        assert_eq!(rep.matches[0], 2);
        assert_eq!(rep.totals[0], 4);
    }

    #[test]
    fn zero_higher_order_precision_forces_zero() {
        let rep = corpus_bleu(&[t("a b c d")], &[vec![t("a c b d")]], false).unwrap();
        assert_eq!(rep.matches[3], 0);
        assert_eq!(rep.bleu, 0.0);
        let smooth = corpus_bleu(&[t("a b c d")], &[vec![t("a c b d")]], true).unwrap();
        assert!(smooth.smoothed && smooth.bleu > 0.0);
    }

    #[test]
    fn mismatched_lengths_rejected() {
        assert!(corpus_bleu(&[t("a")], &[], false).is_err());
        assert!(corpus_bleu(&[t("a")], &[vec![]], false).is_err());
    }

    #[test]
    fn bootstrap_is_seeded() {
        let c = vec![t("a b c d e"), t("x y z w v"), t("a b x y z")];
        let r = vec![vec![t("a b c d e")], vec![t("x y z w q")], vec![t("a b x y z")]];
        let a = bootstrap_bleu(&c, &r, 20, 5).unwrap();
        let b = bootstrap_bleu(&c, &r, 20, 5).unwrap();
        assert_eq!(a, b);
        assert!(a.iter().all(|v| (0.0..=100.0).contains(v)));
    }
}
