//! Objective arithmetic for semi-supervised training.
//!
//! A monolingual sentence `y` is reconstructed through a latent sentence `x`
//! of the other language: `log P(y' = y | y) = log Σ_x P(x | y; enc) P(y | x; dec)`.
//! The sum runs over the top-k beam list `X̃(y)` instead of every sentence.
//! With `X̃` held fixed, the gradient of the restricted marginal is the
//! posterior-weighted average of the two factors' log-probability
//! gradients, with weights `w_x ∝ P(x | y; enc) P(y | x; dec)`.

use serde::{Deserialize, Serialize};

use crate::corpus::{Sentence, TokenId};
use crate::decoding::{beam_search_with, default_max_len, rank, CandidateSet, Hypothesis, SearchParams};
use crate::error::{Error, Result};
use crate::model::TranslationModel;
use crate::numerics::{log_sum_exp, GradBuffer, Graph};

/// Tolerance on `Σ w_x = 1` accepted by [`reconstruction_grads`].
pub const WEIGHT_SUM_TOLERANCE: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveWeights {
    /// Weight of the target autoencoder (target monolingual corpus).
    pub lambda1: f64,
    /// Weight of the source autoencoder (source monolingual corpus).
    pub lambda2: f64,
}

impl ObjectiveWeights {
    pub fn new(lambda1: f64, lambda2: f64) -> Result<Self> {
        if !(lambda1 >= 0.0 && lambda2 >= 0.0) || !lambda1.is_finite() || !lambda2.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "objective weights must be non-negative, got {lambda1}, {lambda2}"
            )));
        }
        Ok(ObjectiveWeights { lambda1, lambda2 })
    }
}

impl Default for ObjectiveWeights {
    fn default() -> Self {
        ObjectiveWeights { lambda1: 0.1, lambda2: 0.0 }
    }
}

/// Candidate generation settings for the latent space.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LatentSearch {
    pub k: usize,
    pub beam_width: usize,
    /// Fixed latent length cap; `None` means `2·|observed| + 3`.
    pub max_len: Option<usize>,
}

impl LatentSearch {
    pub fn new(k: usize) -> Self {
        LatentSearch { k, beam_width: 2 * k, max_len: None }
    }

    pub fn params_for(&self, observed_len: usize) -> SearchParams {
        SearchParams {
            beam_width: self.beam_width,
            k: self.k,
            max_len: self.max_len.unwrap_or_else(|| default_max_len(observed_len)),
            // Latent sentences feed the other model's encoder, so they must be nonempty.
            min_len: 1,
        }
    }
}

/// Mean negative log-likelihood of a batch and the gradient of that mean.
pub fn supervised_batch(model: &TranslationModel, batch: &[(Sentence, Sentence)]) -> Result<(f64, GradBuffer)> {
    if batch.is_empty() {
        return Err(Error::Empty("supervised batch"));
    }
    let mut g = Graph::new(model.params());
    let mut terms = Vec::with_capacity(batch.len());
    for (x, y) in batch {
        terms.push((model.score_into(&mut g, x.ids(), y.ids())?, 1.0));
    }
    let total = g.lin_comb(&terms)?;
    let b = batch.len() as f64;
    let mut grads = model.params().new_buffer();
    g.backward(total, -1.0 / b, &mut grads)?;
    Ok((-g.scalar(total) / b, grads))
}

/// Posterior weights `exp(s_x - log Σ exp s)` and the log normalizer.
fn normalize(joint: &[f64]) -> (f64, Vec<f64>) {
    let lm = log_sum_exp(joint);
    (lm, joint.iter().map(|s| (s - lm).exp()).collect())
}

/// Approximate log-probability of reconstructing `observed` through the
/// latent language, with the candidate list and normalized weights.
pub fn reconstruction_marginal(
    encoder: &TranslationModel,
    decoder: &TranslationModel,
    observed: &[TokenId],
    search: LatentSearch,
) -> Result<(f64, CandidateSet)> {
    let candidates = beam_search_with(encoder, observed, search.params_for(observed.len()))?;
    restricted_marginal(encoder, decoder, observed, candidates)
}

/// Log marginal over a caller-supplied candidate list. Hypothesis scores are
/// recomputed under the encoder so arbitrary lists can be evaluated.
pub fn restricted_marginal(
    encoder: &TranslationModel,
    decoder: &TranslationModel,
    observed: &[TokenId],
    mut candidates: CandidateSet,
) -> Result<(f64, CandidateSet)> {
    if candidates.is_empty() {
        return Err(Error::Empty("candidate set"));
    }
    let mut joint = Vec::with_capacity(candidates.len());
    for h in &mut candidates.hypotheses {
        h.log_score = encoder.log_prob(observed, &h.tokens)?;
        joint.push(h.log_score + decoder.log_prob(&h.tokens, observed)?);
    }
    let (lm, weights) = normalize(&joint);
    candidates.weights = weights;
    Ok((lm, candidates))
}

/// Gradients of the restricted log marginal with the candidate list held
/// fixed: `(Σ w_x ∇ log P(x | y; enc), Σ w_x ∇ log P(y | x; dec))`.
pub fn reconstruction_grads(
    encoder: &TranslationModel,
    decoder: &TranslationModel,
    observed: &[TokenId],
    candidates: &CandidateSet,
) -> Result<(GradBuffer, GradBuffer)> {
    if candidates.is_empty() || candidates.weights.len() != candidates.len() {
        return Err(Error::InvalidArgument("candidate set has no matching weights".into()));
    }
    let total: f64 = candidates.weights.iter().sum();
    if (total - 1.0).abs() > WEIGHT_SUM_TOLERANCE || candidates.weights.iter().any(|w| *w < 0.0) {
        return Err(Error::InvalidArgument(format!("weights sum to {total}, expected 1")));
    }
    let enc_grads = encoder_factor_grads(encoder, observed, candidates)?.1;
    let dec_grads = decoder_factor_grads(decoder, observed, candidates)?.1;
    Ok((enc_grads, dec_grads))
}

fn encoder_factor_grads(
    encoder: &TranslationModel,
    observed: &[TokenId],
    candidates: &CandidateSet,
) -> Result<(Vec<f64>, GradBuffer)> {
    let mut g = Graph::new(encoder.params());
    let enc = encoder.encode(&mut g, observed)?;
    let mut nodes = Vec::with_capacity(candidates.len());
    for h in &candidates.hypotheses {
        nodes.push(encoder.score_encoded(&mut g, &enc, &h.tokens)?);
    }
    let scores = nodes.iter().map(|&n| g.scalar(n)).collect();
    let terms: Vec<_> = nodes.into_iter().zip(candidates.weights.iter().copied()).collect();
    let mut grads = encoder.params().new_buffer();
    if !terms.is_empty() && !candidates.weights.is_empty() {
        let combined = g.lin_comb(&terms)?;
        g.backward(combined, 1.0, &mut grads)?;
    }
    Ok((scores, grads))
}

fn decoder_factor_grads(
    decoder: &TranslationModel,
    observed: &[TokenId],
    candidates: &CandidateSet,
) -> Result<(Vec<f64>, GradBuffer)> {
    let mut g = Graph::new(decoder.params());
    let mut nodes = Vec::with_capacity(candidates.len());
    for h in &candidates.hypotheses {
        nodes.push(decoder.score_into(&mut g, &h.tokens, observed)?);
    }
    let scores = nodes.iter().map(|&n| g.scalar(n)).collect();
    let mut grads = decoder.params().new_buffer();
    if candidates.weights.len() == nodes.len() {
        let terms: Vec<_> = nodes.into_iter().zip(candidates.weights.iter().copied()).collect();
        let combined = g.lin_comb(&terms)?;
        g.backward(combined, 1.0, &mut grads)?;
    }
    Ok((scores, grads))
}

/// Everything one reconstruction contributes to a training step.
#[derive(Clone, Debug)]
pub struct Reconstruction {
    pub log_marginal: f64,
    pub candidates: CandidateSet,
    pub encoder_grads: GradBuffer,
    pub decoder_grads: GradBuffer,
}

/// Candidate search, weights and both gradients in one pass. The decoder
/// factor is evaluated on the tape once and differentiated after the weights
/// are known.
pub fn reconstruct(
    encoder: &TranslationModel,
    decoder: &TranslationModel,
    observed: &[TokenId],
    search: LatentSearch,
) -> Result<Reconstruction> {
    let mut candidates = beam_search_with(encoder, observed, search.params_for(observed.len()))?;

    let mut g = Graph::new(decoder.params());
    let mut nodes = Vec::with_capacity(candidates.len());
    for h in &candidates.hypotheses {
        nodes.push(decoder.score_into(&mut g, &h.tokens, observed)?);
    }
    let joint: Vec<f64> = candidates
        .hypotheses
        .iter()
        .zip(&nodes)
        .map(|(h, &n)| h.log_score + g.scalar(n))
        .collect();
    let (log_marginal, weights) = normalize(&joint);
    let terms: Vec<_> = nodes.into_iter().zip(weights.iter().copied()).collect();
    let combined = g.lin_comb(&terms)?;
    let mut decoder_grads = decoder.params().new_buffer();
    g.backward(combined, 1.0, &mut decoder_grads)?;
    drop(g);

    candidates.weights = weights;
    let (_, encoder_grads) = encoder_factor_grads(encoder, observed, &candidates)?;
    Ok(Reconstruction { log_marginal, candidates, encoder_grads, decoder_grads })
}

/// The latent candidate with the largest joint score `P(x | y) P(y | x)`.
#[derive(Clone, Debug, PartialEq)]
pub struct ViterbiLatent {
    pub hypothesis: Hypothesis,
    pub joint_log_score: f64,
    pub weight: f64,
}

pub fn viterbi_latent(
    encoder: &TranslationModel,
    decoder: &TranslationModel,
    observed: &[TokenId],
    search: LatentSearch,
) -> Result<ViterbiLatent> {
    let (lm, set) = reconstruction_marginal(encoder, decoder, observed, search)?;
    viterbi_from(&set, lm)
}

/// Picks the max-weight candidate, ties to the lexicographically smaller sequence.
pub fn viterbi_from(set: &CandidateSet, log_marginal: f64) -> Result<ViterbiLatent> {
    let best = (0..set.len())
        .min_by(|&a, &b| {
            let (ha, hb) = (&set.hypotheses[a], &set.hypotheses[b]);
            rank(set.weights[a], &ha.tokens, set.weights[b], &hb.tokens)
        })
        .ok_or(Error::Empty("candidate set"))?;
    Ok(ViterbiLatent {
        hypothesis: set.hypotheses[best].clone(),
        joint_log_score: log_marginal + set.weights[best].ln(),
        weight: set.weights[best],
    })
}

/// Scalar pieces of one joint evaluation.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveParts {
    /// Mean NLL of the source-to-target model on the parallel batch.
    pub supervised_s2t: f64,
    /// Mean NLL of the target-to-source model on the parallel batch.
    pub supervised_t2s: f64,
    /// Mean restricted log marginal of the target autoencoder, if evaluated.
    pub reconstruction_target: Option<f64>,
    /// Mean restricted log marginal of the source autoencoder, if evaluated.
    pub reconstruction_source: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct JointOutcome {
    /// Batch contribution to the objective being maximized.
    pub objective: f64,
    pub parts: ObjectiveParts,
    /// `∂J/∂θ→`
    pub grads_s2t: GradBuffer,
    /// `∂J/∂θ←`
    pub grads_t2s: GradBuffer,
}

/// Objective contribution of one parallel batch and two monolingual batches:
/// `J = mean log P(y|x;θ→) + mean log P(x|y;θ←) + λ1 · mean_T recon + λ2 · mean_S recon`.
/// A term whose batch is empty or whose weight is zero is skipped entirely.
pub fn joint_objective(
    s2t: &TranslationModel,
    t2s: &TranslationModel,
    parallel: &[(Sentence, Sentence)],
    target_mono: &[Sentence],
    source_mono: &[Sentence],
    weights: ObjectiveWeights,
    search: LatentSearch,
) -> Result<JointOutcome> {
    let use_target = weights.lambda1 > 0.0 && !target_mono.is_empty();
    let use_source = weights.lambda2 > 0.0 && !source_mono.is_empty();
    if parallel.is_empty() && !use_target && !use_source {
        return Err(Error::Empty("all batches"));
    }
    let mut grads_s2t = s2t.params().new_buffer();
    let mut grads_t2s = t2s.params().new_buffer();
    let mut parts = ObjectiveParts::default();
    let mut objective = 0.0;

    if !parallel.is_empty() {
        let (loss, g) = supervised_batch(s2t, parallel)?;
        grads_s2t.add_scaled(&g, -1.0);
        parts.supervised_s2t = loss;
        let reversed: Vec<(Sentence, Sentence)> = parallel.iter().map(|(x, y)| (y.clone(), x.clone())).collect();
        let (loss, g) = supervised_batch(t2s, &reversed)?;
        grads_t2s.add_scaled(&g, -1.0);
        parts.supervised_t2s = loss;
        objective -= parts.supervised_s2t + parts.supervised_t2s;
    }

    // Target autoencoder: θ← encodes y into a latent source sentence, θ→ reconstructs y.
    if use_target {
        let scale = weights.lambda1 / target_mono.len() as f64;
        let mut sum = 0.0;
        for y in target_mono {
            let r = reconstruct(t2s, s2t, y.ids(), search)?;
            sum += r.log_marginal;
            grads_t2s.add_scaled(&r.encoder_grads, scale);
            grads_s2t.add_scaled(&r.decoder_grads, scale);
        }
        let mean = sum / target_mono.len() as f64;
        parts.reconstruction_target = Some(mean);
        objective += weights.lambda1 * mean;
    }

    // Source autoencoder: θ→ encodes x into a latent target sentence, θ← reconstructs x.
    if use_source {
        let scale = weights.lambda2 / source_mono.len() as f64;
        let mut sum = 0.0;
        for x in source_mono {
            let r = reconstruct(s2t, t2s, x.ids(), search)?;
            sum += r.log_marginal;
            grads_s2t.add_scaled(&r.encoder_grads, scale);
            grads_t2s.add_scaled(&r.decoder_grads, scale);
        }
        let mean = sum / source_mono.len() as f64;
        parts.reconstruction_source = Some(mean);
        objective += weights.lambda2 * mean;
    }

    if !objective.is_finite() {
        return Err(Error::NonFinite("joint objective".into()));
    }
    Ok(JointOutcome { objective, parts, grads_s2t, grads_t2s })
}
