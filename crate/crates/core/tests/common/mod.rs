//! Independent oracles shared by the integration tests: central finite
//! differences and brute-force enumeration of tiny output spaces.

#![allow(dead_code)]

use rand::Rng;
use seminmt::corpus::{TokenId, BOS, EOS};
use seminmt::numerics::{log_sum_exp, relative_error, GradBuffer, ParameterStore};
use seminmt::{Direction, TranslationModel};

pub const FD_STEP: f64 = 1e-5;
pub const FD_TOLERANCE: f64 = 1e-4;
/// Denominator floor for components whose true gradient vanishes.
pub const FD_FLOOR: f64 = 1e-6;

/// A tiny model whose parameters are scaled up from the default init so the
/// output distributions are far from uniform.
pub fn tiny_model(direction: Direction, vocab_in: usize, vocab_out: usize, e: usize, h: usize, seed: u64, scale: f64) -> TranslationModel {
    let mut m = TranslationModel::with_sizes(direction, vocab_in, vocab_out, e, h, seed).unwrap();
    let v: Vec<f64> = m.params().flat_values().iter().map(|x| x * scale).collect();
    m.params_mut().set_flat_values(&v).unwrap();
    m
}

/// Flattens a gradient buffer in store order; untouched slots are zero.
pub fn flatten(store: &ParameterStore, grads: &GradBuffer) -> Vec<f64> {
    let mut out = Vec::with_capacity(store.scalar_count());
    for id in store.ids() {
        match grads.get(id) {
            Some(g) => out.extend_from_slice(g),
            None => out.extend(std::iter::repeat(0.0).take(store.value(id).len())),
        }
    }
    out
}

/// Central differences of `f` with respect to every scalar of `model`.
pub fn numeric_grad(model: &mut TranslationModel, f: &dyn Fn(&TranslationModel) -> f64) -> Vec<f64> {
    let base = model.params().flat_values();
    let mut out = Vec::with_capacity(base.len());
    let mut theta = base.clone();
    for i in 0..base.len() {
        theta[i] = base[i] + FD_STEP;
        model.params_mut().set_flat_values(&theta).unwrap();
        let plus = f(model);
        theta[i] = base[i] - FD_STEP;
        model.params_mut().set_flat_values(&theta).unwrap();
        let minus = f(model);
        theta[i] = base[i];
        out.push((plus - minus) / (2.0 * FD_STEP));
    }
    model.params_mut().set_flat_values(&base).unwrap();
    out
}

/// Largest elementwise relative error between two gradients.
pub fn max_relative_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    assert_eq!(analytic.len(), numeric.len());
    analytic.iter().zip(numeric).map(|(&a, &n)| relative_error(a, n, FD_FLOOR)).fold(0.0, f64::max)
}

/// Ids a decoder may emit inside a sentence (everything but BOS and EOS).
pub fn emittable(vocab_out: usize) -> Vec<TokenId> {
    (0..vocab_out).filter(|&t| t != BOS && t != EOS).collect()
}

/// Every sequence over the emittable ids with length in `min_len..=max_len`,
/// shortest first, lexicographic within a length.
pub fn all_sequences(vocab_out: usize, min_len: usize, max_len: usize) -> Vec<Vec<TokenId>> {
    let alphabet = emittable(vocab_out);
    let mut out = Vec::new();
    let mut level: Vec<Vec<TokenId>> = vec![Vec::new()];
    for len in 0..=max_len {
        if len >= min_len {
            out.extend(level.iter().cloned());
        }
        level = level
            .iter()
            .flat_map(|s| {
                alphabet.iter().map(move |&t| {
                    let mut n = s.clone();
                    n.push(t);
                    n
                })
            })
            .collect();
    }
    out
}

/// Exhaustive top-k by descending log-probability, ties to the
/// lexicographically smaller sequence.
pub fn exhaustive_top_k(model: &TranslationModel, input: &[TokenId], max_len: usize, min_len: usize, k: usize) -> Vec<(Vec<TokenId>, f64)> {
    let mut scored: Vec<(Vec<TokenId>, f64)> = all_sequences(model.config().vocab_out, min_len, max_len)
        .into_iter()
        .map(|s| {
            let lp = model.log_prob(input, &s).unwrap();
            (s, lp)
        })
        .collect();
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    scored.truncate(k);
    scored
}

/// Brute-force reconstruction quantities over an explicit latent space.
pub struct Enumerated {
    pub latents: Vec<Vec<TokenId>>,
    pub joint: Vec<f64>,
    pub log_marginal: f64,
    pub weights: Vec<f64>,
    pub encoder_grad: Vec<f64>,
    pub decoder_grad: Vec<f64>,
}

/// Marginal, weights and weighted per-candidate gradients computed one
/// sentence pair at a time, independently of the batched library path.
pub fn enumerate_reconstruction(
    encoder: &TranslationModel,
    decoder: &TranslationModel,
    observed: &[TokenId],
    latents: Vec<Vec<TokenId>>,
) -> Enumerated {
    let joint: Vec<f64> = latents
        .iter()
        .map(|x| encoder.log_prob(observed, x).unwrap() + decoder.log_prob(x, observed).unwrap())
        .collect();
    let log_marginal = log_sum_exp(&joint);
    let weights: Vec<f64> = joint.iter().map(|s| (s - log_marginal).exp()).collect();
    let mut encoder_grad = vec![0.0; encoder.params().scalar_count()];
    let mut decoder_grad = vec![0.0; decoder.params().scalar_count()];
    for (x, w) in latents.iter().zip(&weights) {
        let (_, ge) = encoder.log_prob_grad(observed, x).unwrap();
        let (_, gd) = decoder.log_prob_grad(x, observed).unwrap();
        for (acc, g) in encoder_grad.iter_mut().zip(flatten(encoder.params(), &ge)) {
            *acc += w * g;
        }
        for (acc, g) in decoder_grad.iter_mut().zip(flatten(decoder.params(), &gd)) {
            *acc += w * g;
        }
    }
    Enumerated { latents, joint, log_marginal, weights, encoder_grad, decoder_grad }
}

/// A sentence of content ids (`3..vocab`, plus UNK) with length in `1..=max_len`.
pub fn random_sentence<R: Rng>(rng: &mut R, vocab: usize, max_len: usize) -> Vec<TokenId> {
    let len = rng.gen_range(1..=max_len);
    (0..len)
        .map(|_| match rng.gen_range(2..vocab) {
            EOS => 0,
            t => t,
        })
        .collect()
}
