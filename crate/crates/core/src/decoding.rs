//! Beam search and greedy translation.
//!
//! Scores are raw log-probabilities with no length normalization. Every
//! returned `log_score` is accumulated step by step from the same decoder
//! computations that [`TranslationModel::log_prob`] performs, so re-scoring a
//! hypothesis reproduces its score bit for bit.

use std::cmp::Ordering;
use std::collections::HashSet;

use crate::corpus::{TokenId, BOS, EOS};
use crate::error::{Error, Result};
use crate::model::TranslationModel;
use crate::numerics::{Graph, NodeId};

#[derive(Clone, Debug, PartialEq)]
pub struct Hypothesis {
    /// Output ids without BOS/EOS; may be empty.
    pub tokens: Vec<TokenId>,
    /// `log P(tokens, EOS | input)`.
    pub log_score: f64,
}

/// Top-k hypotheses in descending score order, optionally with posterior
/// weights attached by the reconstruction code.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct CandidateSet {
    pub hypotheses: Vec<Hypothesis>,
    pub weights: Vec<f64>,
}

impl CandidateSet {
    pub fn len(&self) -> usize {
        self.hypotheses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.hypotheses.is_empty()
    }

    pub fn best(&self) -> Option<&Hypothesis> {
        self.hypotheses.first()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SearchParams {
    pub beam_width: usize,
    pub k: usize,
    pub max_len: usize,
    /// Shortest hypothesis allowed to complete.
    pub min_len: usize,
}

impl SearchParams {
    pub fn new(beam_width: usize, k: usize, max_len: usize) -> Self {
        SearchParams { beam_width, k, max_len, min_len: 0 }
    }

    /// `beam_width = 2k`, `max_len = 2·|input| + 3`.
    pub fn defaults_for(k: usize, input_len: usize) -> Self {
        SearchParams::new(2 * k, k, default_max_len(input_len))
    }
}

pub fn default_max_len(input_len: usize) -> usize {
    2 * input_len + 3
}

/// Descending score, then lexicographically smaller sequence.
pub(crate) fn rank(a_score: f64, a_tokens: &[TokenId], b_score: f64, b_tokens: &[TokenId]) -> Ordering {
    b_score.total_cmp(&a_score).then_with(|| a_tokens.cmp(b_tokens))
}

struct Beam {
    tokens: Vec<TokenId>,
    score: f64,
    state: NodeId,
}

pub fn beam_search(
    model: &TranslationModel,
    input: &[TokenId],
    beam_width: usize,
    k: usize,
    max_len: usize,
) -> Result<CandidateSet> {
    beam_search_with(model, input, SearchParams::new(beam_width, k, max_len))
}

pub fn beam_search_with(model: &TranslationModel, input: &[TokenId], p: SearchParams) -> Result<CandidateSet> {
    if p.k == 0 {
        return Err(Error::InvalidArgument("k must be positive".into()));
    }
    if p.beam_width < p.k {
        return Err(Error::InvalidArgument(format!("beam width {} is below k = {}", p.beam_width, p.k)));
    }
    if p.min_len > p.max_len {
        return Err(Error::InvalidArgument(format!("min_len {} exceeds max_len {}", p.min_len, p.max_len)));
    }
    let vocab_out = model.config().vocab_out;
    let mut g = Graph::new(model.params());
    let enc = model.encode(&mut g, input)?;

    let mut active = vec![Beam { tokens: Vec::new(), score: 0.0, state: enc.initial_state() }];
    let mut completed: Vec<Hypothesis> = Vec::new();

    while !active.is_empty() {
        // (score, parent index, token, parent's next state)
        let mut expansions: Vec<(f64, usize, TokenId, NodeId)> = Vec::new();
        for (bi, beam) in active.iter().enumerate() {
            let prev = beam.tokens.last().copied().unwrap_or(BOS);
            let (next, lp) = model.decode_step(&mut g, &enc, beam.state, prev)?;
            let lpv = g.value(lp);
            let len = beam.tokens.len();
            if len >= p.min_len {
                completed.push(Hypothesis { tokens: beam.tokens.clone(), log_score: beam.score + lpv[EOS] });
            }
            if len < p.max_len {
                for (tok, &l) in lpv.iter().enumerate().take(vocab_out) {
                    if tok == BOS || tok == EOS {
                        continue;
                    }
                    expansions.push((beam.score + l, bi, tok, next));
                }
            }
        }
        expansions.sort_by(|a, b| {
            b.0.total_cmp(&a.0)
                .then_with(|| active[a.1].tokens.cmp(&active[b.1].tokens))
                .then_with(|| a.2.cmp(&b.2))
        });
        expansions.truncate(p.beam_width);
        active = expansions
            .into_iter()
            .map(|(score, bi, tok, state)| {
                let mut tokens = active[bi].tokens.clone();
                tokens.push(tok);
                Beam { tokens, score, state }
            })
            .collect();

        // Scores only decrease as hypotheses grow, so once the k-th finished
        // hypothesis beats every live beam the top-k list is final.
        if completed.len() >= p.k {
            completed.sort_by(|a, b| rank(a.log_score, &a.tokens, b.log_score, &b.tokens));
            let kth = completed[p.k - 1].log_score;
            let best_live = active.iter().map(|b| b.score).fold(f64::NEG_INFINITY, f64::max);
            if kth > best_live {
                break;
            }
        }
    }

    completed.sort_by(|a, b| rank(a.log_score, &a.tokens, b.log_score, &b.tokens));
    let mut seen = HashSet::new();
    completed.retain(|h| seen.insert(h.tokens.clone()));
    completed.truncate(p.k);
    if completed.is_empty() {
        return Err(Error::Empty("beam search produced no hypothesis"));
    }
    Ok(CandidateSet { hypotheses: completed, weights: Vec::new() })
}

/// Beam search with width 1 and k = 1, keeping only the tokens.
pub fn greedy_translate(model: &TranslationModel, input: &[TokenId], max_len: usize) -> Result<Vec<TokenId>> {
    let set = beam_search(model, input, 1, 1, max_len)?;
    Ok(set.hypotheses.into_iter().next().map(|h| h.tokens).unwrap_or_default())
}
