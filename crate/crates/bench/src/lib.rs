//! Fixtures shared by the benchmarks: a model pair over synthetic
//! vocabularies and a batch of random sentences.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use seminmt::corpus::EOS;
use seminmt::{Direction, Result, Sentence, TranslationModel};

/// Sizes of one benchmark setting.
#[derive(Clone, Copy, Debug)]
pub struct Scale {
    pub vocab: usize,
    pub embed_dim: usize,
    pub hidden_dim: usize,
    pub sentence_len: usize,
    pub batch: usize,
}

impl Scale {
    /// The desk-scale task the acceptance runs use.
    pub const DESK: Scale = Scale { vocab: 150, embed_dim: 16, hidden_dim: 32, sentence_len: 6, batch: 16 };
    pub const TINY: Scale = Scale { vocab: 12, embed_dim: 4, hidden_dim: 6, sentence_len: 4, batch: 4 };
}

pub struct Fixture {
    pub s2t: TranslationModel,
    pub t2s: TranslationModel,
    pub pairs: Vec<(Sentence, Sentence)>,
}

impl Fixture {
    pub fn new(scale: Scale, seed: u64) -> Result<Self> {
        let s2t = TranslationModel::with_sizes(
            Direction::SourceToTarget,
            scale.vocab,
            scale.vocab,
            scale.embed_dim,
            scale.hidden_dim,
            seed,
        )?;
        let t2s = TranslationModel::with_sizes(
            Direction::TargetToSource,
            scale.vocab,
            scale.vocab,
            scale.embed_dim,
            scale.hidden_dim,
            seed + 1,
        )?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut sentence = || {
            let ids = (0..scale.sentence_len).map(|_| rng.gen_range(EOS + 1..scale.vocab)).collect();
            Sentence::new(ids, scale.vocab)
        };
        let pairs = (0..scale.batch).map(|_| Ok((sentence()?, sentence()?))).collect::<Result<_>>()?;
        Ok(Fixture { s2t, t2s, pairs })
    }

    pub fn targets(&self) -> Vec<Sentence> {
        self.pairs.iter().map(|p| p.1.clone()).collect()
    }
}
