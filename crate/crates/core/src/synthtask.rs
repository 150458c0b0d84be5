//! Deterministic synthetic language pairs.
//!
//! Source sentences are i.i.d. Zipf-distributed tokens `s0, s1, ...`; the
//! target side applies a bijective token cipher `s_i -> t_π(i)` and an
//! optional full reversal. The last `oov_pool` token indices of each side are
//! held out of the parallel, validation and test splits and are used only to
//! inject out-of-vocabulary tokens into the monolingual corpora.

use std::collections::HashSet;
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, WeightedIndex};
use serde::{Deserialize, Serialize};

use crate::corpus::write_corpus;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Reorder {
    None,
    Reverse,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct CorpusSizes {
    pub parallel: usize,
    pub target_mono: usize,
    pub source_mono: usize,
    pub validation: usize,
    pub test: usize,
}

impl Default for CorpusSizes {
    fn default() -> Self {
        CorpusSizes { parallel: 500, target_mono: 5000, source_mono: 0, validation: 100, test: 200 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TaskSpec {
    /// Tokens per side, including the held-out pool.
    pub vocab_size: usize,
    /// Tokens per side reserved for OOV injection.
    pub oov_pool: usize,
    pub min_len: usize,
    pub max_len: usize,
    /// `None` gives the identity cipher.
    pub cipher_seed: Option<u64>,
    pub reorder: Reorder,
    pub zipf_exponent: f64,
    pub sizes: CorpusSizes,
    /// Per-token probability of replacing a monolingual token by a pool token.
    pub oov_rate: f64,
    pub seed: u64,
}

impl Default for TaskSpec {
    fn default() -> Self {
        TaskSpec {
            vocab_size: 40,
            oov_pool: 8,
            min_len: 3,
            max_len: 8,
            cipher_seed: Some(17),
            reorder: Reorder::Reverse,
            zipf_exponent: 1.1,
            sizes: CorpusSizes::default(),
            oov_rate: 0.0,
            seed: 1,
        }
    }
}

pub type RawSentence = Vec<String>;

#[derive(Clone, Debug, Default, PartialEq)]
pub struct SyntheticData {
    pub parallel_src: Vec<RawSentence>,
    pub parallel_tgt: Vec<RawSentence>,
    pub target_mono: Vec<RawSentence>,
    /// Clean source sentences underlying `target_mono`, before OOV injection.
    pub target_mono_sources: Vec<RawSentence>,
    pub source_mono: Vec<RawSentence>,
    pub valid_src: Vec<RawSentence>,
    pub valid_tgt: Vec<RawSentence>,
    pub test_src: Vec<RawSentence>,
    pub test_tgt: Vec<RawSentence>,
}

pub fn source_token(i: usize) -> String {
    format!("s{i}")
}

pub fn target_token(i: usize) -> String {
    format!("t{i}")
}

fn parse_index(tok: &str, prefix: char, n: usize) -> Result<usize> {
    tok.strip_prefix(prefix)
        .and_then(|s| s.parse::<usize>().ok())
        .filter(|&i| i < n)
        .ok_or_else(|| Error::InvalidArgument(format!("token {tok:?} is not part of the task")))
}

/// The cipher `π` and its inverse.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Cipher {
    forward: Vec<usize>,
    inverse: Vec<usize>,
}

impl Cipher {
    pub fn new(n: usize, seed: Option<u64>) -> Self {
        let mut forward: Vec<usize> = (0..n).collect();
        if let Some(seed) = seed {
            forward.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        }
        let mut inverse = vec![0; n];
        for (i, &j) in forward.iter().enumerate() {
            inverse[j] = i;
        }
        Cipher { forward, inverse }
    }

    pub fn apply(&self, i: usize) -> usize {
        self.forward[i]
    }

    pub fn invert(&self, j: usize) -> usize {
        self.inverse[j]
    }
}

impl TaskSpec {
    pub fn validate(&self) -> Result<()> {
        if self.vocab_size == 0 || self.min_len == 0 || self.min_len > self.max_len {
            return Err(Error::InvalidArgument("task needs a vocabulary and 0 < min_len ≤ max_len".into()));
        }
        if self.oov_pool >= self.vocab_size {
            return Err(Error::InvalidArgument(format!(
                "oov pool of {} leaves no in-domain tokens out of {}",
                self.oov_pool, self.vocab_size
            )));
        }
        if !(0.0..=1.0).contains(&self.oov_rate) {
            return Err(Error::InvalidArgument(format!("oov rate {} outside [0, 1]", self.oov_rate)));
        }
        if self.oov_rate > 0.0 && self.oov_pool == 0 {
            return Err(Error::InvalidArgument("vocabulary has no pool tokens for OOV injection".into()));
        }
        if !(self.zipf_exponent >= 0.0) {
            return Err(Error::InvalidArgument("zipf exponent must be non-negative".into()));
        }
        if self.sizes.parallel == 0 {
            return Err(Error::InvalidArgument("parallel corpus size must be positive".into()));
        }
        Ok(())
    }

    pub fn in_domain(&self) -> usize {
        self.vocab_size - self.oov_pool
    }

    pub fn cipher(&self) -> Cipher {
        Cipher::new(self.vocab_size, self.cipher_seed)
    }
}

/// Applies cipher then reordering: the unique correct translation of `x`.
pub fn oracle_translate(spec: &TaskSpec, x: &[String]) -> Result<RawSentence> {
    let cipher = spec.cipher();
    let mut y = x
        .iter()
        .map(|t| parse_index(t, 's', spec.vocab_size).map(|i| target_token(cipher.apply(i))))
        .collect::<Result<Vec<_>>>()?;
    if spec.reorder == Reorder::Reverse {
        y.reverse();
    }
    Ok(y)
}

/// Inverse of [`oracle_translate`].
pub fn oracle_inverse(spec: &TaskSpec, y: &[String]) -> Result<RawSentence> {
    let cipher = spec.cipher();
    let mut x = y
        .iter()
        .map(|t| parse_index(t, 't', spec.vocab_size).map(|j| source_token(cipher.invert(j))))
        .collect::<Result<Vec<_>>>()?;
    if spec.reorder == Reorder::Reverse {
        x.reverse();
    }
    Ok(x)
}

struct Sampler<'a> {
    spec: &'a TaskSpec,
    zipf: WeightedIndex<f64>,
    rng: ChaCha8Rng,
    seen: HashSet<Vec<usize>>,
}

impl Sampler<'_> {
    fn draw(&mut self) -> Vec<usize> {
        let len = self.rng.gen_range(self.spec.min_len..=self.spec.max_len);
        (0..len).map(|_| self.zipf.sample(&mut self.rng)).collect()
    }

    /// A sentence not yet used by any split.
    fn fresh(&mut self) -> Result<Vec<usize>> {
        for _ in 0..10_000 {
            let s = self.draw();
            if self.seen.insert(s.clone()) {
                return Ok(s);
            }
        }
        Err(Error::InvalidArgument("task space too small for disjoint splits".into()))
    }

    fn inject(&mut self, tokens: &mut [usize], pool: &[usize]) {
        if self.spec.oov_rate == 0.0 {
            return;
        }
        for t in tokens {
            if self.rng.gen_bool(self.spec.oov_rate) {
                *t = pool[self.rng.gen_range(0..pool.len())];
            }
        }
    }
}

fn render_src(ids: &[usize]) -> RawSentence {
    ids.iter().map(|&i| source_token(i)).collect()
}

fn render_tgt(spec: &TaskSpec, cipher: &Cipher, ids: &[usize]) -> RawSentence {
    let mut y: Vec<String> = ids.iter().map(|&i| target_token(cipher.apply(i))).collect();
    if spec.reorder == Reorder::Reverse {
        y.reverse();
    }
    y
}

pub fn generate(spec: &TaskSpec) -> Result<SyntheticData> {
    spec.validate()?;
    let cipher = spec.cipher();
    let n_in = spec.in_domain();
    let weights: Vec<f64> = (0..n_in).map(|i| ((i + 1) as f64).powf(-spec.zipf_exponent)).collect();
    let zipf = WeightedIndex::new(&weights).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let mut s = Sampler { spec, zipf, rng: ChaCha8Rng::seed_from_u64(spec.seed), seen: HashSet::new() };

    // Parallel split, then make sure every in-domain token occurs in it so the
    // parallel vocabulary is exactly the in-domain token set.
    let mut parallel: Vec<Vec<usize>> = (0..spec.sizes.parallel).map(|_| s.draw()).collect();
    let mut counts = vec![0usize; n_in];
    parallel.iter().flatten().for_each(|&t| counts[t] += 1);
    if counts.iter().sum::<usize>() < 2 * n_in {
        return Err(Error::InvalidArgument("parallel corpus too small to cover the task vocabulary".into()));
    }
    for missing in 0..n_in {
        if counts[missing] > 0 {
            continue;
        }
        loop {
            let si = s.rng.gen_range(0..parallel.len());
            let pi = s.rng.gen_range(0..parallel[si].len());
            let old = parallel[si][pi];
            if counts[old] >= 2 {
                counts[old] -= 1;
                counts[missing] += 1;
                parallel[si][pi] = missing;
                break;
            }
        }
    }
    for p in &parallel {
        s.seen.insert(p.clone());
    }

    let mut data = SyntheticData::default();
    for p in &parallel {
        data.parallel_src.push(render_src(p));
        data.parallel_tgt.push(render_tgt(spec, &cipher, p));
    }
    for _ in 0..spec.sizes.validation {
        let x = s.fresh()?;
        data.valid_src.push(render_src(&x));
        data.valid_tgt.push(render_tgt(spec, &cipher, &x));
    }
    for _ in 0..spec.sizes.test {
        let x = s.fresh()?;
        data.test_src.push(render_src(&x));
        data.test_tgt.push(render_tgt(spec, &cipher, &x));
    }

    // Pool tokens in source index space; on the target side they pass through the cipher.
    let pool: Vec<usize> = (n_in..spec.vocab_size).collect();
    for _ in 0..spec.sizes.target_mono {
        let x = s.fresh()?;
        data.target_mono_sources.push(render_src(&x));
        let mut noisy = x.clone();
        s.inject(&mut noisy, &pool);
        data.target_mono.push(render_tgt(spec, &cipher, &noisy));
    }
    for _ in 0..spec.sizes.source_mono {
        let mut x = s.fresh()?;
        s.inject(&mut x, &pool);
        data.source_mono.push(render_src(&x));
    }
    Ok(data)
}

pub const FILES: [&str; 8] = [
    "train.src",
    "train.tgt",
    "mono.tgt",
    "mono.src",
    "valid.src",
    "valid.tgt",
    "test.src",
    "test.tgt",
];

/// Writes every split in the corpus line format plus `task.json`.
pub fn write_files(spec: &TaskSpec, data: &SyntheticData, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::file(dir, e))?;
    let splits = [
        &data.parallel_src,
        &data.parallel_tgt,
        &data.target_mono,
        &data.source_mono,
        &data.valid_src,
        &data.valid_tgt,
        &data.test_src,
        &data.test_tgt,
    ];
    for (name, split) in FILES.iter().zip(splits) {
        write_corpus(&dir.join(name), split)?;
    }
    let manifest = serde_json::to_string_pretty(spec)?;
    let path = dir.join("task.json");
    fs::write(&path, manifest).map_err(|e| Error::file(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{build_vocab, filter_by_oov};

    fn small(reorder: Reorder, oov_rate: f64) -> TaskSpec {
        TaskSpec {
            vocab_size: 20,
            oov_pool: 4,
            reorder,
            oov_rate,
            sizes: CorpusSizes { parallel: 60, target_mono: 40, source_mono: 30, validation: 10, test: 10 },
            ..TaskSpec::default()
        }
    }

    #[test]
    fn pairs_follow_cipher() {
        let spec = TaskSpec { cipher_seed: None, reorder: Reorder::None, ..small(Reorder::None, 0.0) };
        let y = oracle_translate(&spec, &["s1".into(), "s2".into()]).unwrap();
        assert_eq!(y, vec!["t1".to_string(), "t2".to_string()]);

        let spec = small(Reorder::Reverse, 0.0);
        let c = spec.cipher();
        let y = oracle_translate(&spec, &["s1".into(), "s2".into(), "s3".into()]).unwrap();
        assert_eq!(y, vec![target_token(c.apply(3)), target_token(c.apply(2)), target_token(c.apply(1))]);
    }

    #[test]
    fn generated_pairs_are_oracle_translations() {
        for reorder in [Reorder::None, Reorder::Reverse] {
            let spec = small(reorder, 0.0);
            let d = generate(&spec).unwrap();
            for (x, y) in d.parallel_src.iter().zip(&d.parallel_tgt).chain(d.test_src.iter().zip(&d.test_tgt)) {
                assert_eq!(&oracle_translate(&spec, x).unwrap(), y);
                assert_eq!(&oracle_inverse(&spec, y).unwrap(), x);
            }
        }
    }

    #[test]
    fn zero_injection_survives_zero_oov_filter() {
        let spec = small(Reorder::Reverse, 0.0);
        let d = generate(&spec).unwrap();
        let v = build_vocab(d.parallel_tgt.iter().map(Vec::as_slice), 1000).unwrap();
        assert_eq!(v.size(), 3 + spec.in_domain());
        assert_eq!(filter_by_oov(&d.target_mono, &v, 0.0).unwrap(), d.target_mono);
    }

    #[test]
    fn injection_produces_oov() {
        let spec = small(Reorder::Reverse, 0.5);
        let d = generate(&spec).unwrap();
        let v = build_vocab(d.parallel_tgt.iter().map(Vec::as_slice), 1000).unwrap();
        let kept = filter_by_oov(&d.target_mono, &v, 0.0).unwrap();
        assert!(kept.len() < d.target_mono.len());
    }

    #[test]
    fn splits_are_disjoint_and_deterministic() {
        let spec = small(Reorder::Reverse, 0.0);
        let a = generate(&spec).unwrap();
        assert_eq!(a, generate(&spec).unwrap());
        let train: HashSet<_> = a.parallel_src.iter().collect();
        for x in a.test_src.iter().chain(&a.valid_src).chain(&a.target_mono_sources).chain(&a.source_mono) {
            assert!(!train.contains(x));
        }
    }

    #[test]
    fn rejects_impossible_injection() {
        let spec = TaskSpec { oov_pool: 0, oov_rate: 0.2, ..small(Reorder::None, 0.2) };
        assert!(generate(&spec).is_err());
        let spec = TaskSpec { oov_pool: 20, ..small(Reorder::None, 0.0) };
        assert!(generate(&spec).is_err());
        assert!(oracle_translate(&small(Reorder::None, 0.0), &["q1".into()]).is_err());
    }
}
