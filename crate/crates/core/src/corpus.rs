//! Vocabularies, sentences and corpora.
//!
//! Corpus files hold one pre-tokenized sentence per line with tokens
//! separated by whitespace. Vocabulary files hold one token per line; the
//! first three lines are the reserved tokens, so the line index is the id.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::Path;

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

pub type TokenId = usize;

pub const UNK: TokenId = 0;
pub const BOS: TokenId = 1;
pub const EOS: TokenId = 2;
pub const RESERVED: [&str; 3] = ["<unk>", "<s>", "</s>"];

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, TokenId>,
}

impl Vocabulary {
    /// A vocabulary holding only the reserved ids.
    pub fn reserved_only() -> Self {
        let tokens: Vec<String> = RESERVED.iter().map(|s| s.to_string()).collect();
        let index = tokens.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        Vocabulary { tokens, index }
    }

    /// Builds a vocabulary from ordered, distinct non-reserved tokens.
    pub fn from_tokens<I, S>(tokens: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut v = Vocabulary::reserved_only();
        for t in tokens {
            let t = t.into();
            if t.is_empty() || t.chars().any(char::is_whitespace) {
                return Err(Error::InvalidArgument(format!("invalid token {t:?}")));
            }
            if v.index.contains_key(&t) {
                return Err(Error::InvalidArgument(format!("duplicate token {t:?}")));
            }
            v.index.insert(t.clone(), v.tokens.len());
            v.tokens.push(t);
        }
        Ok(v)
    }

    /// Size including the reserved ids.
    pub fn size(&self) -> usize {
        self.tokens.len()
    }

    pub fn id(&self, token: &str) -> Option<TokenId> {
        self.index.get(token).copied()
    }

    pub fn contains(&self, token: &str) -> bool {
        self.index.contains_key(token)
    }

    pub fn token(&self, id: TokenId) -> Option<&str> {
        self.tokens.get(id).map(String::as_str)
    }

    /// Non-reserved tokens in id order.
    pub fn content_tokens(&self) -> &[String] {
        &self.tokens[RESERVED.len()..]
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut text = self.tokens.join("\n");
        text.push('\n');
        fs::write(path, text).map_err(|e| Error::file(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::file(path, e))?;
        let lines: Vec<&str> = text.lines().collect();
        for (i, expected) in RESERVED.iter().enumerate() {
            if lines.get(i).map(|l| l.trim()) != Some(*expected) {
                return Err(Error::Malformed {
                    what: format!("vocabulary {}", path.display()),
                    line: i + 1,
                    detail: format!("expected reserved token {expected}"),
                });
            }
        }
        let mut v = Vocabulary::reserved_only();
        for (i, line) in lines.iter().enumerate().skip(RESERVED.len()) {
            let t = line.trim();
            if t.is_empty() || v.contains(t) {
                return Err(Error::Malformed {
                    what: format!("vocabulary {}", path.display()),
                    line: i + 1,
                    detail: format!("empty or duplicate token {t:?}"),
                });
            }
            v.index.insert(t.to_owned(), v.tokens.len());
            v.tokens.push(t.to_owned());
        }
        Ok(v)
    }
}

/// Most frequent tokens first, ties broken by ascending token text. The
/// result holds at most `max_size` ids including the three reserved ones.
pub fn build_vocab<'a, I>(sentences: I, max_size: usize) -> Result<Vocabulary>
where
    I: IntoIterator<Item = &'a [String]>,
{
    if max_size < 4 {
        return Err(Error::InvalidArgument(format!("max_size must be at least 4, got {max_size}")));
    }
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    let mut seen_any = false;
    for sentence in sentences {
        for tok in sentence {
            seen_any = true;
            if RESERVED.contains(&tok.as_str()) {
                continue;
            }
            *counts.entry(tok.as_str()).or_default() += 1;
        }
    }
    if !seen_any {
        return Err(Error::Empty("corpus for vocabulary"));
    }
    let mut ranked: Vec<(&str, usize)> = counts.into_iter().collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    ranked.truncate(max_size - RESERVED.len());
    Vocabulary::from_tokens(ranked.into_iter().map(|(t, _)| t))
}

/// Token ids of one sentence, without BOS/EOS markers.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Sentence(Vec<TokenId>);

impl Sentence {
    /// Checks non-emptiness and that every id is below `vocab_size` and is
    /// not BOS or EOS.
    pub fn new(ids: Vec<TokenId>, vocab_size: usize) -> Result<Self> {
        if ids.is_empty() {
            return Err(Error::Empty("sentence"));
        }
        Self::validate(&ids, vocab_size)?;
        Ok(Sentence(ids))
    }

    pub(crate) fn validate(ids: &[TokenId], vocab_size: usize) -> Result<()> {
        for &id in ids {
            if id >= vocab_size {
                return Err(Error::TokenOutOfRange { id, size: vocab_size });
            }
            if id == BOS || id == EOS {
                return Err(Error::InvalidArgument(format!("marker id {id} inside a sentence")));
            }
        }
        Ok(())
    }

    pub fn ids(&self) -> &[TokenId] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains_unk(&self) -> bool {
        self.0.contains(&UNK)
    }

    pub fn into_ids(self) -> Vec<TokenId> {
        self.0
    }
}

/// Maps tokens to ids; out-of-vocabulary tokens become UNK.
pub fn encode<S: AsRef<str>>(tokens: &[S], vocab: &Vocabulary) -> Result<Sentence> {
    if tokens.is_empty() {
        return Err(Error::Empty("token list"));
    }
    let ids = tokens.iter().map(|t| vocab.id(t.as_ref()).unwrap_or(UNK)).collect();
    Ok(Sentence(ids))
}

/// Maps ids back to tokens. Accepts any id slice so that possibly empty
/// decoder outputs can be rendered.
pub fn decode(ids: &[TokenId], vocab: &Vocabulary) -> Result<Vec<String>> {
    ids.iter()
        .map(|&id| {
            vocab
                .token(id)
                .map(str::to_owned)
                .ok_or(Error::TokenOutOfRange { id, size: vocab.size() })
        })
        .collect()
}

/// Fraction of tokens absent from `vocab`.
pub fn oov_ratio<S: AsRef<str>>(tokens: &[S], vocab: &Vocabulary) -> Result<f64> {
    if tokens.is_empty() {
        return Err(Error::Empty("sentence"));
    }
    let oov = tokens.iter().filter(|t| !vocab.contains(t.as_ref())).count();
    Ok(oov as f64 / tokens.len() as f64)
}

/// Keeps, in order, the sentences whose OOV ratio is at most `threshold`.
/// Empty sentences are dropped.
pub fn filter_by_oov(mono: &[Vec<String>], vocab: &Vocabulary, threshold: f64) -> Result<Vec<Vec<String>>> {
    if !(0.0..=1.0).contains(&threshold) {
        return Err(Error::InvalidArgument(format!("threshold must lie in [0, 1], got {threshold}")));
    }
    Ok(mono
        .iter()
        .filter(|s| oov_ratio(s, vocab).map(|r| r <= threshold).unwrap_or(false))
        .cloned()
        .collect())
}

/// Seeded uniform sample of `n` items without replacement, kept in input
/// order. Returns everything when `n` is at least the input size.
pub fn subsample<T: Clone>(items: &[T], n: usize, seed: u64) -> Vec<T> {
    if n >= items.len() {
        return items.to_vec();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked = index::sample(&mut rng, items.len(), n).into_vec();
    picked.sort_unstable();
    picked.into_iter().map(|i| items[i].clone()).collect()
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParallelCorpus {
    pub pairs: Vec<(Sentence, Sentence)>,
}

impl ParallelCorpus {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Encodes aligned raw sentence lists; lengths must agree and no side
    /// may be empty.
    pub fn encode(src: &[Vec<String>], tgt: &[Vec<String>], src_vocab: &Vocabulary, tgt_vocab: &Vocabulary) -> Result<Self> {
        if src.len() != tgt.len() {
            return Err(Error::InvalidArgument(format!(
                "parallel sides have {} and {} sentences",
                src.len(),
                tgt.len()
            )));
        }
        let pairs = src
            .iter()
            .zip(tgt)
            .map(|(x, y)| Ok((encode(x, src_vocab)?, encode(y, tgt_vocab)?)))
            .collect::<Result<_>>()?;
        Ok(ParallelCorpus { pairs })
    }

    /// The same pairs with sides swapped.
    pub fn reversed(&self) -> Self {
        ParallelCorpus { pairs: self.pairs.iter().map(|(x, y)| (y.clone(), x.clone())).collect() }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct MonolingualCorpus {
    pub sentences: Vec<Sentence>,
}

impl MonolingualCorpus {
    pub fn len(&self) -> usize {
        self.sentences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sentences.is_empty()
    }

    pub fn encode(raw: &[Vec<String>], vocab: &Vocabulary) -> Result<Self> {
        let sentences = raw.iter().map(|s| encode(s, vocab)).collect::<Result<_>>()?;
        Ok(MonolingualCorpus { sentences })
    }
}

/// Whitespace tokenization of one line.
pub fn tokenize(line: &str) -> Vec<String> {
    line.split_whitespace().map(str::to_owned).collect()
}

/// Reads a corpus file. Blank lines are rejected because every sentence must
/// be nonempty.
pub fn read_corpus(path: &Path) -> Result<Vec<Vec<String>>> {
    let text = fs::read_to_string(path).map_err(|e| Error::file(path, e))?;
    text.lines()
        .enumerate()
        .map(|(i, line)| {
            let toks = tokenize(line);
            if toks.is_empty() {
                Err(Error::Malformed {
                    what: format!("corpus {}", path.display()),
                    line: i + 1,
                    detail: "empty sentence".into(),
                })
            } else {
                Ok(toks)
            }
        })
        .collect()
}

/// Like [`read_corpus`] but keeps empty lines as empty sentences, for
/// system outputs where an empty translation is a legitimate result.
pub fn read_outputs(path: &Path) -> Result<Vec<Vec<String>>> {
    let text = fs::read_to_string(path).map_err(|e| Error::file(path, e))?;
    Ok(text.lines().map(tokenize).collect())
}

pub fn write_corpus(path: &Path, sentences: &[Vec<String>]) -> Result<()> {
    let mut text = String::new();
    for s in sentences {
        text.push_str(&s.join(" "));
        text.push('\n');
    }
    fs::write(path, text).map_err(|e| Error::file(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(s: &str) -> Vec<String> {
        tokenize(s)
    }

    fn vocab_of(lines: &[&str], max: usize) -> Vocabulary {
        let c: Vec<Vec<String>> = lines.iter().map(|l| toks(l)).collect();
        build_vocab(c.iter().map(Vec::as_slice), max).unwrap()
    }

    #[test]
    fn build_vocab_orders_by_frequency() {
        let v = vocab_of(&["a a b"], 5);
        assert_eq!(v.size(), 5);
        assert_eq!(v.id("<unk>"), Some(0));
        assert_eq!(v.id("<s>"), Some(1));
        assert_eq!(v.id("</s>"), Some(2));
        assert_eq!(v.id("a"), Some(3));
        assert_eq!(v.id("b"), Some(4));
    }

    #[test]
    fn build_vocab_breaks_ties_lexicographically() {
        let v = vocab_of(&["b a"], 4);
        assert_eq!(v.size(), 4);
        assert!(v.contains("a"));
        assert!(!v.contains("b"));
    }

    #[test]
    fn build_vocab_respects_budget() {
        let line: Vec<String> = (0..100).flat_map(|i| vec![format!("w{i:03}"); 100 - i]).collect();
        let v = build_vocab([line.as_slice()], 10).unwrap();
        assert_eq!(v.size(), 10);
        let kept: Vec<&str> = v.content_tokens().iter().map(String::as_str).collect();
        assert_eq!(kept, ["w000", "w001", "w002", "w003", "w004", "w005", "w006"]);
    }

    #[test]
    fn build_vocab_errors() {
        let empty: Vec<Vec<String>> = vec![];
        assert!(matches!(build_vocab(empty.iter().map(Vec::as_slice), 10), Err(Error::Empty(_))));
        let c = [toks("a")];
        assert!(build_vocab(c.iter().map(Vec::as_slice), 3).is_err());
    }

    #[test]
    fn encode_maps_oov_to_unk() {
        let v = vocab_of(&["a b"], 10);
        let s = encode(&toks("a b"), &v).unwrap();
        assert_eq!(s.ids(), &[v.id("a").unwrap(), v.id("b").unwrap()]);
        assert_eq!(encode(&toks("zzz"), &v).unwrap().ids(), &[0]);
        assert_eq!(decode(s.ids(), &v).unwrap(), toks("a b"));
        assert!(encode::<String>(&[], &v).is_err());
    }

    #[test]
    fn oov_ratio_cases() {
        let v = vocab_of(&["a b c"], 10);
        assert_eq!(oov_ratio(&toks("a b c a"), &v).unwrap(), 0.0);
        assert_eq!(oov_ratio(&toks("a b c x"), &v).unwrap(), 0.25);
        assert_eq!(oov_ratio(&toks("x y"), &v).unwrap(), 1.0);
        assert!(oov_ratio::<String>(&[], &v).is_err());
    }

    #[test]
    fn filter_by_oov_cases() {
        let v = vocab_of(&["a b c d e f g h i"], 20);
        let mono = vec![
            toks("a b c d e f g h i j"),         // 0.1
            toks("a b c d e f g h i"),           // 0.0
            toks("a b c d e v w x y z"),         // 0.5
        ];
        let kept = filter_by_oov(&mono, &v, 0.1).unwrap();
        assert_eq!(kept, vec![mono[0].clone(), mono[1].clone()]);
        assert_eq!(filter_by_oov(&mono, &v, 0.0).unwrap(), vec![mono[1].clone()]);
        assert_eq!(filter_by_oov(&mono, &v, 1.0).unwrap(), mono);
        assert!(filter_by_oov(&mono, &v, 1.5).is_err());
    }

    #[test]
    fn sentence_validation() {
        assert!(Sentence::new(vec![], 5).is_err());
        assert!(Sentence::new(vec![5], 5).is_err());
        assert!(Sentence::new(vec![EOS], 5).is_err());
        assert!(Sentence::new(vec![UNK, 3], 5).is_ok());
    }

    #[test]
    fn vocab_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("vocab.txt");
        let v = vocab_of(&["x y y z z z"], 10);
        v.save(&path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("<unk>\n<s>\n</s>\nz\n"));
        assert_eq!(Vocabulary::load(&path).unwrap(), v);
    }
}
