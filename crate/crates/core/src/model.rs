//! One directed attention-based translation model `P(out | in; θ)`.
//!
//! Encoder: bidirectional single-layer GRU over input embeddings. The
//! decoder state starts at `tanh(W_init · b_1 + b_init)` where `b_1` is the
//! final backward encoder state. Each decoder step attends over the encoder
//! annotations with additive attention, advances a GRU on
//! `[prev embedding; context]`, and emits logits from
//! `[state; context; prev embedding]` through one affine layer.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{Sentence, TokenId, Vocabulary, BOS, EOS};
use crate::error::{Error, Result};
use crate::numerics::{Checkpoint, GradBuffer, Graph, NodeId, ParamId, ParameterStore, RngState};

pub const INIT_SCALE: f64 = 0.08;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    SourceToTarget,
    TargetToSource,
}

impl Direction {
    pub fn reverse(self) -> Self {
        match self {
            Direction::SourceToTarget => Direction::TargetToSource,
            Direction::TargetToSource => Direction::SourceToTarget,
        }
    }

    pub fn tag(self) -> &'static str {
        match self {
            Direction::SourceToTarget => "s2t",
            Direction::TargetToSource => "t2s",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub direction: Direction,
    pub vocab_in: usize,
    pub vocab_out: usize,
    pub embed_dim: usize,
    pub hidden_dim: usize,
}

#[derive(Clone, Copy, Debug)]
struct GruIds {
    w_gates: ParamId,
    b_gates: ParamId,
    w_cand: ParamId,
    b_cand: ParamId,
}

#[derive(Clone, Copy, Debug)]
struct Ids {
    src_embed: ParamId,
    enc_fwd: GruIds,
    enc_bwd: GruIds,
    init_w: ParamId,
    init_b: ParamId,
    att_w: ParamId,
    att_b: ParamId,
    att_u: ParamId,
    att_v: ParamId,
    tgt_embed: ParamId,
    dec: GruIds,
    out_w: ParamId,
    out_b: ParamId,
}

/// Encoder output shared by every decoder step of one input sentence.
#[derive(Clone, Debug)]
pub struct Encoded {
    annotations: Vec<NodeId>,
    keys: Vec<NodeId>,
    initial_state: NodeId,
}

impl Encoded {
    pub fn initial_state(&self) -> NodeId {
        self.initial_state
    }
}

#[derive(Clone, Debug)]
pub struct TranslationModel {
    config: ModelConfig,
    vocab_in: Vocabulary,
    vocab_out: Vocabulary,
    params: ParameterStore,
    ids: Ids,
}

fn add_gru(
    store: &mut ParameterStore,
    prefix: &str,
    input: usize,
    hidden: usize,
    rng: &mut ChaCha8Rng,
) -> Result<GruIds> {
    Ok(GruIds {
        w_gates: store.add_uniform(&format!("{prefix}.w_gates"), &[2 * hidden, input + hidden], INIT_SCALE, rng)?,
        b_gates: store.add_uniform(&format!("{prefix}.b_gates"), &[2 * hidden], INIT_SCALE, rng)?,
        w_cand: store.add_uniform(&format!("{prefix}.w_cand"), &[hidden, input + hidden], INIT_SCALE, rng)?,
        b_cand: store.add_uniform(&format!("{prefix}.b_cand"), &[hidden], INIT_SCALE, rng)?,
    })
}

impl TranslationModel {
    /// Fresh model with parameters drawn uniformly from `[-0.08, 0.08]`.
    pub fn new(
        direction: Direction,
        vocab_in: Vocabulary,
        vocab_out: Vocabulary,
        embed_dim: usize,
        hidden_dim: usize,
        seed: u64,
    ) -> Result<Self> {
        if embed_dim == 0 || hidden_dim == 0 {
            return Err(Error::InvalidArgument("embedding and hidden sizes must be positive".into()));
        }
        let config = ModelConfig {
            direction,
            vocab_in: vocab_in.size(),
            vocab_out: vocab_out.size(),
            embed_dim,
            hidden_dim,
        };
        let (e, h) = (embed_dim, hidden_dim);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut s = ParameterStore::new();
        let src_embed = s.add_uniform("src_embed", &[config.vocab_in, e], INIT_SCALE, &mut rng)?;
        let enc_fwd = add_gru(&mut s, "enc_fwd", e, h, &mut rng)?;
        let enc_bwd = add_gru(&mut s, "enc_bwd", e, h, &mut rng)?;
        let init_w = s.add_uniform("dec_init.w", &[h, h], INIT_SCALE, &mut rng)?;
        let init_b = s.add_uniform("dec_init.b", &[h], INIT_SCALE, &mut rng)?;
        let att_w = s.add_uniform("att.w", &[h, h], INIT_SCALE, &mut rng)?;
        let att_b = s.add_uniform("att.b", &[h], INIT_SCALE, &mut rng)?;
        let att_u = s.add_uniform("att.u", &[h, 2 * h], INIT_SCALE, &mut rng)?;
        let att_v = s.add_uniform("att.v", &[1, h], INIT_SCALE, &mut rng)?;
        let tgt_embed = s.add_uniform("tgt_embed", &[config.vocab_out, e], INIT_SCALE, &mut rng)?;
        let dec = add_gru(&mut s, "dec", e + 2 * h, h, &mut rng)?;
        let out_w = s.add_uniform("out.w", &[config.vocab_out, 3 * h + e], INIT_SCALE, &mut rng)?;
        let out_b = s.add_uniform("out.b", &[config.vocab_out], INIT_SCALE, &mut rng)?;
        let ids = Ids {
            src_embed,
            enc_fwd,
            enc_bwd,
            init_w,
            init_b,
            att_w,
            att_b,
            att_u,
            att_v,
            tgt_embed,
            dec,
            out_w,
            out_b,
        };
        Ok(TranslationModel { config, vocab_in, vocab_out, params: s, ids })
    }

    /// Model over placeholder vocabularies of the given sizes (including
    /// the three reserved ids). Handy for tiny numerical instances.
    pub fn with_sizes(
        direction: Direction,
        vocab_in: usize,
        vocab_out: usize,
        embed_dim: usize,
        hidden_dim: usize,
        seed: u64,
    ) -> Result<Self> {
        let placeholder = |n: usize| {
            if n < 3 {
                return Err(Error::InvalidArgument(format!("vocabulary size {n} is below the 3 reserved ids")));
            }
            Vocabulary::from_tokens((3..n).map(|i| format!("w{i}")))
        };
        Self::new(direction, placeholder(vocab_in)?, placeholder(vocab_out)?, embed_dim, hidden_dim, seed)
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn direction(&self) -> Direction {
        self.config.direction
    }

    pub fn vocab_in(&self) -> &Vocabulary {
        &self.vocab_in
    }

    pub fn vocab_out(&self) -> &Vocabulary {
        &self.vocab_out
    }

    pub fn params(&self) -> &ParameterStore {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParameterStore {
        &mut self.params
    }

    pub fn checkpoint(&self, rng_state: RngState) -> Result<Checkpoint> {
        Ok(Checkpoint::capture(&self.params, serde_json::to_value(&self.config)?, rng_state))
    }

    /// Loads parameter values; the checkpoint's model config must match.
    pub fn restore(&mut self, ck: &Checkpoint) -> Result<()> {
        let cfg: ModelConfig = serde_json::from_value(ck.model_config.clone())
            .map_err(|e| Error::VocabMismatch(format!("checkpoint model config: {e}")))?;
        if cfg != self.config {
            return Err(Error::VocabMismatch(format!("checkpoint config {cfg:?} vs model {:?}", self.config)));
        }
        ck.restore_into(&mut self.params)
    }

    pub fn check_input(&self, ids: &[TokenId]) -> Result<()> {
        if ids.is_empty() {
            return Err(Error::Empty("input sentence"));
        }
        Sentence::validate(ids, self.config.vocab_in)
    }

    pub fn check_output(&self, ids: &[TokenId]) -> Result<()> {
        Sentence::validate(ids, self.config.vocab_out)
    }

    fn gru(&self, g: &mut Graph, p: GruIds, x: NodeId, h: NodeId) -> Result<NodeId> {
        let hd = self.config.hidden_dim;
        let xh = g.concat(&[x, h])?;
        let pre = g.affine(p.w_gates, Some(p.b_gates), xh)?;
        let gates = g.sigmoid(pre)?;
        let z = g.slice(gates, 0, hd)?;
        let r = g.slice(gates, hd, hd)?;
        let rh = g.mul(r, h)?;
        let xrh = g.concat(&[x, rh])?;
        let cand_pre = g.affine(p.w_cand, Some(p.b_cand), xrh)?;
        let cand = g.tanh(cand_pre)?;
        let delta = g.sub(cand, h)?;
        let step = g.mul(z, delta)?;
        g.add(h, step)
    }

    /// Runs the encoder over `input` inside `g`.
    pub fn encode(&self, g: &mut Graph, input: &[TokenId]) -> Result<Encoded> {
        self.check_input(input)?;
        let hd = self.config.hidden_dim;
        let embs = input.iter().map(|&t| g.embed(self.ids.src_embed, t)).collect::<Result<Vec<_>>>()?;
        let zero = g.constant(vec![0.0; hd])?;

        let mut fwd = Vec::with_capacity(embs.len());
        let mut h = zero;
        for &e in &embs {
            h = self.gru(g, self.ids.enc_fwd, e, h)?;
            fwd.push(h);
        }
        let mut bwd = vec![zero; embs.len()];
        let mut h = zero;
        for (j, &e) in embs.iter().enumerate().rev() {
            h = self.gru(g, self.ids.enc_bwd, e, h)?;
            bwd[j] = h;
        }
        let mut annotations = Vec::with_capacity(embs.len());
        let mut keys = Vec::with_capacity(embs.len());
        for (f, b) in fwd.iter().zip(&bwd) {
            let a = g.concat(&[*f, *b])?;
            keys.push(g.affine(self.ids.att_u, None, a)?);
            annotations.push(a);
        }
        let init_pre = g.affine(self.ids.init_w, Some(self.ids.init_b), bwd[0])?;
        let initial_state = g.tanh(init_pre)?;
        Ok(Encoded { annotations, keys, initial_state })
    }

    /// One decoder step from `state` after emitting `prev` (BOS at the
    /// start). Returns the next state and the log-distribution over the
    /// output vocabulary.
    pub fn decode_step(&self, g: &mut Graph, enc: &Encoded, state: NodeId, prev: TokenId) -> Result<(NodeId, NodeId)> {
        let query = g.affine(self.ids.att_w, Some(self.ids.att_b), state)?;
        let mut scores = Vec::with_capacity(enc.keys.len());
        for &k in &enc.keys {
            let s = g.add(query, k)?;
            let t = g.tanh(s)?;
            scores.push(g.affine(self.ids.att_v, None, t)?);
        }
        let e = g.concat(&scores)?;
        let alpha = g.softmax(e)?;
        let ctx = g.weighted_sum(&enc.annotations, alpha)?;
        let emb = g.embed(self.ids.tgt_embed, prev)?;
        let input = g.concat(&[emb, ctx])?;
        let next = self.gru(g, self.ids.dec, input, state)?;
        let feat = g.concat(&[next, ctx, emb])?;
        let logits = g.affine(self.ids.out_w, Some(self.ids.out_b), feat)?;
        let lp = g.log_softmax(logits)?;
        Ok((next, lp))
    }

    /// Teacher-forced scoring of `output` followed by EOS. Returns the
    /// scalar node holding `Σ_t log P(y_t | y_<t, x)`.
    pub fn score_encoded(&self, g: &mut Graph, enc: &Encoded, output: &[TokenId]) -> Result<NodeId> {
        self.check_output(output)?;
        let mut state = enc.initial_state;
        let mut prev = BOS;
        let mut picks = Vec::with_capacity(output.len() + 1);
        for &tok in output.iter().chain(std::iter::once(&EOS)) {
            let (next, lp) = self.decode_step(g, enc, state, prev)?;
            picks.push((g.pick(lp, tok)?, 1.0));
            state = next;
            prev = tok;
        }
        g.lin_comb(&picks)
    }

    pub fn score_into(&self, g: &mut Graph, input: &[TokenId], output: &[TokenId]) -> Result<NodeId> {
        let enc = self.encode(g, input)?;
        self.score_encoded(g, &enc, output)
    }

    /// `log P(output | input)` including the final EOS.
    pub fn log_prob(&self, input: &[TokenId], output: &[TokenId]) -> Result<f64> {
        let mut g = Graph::new(&self.params);
        let node = self.score_into(&mut g, input, output)?;
        Ok(g.scalar(node))
    }

    /// Log-probability and its gradient with respect to every parameter.
    pub fn log_prob_grad(&self, input: &[TokenId], output: &[TokenId]) -> Result<(f64, GradBuffer)> {
        let mut g = Graph::new(&self.params);
        let node = self.score_into(&mut g, input, output)?;
        let mut buf = self.params.new_buffer();
        g.backward(node, 1.0, &mut buf)?;
        Ok((g.scalar(node), buf))
    }

    /// Log-probability of the output *prefix* `output` without the final
    /// EOS. Used to account for probability mass beyond a length cap.
    pub fn prefix_log_prob(&self, input: &[TokenId], output: &[TokenId]) -> Result<f64> {
        self.raw_log_prob(input, output, false)
    }

    /// `log P(output, EOS | input)` for any ids other than EOS, including BOS.
    /// The softmax spans the whole output vocabulary, so sequences containing
    /// BOS carry (small) probability even though decoding never emits them.
    pub fn sequence_log_prob(&self, input: &[TokenId], output: &[TokenId]) -> Result<f64> {
        self.raw_log_prob(input, output, true)
    }

    fn raw_log_prob(&self, input: &[TokenId], output: &[TokenId], terminated: bool) -> Result<f64> {
        if output.iter().any(|&t| t >= self.config.vocab_out || t == EOS) {
            return Err(Error::InvalidArgument("sequence contains EOS or out-of-range id".into()));
        }
        let mut g = Graph::new(&self.params);
        let enc = self.encode(&mut g, input)?;
        let mut state = enc.initial_state;
        let mut prev = BOS;
        let mut total = 0.0;
        for &tok in output {
            let (next, lp) = self.decode_step(&mut g, &enc, state, prev)?;
            total += g.value(lp)[tok];
            state = next;
            prev = tok;
        }
        if terminated {
            let (_, lp) = self.decode_step(&mut g, &enc, state, prev)?;
            total += g.value(lp)[EOS];
        }
        Ok(total)
    }

    /// Per-step output distributions (probabilities) along a teacher-forced path.
    pub fn step_distributions(&self, input: &[TokenId], output: &[TokenId]) -> Result<Vec<Vec<f64>>> {
        self.check_output(output)?;
        let mut g = Graph::new(&self.params);
        let enc = self.encode(&mut g, input)?;
        let mut state = enc.initial_state;
        let mut prev = BOS;
        let mut out = Vec::new();
        for &tok in output.iter().chain(std::iter::once(&EOS)) {
            let (next, lp) = self.decode_step(&mut g, &enc, state, prev)?;
            out.push(g.value(lp).iter().map(|v| v.exp()).collect());
            state = next;
            prev = tok;
        }
        Ok(out)
    }
}
