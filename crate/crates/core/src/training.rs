//! Training loops: supervised pretraining, joint semi-supervised training
//! and the back-translation baseline.
//!
//! Every iteration draws one parallel batch and, when their weights are
//! positive, one target-monolingual and one source-monolingual batch. The
//! gradients of all terms are summed into a single clipped SGD step per
//! model. Batch order is a pure function of `(seed, corpus stream,
//! iteration)`, so a run can be resumed from any checkpoint.

use std::cell::RefCell;
use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{decode, MonolingualCorpus, ParallelCorpus, Sentence};
use crate::decoding::{beam_search, default_max_len, greedy_translate};
use crate::error::{Error, Result};
use crate::evaluation::{corpus_bleu, reconstruction_report};
use crate::model::TranslationModel;
use crate::numerics::{clip_and_step, ClipNorm, GradBuffer, RngState};
use crate::semisup::{joint_objective, supervised_batch, LatentSearch, ObjectiveWeights};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainingConfig {
    /// Sizes used when a run initializes fresh models.
    pub embed_dim: usize,
    pub hidden_dim: usize,
    pub lambda1: f64,
    pub lambda2: f64,
    /// Size of the latent candidate list.
    pub k: usize,
    /// Latent beam width; `None` means `2k`.
    pub beam_width: Option<usize>,
    /// Cap on latent length; `None` means `2·|observed| + 3`.
    pub latent_max_len: Option<usize>,
    pub learning_rate: f64,
    pub clip: f64,
    pub clip_norm: ClipNorm,
    pub batch_parallel: usize,
    pub batch_target_mono: usize,
    pub batch_source_mono: usize,
    pub max_iterations: usize,
    pub eval_interval: usize,
    pub seed: u64,
    /// Beam width used to translate validation sentences (1 = greedy).
    pub eval_beam: usize,
    /// Restore the best-validation-BLEU parameters of each direction at the end.
    pub select_best: bool,
    /// Include wall-clock seconds in log records (breaks byte-identical logs).
    pub log_wall_time: bool,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        TrainingConfig {
            embed_dim: 32,
            hidden_dim: 64,
            lambda1: 0.1,
            lambda2: 0.0,
            k: 10,
            beam_width: None,
            latent_max_len: None,
            learning_rate: 1.0,
            clip: 0.05,
            clip_norm: ClipNorm::GlobalL2,
            batch_parallel: 16,
            batch_target_mono: 16,
            batch_source_mono: 16,
            max_iterations: 1000,
            eval_interval: 100,
            seed: 1,
            eval_beam: 1,
            select_best: true,
            log_wall_time: false,
        }
    }
}

impl TrainingConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_owned()));
        if !(self.lambda1 >= 0.0 && self.lambda2 >= 0.0) {
            return bad("lambda1 and lambda2 must be non-negative");
        }
        if self.embed_dim == 0 || self.hidden_dim == 0 {
            return bad("embed_dim and hidden_dim must be positive");
        }
        if self.k == 0 {
            return bad("k must be positive");
        }
        if self.beam_width.is_some_and(|w| w < self.k) {
            return bad("beam_width must be at least k");
        }
        if !(self.learning_rate > 0.0) || !(self.clip > 0.0) {
            return bad("learning_rate and clip must be positive");
        }
        if self.batch_parallel == 0 || self.eval_interval == 0 || self.eval_beam == 0 {
            return bad("batch_parallel, eval_interval and eval_beam must be positive");
        }
        Ok(())
    }

    pub fn weights(&self) -> ObjectiveWeights {
        ObjectiveWeights { lambda1: self.lambda1, lambda2: self.lambda2 }
    }

    pub fn latent_search(&self) -> LatentSearch {
        LatentSearch { k: self.k, beam_width: self.beam_width.unwrap_or(2 * self.k), max_len: self.latent_max_len }
    }
}

fn mix(mut z: u64) -> u64 {
    // splitmix64 finalizer
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives an independent seed for a named purpose.
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    mix(mix(seed) ^ stream.wrapping_mul(0xD1B5_4A32_D192_ED03))
}

pub const STREAM_PARALLEL: u64 = 1;
pub const STREAM_TARGET_MONO: u64 = 2;
pub const STREAM_SOURCE_MONO: u64 = 3;

/// Shuffled passes over `0..n` with wraparound. The permutation for epoch
/// `e` is seeded by `(seed, stream, e)`, so the batch drawn at any iteration
/// depends on nothing else.
#[derive(Debug)]
pub struct BatchSampler {
    n: usize,
    batch: usize,
    seed: u64,
    cache: RefCell<Option<(usize, Vec<usize>)>>,
}

impl BatchSampler {
    pub fn new(n: usize, batch: usize, seed: u64, stream: u64) -> Self {
        BatchSampler { n, batch, seed: derive_seed(seed, stream), cache: RefCell::new(None) }
    }

    fn permutation(&self, epoch: usize) -> Vec<usize> {
        let mut cache = self.cache.borrow_mut();
        if let Some((e, p)) = cache.as_ref() {
            if *e == epoch {
                return p.clone();
            }
        }
        let mut p: Vec<usize> = (0..self.n).collect();
        p.shuffle(&mut ChaCha8Rng::seed_from_u64(mix(self.seed ^ epoch as u64)));
        *cache = Some((epoch, p.clone()));
        p
    }

    /// Indices for 0-based draw number `step`.
    pub fn indices(&self, step: usize) -> Vec<usize> {
        if self.n == 0 || self.batch == 0 {
            return Vec::new();
        }
        let start = step * self.batch;
        let mut out = Vec::with_capacity(self.batch);
        let mut epoch = usize::MAX;
        let mut perm = Vec::new();
        for pos in start..start + self.batch {
            let e = pos / self.n;
            if e != epoch {
                perm = self.permutation(e);
                epoch = e;
            }
            out.push(perm[pos % self.n]);
        }
        out
    }
}

/// Sentences with their raw references for BLEU.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct EvalSet {
    pub src: Vec<Sentence>,
    pub tgt: Vec<Sentence>,
    pub src_raw: Vec<Vec<String>>,
    pub tgt_raw: Vec<Vec<String>>,
}

impl EvalSet {
    pub fn len(&self) -> usize {
        self.src.len()
    }

    pub fn is_empty(&self) -> bool {
        self.src.is_empty()
    }
}

#[derive(Clone, Debug, Default)]
pub struct TrainData {
    pub parallel: ParallelCorpus,
    pub target_mono: MonolingualCorpus,
    pub source_mono: MonolingualCorpus,
    pub validation: Option<EvalSet>,
    /// Held-out target sentences whose reconstruction is tracked at each eval.
    pub recon_sample: Vec<Sentence>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub iteration: usize,
    /// Mean training NLL per sentence since the previous record.
    pub supervised_s2t: Option<f64>,
    pub supervised_t2s: Option<f64>,
    /// Mean restricted reconstruction log-probability on the training batches since the previous record.
    pub reconstruction_target: Option<f64>,
    pub reconstruction_source: Option<f64>,
    pub valid_bleu_s2t: Option<f64>,
    pub valid_bleu_t2s: Option<f64>,
    /// Mean restricted reconstruction log-probability on the held-out sample.
    pub heldout_reconstruction: Option<f64>,
    /// Steps since the previous record whose gradients were clipped.
    pub clipped_steps: usize,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub wall_time_secs: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RunLog {
    pub records: Vec<EvalRecord>,
}

impl RunLog {
    pub fn push(&mut self, record: EvalRecord) -> Result<()> {
        if let Some(last) = self.records.last() {
            if record.iteration <= last.iteration {
                return Err(Error::InvalidArgument(format!(
                    "log iteration {} does not follow {}",
                    record.iteration, last.iteration
                )));
            }
        }
        self.records.push(record);
        Ok(())
    }

    pub fn to_jsonl(&self) -> Result<String> {
        let mut out = String::new();
        for r in &self.records {
            out.push_str(&serde_json::to_string(r)?);
            out.push('\n');
        }
        Ok(out)
    }

    /// Parses line-delimited records; blank lines are skipped.
    pub fn from_jsonl(text: &str, what: &str) -> Result<Self> {
        let mut log = RunLog::default();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let rec: EvalRecord = serde_json::from_str(line).map_err(|e| Error::Malformed {
                what: what.to_owned(),
                line: i + 1,
                detail: e.to_string(),
            })?;
            log.push(rec).map_err(|e| Error::Malformed { what: what.to_owned(), line: i + 1, detail: e.to_string() })?;
        }
        Ok(log)
    }
}

/// Which models receive updates and how the objective is weighted.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Mode {
    pub update_s2t: bool,
    pub update_t2s: bool,
    pub weights: ObjectiveWeights,
}

impl Mode {
    pub fn supervised() -> Self {
        Mode { update_s2t: true, update_t2s: true, weights: ObjectiveWeights { lambda1: 0.0, lambda2: 0.0 } }
    }

    pub fn joint(weights: ObjectiveWeights) -> Self {
        Mode { update_s2t: true, update_t2s: true, weights }
    }
}

#[derive(Clone, Debug)]
struct Best {
    bleu: f64,
    params: Vec<f64>,
}

#[derive(Default)]
struct Window {
    sup_s2t: f64,
    sup_t2s: f64,
    recon_t: f64,
    recon_s: f64,
    steps: usize,
    recon_t_steps: usize,
    recon_s_steps: usize,
    clipped: usize,
}

pub struct Trainer<'d> {
    pub s2t: TranslationModel,
    pub t2s: TranslationModel,
    data: &'d TrainData,
    config: TrainingConfig,
    mode: Mode,
    iteration: usize,
    log: RunLog,
    best_s2t: Option<Best>,
    best_t2s: Option<Best>,
    window: Window,
    samplers: [BatchSampler; 3],
    output: Option<PathBuf>,
    started: Instant,
}

pub struct TrainOutcome {
    pub s2t: TranslationModel,
    pub t2s: TranslationModel,
    pub log: RunLog,
}

impl<'d> Trainer<'d> {
    pub fn new(
        s2t: TranslationModel,
        t2s: TranslationModel,
        data: &'d TrainData,
        config: TrainingConfig,
        mode: Mode,
    ) -> Result<Self> {
        config.validate()?;
        if data.parallel.is_empty() {
            return Err(Error::Empty("parallel corpus"));
        }
        let samplers = [
            BatchSampler::new(data.parallel.len(), config.batch_parallel, config.seed, STREAM_PARALLEL),
            BatchSampler::new(data.target_mono.len(), config.batch_target_mono, config.seed, STREAM_TARGET_MONO),
            BatchSampler::new(data.source_mono.len(), config.batch_source_mono, config.seed, STREAM_SOURCE_MONO),
        ];
        Ok(Trainer {
            s2t,
            t2s,
            data,
            config,
            mode,
            iteration: 0,
            log: RunLog::default(),
            best_s2t: None,
            best_t2s: None,
            window: Window::default(),
            samplers,
            output: None,
            started: Instant::now(),
        })
    }

    /// Writes `runlog.jsonl` and per-eval checkpoints into `dir`.
    pub fn with_output(mut self, dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir).map_err(|e| Error::file(dir, e))?;
        let log = dir.join("runlog.jsonl");
        fs::write(&log, "").map_err(|e| Error::file(&log, e))?;
        self.output = Some(dir.to_owned());
        Ok(self)
    }

    /// Continue from a checkpointed iteration; parameters must already be loaded.
    pub fn resume_at(&mut self, iteration: usize) {
        self.iteration = iteration;
    }

    pub fn iteration(&self) -> usize {
        self.iteration
    }

    pub fn log(&self) -> &RunLog {
        &self.log
    }

    pub fn rng_state(&self) -> RngState {
        RngState { seed: self.config.seed, iteration: self.iteration }
    }

    fn pick<T: Clone>(items: &[T], idx: &[usize]) -> Vec<T> {
        idx.iter().map(|&i| items[i].clone()).collect()
    }

    /// One SGD iteration.
    pub fn step(&mut self) -> Result<()> {
        let draw = self.iteration;
        let it = self.iteration + 1;
        let parallel = Self::pick(&self.data.parallel.pairs, &self.samplers[0].indices(draw));
        let w = self.mode.weights;
        let target = if w.lambda1 > 0.0 {
            Self::pick(&self.data.target_mono.sentences, &self.samplers[1].indices(draw))
        } else {
            Vec::new()
        };
        let source = if w.lambda2 > 0.0 {
            Self::pick(&self.data.source_mono.sentences, &self.samplers[2].indices(draw))
        } else {
            Vec::new()
        };

        let diverged = |e: Error| match e {
            Error::NonFinite(detail) => Error::Diverged { iteration: it, detail },
            other => other,
        };

        if target.is_empty() && source.is_empty() {
            // Pure likelihood: only differentiate the models being updated.
            let mut g_s2t: Option<GradBuffer> = None;
            let mut g_t2s: Option<GradBuffer> = None;
            if self.mode.update_s2t {
                let (loss, g) = supervised_batch(&self.s2t, &parallel).map_err(diverged)?;
                self.window.sup_s2t += loss;
                g_s2t = Some(g);
            }
            if self.mode.update_t2s {
                let rev: Vec<_> = parallel.iter().map(|(x, y)| (y.clone(), x.clone())).collect();
                let (loss, g) = supervised_batch(&self.t2s, &rev).map_err(diverged)?;
                self.window.sup_t2s += loss;
                g_t2s = Some(g);
            }
            self.apply(g_s2t, g_t2s, true, it)?;
        } else {
            let out = joint_objective(&self.s2t, &self.t2s, &parallel, &target, &source, w, self.config.latent_search())
                .map_err(diverged)?;
            self.window.sup_s2t += out.parts.supervised_s2t;
            self.window.sup_t2s += out.parts.supervised_t2s;
            if let Some(r) = out.parts.reconstruction_target {
                self.window.recon_t += r;
                self.window.recon_t_steps += 1;
            }
            if let Some(r) = out.parts.reconstruction_source {
                self.window.recon_s += r;
                self.window.recon_s_steps += 1;
            }
            let a = self.mode.update_s2t.then_some(out.grads_s2t);
            let b = self.mode.update_t2s.then_some(out.grads_t2s);
            self.apply(a, b, false, it)?;
        }
        self.window.steps += 1;
        self.iteration = it;
        Ok(())
    }

    /// `loss_grads`: buffers hold loss gradients (descend) rather than objective gradients (ascend).
    fn apply(&mut self, s2t: Option<GradBuffer>, t2s: Option<GradBuffer>, loss_grads: bool, it: usize) -> Result<()> {
        let sign = if loss_grads { 1.0 } else { -1.0 };
        let cfg = &self.config;
        let mut clipped = false;
        for (model, grads) in [(&mut self.s2t, s2t), (&mut self.t2s, t2s)] {
            if let Some(g) = grads {
                model.params_mut().accumulate(&g, sign);
                let info = clip_and_step(model.params_mut(), cfg.learning_rate, cfg.clip, cfg.clip_norm).map_err(
                    |e| match e {
                        Error::NonFinite(detail) => Error::Diverged { iteration: it, detail },
                        other => other,
                    },
                )?;
                clipped |= info.clipped;
            }
        }
        if clipped {
            self.window.clipped += 1;
        }
        Ok(())
    }

    fn translate_bleu(model: &TranslationModel, inputs: &[Sentence], refs: &[Vec<String>], beam: usize) -> Result<f64> {
        let mut cands = Vec::with_capacity(inputs.len());
        for s in inputs {
            let max_len = default_max_len(s.len());
            let out = if beam <= 1 {
                greedy_translate(model, s.ids(), max_len)?
            } else {
                beam_search(model, s.ids(), beam, 1, max_len)?.hypotheses.remove(0).tokens
            };
            cands.push(decode(&out, model.vocab_out())?);
        }
        let refs: Vec<Vec<Vec<String>>> = refs.iter().map(|r| vec![r.clone()]).collect();
        Ok(corpus_bleu(&cands, &refs, false)?.bleu)
    }

    /// Records an eval point: window losses, validation BLEU, held-out
    /// reconstruction; updates best-model snapshots and writes outputs.
    pub fn evaluate(&mut self) -> Result<EvalRecord> {
        let w = std::mem::take(&mut self.window);
        let avg = |sum: f64, n: usize| (n > 0).then(|| sum / n as f64);
        let mut rec = EvalRecord {
            iteration: self.iteration,
            supervised_s2t: if self.mode.update_s2t { avg(w.sup_s2t, w.steps) } else { None },
            supervised_t2s: if self.mode.update_t2s { avg(w.sup_t2s, w.steps) } else { None },
            reconstruction_target: avg(w.recon_t, w.recon_t_steps),
            reconstruction_source: avg(w.recon_s, w.recon_s_steps),
            valid_bleu_s2t: None,
            valid_bleu_t2s: None,
            heldout_reconstruction: None,
            clipped_steps: w.clipped,
            wall_time_secs: None,
        };
        if let Some(v) = self.data.validation.as_ref().filter(|v| !v.is_empty()) {
            if self.mode.update_s2t {
                let b = Self::translate_bleu(&self.s2t, &v.src, &v.tgt_raw, self.config.eval_beam)?;
                rec.valid_bleu_s2t = Some(b);
                if self.best_s2t.as_ref().map_or(true, |best| b > best.bleu) {
                    self.best_s2t = Some(Best { bleu: b, params: self.s2t.params().flat_values() });
                }
            }
            if self.mode.update_t2s {
                let b = Self::translate_bleu(&self.t2s, &v.tgt, &v.src_raw, self.config.eval_beam)?;
                rec.valid_bleu_t2s = Some(b);
                if self.best_t2s.as_ref().map_or(true, |best| b > best.bleu) {
                    self.best_t2s = Some(Best { bleu: b, params: self.t2s.params().flat_values() });
                }
            }
        }
        if !self.data.recon_sample.is_empty() {
            let rep = reconstruction_report(&self.t2s, &self.s2t, &self.data.recon_sample, self.config.latent_search(), 0)?;
            rec.heldout_reconstruction = Some(rep.mean_log_marginal);
        }
        if self.config.log_wall_time {
            rec.wall_time_secs = Some(self.started.elapsed().as_secs_f64());
        }
        if let Some(dir) = &self.output {
            let line = serde_json::to_string(&rec)? + "\n";
            let path = dir.join("runlog.jsonl");
            let mut f = OpenOptions::new().append(true).open(&path).map_err(|e| Error::file(&path, e))?;
            f.write_all(line.as_bytes()).map_err(|e| Error::file(&path, e))?;
            let state = self.rng_state();
            for (model, update) in [(&self.s2t, self.mode.update_s2t), (&self.t2s, self.mode.update_t2s)] {
                if update {
                    let name = format!("ckpt_{}_{:06}.json", model.direction().tag(), self.iteration);
                    model.checkpoint(state)?.save(&dir.join(name))?;
                }
            }
        }
        self.log.push(rec.clone())?;
        Ok(rec)
    }

    /// Runs to `max_iterations`, evaluating at iteration 0 (fresh runs) and
    /// every `eval_interval` iterations, and always at the end.
    pub fn run(&mut self) -> Result<()> {
        if self.iteration == 0 {
            self.evaluate()?;
        }
        while self.iteration < self.config.max_iterations {
            self.step()?;
            if self.iteration % self.config.eval_interval == 0 || self.iteration == self.config.max_iterations {
                self.evaluate()?;
            }
        }
        Ok(())
    }

    /// Returns the models, restoring best-validation snapshots if configured.
    pub fn finish(mut self) -> Result<TrainOutcome> {
        if self.config.select_best {
            if let Some(b) = self.best_s2t.take() {
                self.s2t.params_mut().set_flat_values(&b.params)?;
            }
            if let Some(b) = self.best_t2s.take() {
                self.t2s.params_mut().set_flat_values(&b.params)?;
            }
        }
        if let Some(dir) = &self.output {
            let state = self.rng_state();
            if self.mode.update_s2t {
                self.s2t.checkpoint(state)?.save(&dir.join("final_s2t.json"))?;
            }
            if self.mode.update_t2s {
                self.t2s.checkpoint(state)?.save(&dir.join("final_t2s.json"))?;
            }
        }
        Ok(TrainOutcome { s2t: self.s2t, t2s: self.t2s, log: self.log })
    }
}

/// Trains both directions on the parallel corpus alone.
pub fn pretrain_supervised(
    s2t: TranslationModel,
    t2s: TranslationModel,
    data: &TrainData,
    config: &TrainingConfig,
    output: Option<&Path>,
) -> Result<TrainOutcome> {
    run_mode(s2t, t2s, data, config, Mode::supervised(), output)
}

/// Joint training on parallel plus monolingual data.
pub fn train_joint(
    s2t: TranslationModel,
    t2s: TranslationModel,
    data: &TrainData,
    config: &TrainingConfig,
    output: Option<&Path>,
) -> Result<TrainOutcome> {
    run_mode(s2t, t2s, data, config, Mode::joint(config.weights()), output)
}

pub fn run_mode(
    s2t: TranslationModel,
    t2s: TranslationModel,
    data: &TrainData,
    config: &TrainingConfig,
    mode: Mode,
    output: Option<&Path>,
) -> Result<TrainOutcome> {
    let mut trainer = Trainer::new(s2t, t2s, data, config.clone(), mode)?;
    if let Some(dir) = output {
        trainer = trainer.with_output(dir)?;
    }
    trainer.run()?;
    trainer.finish()
}

pub struct BackTranslationOutcome {
    pub s2t: TranslationModel,
    /// Pseudo pairs `(x̃, y)` in monolingual-corpus order.
    pub pseudo_pairs: Vec<(Sentence, Sentence)>,
    /// Monolingual sentences whose translation came out empty.
    pub dropped: usize,
    pub log: RunLog,
}

/// Steps 2–4 of back-translation: translate every target monolingual
/// sentence with the trained `t2s`, append the pseudo pairs to the parallel
/// corpus, and train `s2t_start` on the union with the supervised recipe.
/// Pass a freshly initialized model to retrain from scratch or a pretrained
/// one to fine-tune.
pub fn back_translate_with(
    trained_t2s: &TranslationModel,
    s2t_start: TranslationModel,
    data: &TrainData,
    config: &TrainingConfig,
    output: Option<&Path>,
) -> Result<BackTranslationOutcome> {
    let mut pseudo_pairs = Vec::with_capacity(data.target_mono.len());
    let mut dropped = 0;
    for y in &data.target_mono.sentences {
        let max_len = default_max_len(y.len());
        let x = if config.eval_beam <= 1 {
            greedy_translate(trained_t2s, y.ids(), max_len)?
        } else {
            beam_search(trained_t2s, y.ids(), config.eval_beam, 1, max_len)?.hypotheses.remove(0).tokens
        };
        if x.is_empty() {
            dropped += 1;
            continue;
        }
        pseudo_pairs.push((Sentence::new(x, trained_t2s.config().vocab_out)?, y.clone()));
    }
    let mut augmented = TrainData {
        parallel: data.parallel.clone(),
        target_mono: MonolingualCorpus::default(),
        source_mono: MonolingualCorpus::default(),
        validation: data.validation.clone(),
        recon_sample: Vec::new(),
    };
    augmented.parallel.pairs.extend(pseudo_pairs.iter().cloned());
    let mode = Mode { update_s2t: true, update_t2s: false, weights: ObjectiveWeights { lambda1: 0.0, lambda2: 0.0 } };
    let out = run_mode(s2t_start, trained_t2s.clone(), &augmented, config, mode, output)?;
    Ok(BackTranslationOutcome { s2t: out.s2t, pseudo_pairs, dropped, log: out.log })
}

/// All four steps: train `t2s` on the parallel corpus, back-translate the
/// target monolingual corpus, and retrain `s2t` on the augmented corpus.
pub fn back_translation_baseline(
    s2t_init: TranslationModel,
    t2s_init: TranslationModel,
    data: &TrainData,
    config: &TrainingConfig,
) -> Result<BackTranslationOutcome> {
    let step1 = TrainData {
        parallel: data.parallel.clone(),
        validation: data.validation.clone(),
        ..TrainData::default()
    };
    let mode = Mode { update_s2t: false, update_t2s: true, weights: ObjectiveWeights { lambda1: 0.0, lambda2: 0.0 } };
    let trained = run_mode(s2t_init.clone(), t2s_init, &step1, config, mode, None)?;
    back_translate_with(&trained.t2s, s2t_init, data, config, None)
}
