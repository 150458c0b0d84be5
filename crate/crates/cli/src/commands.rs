use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use seminmt::corpus::{build_vocab, decode, encode, filter_by_oov, read_corpus, read_outputs, subsample, write_corpus};
use seminmt::evaluation::{corpus_bleu, reconstruction_report};
use seminmt::numerics::Checkpoint;
use seminmt::pipeline::{
    init_models, parse_override, report_csv, resolve_config, run_experiment, sha256_file, translate_all,
    ExperimentSpec, RunManifest,
};
use seminmt::synthtask::{generate, write_files, CorpusSizes, Reorder, TaskSpec};
use seminmt::training::{back_translate_with, run_mode, EvalSet, Mode, TrainData};
use seminmt::{
    Direction, Error, ModelConfig, MonolingualCorpus, ParallelCorpus, Result, RunLog, Sentence, TrainingConfig,
    TranslationModel, Vocabulary,
};

#[derive(Debug, Parser)]
#[command(name = "seminmt", version, about = "Semi-supervised translation with joint autoencoder training")]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic parallel + monolingual task.
    GenData(GenData),
    /// Build a frequency-ranked vocabulary from corpus files.
    BuildVocab(BuildVocab),
    /// Keep monolingual sentences whose OOV ratio is at most a threshold.
    FilterOov(FilterOov),
    /// Train both directions on the parallel corpus.
    Pretrain(Pretrain),
    /// Joint training on parallel and monolingual data.
    TrainSemi(TrainSemi),
    /// Back-translation baseline.
    BackTranslate(BackTranslate),
    /// Translate a corpus file with a checkpoint.
    Translate(Translate),
    /// Reconstruct monolingual sentences and report Viterbi latents.
    Reconstruct(Reconstruct),
    /// Corpus BLEU of a candidate file against reference files.
    EvalBleu(EvalBleu),
    /// Join run logs into a CSV table keyed by iteration.
    Report(Report),
    /// Run a complete synthetic experiment from one JSON spec.
    Experiment(Experiment),
    /// Re-run the command recorded in a manifest after checking input digests.
    Replay(Replay),
}

#[derive(Debug, Args)]
struct ConfigArgs {
    /// Flat TOML configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override a configuration key; repeatable, wins over the file.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

impl ConfigArgs {
    fn resolve<T: Serialize + for<'de> Deserialize<'de> + Default>(&self) -> Result<T> {
        let overrides = self.set.iter().map(|s| parse_override(s)).collect::<Result<Vec<_>>>()?;
        resolve_config(self.config.as_deref(), &overrides)
    }

    fn record(&self, m: &mut RunManifest) -> Result<()> {
        match &self.config {
            Some(p) => m.add_input(p),
            None => Ok(()),
        }
    }
}

#[derive(Debug, Args)]
struct GenData {
    #[command(flatten)]
    cfg: ConfigArgs,
    #[arg(long)]
    out: PathBuf,
}

/// Flat form of [`TaskSpec`] for configuration files.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct GenConfig {
    vocab_size: usize,
    oov_pool: usize,
    min_len: usize,
    max_len: usize,
    /// Word-mapping permutation seed; ignored when `cipher` is false.
    cipher: bool,
    cipher_seed: u64,
    reorder: Reorder,
    zipf_exponent: f64,
    parallel: usize,
    target_mono: usize,
    source_mono: usize,
    validation: usize,
    test: usize,
    oov_rate: f64,
    seed: u64,
}

impl Default for GenConfig {
    fn default() -> Self {
        let t = TaskSpec::default();
        GenConfig {
            vocab_size: t.vocab_size,
            oov_pool: t.oov_pool,
            min_len: t.min_len,
            max_len: t.max_len,
            cipher: t.cipher_seed.is_some(),
            cipher_seed: t.cipher_seed.unwrap_or(0),
            reorder: t.reorder,
            zipf_exponent: t.zipf_exponent,
            parallel: t.sizes.parallel,
            target_mono: t.sizes.target_mono,
            source_mono: t.sizes.source_mono,
            validation: t.sizes.validation,
            test: t.sizes.test,
            oov_rate: t.oov_rate,
            seed: t.seed,
        }
    }
}

impl GenConfig {
    fn task(&self) -> TaskSpec {
        TaskSpec {
            vocab_size: self.vocab_size,
            oov_pool: self.oov_pool,
            min_len: self.min_len,
            max_len: self.max_len,
            cipher_seed: self.cipher.then_some(self.cipher_seed),
            reorder: self.reorder,
            zipf_exponent: self.zipf_exponent,
            sizes: CorpusSizes {
                parallel: self.parallel,
                target_mono: self.target_mono,
                source_mono: self.source_mono,
                validation: self.validation,
                test: self.test,
            },
            oov_rate: self.oov_rate,
            seed: self.seed,
        }
    }
}

#[derive(Debug, Args)]
struct BuildVocab {
    /// Corpus files to count tokens from.
    #[arg(long = "input", required = true)]
    inputs: Vec<PathBuf>,
    /// Maximum size including the three reserved tokens.
    #[arg(long, default_value_t = 30_000)]
    max_size: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct FilterOov {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    vocab: PathBuf,
    /// Largest OOV ratio kept, in [0, 1].
    #[arg(long)]
    threshold: f64,
    /// Keep a seeded uniform sample of this many filtered sentences.
    #[arg(long)]
    sample: Option<usize>,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

/// Corpus and vocabulary files shared by the training subcommands.
#[derive(Debug, Args)]
struct DataArgs {
    #[arg(long)]
    train_src: PathBuf,
    #[arg(long)]
    train_tgt: PathBuf,
    #[arg(long)]
    src_vocab: PathBuf,
    #[arg(long)]
    tgt_vocab: PathBuf,
    #[arg(long, requires = "valid_tgt")]
    valid_src: Option<PathBuf>,
    #[arg(long, requires = "valid_src")]
    valid_tgt: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct Pretrain {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    cfg: ConfigArgs,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
#[command(group(clap::ArgGroup::new("init").required(true).args(["init_s2t", "cold_start"])))]
struct TrainSemi {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    cfg: ConfigArgs,
    /// Target-side monolingual corpus.
    #[arg(long)]
    mono_tgt: Option<PathBuf>,
    /// Source-side monolingual corpus.
    #[arg(long)]
    mono_src: Option<PathBuf>,
    /// Pretrained checkpoints to start from.
    #[arg(long, requires = "init_t2s")]
    init_s2t: Option<PathBuf>,
    #[arg(long, requires = "init_s2t")]
    init_t2s: Option<PathBuf>,
    /// Start from fresh parameters instead of pretrained checkpoints.
    #[arg(long)]
    cold_start: bool,
    /// Validation target sentences whose reconstruction is logged at each evaluation.
    #[arg(long, default_value_t = 50)]
    recon_sample: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct BackTranslate {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    cfg: ConfigArgs,
    #[arg(long)]
    mono_tgt: PathBuf,
    /// Trained target-to-source model; trained on the parallel corpus first when absent.
    #[arg(long)]
    t2s: Option<PathBuf>,
    /// Fine-tune this source-to-target checkpoint instead of training from scratch.
    #[arg(long)]
    init_s2t: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct Translate {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    src_vocab: PathBuf,
    #[arg(long)]
    tgt_vocab: PathBuf,
    #[arg(long)]
    input: PathBuf,
    /// Beam width; 1 decodes greedily.
    #[arg(long, default_value_t = 1)]
    beam: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Side {
    Target,
    Source,
}

#[derive(Debug, Args)]
struct Reconstruct {
    #[arg(long)]
    s2t: PathBuf,
    #[arg(long)]
    t2s: PathBuf,
    #[arg(long)]
    src_vocab: PathBuf,
    #[arg(long)]
    tgt_vocab: PathBuf,
    /// Monolingual corpus to reconstruct.
    #[arg(long)]
    input: PathBuf,
    /// Language of the input corpus.
    #[arg(long, value_enum, default_value = "target")]
    side: Side,
    #[arg(long, default_value_t = 10)]
    k: usize,
    /// Latent beam width; defaults to 2k.
    #[arg(long)]
    beam_width: Option<usize>,
    /// One JSON record per sentence.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct EvalBleu {
    #[arg(long)]
    candidates: PathBuf,
    /// Reference file; repeat for multiple references per sentence.
    #[arg(long = "reference", required = true)]
    references: Vec<PathBuf>,
    /// Add-one smoothing for n-gram orders above one.
    #[arg(long)]
    smoothed: bool,
    /// Write the full report as JSON.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct Report {
    /// Run logs as `NAME=PATH` or `PATH` (named after the parent directory).
    #[arg(required = true)]
    runs: Vec<String>,
    /// CSV destination; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct Experiment {
    /// Experiment spec as JSON; defaults are used for absent keys.
    #[arg(long)]
    spec: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct Replay {
    manifest: PathBuf,
}

pub fn run(cli: Cli, args: Vec<String>) -> Result<()> {
    match cli.command {
        Command::GenData(c) => gen_data(c, args),
        Command::BuildVocab(c) => build_vocab_cmd(c, args),
        Command::FilterOov(c) => filter_oov(c, args),
        Command::Pretrain(c) => pretrain(c, args),
        Command::TrainSemi(c) => train_semi(c, args),
        Command::BackTranslate(c) => back_translate(c, args),
        Command::Translate(c) => translate(c, args),
        Command::Reconstruct(c) => reconstruct(c, args),
        Command::EvalBleu(c) => eval_bleu(c, args),
        Command::Report(c) => report(c, args),
        Command::Experiment(c) => experiment(c, args),
        Command::Replay(c) => replay(c),
    }
}

fn manifest<C: Serialize>(command: &str, config: &C, seed: u64, args: Vec<String>) -> Result<RunManifest> {
    let mut m = RunManifest::new(command, config, seed)?;
    m.args = args;
    Ok(m)
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::file(path, e))
}

/// `<file>.manifest.json` next to a single-file output.
fn sidecar(path: &Path) -> PathBuf {
    let mut name = path.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".manifest.json");
    path.with_file_name(name)
}

fn gen_data(c: GenData, args: Vec<String>) -> Result<()> {
    let cfg: GenConfig = c.cfg.resolve()?;
    let task = cfg.task();
    let data = generate(&task)?;
    write_files(&task, &data, &c.out)?;
    let mut m = manifest("gen-data", &cfg, cfg.seed, args)?;
    c.cfg.record(&mut m)?;
    m.add_output("data", &c.out);
    m.save(&c.out.join("manifest.json"))
}

fn build_vocab_cmd(c: BuildVocab, args: Vec<String>) -> Result<()> {
    let mut m = manifest("build-vocab", &serde_json::json!({ "max_size": c.max_size }), 0, args)?;
    let mut corpus = Vec::new();
    for p in &c.inputs {
        corpus.extend(read_corpus(p)?);
        m.add_input(p)?;
    }
    let vocab = build_vocab(corpus.iter().map(Vec::as_slice), c.max_size)?;
    vocab.save(&c.out)?;
    m.add_output("vocab", &c.out);
    m.save(&sidecar(&c.out))
}

fn filter_oov(c: FilterOov, args: Vec<String>) -> Result<()> {
    let config = serde_json::json!({ "threshold": c.threshold, "sample": c.sample, "seed": c.seed });
    let mut m = manifest("filter-oov", &config, c.seed, args)?;
    let mono = read_corpus(&c.input)?;
    let vocab = Vocabulary::load(&c.vocab)?;
    m.add_input(&c.input)?;
    m.add_input(&c.vocab)?;
    let mut kept = filter_by_oov(&mono, &vocab, c.threshold)?;
    if let Some(n) = c.sample {
        kept = subsample(&kept, n, c.seed);
    }
    write_corpus(&c.out, &kept)?;
    m.add_output("corpus", &c.out);
    m.save(&sidecar(&c.out))
}

struct Loaded {
    src_vocab: Vocabulary,
    tgt_vocab: Vocabulary,
    data: TrainData,
}

fn load_data(d: &DataArgs, m: &mut RunManifest) -> Result<Loaded> {
    let src_vocab = Vocabulary::load(&d.src_vocab)?;
    let tgt_vocab = Vocabulary::load(&d.tgt_vocab)?;
    let src = read_corpus(&d.train_src)?;
    let tgt = read_corpus(&d.train_tgt)?;
    for p in [&d.src_vocab, &d.tgt_vocab, &d.train_src, &d.train_tgt] {
        m.add_input(p)?;
    }
    let parallel = ParallelCorpus::encode(&src, &tgt, &src_vocab, &tgt_vocab)?;
    let validation = match (&d.valid_src, &d.valid_tgt) {
        (Some(vs), Some(vt)) => {
            let (src_raw, tgt_raw) = (read_corpus(vs)?, read_corpus(vt)?);
            m.add_input(vs)?;
            m.add_input(vt)?;
            let (s, t) = ParallelCorpus::encode(&src_raw, &tgt_raw, &src_vocab, &tgt_vocab)?.pairs.into_iter().unzip();
            Some(EvalSet { src: s, tgt: t, src_raw, tgt_raw })
        }
        _ => None,
    };
    let data = TrainData { parallel, validation, ..TrainData::default() };
    Ok(Loaded { src_vocab, tgt_vocab, data })
}

fn load_mono(path: &Path, vocab: &Vocabulary, m: &mut RunManifest) -> Result<MonolingualCorpus> {
    let raw = read_corpus(path)?;
    m.add_input(path)?;
    MonolingualCorpus::encode(&raw, vocab)
}

/// Loads a checkpoint into a model over the given vocabularies, picking the
/// input/output sides from the checkpoint's direction.
fn load_model(path: &Path, src: &Vocabulary, tgt: &Vocabulary) -> Result<TranslationModel> {
    let ck = Checkpoint::load(path)?;
    let cfg: ModelConfig = serde_json::from_value(ck.model_config.clone())
        .map_err(|e| Error::VocabMismatch(format!("{}: model config: {e}", path.display())))?;
    let (vin, vout) = match cfg.direction {
        Direction::SourceToTarget => (src, tgt),
        Direction::TargetToSource => (tgt, src),
    };
    if (vin.size(), vout.size()) != (cfg.vocab_in, cfg.vocab_out) {
        return Err(Error::VocabMismatch(format!(
            "{}: checkpoint expects vocabularies of size {}→{}, given {}→{}",
            path.display(),
            cfg.vocab_in,
            cfg.vocab_out,
            vin.size(),
            vout.size()
        )));
    }
    let mut model = TranslationModel::new(cfg.direction, vin.clone(), vout.clone(), cfg.embed_dim, cfg.hidden_dim, 0)?;
    model.restore(&ck)?;
    Ok(model)
}

fn load_expecting(path: &Path, dir: Direction, l: &Loaded, m: &mut RunManifest) -> Result<TranslationModel> {
    let model = load_model(path, &l.src_vocab, &l.tgt_vocab)?;
    if model.direction() != dir {
        return Err(Error::VocabMismatch(format!("{}: expected a {} model", path.display(), dir.tag())));
    }
    m.add_input(path)?;
    Ok(model)
}

fn training_config(cfg: &ConfigArgs) -> Result<TrainingConfig> {
    let c: TrainingConfig = cfg.resolve()?;
    c.validate()?;
    Ok(c)
}

fn finish_training(mut m: RunManifest, out: &Path, log: &RunLog) -> Result<()> {
    m.add_output("runlog", &out.join("runlog.jsonl"));
    for name in ["final_s2t.json", "final_t2s.json"] {
        let p = out.join(name);
        if p.exists() {
            m.add_output(name.trim_end_matches(".json"), &p);
        }
    }
    if let Some(last) = log.records.last() {
        println!("{}", serde_json::to_string(last)?);
    }
    m.save(&out.join("manifest.json"))
}

fn pretrain(c: Pretrain, args: Vec<String>) -> Result<()> {
    let config = training_config(&c.cfg)?;
    let mut m = manifest("pretrain", &config, config.seed, args)?;
    c.cfg.record(&mut m)?;
    let l = load_data(&c.data, &mut m)?;
    let (s2t, t2s) = init_models(&l.src_vocab, &l.tgt_vocab, &config)?;
    let out = run_mode(s2t, t2s, &l.data, &config, Mode::supervised(), Some(&c.out))?;
    finish_training(m, &c.out, &out.log)
}

fn train_semi(c: TrainSemi, args: Vec<String>) -> Result<()> {
    let config = training_config(&c.cfg)?;
    let mut m = manifest("train-semi", &config, config.seed, args)?;
    c.cfg.record(&mut m)?;
    let mut l = load_data(&c.data, &mut m)?;
    if let Some(p) = &c.mono_tgt {
        l.data.target_mono = load_mono(p, &l.tgt_vocab, &mut m)?;
    }
    if let Some(p) = &c.mono_src {
        l.data.source_mono = load_mono(p, &l.src_vocab, &mut m)?;
    }
    if let Some(v) = &l.data.validation {
        l.data.recon_sample = v.tgt.iter().take(c.recon_sample).cloned().collect();
    }
    let (s2t, t2s) = match (&c.init_s2t, &c.init_t2s) {
        (Some(a), Some(b)) => {
            (load_expecting(a, Direction::SourceToTarget, &l, &mut m)?, load_expecting(b, Direction::TargetToSource, &l, &mut m)?)
        }
        _ => init_models(&l.src_vocab, &l.tgt_vocab, &config)?,
    };
    let out = run_mode(s2t, t2s, &l.data, &config, Mode::joint(config.weights()), Some(&c.out))?;
    finish_training(m, &c.out, &out.log)
}

fn back_translate(c: BackTranslate, args: Vec<String>) -> Result<()> {
    let config = training_config(&c.cfg)?;
    let mut m = manifest("back-translate", &config, config.seed, args)?;
    c.cfg.record(&mut m)?;
    let mut l = load_data(&c.data, &mut m)?;
    l.data.target_mono = load_mono(&c.mono_tgt, &l.tgt_vocab, &mut m)?;
    let (fresh_s2t, fresh_t2s) = init_models(&l.src_vocab, &l.tgt_vocab, &config)?;
    let t2s = match &c.t2s {
        Some(p) => load_expecting(p, Direction::TargetToSource, &l, &mut m)?,
        None => {
            let parallel_only = TrainData {
                parallel: l.data.parallel.clone(),
                validation: l.data.validation.clone(),
                ..TrainData::default()
            };
            let mode = Mode { update_s2t: false, ..Mode::supervised() };
            let dir = c.out.join("t2s");
            let trained = run_mode(fresh_s2t.clone(), fresh_t2s, &parallel_only, &config, mode, Some(&dir))?;
            m.add_output("t2s", &dir.join("final_t2s.json"));
            trained.t2s
        }
    };
    let start = match &c.init_s2t {
        Some(p) => load_expecting(p, Direction::SourceToTarget, &l, &mut m)?,
        None => fresh_s2t,
    };
    let bt = back_translate_with(&t2s, start, &l.data, &config, Some(&c.out))?;
    let (pseudo_src, pseudo_tgt): (Vec<Vec<String>>, Vec<Vec<String>>) = bt
        .pseudo_pairs
        .iter()
        .map(|(x, y)| Ok((decode(x.ids(), &l.src_vocab)?, decode(y.ids(), &l.tgt_vocab)?)))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .unzip();
    let (ps, pt) = (c.out.join("pseudo.src"), c.out.join("pseudo.tgt"));
    write_corpus(&ps, &pseudo_src)?;
    write_corpus(&pt, &pseudo_tgt)?;
    m.add_output("pseudo_src", &ps);
    m.add_output("pseudo_tgt", &pt);
    eprintln!("dropped {} empty back-translations", bt.dropped);
    finish_training(m, &c.out, &bt.log)
}

fn translate(c: Translate, args: Vec<String>) -> Result<()> {
    if c.beam == 0 {
        return Err(Error::Config("beam must be positive".into()));
    }
    let mut m = manifest("translate", &serde_json::json!({ "beam": c.beam }), 0, args)?;
    let (sv, tv) = (Vocabulary::load(&c.src_vocab)?, Vocabulary::load(&c.tgt_vocab)?);
    let model = load_model(&c.model, &sv, &tv)?;
    let raw = read_corpus(&c.input)?;
    for p in [&c.model, &c.src_vocab, &c.tgt_vocab, &c.input] {
        m.add_input(p)?;
    }
    let inputs: Vec<Sentence> = raw.iter().map(|s| encode(s, model.vocab_in())).collect::<Result<_>>()?;
    let outputs = translate_all(&model, &inputs, c.beam)?;
    write_corpus(&c.out, &outputs)?;
    m.add_output("translations", &c.out);
    m.save(&sidecar(&c.out))
}

#[derive(Serialize)]
struct ReconstructionLine {
    observed: Vec<String>,
    latent: Vec<String>,
    log_marginal: f64,
    joint_log_score: f64,
}

fn reconstruct(c: Reconstruct, args: Vec<String>) -> Result<()> {
    let search = seminmt::semisup::LatentSearch { k: c.k, beam_width: c.beam_width.unwrap_or(2 * c.k), max_len: None };
    if search.k == 0 || search.beam_width < search.k {
        return Err(Error::Config("k must be positive and beam_width at least k".into()));
    }
    let config = serde_json::json!({ "k": search.k, "beam_width": search.beam_width, "side": format!("{:?}", c.side).to_lowercase() });
    let mut m = manifest("reconstruct", &config, 0, args)?;
    let (sv, tv) = (Vocabulary::load(&c.src_vocab)?, Vocabulary::load(&c.tgt_vocab)?);
    let s2t = load_model(&c.s2t, &sv, &tv)?;
    let t2s = load_model(&c.t2s, &sv, &tv)?;
    if s2t.direction() != Direction::SourceToTarget || t2s.direction() != Direction::TargetToSource {
        return Err(Error::VocabMismatch("--s2t and --t2s checkpoints have the wrong directions".into()));
    }
    let (encoder, decoder) = match c.side {
        Side::Target => (&t2s, &s2t),
        Side::Source => (&s2t, &t2s),
    };
    let raw = read_corpus(&c.input)?;
    for p in [&c.s2t, &c.t2s, &c.src_vocab, &c.tgt_vocab, &c.input] {
        m.add_input(p)?;
    }
    let sample = MonolingualCorpus::encode(&raw, encoder.vocab_in())?.sentences;
    let rep = reconstruction_report(encoder, decoder, &sample, search, sample.len())?;
    let mut text = String::new();
    for (ex, observed) in rep.examples.iter().zip(raw) {
        let line = ReconstructionLine {
            observed,
            latent: decode(&ex.latent, encoder.vocab_out())?,
            log_marginal: ex.log_marginal,
            joint_log_score: ex.joint_log_score,
        };
        text.push_str(&serde_json::to_string(&line)?);
        text.push('\n');
    }
    write_text(&c.out, &text)?;
    println!("mean_log_marginal {:.6} sentences {}", rep.mean_log_marginal, rep.sentences);
    m.add_output("reconstructions", &c.out);
    m.save(&sidecar(&c.out))
}

fn eval_bleu(c: EvalBleu, args: Vec<String>) -> Result<()> {
    let cands = read_outputs(&c.candidates)?;
    let ref_files = c.references.iter().map(|p| read_corpus(p)).collect::<Result<Vec<_>>>()?;
    if let Some((p, r)) = c.references.iter().zip(&ref_files).find(|(_, r)| r.len() != cands.len()) {
        return Err(Error::InvalidArgument(format!(
            "{} has {} lines but the candidates have {}",
            p.display(),
            r.len(),
            cands.len()
        )));
    }
    let refs: Vec<Vec<Vec<String>>> =
        (0..cands.len()).map(|i| ref_files.iter().map(|r| r[i].clone()).collect()).collect();
    let rep = corpus_bleu(&cands, &refs, c.smoothed)?;
    println!("{:.2}", rep.bleu);
    if let Some(path) = &c.report {
        write_text(path, &(serde_json::to_string_pretty(&rep)? + "\n"))?;
        let mut m = manifest("eval-bleu", &serde_json::json!({ "smoothed": c.smoothed }), 0, args)?;
        m.add_input(&c.candidates)?;
        for p in &c.references {
            m.add_input(p)?;
        }
        m.add_output("report", path);
        m.save(&sidecar(path))?;
    }
    Ok(())
}

fn report(c: Report, args: Vec<String>) -> Result<()> {
    let mut m = manifest("report", &serde_json::json!({}), 0, args)?;
    let mut runs = Vec::new();
    for spec in &c.runs {
        let (name, path) = match spec.split_once('=') {
            Some((n, p)) => (n.to_owned(), PathBuf::from(p)),
            None => {
                let p = PathBuf::from(spec);
                let name = p
                    .parent()
                    .and_then(|d| d.file_name())
                    .or_else(|| p.file_stem())
                    .map(|n| n.to_string_lossy().into_owned())
                    .unwrap_or_else(|| spec.clone());
                (name, p)
            }
        };
        let text = fs::read_to_string(&path).map_err(|e| Error::file(&path, e))?;
        runs.push((name, RunLog::from_jsonl(&text, &path.display().to_string())?));
        m.add_input(&path)?;
    }
    let csv = report_csv(&runs);
    match &c.out {
        Some(path) => {
            write_text(path, &csv)?;
            m.add_output("csv", path);
            m.save(&sidecar(path))
        }
        None => {
            print!("{csv}");
            Ok(())
        }
    }
}

fn experiment(c: Experiment, args: Vec<String>) -> Result<()> {
    let spec: ExperimentSpec = match &c.spec {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| Error::file(p, e))?;
            serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", p.display())))?
        }
        None => ExperimentSpec::default(),
    };
    spec.pretrain.validate()?;
    spec.joint.validate()?;
    let mut m = manifest("experiment", &spec, spec.task.seed, args)?;
    if let Some(p) = &c.spec {
        m.add_input(p)?;
    }
    let result = run_experiment(&spec, Some(&c.out))?;
    println!("baseline {:.2}", result.baseline_bleu);
    if let Some(b) = result.joint_bleu {
        println!("joint {b:.2}");
    }
    if let Some(b) = result.back_translation_bleu {
        println!("back_translation {b:.2}");
    }
    m.add_output("result", &c.out.join("result.json"));
    m.save(&c.out.join("manifest.json"))
}

fn replay(c: Replay) -> Result<()> {
    let m = RunManifest::load(&c.manifest)?;
    for (path, digest) in &m.inputs {
        let now = sha256_file(Path::new(path))?;
        if &now != digest {
            let detail = format!("changed since the recorded run (sha256 {now}, recorded {digest})");
            return Err(Error::file(path, std::io::Error::new(std::io::ErrorKind::InvalidData, detail)));
        }
    }
    let argv = std::iter::once("seminmt".to_owned()).chain(m.args.iter().cloned());
    let cli = Cli::try_parse_from(argv).map_err(|e| Error::Config(format!("recorded arguments: {}", e.kind())))?;
    if matches!(cli.command, Command::Replay(_)) {
        return Err(Error::Config("a manifest cannot replay another replay".into()));
    }
    run(cli, m.args)
}
