//! End-to-end experiment plumbing: flat configuration documents, run
//! manifests with data digests, the synthetic-task experiment runner and
//! CSV reports over run logs.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::corpus::{build_vocab, decode, MonolingualCorpus, ParallelCorpus, Sentence, Vocabulary};
use crate::decoding::{beam_search, default_max_len, greedy_translate};
use crate::error::{Error, Result};
use crate::evaluation::corpus_bleu;
use crate::model::{Direction, TranslationModel};
use crate::synthtask::{generate, SyntheticData, TaskSpec};
use crate::training::{
    back_translate_with, derive_seed, pretrain_supervised, train_joint, EvalSet, RunLog, TrainData, TrainOutcome,
    TrainingConfig,
};

/// Resolves a flat configuration: defaults, then the file's keys, then
/// `key=value` overrides. Override values are parsed as TOML scalars and
/// fall back to plain strings.
pub fn resolve_config<T: Serialize + DeserializeOwned + Default>(
    file: Option<&Path>,
    overrides: &[(String, String)],
) -> Result<T> {
    let mut table = match serde_json::to_value(T::default())? {
        serde_json::Value::Object(map) => map,
        _ => return Err(Error::Config("configuration type is not a key-value document".into())),
    };
    // `None` fields serialize as null; drop them so the file may set them.
    table.retain(|_, v| !v.is_null());
    if let Some(path) = file {
        let text = fs::read_to_string(path).map_err(|e| Error::file(path, e))?;
        let parsed: toml::Table = text.parse().map_err(|e: toml::de::Error| {
            Error::Config(format!("{}: {}", path.display(), e.message()))
        })?;
        for (k, v) in parsed {
            if !matches!(v, toml::Value::Table(_) | toml::Value::Array(_)) {
                table.insert(k, serde_json::to_value(v)?);
            } else {
                return Err(Error::Config(format!("{}: key `{k}` is not a scalar", path.display())));
            }
        }
    }
    for (k, raw) in overrides {
        let v = match format!("v = {raw}").parse::<toml::Table>() {
            Ok(mut t) => serde_json::to_value(t.remove("v").unwrap_or(toml::Value::String(raw.clone())))?,
            Err(_) => serde_json::Value::String(raw.clone()),
        };
        table.insert(k.clone(), v);
    }
    serde_json::from_value(serde_json::Value::Object(table)).map_err(|e| Error::Config(e.to_string()))
}

/// Parses `key=value`.
pub fn parse_override(s: &str) -> Result<(String, String)> {
    match s.split_once('=') {
        Some((k, v)) if !k.trim().is_empty() => Ok((k.trim().to_owned(), v.trim().to_owned())),
        _ => Err(Error::Config(format!("override `{s}` is not key=value"))),
    }
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| Error::file(path, e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

/// Everything needed to reproduce one command invocation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    /// Command-line arguments after the program name.
    #[serde(default)]
    pub args: Vec<String>,
    pub config: serde_json::Value,
    pub seed: u64,
    /// Input path → SHA-256 of its bytes.
    pub inputs: BTreeMap<String, String>,
    /// Role → output path.
    pub outputs: BTreeMap<String, String>,
}

impl RunManifest {
    pub fn new<C: Serialize>(command: &str, config: &C, seed: u64) -> Result<Self> {
        Ok(RunManifest {
            command: command.to_owned(),
            args: Vec::new(),
            config: serde_json::to_value(config)?,
            seed,
            inputs: BTreeMap::new(),
            outputs: BTreeMap::new(),
        })
    }

    pub fn add_input(&mut self, path: &Path) -> Result<()> {
        self.inputs.insert(path.display().to_string(), sha256_file(path)?);
        Ok(())
    }

    pub fn add_output(&mut self, role: &str, path: &Path) {
        self.outputs.insert(role.to_owned(), path.display().to_string());
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)? + "\n";
        fs::write(path, text).map_err(|e| Error::file(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::file(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}

/// Translates each input and scores the outputs against `references`.
pub fn translate_all(model: &TranslationModel, inputs: &[Sentence], beam: usize) -> Result<Vec<Vec<String>>> {
    inputs
        .iter()
        .map(|s| {
            let max_len = default_max_len(s.len());
            let ids = if beam <= 1 {
                greedy_translate(model, s.ids(), max_len)?
            } else {
                beam_search(model, s.ids(), beam, 1, max_len)?.hypotheses.remove(0).tokens
            };
            decode(&ids, model.vocab_out())
        })
        .collect()
}

pub fn bleu_against(candidates: &[Vec<String>], references: &[Vec<String>]) -> Result<f64> {
    let refs: Vec<Vec<Vec<String>>> = references.iter().map(|r| vec![r.clone()]).collect();
    Ok(corpus_bleu(candidates, &refs, false)?.bleu)
}

/// One synthetic experiment: task, model sizes, the supervised recipe and
/// the joint recipe. Serialized as the experiment manifest.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentSpec {
    pub task: TaskSpec,
    pub pretrain: TrainingConfig,
    pub joint: TrainingConfig,
    /// Validation target sentences whose reconstruction is tracked during joint training.
    pub recon_sample: usize,
    pub run_joint: bool,
    pub run_back_translation: bool,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        ExperimentSpec {
            task: TaskSpec::default(),
            pretrain: TrainingConfig::default(),
            joint: TrainingConfig::default(),
            recon_sample: 50,
            run_joint: true,
            run_back_translation: true,
        }
    }
}

/// Generated data encoded against vocabularies built from the parallel corpus.
#[derive(Clone, Debug)]
pub struct Prepared {
    pub raw: SyntheticData,
    pub src_vocab: Vocabulary,
    pub tgt_vocab: Vocabulary,
    pub train: TrainData,
    pub test: EvalSet,
}

fn eval_set(src: &[Vec<String>], tgt: &[Vec<String>], sv: &Vocabulary, tv: &Vocabulary) -> Result<EvalSet> {
    let p = ParallelCorpus::encode(src, tgt, sv, tv)?;
    let (s, t) = p.pairs.into_iter().unzip();
    Ok(EvalSet { src: s, tgt: t, src_raw: src.to_vec(), tgt_raw: tgt.to_vec() })
}

pub fn prepare(task: &TaskSpec, recon_sample: usize) -> Result<Prepared> {
    let raw = generate(task)?;
    let big = usize::MAX;
    let src_vocab = build_vocab(raw.parallel_src.iter().map(Vec::as_slice), big)?;
    let tgt_vocab = build_vocab(raw.parallel_tgt.iter().map(Vec::as_slice), big)?;
    let validation = eval_set(&raw.valid_src, &raw.valid_tgt, &src_vocab, &tgt_vocab)?;
    let recon: Vec<Sentence> = validation.tgt.iter().take(recon_sample).cloned().collect();
    let train = TrainData {
        parallel: ParallelCorpus::encode(&raw.parallel_src, &raw.parallel_tgt, &src_vocab, &tgt_vocab)?,
        target_mono: MonolingualCorpus::encode(&raw.target_mono, &tgt_vocab)?,
        source_mono: MonolingualCorpus::encode(&raw.source_mono, &src_vocab)?,
        validation: Some(validation),
        recon_sample: recon,
    };
    let test = eval_set(&raw.test_src, &raw.test_tgt, &src_vocab, &tgt_vocab)?;
    Ok(Prepared { raw, src_vocab, tgt_vocab, train, test })
}

pub const SEED_S2T: u64 = 11;
pub const SEED_T2S: u64 = 12;

/// Freshly initialized models for both directions.
pub fn init_models(src: &Vocabulary, tgt: &Vocabulary, cfg: &TrainingConfig) -> Result<(TranslationModel, TranslationModel)> {
    let s2t = TranslationModel::new(
        Direction::SourceToTarget,
        src.clone(),
        tgt.clone(),
        cfg.embed_dim,
        cfg.hidden_dim,
        derive_seed(cfg.seed, SEED_S2T),
    )?;
    let t2s = TranslationModel::new(
        Direction::TargetToSource,
        tgt.clone(),
        src.clone(),
        cfg.embed_dim,
        cfg.hidden_dim,
        derive_seed(cfg.seed, SEED_T2S),
    )?;
    Ok((s2t, t2s))
}

pub fn test_bleu(model: &TranslationModel, test: &EvalSet, beam: usize) -> Result<f64> {
    let refs = match model.direction() {
        Direction::SourceToTarget => (&test.src, &test.tgt_raw),
        Direction::TargetToSource => (&test.tgt, &test.src_raw),
    };
    bleu_against(&translate_all(model, refs.0, beam)?, refs.1)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub baseline_bleu: f64,
    pub joint_bleu: Option<f64>,
    pub back_translation_bleu: Option<f64>,
    pub back_translation_dropped: Option<usize>,
    pub pretrain_log: RunLog,
    pub joint_log: Option<RunLog>,
    pub back_translation_log: Option<RunLog>,
}

fn sub(dir: Option<&Path>, name: &str) -> Option<PathBuf> {
    dir.map(|d| d.join(name))
}

/// Pretrains both directions, then runs joint training and the
/// back-translation baseline from the same pretrained models, reporting
/// test BLEU of the source-to-target model for each. When `out` is given,
/// each stage writes its run log and checkpoints into its own subdirectory
/// and the experiment manifest goes to `out/experiment.json`.
pub fn run_experiment(spec: &ExperimentSpec, out: Option<&Path>) -> Result<ExperimentResult> {
    Ok(run_experiment_detailed(spec, out)?.result)
}

/// A finished experiment together with its data and pretrained models, for
/// callers that branch further runs off the same pretraining.
pub struct ExperimentRun {
    pub result: ExperimentResult,
    pub prepared: Prepared,
    pub pretrained: TrainOutcome,
}

pub fn run_experiment_detailed(spec: &ExperimentSpec, out: Option<&Path>) -> Result<ExperimentRun> {
    let prepared = prepare(&spec.task, spec.recon_sample)?;
    if let Some(dir) = out {
        fs::create_dir_all(dir).map_err(|e| Error::file(dir, e))?;
        let text = serde_json::to_string_pretty(spec)? + "\n";
        let path = dir.join("experiment.json");
        fs::write(&path, text).map_err(|e| Error::file(&path, e))?;
    }
    let (s2t0, t2s0) = init_models(&prepared.src_vocab, &prepared.tgt_vocab, &spec.pretrain)?;
    let pre = pretrain_supervised(s2t0.clone(), t2s0, &prepared.train, &spec.pretrain, sub(out, "pretrain").as_deref())?;
    let beam = spec.pretrain.eval_beam;
    let mut result = ExperimentResult {
        baseline_bleu: test_bleu(&pre.s2t, &prepared.test, beam)?,
        joint_bleu: None,
        back_translation_bleu: None,
        back_translation_dropped: None,
        pretrain_log: pre.log.clone(),
        joint_log: None,
        back_translation_log: None,
    };
    if spec.run_joint {
        let joint = run_joint_from(&pre, &prepared.train, &spec.joint, sub(out, "joint").as_deref())?;
        result.joint_bleu = Some(test_bleu(&joint.s2t, &prepared.test, spec.joint.eval_beam)?);
        result.joint_log = Some(joint.log);
    }
    if spec.run_back_translation {
        let bt = back_translate_with(&pre.t2s, s2t0, &prepared.train, &spec.pretrain, sub(out, "back_translation").as_deref())?;
        result.back_translation_bleu = Some(test_bleu(&bt.s2t, &prepared.test, beam)?);
        result.back_translation_dropped = Some(bt.dropped);
        result.back_translation_log = Some(bt.log);
    }
    if let Some(dir) = out {
        let text = serde_json::to_string_pretty(&result)? + "\n";
        let path = dir.join("result.json");
        fs::write(&path, text).map_err(|e| Error::file(&path, e))?;
    }
    Ok(ExperimentRun { result, prepared, pretrained: pre })
}

/// Joint training initialized from a pretrained pair.
pub fn run_joint_from(
    pretrained: &TrainOutcome,
    data: &TrainData,
    config: &TrainingConfig,
    out: Option<&Path>,
) -> Result<TrainOutcome> {
    train_joint(pretrained.s2t.clone(), pretrained.t2s.clone(), data, config, out)
}

/// Columns of [`report_csv`], after `iteration`, repeated per run.
pub const REPORT_FIELDS: [&str; 9] = [
    "supervised_s2t",
    "supervised_t2s",
    "reconstruction_target",
    "reconstruction_source",
    "valid_bleu_s2t",
    "valid_bleu_t2s",
    "heldout_reconstruction",
    "clipped_steps",
    "wall_time_secs",
];

/// Joins run logs on iteration. Columns are `iteration` followed by
/// `<run>.<field>` for each run (in the given order) and each field in
/// [`REPORT_FIELDS`]; rows are sorted by iteration and missing values are
/// empty cells.
pub fn report_csv(runs: &[(String, RunLog)]) -> String {
    let mut header = vec!["iteration".to_owned()];
    for (name, _) in runs {
        header.extend(REPORT_FIELDS.iter().map(|f| format!("{name}.{f}")));
    }
    let mut rows: BTreeMap<usize, Vec<String>> = BTreeMap::new();
    let width = REPORT_FIELDS.len();
    for (ri, (_, log)) in runs.iter().enumerate() {
        for r in &log.records {
            let row = rows.entry(r.iteration).or_insert_with(|| vec![String::new(); width * runs.len()]);
            let cell = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
            let cells = [
                cell(r.supervised_s2t),
                cell(r.supervised_t2s),
                cell(r.reconstruction_target),
                cell(r.reconstruction_source),
                cell(r.valid_bleu_s2t),
                cell(r.valid_bleu_t2s),
                cell(r.heldout_reconstruction),
                r.clipped_steps.to_string(),
                cell(r.wall_time_secs),
            ];
            for (j, c) in cells.into_iter().enumerate() {
                row[ri * width + j] = c;
            }
        }
    }
    let mut out = header.join(",") + "\n";
    for (it, cells) in rows {
        out.push_str(&it.to_string());
        for c in cells {
            out.push(',');
            out.push_str(&c);
        }
        out.push('\n');
    }
    out
}
