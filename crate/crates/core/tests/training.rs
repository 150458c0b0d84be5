mod common;

use common::*;
use seminmt::corpus::{MonolingualCorpus, ParallelCorpus, Sentence};
use seminmt::numerics::{Checkpoint, RngState};
use seminmt::pipeline::{init_models, prepare};
use seminmt::semisup::supervised_batch;
use seminmt::decoding::{default_max_len, greedy_translate};
use seminmt::synthtask::{CorpusSizes, Reorder, TaskSpec};
use seminmt::training::{
    back_translate_with, pretrain_supervised, run_mode, train_joint, Mode, TrainData, Trainer, TrainingConfig,
};
use seminmt::{Direction, ObjectiveWeights, TranslationModel};

fn small_task(seed: u64) -> TaskSpec {
    TaskSpec {
        vocab_size: 12,
        oov_pool: 2,
        min_len: 2,
        max_len: 5,
        cipher_seed: Some(3),
        reorder: Reorder::None,
        sizes: CorpusSizes { parallel: 80, target_mono: 20, source_mono: 10, validation: 10, test: 10 },
        seed,
        ..TaskSpec::default()
    }
}

fn quick_config() -> TrainingConfig {
    TrainingConfig {
        embed_dim: 6,
        hidden_dim: 8,
        learning_rate: 5.0,
        k: 2,
        batch_parallel: 4,
        batch_target_mono: 2,
        batch_source_mono: 2,
        max_iterations: 12,
        eval_interval: 4,
        select_best: false,
        ..TrainingConfig::default()
    }
}

fn same_params(a: &TranslationModel, b: &TranslationModel) -> bool {
    a.params().flat_values().iter().zip(b.params().flat_values()).all(|(x, y)| x.to_bits() == y.to_bits())
}

#[test]
fn single_pair_overfits() {
    let s2t = TranslationModel::with_sizes(Direction::SourceToTarget, 8, 8, 32, 64, 5).unwrap();
    let t2s = TranslationModel::with_sizes(Direction::TargetToSource, 8, 8, 32, 64, 6).unwrap();
    let pair = (Sentence::new(vec![3, 4, 5], 8).unwrap(), Sentence::new(vec![6, 7, 3, 4], 8).unwrap());
    let data = TrainData { parallel: ParallelCorpus { pairs: vec![pair.clone()] }, ..TrainData::default() };
    let cfg = TrainingConfig {
        learning_rate: 0.5,
        clip: 5.0,
        batch_parallel: 1,
        max_iterations: 200,
        eval_interval: 50,
        ..TrainingConfig::default()
    };
    let out = pretrain_supervised(s2t, t2s, &data, &cfg, None).unwrap();
    let (nll, _) = supervised_batch(&out.s2t, &[pair.clone()]).unwrap();
    let per_token = nll / (pair.1.len() + 1) as f64;
    assert!(per_token < 0.1, "per-token loss {per_token}");
}

#[test]
fn zero_iterations_leave_models_unchanged() {
    let p = prepare(&small_task(1), 0).unwrap();
    let cfg = TrainingConfig { max_iterations: 0, ..quick_config() };
    let (s2t, t2s) = init_models(&p.src_vocab, &p.tgt_vocab, &cfg).unwrap();
    let out = pretrain_supervised(s2t.clone(), t2s.clone(), &p.train, &cfg, None).unwrap();
    assert!(same_params(&out.s2t, &s2t) && same_params(&out.t2s, &t2s));
    assert_eq!(out.log.records.len(), 1);
    assert_eq!(out.log.records[0].iteration, 0);
}

#[test]
fn identical_seeds_give_identical_checkpoints() {
    let p = prepare(&small_task(2), 3).unwrap();
    let cfg = quick_config();
    let run = || {
        let (s2t, t2s) = init_models(&p.src_vocab, &p.tgt_vocab, &cfg).unwrap();
        train_joint(s2t, t2s, &p.train, &cfg, None).unwrap()
    };
    let (a, b) = (run(), run());
    let state = RngState { seed: cfg.seed, iteration: cfg.max_iterations };
    assert_eq!(a.s2t.checkpoint(state).unwrap().to_json().unwrap(), b.s2t.checkpoint(state).unwrap().to_json().unwrap());
    assert_eq!(a.log.to_jsonl().unwrap(), b.log.to_jsonl().unwrap());
    let other = TrainingConfig { seed: 9, ..cfg.clone() };
    let (s2t, t2s) = init_models(&p.src_vocab, &p.tgt_vocab, &other).unwrap();
    let c = train_joint(s2t, t2s, &p.train, &other, None).unwrap();
    assert!(!same_params(&a.s2t, &c.s2t));
}

#[test]
fn zero_lambdas_reduce_to_supervised_training() {
    let p = prepare(&small_task(3), 0).unwrap();
    let cfg = TrainingConfig { lambda1: 0.0, lambda2: 0.0, ..quick_config() };
    let (s2t, t2s) = init_models(&p.src_vocab, &p.tgt_vocab, &cfg).unwrap();
    let joint = train_joint(s2t.clone(), t2s.clone(), &p.train, &cfg, None).unwrap();
    let sup = pretrain_supervised(s2t, t2s, &p.train, &cfg, None).unwrap();
    assert!(same_params(&joint.s2t, &sup.s2t) && same_params(&joint.t2s, &sup.t2s));
    assert_eq!(joint.log, sup.log);
}

#[test]
fn joint_logs_reconstruction_and_clipping() {
    let p = prepare(&small_task(4), 3).unwrap();
    let cfg = TrainingConfig { lambda2: 0.1, ..quick_config() };
    let (s2t, t2s) = init_models(&p.src_vocab, &p.tgt_vocab, &cfg).unwrap();
    let out = train_joint(s2t, t2s, &p.train, &cfg, None).unwrap();
    let its: Vec<usize> = out.log.records.iter().map(|r| r.iteration).collect();
    assert_eq!(its, vec![0, 4, 8, 12]);
    let last = out.log.records.last().unwrap();
    assert!(last.reconstruction_target.unwrap() <= 0.0);
    assert!(last.reconstruction_source.unwrap() <= 0.0);
    assert!(last.heldout_reconstruction.is_some());
    assert!(last.valid_bleu_s2t.is_some() && last.valid_bleu_t2s.is_some());
    assert!(last.clipped_steps <= 4);
}

#[test]
fn infinite_clip_matches_unclipped_sgd() {
    let p = prepare(&small_task(5), 0).unwrap();
    let cfg = TrainingConfig { clip: f64::INFINITY, max_iterations: 5, eval_interval: 5, ..quick_config() };
    let (s2t, t2s) = init_models(&p.src_vocab, &p.tgt_vocab, &cfg).unwrap();
    let mode = Mode { update_s2t: true, update_t2s: false, weights: ObjectiveWeights { lambda1: 0.0, lambda2: 0.0 } };
    let out = run_mode(s2t.clone(), t2s, &p.train, &cfg, mode, None).unwrap();
    assert!(out.log.records.iter().all(|r| r.clipped_steps == 0));

    // Plain SGD over the same batch sequence.
    let sampler = seminmt::training::BatchSampler::new(
        p.train.parallel.len(),
        cfg.batch_parallel,
        cfg.seed,
        seminmt::training::STREAM_PARALLEL,
    );
    let mut manual = s2t;
    for step in 0..cfg.max_iterations {
        let batch: Vec<_> = sampler.indices(step).into_iter().map(|i| p.train.parallel.pairs[i].clone()).collect();
        let (_, g) = supervised_batch(&manual, &batch).unwrap();
        let flat = flatten(manual.params(), &g);
        let updated: Vec<f64> =
            manual.params().flat_values().iter().zip(&flat).map(|(v, g)| v - cfg.learning_rate * g).collect();
        manual.params_mut().set_flat_values(&updated).unwrap();
    }
    let gap = out
        .s2t
        .params()
        .flat_values()
        .iter()
        .zip(manual.params().flat_values())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    assert!(gap < 1e-12, "gap {gap}");
}

#[test]
fn resume_from_checkpoint_is_bitwise_identical() {
    let p = prepare(&small_task(6), 2).unwrap();
    let cfg = TrainingConfig { max_iterations: 10, eval_interval: 5, ..quick_config() };
    let (s2t, t2s) = init_models(&p.src_vocab, &p.tgt_vocab, &cfg).unwrap();
    let mode = Mode::joint(cfg.weights());

    let mut full = Trainer::new(s2t.clone(), t2s.clone(), &p.train, cfg.clone(), mode).unwrap();
    full.run().unwrap();
    let full = full.finish().unwrap();

    let half_cfg = TrainingConfig { max_iterations: 5, ..cfg.clone() };
    let mut half = Trainer::new(s2t, t2s, &p.train, half_cfg, mode).unwrap();
    half.run().unwrap();
    let state = half.rng_state();
    let half = half.finish().unwrap();
    let ck_s2t = Checkpoint::from_json(&half.s2t.checkpoint(state).unwrap().to_json().unwrap()).unwrap();
    let ck_t2s = Checkpoint::from_json(&half.t2s.checkpoint(state).unwrap().to_json().unwrap()).unwrap();

    let (mut s2t, mut t2s) = init_models(&p.src_vocab, &p.tgt_vocab, &TrainingConfig { seed: 77, ..cfg.clone() }).unwrap();
    s2t.restore(&ck_s2t).unwrap();
    t2s.restore(&ck_t2s).unwrap();
    let mut resumed = Trainer::new(s2t, t2s, &p.train, cfg, mode).unwrap();
    resumed.resume_at(ck_s2t.rng_state.iteration);
    resumed.run().unwrap();
    let resumed = resumed.finish().unwrap();
    assert!(same_params(&full.s2t, &resumed.s2t) && same_params(&full.t2s, &resumed.t2s));
    assert_eq!(full.log.records.last(), resumed.log.records.last());
}

#[test]
fn one_joint_step_matches_enumerated_objective() {
    // Tiny vocabularies and a latent cap small enough that k covers the space.
    let s2t = tiny_model(Direction::SourceToTarget, 4, 5, 3, 4, 21, 5.0);
    let t2s = tiny_model(Direction::TargetToSource, 5, 4, 3, 4, 22, 5.0);
    let pair = (Sentence::new(vec![3, 0], 4).unwrap(), Sentence::new(vec![4, 3], 5).unwrap());
    let mono = Sentence::new(vec![3, 4], 5).unwrap();
    let space = all_sequences(4, 1, 2);
    let lambda1 = 0.3;
    let lr = 0.7;
    let cfg = TrainingConfig {
        lambda1,
        lambda2: 0.0,
        k: space.len(),
        beam_width: Some(space.len()),
        latent_max_len: Some(2),
        learning_rate: lr,
        clip: 1e9,
        batch_parallel: 1,
        batch_target_mono: 1,
        max_iterations: 1,
        eval_interval: 1,
        select_best: false,
        ..TrainingConfig::default()
    };
    let data = TrainData {
        parallel: ParallelCorpus { pairs: vec![pair.clone()] },
        target_mono: MonolingualCorpus { sentences: vec![mono.clone()] },
        ..TrainData::default()
    };
    let out = train_joint(s2t.clone(), t2s.clone(), &data, &cfg, None).unwrap();

    let oracle = enumerate_reconstruction(&t2s, &s2t, mono.ids(), space);
    let (_, g_sup_s2t) = s2t.log_prob_grad(pair.0.ids(), pair.1.ids()).unwrap();
    let (_, g_sup_t2s) = t2s.log_prob_grad(pair.1.ids(), pair.0.ids()).unwrap();
    let expect = |m: &TranslationModel, sup: Vec<f64>, recon: &[f64]| -> Vec<f64> {
        m.params()
            .flat_values()
            .iter()
            .zip(sup.iter().zip(recon))
            .map(|(v, (s, r))| v + lr * (s + lambda1 * r))
            .collect()
    };
    let want_s2t = expect(&s2t, flatten(s2t.params(), &g_sup_s2t), &oracle.decoder_grad);
    let want_t2s = expect(&t2s, flatten(t2s.params(), &g_sup_t2s), &oracle.encoder_grad);
    let gap = |m: &TranslationModel, want: &[f64]| {
        m.params().flat_values().iter().zip(want).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    };
    assert!(gap(&out.s2t, &want_s2t) < 1e-10);
    assert!(gap(&out.t2s, &want_t2s) < 1e-10);
}

#[test]
fn back_translation_with_empty_monolingual_matches_supervised() {
    let mut task = small_task(7);
    task.sizes.target_mono = 0;
    let p = prepare(&task, 0).unwrap();
    let cfg = quick_config();
    let (s2t, t2s) = init_models(&p.src_vocab, &p.tgt_vocab, &cfg).unwrap();
    let pre = pretrain_supervised(s2t.clone(), t2s, &p.train, &cfg, None).unwrap();
    let bt = back_translate_with(&pre.t2s, s2t, &p.train, &cfg, None).unwrap();
    assert!(bt.pseudo_pairs.is_empty());
    assert_eq!(bt.dropped, 0);
    assert!(same_params(&bt.s2t, &pre.s2t));
}

#[test]
fn back_translation_pairs_are_reverse_model_outputs() {
    let p = prepare(&small_task(8), 0).unwrap();
    let cfg = TrainingConfig { max_iterations: 60, ..quick_config() };
    let (s2t, t2s) = init_models(&p.src_vocab, &p.tgt_vocab, &cfg).unwrap();
    let mode = Mode { update_s2t: false, update_t2s: true, weights: ObjectiveWeights { lambda1: 0.0, lambda2: 0.0 } };
    let trained = run_mode(s2t.clone(), t2s, &p.train, &cfg, mode, None).unwrap();

    let short = TrainingConfig { max_iterations: 1, ..cfg };
    let bt = back_translate_with(&trained.t2s, s2t, &p.train, &short, None).unwrap();
    let mono = &p.train.target_mono.sentences;
    assert_eq!(bt.pseudo_pairs.len() + bt.dropped, mono.len());
    let expected: Vec<(Vec<usize>, &Sentence)> = mono
        .iter()
        .map(|y| (greedy_translate(&trained.t2s, y.ids(), default_max_len(y.len())).unwrap(), y))
        .filter(|(x, _)| !x.is_empty())
        .collect();
    assert_eq!(expected.len(), bt.pseudo_pairs.len());
    for ((x, y), (ex, ey)) in bt.pseudo_pairs.iter().zip(&expected) {
        assert_eq!(x.ids(), ex.as_slice());
        assert_eq!(y, *ey);
    }
}

#[test]
fn outputs_are_written_per_eval() {
    let p = prepare(&small_task(9), 0).unwrap();
    let cfg = quick_config();
    let (s2t, t2s) = init_models(&p.src_vocab, &p.tgt_vocab, &cfg).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let out = pretrain_supervised(s2t, t2s, &p.train, &cfg, Some(dir.path())).unwrap();
    let text = std::fs::read_to_string(dir.path().join("runlog.jsonl")).unwrap();
    assert_eq!(seminmt::RunLog::from_jsonl(&text, "runlog").unwrap(), out.log);
    for it in [0, 4, 8, 12] {
        assert!(dir.path().join(format!("ckpt_s2t_{it:06}.json")).exists());
        assert!(dir.path().join(format!("ckpt_t2s_{it:06}.json")).exists());
    }
    let ck = Checkpoint::load(&dir.path().join("final_s2t.json")).unwrap();
    assert_eq!(ck.rng_state.iteration, 12);
}
