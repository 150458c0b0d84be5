//! Semi-supervised training of bidirectional attention-based translation
//! models.
//!
//! A source-to-target model and a target-to-source model are trained jointly
//! on a parallel corpus plus monolingual corpora. Each monolingual sentence is
//! reconstructed through a translation autoencoder: one model translates it
//! into a latent sentence of the other language and the opposite model
//! translates it back. The marginal over latent sentences is approximated by
//! the top-k list returned by beam search.
//!
//! Module map:
//!
//! - [`numerics`]: tensors, a reverse-mode tape, parameter stores, SGD with clipping, checkpoints
//! - [`corpus`]: vocabularies, sentence encoding, OOV ratio and filtering
//! - [`model`]: GRU encoder-decoder with additive attention
//! - [`decoding`]: beam search and greedy translation
//! - [`semisup`]: supervised likelihood, reconstruction marginals and their gradients
//! - [`training`]: supervised pretraining, joint training, back-translation baseline
//! - [`evaluation`]: corpus BLEU and reconstruction reports
//! - [`synthtask`]: synthetic cipher language pairs
//! - [`pipeline`]: run manifests and end-to-end experiment drivers

pub mod corpus;
pub mod decoding;
pub mod error;
pub mod evaluation;
pub mod model;
pub mod numerics;
pub mod pipeline;
pub mod semisup;
pub mod synthtask;
pub mod training;

pub use corpus::{MonolingualCorpus, ParallelCorpus, Sentence, TokenId, Vocabulary};
pub use decoding::{beam_search, greedy_translate, CandidateSet, Hypothesis};
pub use error::{Error, Result};
pub use evaluation::{corpus_bleu, EvalReport};
pub use model::{Direction, ModelConfig, TranslationModel};
pub use numerics::{Graph, NodeId, ParamId, ParameterStore, Tensor};
pub use semisup::ObjectiveWeights;
pub use training::{RunLog, TrainingConfig};
