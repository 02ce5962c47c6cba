//! Federated training of a variational-autoencoder topic model (ProdLDA-style
//! AVITM) with progressive, gradient-aware pruning.
//!
//! The crate is organised bottom-up:
//!
//! - [`corpus`]: bag-of-words ingest, vocabulary consensus, splitting and
//!   client partitioning.
//! - [`topic_model`]: the encoder/decoder network, ELBO, hand-written
//!   backpropagation and optimizers.
//! - [`pruning`]: masks, accumulated-gradient statistics, density schedules
//!   and mask selection with recovery.
//! - [`federation`]: the in-process federated simulator, FedAvg and the
//!   linear round-time ledger.
//! - [`metrics`]: topic extraction, NPMI coherence, diversity, downstream
//!   accuracy, perplexity and model-size accounting.
//! - [`checkpoint`]: a diffable text container for parameters and masks.
//! - [`synthetic`]: a planted-topic corpus generator for tests and demos.

pub mod checkpoint;
pub mod corpus;
mod ddouble;
pub mod error;
pub mod federation;
pub mod linalg;
pub mod metrics;
pub mod pruning;
pub mod rng;
pub mod synthetic;
pub mod topic_model;

pub use corpus::{BowDocument, Corpus, PartitionMode, PartitionSpec, Vocabulary};
pub use error::{Error, Result};
pub use federation::{FederationConfig, FederationRun, RoundReport, TimeModel, Weighting};
pub use linalg::Matrix;
pub use pruning::{GradientAccumulator, PruneMask, PruneSchedule, ScheduleKind};
pub use topic_model::{Gradients, ModelConfig, ModelParams, OptimizerKind, ParamLayout};
