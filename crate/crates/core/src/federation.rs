//! In-process federated training simulator.
//!
//! One run proceeds as follows:
//!
//! 1. The training corpus is partitioned across clients. Each client reduces
//!    its shard to the tokens it actually holds, and the server merges these
//!    local vocabularies (vocabulary consensus) and re-indexes every shard.
//! 2. Each round, every client copies the global parameters and mask, runs
//!    `local_iterations` masked mini-batch steps and uploads its parameters.
//!    While a pruning schedule is active, clients also accumulate squared
//!    gradients, which they upload (and reset) only on pruning rounds.
//! 3. The server averages the uploads (FedAvg). On pruning rounds it also
//!    averages the accumulators, selects a new mask at the scheduled density
//!    and applies it.
//! 4. A simulated clock advances by the linear round-time model
//!    `c + Σ t_j` over the parameters that remain active.
//!
//! Per-client randomness is keyed by `(seed, client, round)` and aggregation
//! always runs in client order, so results do not depend on thread count.

use std::borrow::Borrow;
use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{merge_vocabularies, partition, remap_corpus, Corpus, PartitionMode, PartitionSpec, Vocabulary};
use crate::error::{Error, Result};
use crate::metrics::{self, CooccurrenceStats};
use crate::pruning::{
    aggregate_accumulators, apply_mask, normalized_weights, select_mask, GradientAccumulator, PruneMask, PruneSchedule,
};
use crate::rng;
use crate::topic_model::{ModelConfig, ModelParams, ParamLayout, Trainer};

/// Linear round-time model: `T = overhead + Σ_j t_j` over active parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeModel {
    /// Constant per-round overhead `c`, seconds.
    pub overhead_s: f64,
    /// Seconds per parameter for layers without an override.
    pub per_param_s: f64,
    /// Per-layer overrides keyed by layer name (`encoder.0`, `mu_head`,
    /// `logvar_head`, `beta`, ...).
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub per_layer_s: BTreeMap<String, f64>,
}

impl Default for TimeModel {
    fn default() -> Self {
        Self {
            overhead_s: 0.05,
            per_param_s: 1e-6,
            per_layer_s: BTreeMap::new(),
        }
    }
}

impl TimeModel {
    pub fn uniform(overhead_s: f64, per_param_s: f64) -> Self {
        Self {
            overhead_s,
            per_param_s,
            per_layer_s: BTreeMap::new(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.overhead_s >= 0.0 && self.overhead_s.is_finite()) {
            return Err(Error::invalid("time overhead must be finite and >= 0"));
        }
        let all = std::iter::once(&self.per_param_s).chain(self.per_layer_s.values());
        for &t in all {
            if !(t > 0.0 && t.is_finite()) {
                return Err(Error::invalid("per-parameter times must be finite and > 0"));
            }
        }
        Ok(())
    }

    pub fn per_param_for(&self, layer: &str) -> f64 {
        self.per_layer_s.get(layer).copied().unwrap_or(self.per_param_s)
    }
}

/// Simulated duration of one round for the given mask. Non-prunable
/// parameters always count.
pub fn round_time(time_model: &TimeModel, mask: &PruneMask, layout: &ParamLayout) -> Result<f64> {
    let mut prunable = mask.tensors().iter();
    let mut total = time_model.overhead_s;
    for t in &layout.tensors {
        let active = if t.prunable {
            let m = prunable
                .next()
                .ok_or_else(|| Error::shape("mask has fewer tensors than layout".to_string()))?;
            if (m.rows(), m.cols()) != (t.rows, t.cols) {
                return Err(Error::shape(format!("mask shape differs for {}", t.name)));
            }
            m.active()
        } else {
            t.len()
        };
        total += time_model.per_param_for(t.layer()) * active as f64;
    }
    if prunable.next().is_some() {
        return Err(Error::shape("mask has more tensors than layout".to_string()));
    }
    Ok(total)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Weighting {
    /// Weight clients by local document count.
    #[default]
    DocCount,
    Uniform,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FederationConfig {
    pub num_clients: usize,
    /// Mini-batch steps per client per round.
    pub local_iterations: usize,
    pub rounds: usize,
    pub schedule: Option<PruneSchedule>,
    /// `vocab_size` is overwritten by the consensus vocabulary at run time.
    pub model: ModelConfig,
    pub time_model: TimeModel,
    pub partition: PartitionMode,
    pub weighting: Weighting,
    /// Evaluate every this many rounds and after the last one; 0 disables.
    pub eval_interval: usize,
    pub seed: u64,
    /// Worker threads for client training; `None` uses the global pool.
    pub threads: Option<usize>,
}

impl FederationConfig {
    pub const DEFAULT_CLIENTS: usize = 10;
    pub const DEFAULT_LOCAL_ITERATIONS: usize = 10;

    pub fn new(model: ModelConfig, rounds: usize) -> Self {
        Self {
            num_clients: Self::DEFAULT_CLIENTS,
            local_iterations: Self::DEFAULT_LOCAL_ITERATIONS,
            rounds,
            schedule: None,
            model,
            time_model: TimeModel::default(),
            partition: PartitionMode::Iid,
            weighting: Weighting::DocCount,
            eval_interval: 0,
            seed: 0,
            threads: None,
        }
    }

    /// Roughly twenty pruning events per run.
    pub fn default_prune_interval(rounds: usize) -> usize {
        (rounds / 20).max(1)
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_clients == 0 {
            return Err(Error::invalid("num_clients must be at least 1"));
        }
        if let Some(s) = &self.schedule {
            s.validate()?;
        }
        if self.threads == Some(0) {
            return Err(Error::invalid("threads must be at least 1"));
        }
        self.time_model.validate()
    }
}

/// One simulated client.
#[derive(Debug, Clone)]
pub struct ClientState {
    pub id: usize,
    pub corpus: Corpus,
    pub trainer: Trainer,
    pub accumulator: GradientAccumulator,
}

impl ClientState {
    pub fn new(id: usize, corpus: Corpus, config: &ModelConfig, params: &ModelParams) -> Result<Self> {
        let trainer = Trainer::new(config.clone(), params.clone(), corpus.len())?;
        Ok(Self {
            id,
            accumulator: GradientAccumulator::zeros_for(params),
            corpus,
            trainer,
        })
    }
}

/// Copies `global` into the client and runs `iterations` masked steps.
/// Returns the mean per-document training loss.
pub fn local_train(
    client: &mut ClientState,
    global: &ModelParams,
    mask: &PruneMask,
    iterations: usize,
    record_z: bool,
    seed: u64,
    round: usize,
) -> Result<f64> {
    client.trainer.params.clone_from(global);
    let mut rng = rng::client_round_stream(seed, client.id, round);
    let acc = record_z.then_some(&mut client.accumulator);
    client
        .trainer
        .run(client.corpus.docs(), iterations, &mut rng, mask, acc)
        .map_err(|e| match e {
            Error::NonFinite(what) => Error::Divergence {
                round,
                client: client.id,
                detail: format!("non-finite {what}"),
            },
            other => other,
        })
}

/// Merges client vocabularies and re-indexes every client corpus onto the
/// result.
pub fn vocabulary_consensus(clients: &[Corpus]) -> Result<(Vocabulary, Vec<Corpus>)> {
    let vocabs: Vec<Vocabulary> = clients.iter().map(|c| c.vocab().clone()).collect();
    let global = merge_vocabularies(&vocabs)?;
    let remapped = clients
        .iter()
        .map(|c| remap_corpus(c, &global))
        .collect::<Result<_>>()?;
    Ok((global, remapped))
}

/// Entry-wise weighted mean of every tensor, biases included.
pub fn fedavg<P: Borrow<ModelParams>>(models: &[P], weights: &[f64]) -> Result<ModelParams> {
    let norm = normalized_weights(models.len(), weights)?;
    let first = models[0].borrow();
    let layout = first.layout();
    if models.iter().any(|m| m.borrow().layout() != layout) {
        return Err(Error::shape("client models differ in shape".to_string()));
    }
    let mut out = first.clone();
    out.scale(norm[0]);
    for (m, &w) in models.iter().zip(&norm).skip(1) {
        for (dst, src) in out.tensors_mut().into_iter().zip(m.borrow().tensors()) {
            for (d, &s) in dst.iter_mut().zip(src) {
                *d += w * s;
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ServerState {
    pub params: ModelParams,
    pub mask: PruneMask,
    /// Index of the last completed round.
    pub round: usize,
    pub cum_time_s: f64,
    pub schedule: Option<PruneSchedule>,
    /// Converts accumulated gradients into weight units for mask selection.
    pub learning_rate: f64,
}

/// Server side of a pruning round: FedAvg of parameters and accumulators,
/// then mask selection at the scheduled density for `server.round`.
pub fn prune_round<P, Z>(server: &mut ServerState, client_params: &[P], client_zs: &[Z], weights: &[f64]) -> Result<()>
where
    P: Borrow<ModelParams>,
    Z: Borrow<GradientAccumulator>,
{
    let mut aggregated = fedavg(client_params, weights)?;
    if let Some(schedule) = &server.schedule {
        let density = schedule.target_density(server.round);
        let z = aggregate_accumulators(client_zs, weights)?;
        server.mask = select_mask(&aggregated, &z, density, server.learning_rate)?;
    }
    apply_mask(&mut aggregated, &server.mask)?;
    server.params = aggregated;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalMetrics {
    /// `None` when the training labels hold a single class.
    pub accuracy: Option<f64>,
    pub coherence: f64,
    pub diversity: f64,
}

/// Evaluation inputs fixed for a run. The training corpus doubles as the
/// co-occurrence reference for coherence.
pub struct Evaluator<'a> {
    stats: CooccurrenceStats,
    train: &'a Corpus,
    test: &'a Corpus,
    train_labels: Vec<usize>,
    test_labels: Vec<usize>,
    classify: bool,
}

impl<'a> Evaluator<'a> {
    pub fn new(train: &'a Corpus, test: &'a Corpus) -> Self {
        let train_labels = train.labels();
        let classify = !test.is_empty() && train_labels.iter().any(|&l| l != train_labels[0]);
        Self {
            stats: CooccurrenceStats::from_corpus(train),
            train,
            test,
            test_labels: test.labels(),
            train_labels,
            classify,
        }
    }

    pub fn evaluate(&self, params: &ModelParams) -> Result<EvalMetrics> {
        let n = metrics::DIVERSITY_TOP_N.min(params.vocab_size());
        let topics = metrics::top_words(&params.beta, n)?;
        let coherence = metrics::npmi_coherence(&topics.truncated(metrics::COHERENCE_TOP_N), &self.stats);
        let diversity = metrics::topic_diversity(&topics);
        let accuracy = if self.classify {
            let tr = metrics::corpus_theta(params, self.train)?;
            let te = metrics::corpus_theta(params, self.test)?;
            Some(metrics::classify_accuracy(
                &tr,
                &self.train_labels,
                &te,
                &self.test_labels,
            )?)
        } else {
            None
        };
        Ok(EvalMetrics {
            accuracy,
            coherence,
            diversity,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoundReport {
    pub round: usize,
    pub mean_loss: f64,
    pub density: f64,
    pub active_params: usize,
    pub round_time_s: f64,
    pub cum_time_s: f64,
    pub metrics: Option<EvalMetrics>,
}

#[derive(Debug, Clone)]
pub struct FederationRun {
    pub vocab: Vocabulary,
    pub reports: Vec<RoundReport>,
    pub params: ModelParams,
    pub mask: PruneMask,
}

/// Runs a full federated experiment. See the module docs for the protocol.
pub fn run_federation(config: &FederationConfig, train: &Corpus, test: &Corpus) -> Result<FederationRun> {
    run_federation_with(config, train, test, |_, _| {})
}

/// Like [`run_federation`], calling `observer` after every round.
pub fn run_federation_with<F>(
    config: &FederationConfig,
    train: &Corpus,
    test: &Corpus,
    mut observer: F,
) -> Result<FederationRun>
where
    F: FnMut(&RoundReport, &ServerState),
{
    config.validate()?;
    let shards = partition(
        train,
        &PartitionSpec {
            num_clients: config.num_clients,
            mode: config.partition,
            seed: config.seed,
        },
    )?;
    let local: Vec<Corpus> = shards.iter().map(Corpus::compact).collect();
    let (vocab, client_corpora) = vocabulary_consensus(&local)?;

    let mut model = config.model.clone();
    model.vocab_size = vocab.len();
    let params = ModelParams::init(&model, config.seed)?;

    let (train_eval, _) = train.project_onto(&vocab);
    let (test_eval, _) = test.project_onto(&vocab);
    let eval = (config.eval_interval > 0).then(|| Evaluator::new(&train_eval, &test_eval));

    let weights: Vec<f64> = match config.weighting {
        Weighting::DocCount => client_corpora.iter().map(|c| c.len() as f64).collect(),
        Weighting::Uniform => vec![1.0; client_corpora.len()],
    };
    let mut clients: Vec<ClientState> = client_corpora
        .into_iter()
        .enumerate()
        .map(|(id, c)| ClientState::new(id, c, &model, &params))
        .collect::<Result<_>>()?;

    let mut server = ServerState {
        mask: PruneMask::all_ones(&params),
        params,
        round: 0,
        cum_time_s: 0.0,
        schedule: config.schedule,
        learning_rate: model.learning_rate,
    };
    let layout = server.params.layout();
    let pool = match config.threads {
        Some(n) => Some(
            rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::invalid(format!("thread pool: {e}")))?,
        ),
        None => None,
    };
    let record_z = config.schedule.is_some();

    let mut reports = Vec::with_capacity(config.rounds);
    for round in 1..=config.rounds {
        let global = &server.params;
        let mask = &server.mask;
        let work = |clients: &mut [ClientState]| -> Vec<Result<f64>> {
            clients
                .par_iter_mut()
                .map(|c| local_train(c, global, mask, config.local_iterations, record_z, config.seed, round))
                .collect()
        };
        let losses = match &pool {
            Some(p) => p.install(|| work(&mut clients)),
            None => work(&mut clients),
        }
        .into_iter()
        .collect::<Result<Vec<f64>>>()?;
        let mean_loss = losses.iter().sum::<f64>() / losses.len() as f64;

        server.round = round;
        let uploads: Vec<&ModelParams> = clients.iter().map(|c| &c.trainer.params).collect();
        let pruning = server.schedule.is_some_and(|s| s.is_pruning_round(round));
        if pruning {
            let zs: Vec<&GradientAccumulator> = clients.iter().map(|c| &c.accumulator).collect();
            prune_round(&mut server, &uploads, &zs, &weights)?;
            for c in &mut clients {
                c.accumulator.reset();
            }
        } else {
            let mut aggregated = fedavg(&uploads, &weights)?;
            apply_mask(&mut aggregated, &server.mask)?;
            server.params = aggregated;
        }

        let rt = round_time(&config.time_model, &server.mask, &layout)?;
        server.cum_time_s += rt;
        let size = metrics::model_size(&server.mask, &layout)?;
        let evaluate = eval
            .as_ref()
            .filter(|_| round % config.eval_interval == 0 || round == config.rounds);
        let metrics = evaluate.map(|e| e.evaluate(&server.params)).transpose()?;
        let report = RoundReport {
            round,
            mean_loss,
            density: size.density,
            active_params: size.active_params,
            round_time_s: rt,
            cum_time_s: server.cum_time_s,
            metrics,
        };
        observer(&report, &server);
        reports.push(report);
    }

    Ok(FederationRun {
        vocab,
        reports,
        params: server.params,
        mask: server.mask,
    })
}
