use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::time::Instant;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, SplitPart};
use crate::error::{Error, Result, WithPath};
use crate::eval::{infer_all, retrieve_topk, MetricsReport, DEFAULT_K_EVAL};
use crate::model::checkpoint::{save_checkpoint, FORMAT_VERSION};
use crate::model::{backward, forward, CheckpointHeader, Mode, ModelParameters};
use crate::rng::{stream, Purpose};
use crate::sampling::{discover_neighbors, NegativeSampler, NodeFlow, TrainingSample};

use super::{AmsGrad, AmsGradConfig};

/// Node flows are built this many batches ahead, in parallel.
const PREFETCH_BATCHES: usize = 8;

pub const CHECKPOINT_FILE: &str = "checkpoint.bin";
pub const CHECKPOINT_META_FILE: &str = "checkpoint.json";
pub const TRAIN_LOG_FILE: &str = "train_log.csv";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub epochs: usize,
    pub patience: usize,
    pub lr: f64,
    /// Feature dropout between consecutive convolutions.
    pub dropout: f64,
    /// Rebalance weight for neighbor discovery.
    pub alpha: f64,
    /// Probability of drawing a negative from the positive's category.
    pub beta: f64,
    /// Weight of the reversed classification loss.
    pub gamma: f64,
    pub negative_rate: usize,
    pub fanout: usize,
    pub depth: usize,
    pub dim: usize,
    pub seed: u64,
    /// Cut-off for the validation recall used by early stopping.
    pub k_eval: usize,
    /// Also reject negatives the user interacted with in training.
    pub exclude_seen_negatives: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 1024,
            epochs: 200,
            patience: 10,
            lr: 1e-3,
            dropout: 0.1,
            alpha: 1.0,
            beta: 0.3,
            gamma: 0.1,
            negative_rate: 4,
            fanout: 10,
            depth: 2,
            dim: 32,
            seed: 0,
            k_eval: DEFAULT_K_EVAL,
            exclude_seen_negatives: false,
        }
    }
}

impl TrainConfig {
    /// Plain GCN: every diversity mechanism switched off.
    pub fn plain(mut self) -> Self {
        self.alpha = 0.0;
        self.beta = 0.0;
        self.gamma = 0.0;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("batch_size", self.batch_size),
            ("epochs", self.epochs),
            ("negative_rate", self.negative_rate),
            ("fanout", self.fanout),
            ("depth", self.depth),
            ("dim", self.dim),
            ("k_eval", self.k_eval),
        ];
        if let Some((name, _)) = positive.iter().find(|(_, v)| *v == 0) {
            return Err(Error::Config(format!("{name} must be positive")));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::Config(format!("lr must be positive, got {}", self.lr)));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config(format!("dropout must lie in [0, 1), got {}", self.dropout)));
        }
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return Err(Error::Config(format!("alpha must be >= 0, got {}", self.alpha)));
        }
        if !(0.0..1.0).contains(&self.beta) {
            return Err(Error::Config(format!("beta must lie in [0, 1), got {}", self.beta)));
        }
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return Err(Error::Config(format!("gamma must be >= 0, got {}", self.gamma)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub loss_r: f64,
    pub loss_c: f64,
    pub val_recall: f64,
    pub val_coverage: f64,
    pub seconds: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Parameters from the epoch with the best validation recall.
    pub params: ModelParameters,
    pub best_epoch: usize,
    pub log: Vec<EpochLog>,
}

fn batch_seeds(batch: &[TrainingSample], num_users: usize) -> Vec<usize> {
    batch.iter().flat_map(|x| [x.user, num_users + x.item]).collect()
}

/// Mean validation recall and coverage at `k_eval`; zeros when there are no validation users.
pub fn validation_metrics(data: &Dataset, params: &ModelParameters, k_eval: usize) -> Result<(f64, f64)> {
    let targets = data.targets(SplitPart::Validation);
    if targets.is_empty() {
        return Ok((0.0, 0.0));
    }
    let (users, items) = infer_all(&data.graph, params)?;
    let recs = retrieve_topk(&users, &items, k_eval, Some(data.graph.user_adjacency()))?;
    let report = MetricsReport::build(&recs, &targets, &data.categories, k_eval)?;
    Ok((report.mean.recall, report.mean.coverage))
}

/// Trains with AMSGrad and early stopping on validation recall.
///
/// Each epoch shuffles the training edges, draws category-boosted negatives,
/// and for every batch builds a rebalanced node flow over the batch's users and
/// items, runs forward and backward, and takes one optimizer step. Training
/// stops once validation recall has not improved for more than `patience`
/// epochs, or after `epochs`.
pub fn fit(data: &Dataset, config: &TrainConfig) -> Result<TrainOutcome> {
    config.validate()?;
    let graph = &data.graph;
    let table = &data.categories;
    let m = graph.num_users();
    let mut params = ModelParameters::init(
        m,
        graph.num_items(),
        table.num_categories(),
        config.dim,
        config.depth,
        &mut stream(config.seed, Purpose::Init, 0, 0),
    )?;
    let mut opt = AmsGrad::new(
        AmsGradConfig {
            lr: config.lr,
            ..Default::default()
        },
        &params,
    );
    let positives: Vec<TrainingSample> = graph
        .edges()
        .map(|(u, i)| TrainingSample::positive(u, i, table))
        .collect::<Result<_>>()?;
    let universe: Vec<usize> = (0..graph.num_items()).collect();
    let mut sampler = NegativeSampler::new(&universe, table, config.negative_rate, config.beta)?;
    if config.exclude_seen_negatives {
        sampler = sampler.excluding_seen(graph);
    }

    let mut log = Vec::new();
    let mut best: Option<(f64, usize, ModelParameters)> = None;
    let mut since_best = 0usize;
    for epoch in 1..=config.epochs {
        let started = Instant::now();
        let e = epoch as u64;
        let mut rng = stream(config.seed, Purpose::Epoch, e, 0);
        let mut pos = positives.clone();
        pos.shuffle(&mut rng);
        let mut samples = sampler.sample(&pos, &mut rng)?;
        samples.shuffle(&mut rng);

        let batches: Vec<&[TrainingSample]> = samples.chunks(config.batch_size).collect();
        let (mut sum_r, mut sum_c) = (0.0, 0.0);
        for (group_idx, group) in batches.chunks(PREFETCH_BATCHES).enumerate() {
            let first = group_idx * PREFETCH_BATCHES;
            let flows: Vec<Result<NodeFlow>> = group
                .par_iter()
                .enumerate()
                .map(|(j, batch)| {
                    let mut r = stream(config.seed, Purpose::NodeFlow, e, (first + j) as u64);
                    discover_neighbors(graph, &batch_seeds(batch, m), config.depth, config.fanout, table, config.alpha, &mut r)
                })
                .collect();
            for (j, (batch, flow)) in group.iter().zip(flows).enumerate() {
                let flow = flow?;
                let mut r = stream(config.seed, Purpose::Dropout, e, (first + j) as u64);
                let trace = forward(&flow, &params, config.dropout, Mode::Train, &mut r)?;
                let (grads, report) = backward(&trace, &flow, batch, &params, config.gamma)?;
                opt.step(&mut params, &grads)?;
                sum_r += report.loss_r * batch.len() as f64;
                sum_c += report.loss_c * batch.len() as f64;
            }
        }
        let (val_recall, val_coverage) = validation_metrics(data, &params, config.k_eval)?;
        log.push(EpochLog {
            epoch,
            loss_r: sum_r / samples.len() as f64,
            loss_c: sum_c / samples.len() as f64,
            val_recall,
            val_coverage,
            seconds: started.elapsed().as_secs_f64(),
        });
        match &best {
            Some((score, _, _)) if val_recall <= *score => since_best += 1,
            _ => {
                best = Some((val_recall, epoch, params.clone()));
                since_best = 0;
            }
        }
        if since_best > config.patience {
            break;
        }
    }
    let (_, best_epoch, params) = best.expect("at least one epoch runs");
    Ok(TrainOutcome {
        params,
        best_epoch,
        log,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub format_version: u32,
    pub num_users: usize,
    pub num_items: usize,
    pub dim: usize,
    pub depth: usize,
    pub num_categories: usize,
    pub best_epoch: usize,
    pub seed: u64,
    pub config: TrainConfig,
}

/// `epoch,loss_r,loss_c,val_recall,val_coverage,seconds`
pub fn write_train_log(path: &Path, log: &[EpochLog]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_path(path)?;
    for row in log {
        w.serialize(row).with_path(path)?;
    }
    w.flush().with_path(path)
}

pub fn read_train_log(path: &Path) -> Result<Vec<EpochLog>> {
    let mut r = csv::Reader::from_path(path).with_path(path)?;
    r.deserialize().collect::<std::result::Result<_, _>>().with_path(path)
}

/// Writes the checkpoint, its JSON sidecar and the training log into `dir`.
pub fn save_run(dir: &Path, outcome: &TrainOutcome, config: &TrainConfig) -> Result<()> {
    std::fs::create_dir_all(dir).with_path(dir)?;
    save_checkpoint(&dir.join(CHECKPOINT_FILE), &outcome.params)?;
    let h = CheckpointHeader::of(&outcome.params);
    let meta = CheckpointMeta {
        format_version: FORMAT_VERSION,
        num_users: h.num_users,
        num_items: h.num_items,
        dim: h.dim,
        depth: h.depth,
        num_categories: h.num_categories,
        best_epoch: outcome.best_epoch,
        seed: config.seed,
        config: config.clone(),
    };
    let path = dir.join(CHECKPOINT_META_FILE);
    let mut f = BufWriter::new(File::create(&path).with_path(&path)?);
    serde_json::to_writer_pretty(&mut f, &meta).with_path(&path)?;
    writeln!(f).with_path(&path)?;
    f.flush().with_path(&path)?;
    write_train_log(&dir.join(TRAIN_LOG_FILE), &outcome.log)
}
